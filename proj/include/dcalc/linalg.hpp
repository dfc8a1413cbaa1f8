// Exact linear algebra over Q and over the local ring Z_(p): dense rational
// matrices, nullspaces, and full-rank p-adic lattices in Q^n with the
// preimage/sum/intersection operations the integral-model computation needs.
#pragma once

#include "dcalc/arith.hpp"

#include <vector>

namespace dcalc {

class qmatrix {
public:
    qmatrix() : r_(0), c_(0) {}
    qmatrix(std::size_t r, std::size_t c) : r_(r), c_(c), a_(r * c) {}

    static qmatrix identity(std::size_t n)
    {
        qmatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m.at(i, i) = Rat(1);
        return m;
    }

    std::size_t rows() const { return r_; }
    std::size_t cols() const { return c_; }
    Rat& at(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
    const Rat& at(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }

    qmatrix operator*(const qmatrix& o) const
    {
        if (c_ != o.r_)
            throw domain_error("qmatrix: shape mismatch");
        qmatrix out(r_, o.c_);
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t k = 0; k < c_; ++k) {
                if (at(i, k).is_zero())
                    continue;
                for (std::size_t j = 0; j < o.c_; ++j)
                    out.at(i, j) += at(i, k) * o.at(k, j);
            }
        return out;
    }

    std::vector<Rat> apply(const std::vector<Rat>& v) const
    {
        if (v.size() != c_)
            throw domain_error("qmatrix: vector shape mismatch");
        std::vector<Rat> out(r_);
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = 0; j < c_; ++j)
                if (!at(i, j).is_zero())
                    out[i] += at(i, j) * v[j];
        return out;
    }

    bool operator==(const qmatrix& o) const { return r_ == o.r_ && c_ == o.c_ && a_ == o.a_; }

private:
    std::size_t r_, c_;
    std::vector<Rat> a_;
};

/// Solve M x = b exactly; empty result if inconsistent.
inline std::optional<std::vector<Rat>> solve(qmatrix m, std::vector<Rat> b)
{
    std::size_t nr = m.rows(), nc = m.cols();
    std::vector<std::size_t> pivot_col;
    std::size_t row = 0;
    for (std::size_t col = 0; col < nc && row < nr; ++col) {
        std::size_t piv = nr;
        for (std::size_t r = row; r < nr; ++r)
            if (!m.at(r, col).is_zero()) {
                piv = r;
                break;
            }
        if (piv == nr)
            continue;
        for (std::size_t j = 0; j < nc; ++j)
            std::swap(m.at(row, j), m.at(piv, j));
        std::swap(b[row], b[piv]);
        Rat inv = Rat(1) / m.at(row, col);
        for (std::size_t j = 0; j < nc; ++j)
            m.at(row, j) *= inv;
        b[row] *= inv;
        for (std::size_t r = 0; r < nr; ++r) {
            if (r == row || m.at(r, col).is_zero())
                continue;
            Rat f = m.at(r, col);
            for (std::size_t j = 0; j < nc; ++j)
                m.at(r, j) -= f * m.at(row, j);
            b[r] -= f * b[row];
        }
        pivot_col.push_back(col);
        ++row;
    }
    for (std::size_t r = row; r < nr; ++r)
        if (!b[r].is_zero())
            return std::nullopt;
    std::vector<Rat> x(nc);
    for (std::size_t i = 0; i < pivot_col.size(); ++i)
        x[pivot_col[i]] = b[i];
    return x;
}

/// Basis of the right nullspace of M.
inline std::vector<std::vector<Rat>> nullspace(qmatrix m)
{
    std::size_t nr = m.rows(), nc = m.cols();
    std::vector<long long> pivot_of_col(nc, -1);
    std::size_t row = 0;
    for (std::size_t col = 0; col < nc && row < nr; ++col) {
        std::size_t piv = nr;
        for (std::size_t r = row; r < nr; ++r)
            if (!m.at(r, col).is_zero()) {
                piv = r;
                break;
            }
        if (piv == nr)
            continue;
        for (std::size_t j = 0; j < nc; ++j)
            std::swap(m.at(row, j), m.at(piv, j));
        Rat inv = Rat(1) / m.at(row, col);
        for (std::size_t j = 0; j < nc; ++j)
            m.at(row, j) *= inv;
        for (std::size_t r = 0; r < nr; ++r) {
            if (r == row || m.at(r, col).is_zero())
                continue;
            Rat f = m.at(r, col);
            for (std::size_t j = 0; j < nc; ++j)
                m.at(r, j) -= f * m.at(row, j);
        }
        pivot_of_col[col] = static_cast<long long>(row);
        ++row;
    }
    std::vector<std::vector<Rat>> basis;
    for (std::size_t col = 0; col < nc; ++col) {
        if (pivot_of_col[col] >= 0)
            continue;
        std::vector<Rat> v(nc);
        v[col] = Rat(1);
        for (std::size_t c2 = 0; c2 < nc; ++c2)
            if (pivot_of_col[c2] >= 0)
                v[c2] = -m.at(static_cast<std::size_t>(pivot_of_col[c2]), col);
        basis.push_back(std::move(v));
    }
    return basis;
}

// ---------------------------------------------------------------------------
// Full-rank Z_(p)-lattices in Q^n, represented by a basis matrix (columns).
// Every rational with valuation 0 is a unit, so column reduction picks the
// minimum-valuation entry as pivot.

class plattice {
public:
    plattice(qmatrix basis, Int p) : b_(std::move(basis)), p_(std::move(p))
    {
        if (b_.rows() != b_.cols())
            throw domain_error("plattice: basis must be square");
    }

    static plattice standard(std::size_t n, Int p) { return plattice(qmatrix::identity(n), p); }

    std::size_t dim() const { return b_.rows(); }
    const qmatrix& basis() const { return b_; }
    const Int& p() const { return p_; }

    plattice scaled(const Rat& c) const
    {
        qmatrix m = b_;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j)
                m.at(i, j) *= c;
        return plattice(m, p_);
    }

    bool contains(const std::vector<Rat>& v) const
    {
        auto x = solve(b_, v);
        if (!x)
            return false;
        for (auto& c : *x)
            if (!c.is_p_integral(p_))
                return false;
        return true;
    }

    bool contains(const plattice& other) const
    {
        for (std::size_t j = 0; j < other.dim(); ++j) {
            std::vector<Rat> col(other.dim());
            for (std::size_t i = 0; i < other.dim(); ++i)
                col[i] = other.b_.at(i, j);
            if (!contains(col))
                return false;
        }
        return true;
    }

    bool operator==(const plattice& o) const { return contains(o) && o.contains(*this); }
    bool operator!=(const plattice& o) const { return !(*this == o); }

    /// Lattice generated by the columns of `gens` (must span Q^n).
    static plattice from_generators(std::size_t n, const Int& p, std::vector<std::vector<Rat>> gens)
    {
        // p-adic column echelon: pick the minimum-valuation entry in each row
        // as pivot, clear the row in every other column
        prime_ctx pc{p};
        std::size_t done = 0;
        for (std::size_t row = 0; row < n; ++row) {
            std::size_t best = gens.size();
            padic_val bestv = padic_val::infinity();
            for (std::size_t j = done; j < gens.size(); ++j) {
                padic_val v = valuation(gens[j][row], pc);
                if (v < bestv) {
                    bestv = v;
                    best = j;
                }
            }
            if (best == gens.size() || bestv.infinite)
                throw domain_error("plattice: generators do not span");
            std::swap(gens[done], gens[best]);
            // forward elimination only: the pivot has minimal valuation
            // among the remaining columns, so the factors are p-integral
            // and the column operations are unimodular over Z_(p)
            for (std::size_t j = done + 1; j < gens.size(); ++j) {
                if (gens[j][row].is_zero())
                    continue;
                Rat f = gens[j][row] / gens[done][row];
                for (std::size_t i = 0; i < n; ++i)
                    gens[j][i] -= f * gens[done][i];
            }
            ++done;
        }
        qmatrix b(n, n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i)
                b.at(i, j) = gens[j][i];
        return plattice(b, p);
    }

    plattice sum(const plattice& o) const
    {
        std::vector<std::vector<Rat>> gens;
        for (std::size_t j = 0; j < dim(); ++j) {
            std::vector<Rat> a(dim()), b(dim());
            for (std::size_t i = 0; i < dim(); ++i) {
                a[i] = b_.at(i, j);
                b[i] = o.b_.at(i, j);
            }
            gens.push_back(std::move(a));
            gens.push_back(std::move(b));
        }
        return from_generators(dim(), p_, std::move(gens));
    }

    /// {x in this : T x in target}, T mapping Q^n -> Q^k.
    plattice preimage_restrict(const qmatrix& T, const plattice& target) const
    {
        std::size_t n = dim(), k = target.dim();
        if (T.rows() != k || T.cols() != n)
            throw domain_error("plattice: operator shape mismatch");
        // S = target_basis^{-1} T basis; condition: S y p-integral for the
        // coordinate vector y
        qmatrix S(k, n);
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<Rat> col(n);
            for (std::size_t i = 0; i < n; ++i)
                col[i] = b_.at(i, j);
            std::vector<Rat> tv = T.apply(col);
            auto y = solve(target.b_, tv);
            if (!y)
                throw internal_error("plattice: target basis is singular");
            for (std::size_t i = 0; i < k; ++i)
                S.at(i, j) = (*y)[i];
        }
        // clear the p-denominator: S = S0 / p^e with S0 p-integral
        long long e = 0;
        prime_ctx pc{p_};
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                padic_val v = valuation(S.at(i, j), pc);
                if (!v.infinite && v.v < -e)
                    e = -v.v;
            }
        if (e == 0)
            return *this;  // already mapped into the target
        // iteratively refine U with columns spanning {y : S0 y = 0 mod p^e}
        qmatrix U = qmatrix::identity(n);
        qmatrix S0 = S;
        Rat pe(pow_int(p_, static_cast<unsigned>(e)));
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < n; ++j)
                S0.at(i, j) *= pe;
        for (long long step = 0; step < e; ++step) {
            // kernel of S0 mod p over F_p
            qmatrix M = S0;
            std::vector<long long> pivot_of_col(n, -1);
            std::size_t row = 0;
            for (std::size_t col = 0; col < n && row < k; ++col) {
                std::size_t piv = k;
                for (std::size_t r = row; r < k; ++r)
                    if (!valuation(M.at(r, col), pc).at_least(1)) {
                        piv = r;
                        break;
                    }
                if (piv == k)
                    continue;
                for (std::size_t j = 0; j < n; ++j)
                    std::swap(M.at(row, j), M.at(piv, j));
                Rat inv = Rat(1) / M.at(row, col);
                for (std::size_t j = 0; j < n; ++j)
                    M.at(row, j) *= inv;
                for (std::size_t r = 0; r < k; ++r) {
                    if (r == row || M.at(r, col).is_zero())
                        continue;
                    Rat f = M.at(r, col);
                    for (std::size_t j = 0; j < n; ++j)
                        M.at(r, j) -= f * M.at(row, j);
                }
                pivot_of_col[col] = static_cast<long long>(row);
                ++row;
            }
            // mod-p reduction of the eliminated matrix: entries of M with
            // positive valuation vanish; kernel = free columns, with pivot
            // coordinates filled from M (p-integral by pivot choice)
            std::vector<std::vector<Rat>> cols;
            for (std::size_t col = 0; col < n; ++col) {
                if (pivot_of_col[col] >= 0)
                    continue;
                std::vector<Rat> v(n);
                v[col] = Rat(1);
                for (std::size_t c2 = 0; c2 < n; ++c2)
                    if (pivot_of_col[c2] >= 0)
                        v[c2] = -M.at(static_cast<std::size_t>(pivot_of_col[c2]), col);
                cols.push_back(std::move(v));
            }
            for (std::size_t j = 0; j < n; ++j) {
                std::vector<Rat> v(n);
                v[j] = Rat(p_);
                cols.push_back(std::move(v));
            }
            plattice step_lat = from_generators(n, p_, std::move(cols));
            U = U * step_lat.basis();
            // S0 <- S0 * V / p
            S0 = S0 * step_lat.basis();
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    S0.at(i, j) = S0.at(i, j) / Rat(p_);
        }
        return plattice(b_ * U, p_);
    }

private:
    qmatrix b_;
    Int p_;
};

}  // namespace dcalc
