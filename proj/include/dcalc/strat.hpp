// Level-m stratified modules presented by their action matrices: a finite
// free module together with the matrices Theta_K of the basis operators
// del^{K} up to an order bound.  Houses the cocycle check (equivalent to
// being an honest module), quasi-nilpotence, integral models, Frobenius
// pullback (level raising), lift-independence comparisons, horizontal homs,
// and compatibility checks for towers of modules over shrinking tubes.
#pragma once

#include "dcalc/dop.hpp"
#include "dcalc/linalg.hpp"
#include "dcalc/mpd.hpp"
#include "dcalc/tube.hpp"

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace dcalc {

// ---------------------------------------------------------------------------

/// Dense matrix with polynomial entries.
class pmatrix {
public:
    pmatrix() : r_(0), c_(0), d_(0) {}
    pmatrix(std::size_t r, std::size_t c, std::size_t nvars)
        : r_(r), c_(c), d_(nvars), a_(r * c, poly_q(nvars))
    {
    }

    static pmatrix identity(std::size_t n, std::size_t nvars)
    {
        pmatrix m(n, n, nvars);
        for (std::size_t i = 0; i < n; ++i)
            m.at(i, i) = poly_q::constant(nvars, Rat(1));
        return m;
    }

    std::size_t rows() const { return r_; }
    std::size_t cols() const { return c_; }
    std::size_t nvars() const { return d_; }
    poly_q& at(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
    const poly_q& at(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }

    bool is_zero() const
    {
        for (auto& e : a_)
            if (!e.is_zero())
                return false;
        return true;
    }

    pmatrix operator+(const pmatrix& o) const
    {
        check(o);
        pmatrix out(*this);
        for (std::size_t i = 0; i < a_.size(); ++i)
            out.a_[i] += o.a_[i];
        return out;
    }
    pmatrix operator-(const pmatrix& o) const
    {
        check(o);
        pmatrix out(*this);
        for (std::size_t i = 0; i < a_.size(); ++i)
            out.a_[i] -= o.a_[i];
        return out;
    }
    pmatrix operator*(const pmatrix& o) const
    {
        if (c_ != o.r_ || d_ != o.d_)
            throw domain_error("pmatrix: shape mismatch");
        pmatrix out(r_, o.c_, d_);
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t k = 0; k < c_; ++k) {
                if (at(i, k).is_zero())
                    continue;
                for (std::size_t j = 0; j < o.c_; ++j)
                    out.at(i, j) += at(i, k) * o.at(k, j);
            }
        return out;
    }
    pmatrix scale(const Rat& c) const
    {
        pmatrix out(*this);
        for (auto& e : out.a_)
            e = e * c;
        return out;
    }
    pmatrix scale_poly(const poly_q& g) const
    {
        pmatrix out(*this);
        for (auto& e : out.a_)
            e = e * g;
        return out;
    }
    pmatrix map_entries(const std::function<poly_q(const poly_q&)>& fn) const
    {
        pmatrix out(*this);
        for (auto& e : out.a_)
            e = fn(e);
        return out;
    }

    bool operator==(const pmatrix& o) const
    {
        return r_ == o.r_ && c_ == o.c_ && d_ == o.d_ && a_ == o.a_;
    }
    bool operator!=(const pmatrix& o) const { return !(*this == o); }

private:
    std::size_t r_, c_, d_;
    std::vector<poly_q> a_;

    void check(const pmatrix& o) const
    {
        if (r_ != o.r_ || c_ != o.c_ || d_ != o.d_)
            throw domain_error("pmatrix: shape mismatch");
    }
};

// ---------------------------------------------------------------------------

/// A lift of the q = p^s power Frobenius: F(x_j) = x_j^q (mod p).
struct frob_lift {
    unsigned s;
    ring_map<Rat> images;

    frob_lift(const prime_ctx& pc, unsigned s_, ring_map<Rat> im) : s(s_), images(std::move(im))
    {
        unsigned q = pow_int(pc.p, s).convert_to<unsigned>();
        for (std::size_t j = 0; j < images.images.size(); ++j) {
            const poly_q& Fj = images.images[j];
            if (!is_p_integral(Fj, pc))
                throw non_integral_coefficient("frob_lift: images must lie in A");
            poly_q diff = Fj - poly_q::variable(Fj.nvars(), j, Rat(1)).pow(q);
            if (!diff.is_zero() && !min_valuation(diff, pc).at_least(1))
                throw domain_error("frob_lift: image " + std::to_string(j + 1) +
                                   " does not reduce to the q-power Frobenius");
        }
    }

    std::size_t nvars() const { return images.images.size(); }
};

// ---------------------------------------------------------------------------

/// Finite free module with level-m action data Theta_K for |K| <= n_max.
/// Theta_0 is the identity; the cocycle check certifies that the data is an
/// honest module structure.  When an ambient tube is attached, entries are
/// verified against tube membership (decidable shapes).
class strat_module {
public:
    using theta_map = std::map<multi_index, pmatrix, grevlex_greater_t>;

    strat_module(prime_ctx pc, unsigned m, std::size_t d, std::size_t rank, std::uint64_t n_max,
                 std::optional<tube_ctx> ambient = std::nullopt)
        : pc_(std::move(pc)), m_(m), d_(d), rank_(rank), n_max_(n_max), ambient_(std::move(ambient))
    {
        if (ambient_ && ambient_->d != d_)
            throw domain_error("strat_module: ambient arity mismatch");
    }

    const prime_ctx& ctx() const { return pc_; }
    unsigned level() const { return m_; }
    std::size_t nvars() const { return d_; }
    std::size_t rank() const { return rank_; }
    std::uint64_t order_bound() const { return n_max_; }
    const std::optional<tube_ctx>& ambient() const { return ambient_; }
    const theta_map& thetas() const { return theta_; }

    void set_theta(const multi_index& K, pmatrix t)
    {
        if (K.size() != d_)
            throw domain_error("strat_module: index arity mismatch");
        if (K.total() > n_max_)
            throw domain_error("strat_module: index beyond the order bound");
        if (t.rows() != rank_ || t.cols() != rank_ || t.nvars() != d_)
            throw domain_error("strat_module: matrix shape mismatch");
        if (K.is_zero() && t != pmatrix::identity(rank_, d_))
            throw domain_error("strat_module: Theta_0 must be the identity");
        if (ambient_ && ambient_->shape != tube_shape::general)
            for (std::size_t i = 0; i < rank_; ++i)
                for (std::size_t j = 0; j < rank_; ++j)
                    if (!membership(t.at(i, j), *ambient_))
                        throw domain_error("strat_module: entry outside the ambient tube");
        theta_[K] = std::move(t);
    }

    pmatrix theta(const multi_index& K) const
    {
        auto it = theta_.find(K);
        if (it != theta_.end())
            return it->second;
        if (K.is_zero())
            return pmatrix::identity(rank_, d_);
        return pmatrix(rank_, rank_, d_);
    }

    bool is_trivial() const
    {
        for (auto& [K, t] : theta_)
            if (!K.is_zero() && !t.is_zero())
                return false;
        return true;
    }

private:
    prime_ctx pc_;
    unsigned m_;
    std::size_t d_, rank_;
    std::uint64_t n_max_;
    std::optional<tube_ctx> ambient_;
    theta_map theta_;
};

// ---------------------------------------------------------------------------

/// Action of a basis operator del^{K} on a section vector (components are
/// coefficients in the ambient ring), by the module Leibniz rule:
///   del^{K}(a e) = sum_{I+J=K} qfac(K,I) Theta_J del^{I}(a) e.
inline std::vector<poly_q> act_basis(const strat_module& M, const multi_index& K,
                                     const std::vector<poly_q>& v)
{
    if (K.total() > M.order_bound())
        throw domain_error("act: operator order exceeds the module bound");
    if (v.size() != M.rank())
        throw domain_error("act: section shape mismatch");
    std::vector<poly_q> out(M.rank(), poly_q(M.nvars()));
    for_each_below(K, [&](const multi_index& I) {
        multi_index J = K - I;
        Rat w(qfac_ratio(K, I, M.level(), M.ctx()));
        Int qi = q_factorial(I, M.level(), M.ctx());
        pmatrix TJ = M.theta(J);
        if (TJ.is_zero())
            return;
        for (std::size_t t = 0; t < M.rank(); ++t)
            for (std::size_t l = 0; l < M.rank(); ++l) {
                if (TJ.at(t, l).is_zero())
                    continue;
                poly_q der = divided_derivative(v[l], I) * Rat(qi) * w;
                out[t] += TJ.at(t, l) * der;
            }
    });
    return out;
}

/// Action of a general operator, A-linearly in its coefficients.
inline std::vector<poly_q> act(const strat_module& M, const diff_op& op,
                               const std::vector<poly_q>& v)
{
    if (op.level() != M.level())
        throw level_error("act: operator level mismatch");
    if (op.nvars() != M.nvars())
        throw domain_error("act: arity mismatch");
    std::vector<poly_q> out(M.rank(), poly_q(M.nvars()));
    for (auto& [K, a] : op.terms()) {
        auto part = act_basis(M, K, v);
        for (std::size_t t = 0; t < M.rank(); ++t)
            out[t] += a * part[t];
    }
    return out;
}

/// The composition relations: for all I, J with |I| + |J| <= n_max,
///   sum_{I1+I2=I} qfac(I,I1) Theta_{I2} del^{I1}(Theta_J)
///     = padic_binom(I+J, I) Theta_{I+J}.
/// Holding identically is equivalent to act being a representation.
inline bool cocycle_check(const strat_module& M)
{
    bool ok = true;
    std::size_t d = M.nvars();
    for_each_multi_index(d, M.order_bound(), [&](const multi_index& I) {
        if (!ok || I.is_zero())
            return;
        for_each_multi_index(d, M.order_bound() - I.total(), [&](const multi_index& J) {
            if (!ok)
                return;
            pmatrix lhs(M.rank(), M.rank(), d);
            for_each_below(I, [&](const multi_index& I1) {
                multi_index I2 = I - I1;
                Rat w(qfac_ratio(I, I1, M.level(), M.ctx()));
                Int qi = q_factorial(I1, M.level(), M.ctx());
                pmatrix derTJ = M.theta(J).map_entries([&](const poly_q& e) {
                    return divided_derivative(e, I1) * Rat(qi);
                });
                lhs = lhs + (M.theta(I2) * derTJ).scale(w);
            });
            pmatrix rhs = M.theta(I + J).scale(padic_binom(I + J, I, M.level(), M.ctx()));
            if (lhs != rhs)
                ok = false;
        });
    });
    return ok;
}

/// Bounded quasi-nilpotence: Theta_K = 0 mod (p, J) for p^m <= |K| <= bound.
inline bool quasi_nilpotent_check(const strat_module& M, const ideal_spec& J,
                                  std::uint64_t bound)
{
    std::vector<poly_m> red;
    for (auto& g : J.gens) {
        poly_m gm = reduce_mod_p(g, M.ctx());
        if (!gm.is_zero())
            red.push_back(gm);
    }
    auto gb = buchberger(red);

    std::uint64_t lo = pow_int(M.ctx().p, M.level()).convert_to<std::uint64_t>();
    bool ok = true;
    for_each_multi_index(M.nvars(), std::min(bound, M.order_bound()), [&](const multi_index& K) {
        if (!ok || K.total() < lo)
            return;
        pmatrix t = M.theta(K);
        for (std::size_t i = 0; i < M.rank() && ok; ++i)
            for (std::size_t j = 0; j < M.rank() && ok; ++j) {
                if (!is_p_integral(t.at(i, j), M.ctx()))
                    throw domain_error("quasi_nilpotent_check: entry not reducible mod p");
                if (!ideal_member(reduce_mod_p(t.at(i, j), M.ctx()), gb))
                    ok = false;
            }
    });
    return ok;
}

// ---------------------------------------------------------------------------
// Integral models.  Sections of degree <= D form a finite coordinate space;
// the model is the sublattice of L0 whose sections keep all derivatives of
// order <= bound inside the A-span of L0.

namespace detail {

inline std::size_t mono_count(std::size_t d, std::uint64_t D)
{
    std::size_t n = 0;
    for_each_multi_index(d, D, [&](const multi_index&) { ++n; });
    return n;
}

struct section_space {
    std::size_t d, rank;
    std::uint64_t D;
    std::vector<multi_index> monos;  // grevlex order

    section_space(std::size_t d_, std::size_t rank_, std::uint64_t D_) : d(d_), rank(rank_), D(D_)
    {
        for_each_multi_index(d, D, [&](const multi_index& k) { monos.push_back(k); });
    }

    std::size_t dim() const { return rank * monos.size(); }

    std::vector<poly_q> to_sections(const std::vector<Rat>& v) const
    {
        std::vector<poly_q> out(rank, poly_q(d));
        for (std::size_t r = 0; r < rank; ++r)
            for (std::size_t m = 0; m < monos.size(); ++m)
                out[r].add_term(monos[m], v[r * monos.size() + m]);
        return out;
    }

    std::vector<Rat> to_coords(const std::vector<poly_q>& s) const
    {
        std::vector<Rat> v(dim());
        for (std::size_t r = 0; r < rank; ++r)
            for (auto& [k, c] : s[r].terms()) {
                if (k.total() > D)
                    throw domain_error("section_space: degree overflow");
                std::size_t idx = 0;
                while (idx < monos.size() && monos[idx] != k)
                    ++idx;
                v[r * monos.size() + idx] = c;
            }
        return v;
    }
};

}  // namespace detail

struct integral_model_result {
    plattice lattice;
    bool stabilized;  // the last operator order changed nothing
};

/// Largest sublattice of L0 (coordinates: rank x monomials of degree <= D)
/// with del^{K}(x) in the A-span of L0 for all 0 < |K| <= bound.
inline integral_model_result integral_model(const strat_module& M, const plattice& L0,
                                            std::uint64_t D, std::uint64_t bound)
{
    std::size_t d = M.nvars();
    detail::section_space V(d, M.rank(), D);
    if (L0.dim() != V.dim())
        throw domain_error("integral_model: lattice dimension mismatch");

    // derivatives can raise the coefficient degree by the largest Theta entry
    std::uint64_t g = 0;
    for (auto& [K, t] : M.thetas())
        for (std::size_t i = 0; i < M.rank(); ++i)
            for (std::size_t j = 0; j < M.rank(); ++j)
                g = std::max(g, t.at(i, j).degree());
    detail::section_space W(d, M.rank(), D + g);

    // target: the A-span of L0 inside W, generated by monomial shifts
    std::vector<std::vector<Rat>> target_gens;
    for (std::size_t col = 0; col < V.dim(); ++col) {
        std::vector<Rat> basis_col(V.dim());
        for (std::size_t i = 0; i < V.dim(); ++i)
            basis_col[i] = L0.basis().at(i, col);
        std::vector<poly_q> sec = V.to_sections(basis_col);
        for_each_multi_index(d, D + g, [&](const multi_index& delta) {
            std::vector<poly_q> shifted(M.rank(), poly_q(d));
            bool fits = true;
            for (std::size_t r = 0; r < M.rank(); ++r) {
                shifted[r] = sec[r] * poly_q::monomial(delta, Rat(1));
                if (shifted[r].degree() > D + g)
                    fits = false;
            }
            if (fits)
                target_gens.push_back(W.to_coords(shifted));
        });
    }
    plattice target = plattice::from_generators(W.dim(), M.ctx().p, std::move(target_gens));

    plattice L = L0;
    bool stabilized = false;
    for (std::uint64_t order = 1; order <= bound; ++order) {
        plattice before = L;
        for_each_multi_index(d, order, [&](const multi_index& K) {
            if (K.total() != order)
                return;
            // matrix of del^{K} from V to W
            qmatrix T(W.dim(), V.dim());
            for (std::size_t col = 0; col < V.dim(); ++col) {
                std::vector<Rat> unit(V.dim());
                unit[col] = Rat(1);
                auto img = act_basis(M, K, V.to_sections(unit));
                auto coords = W.to_coords(img);
                for (std::size_t i = 0; i < W.dim(); ++i)
                    T.at(i, col) = coords[i];
            }
            L = L.preimage_restrict(T, target);
        });
        stabilized = (L == before);
    }
    return {L, stabilized};
}

// ---------------------------------------------------------------------------
// Frobenius pullback: raising the level from m to m + s.

namespace detail {

/// Coefficients of the pullback of the divided monomials: for each K' up to
/// n_max, the expansion of  prod_j (F_j(x+xi) - F_j(x))^{k'_j} / Q^(src)_K'!
/// in the level-dst basis: sum_L c_{K',L}(x) xi^{L}_(dst).
inline std::map<multi_index, std::map<multi_index, poly_q, grevlex_greater_t>, grevlex_greater_t>
xi_pullback_coefficients(const frob_lift& F, unsigned m_src, unsigned m_dst,
                         std::uint64_t n_max, const prime_ctx& pc)
{
    std::size_t d = F.nvars();
    // eta_j in Q[x, xi]
    std::vector<poly_q> eta;
    ring_map<Rat> shift;  // x_i -> x_i + xi_i, xi_i -> xi_i
    for (std::size_t i = 0; i < d; ++i) {
        poly_q im(2 * d);
        multi_index a(2 * d), b(2 * d);
        a[i] = 1;
        b[d + i] = 1;
        im.add_term(a, Rat(1));
        im.add_term(b, Rat(1));
        shift.images.push_back(im);
    }
    for (std::size_t i = 0; i < d; ++i)
        shift.images.push_back(poly_q::variable(2 * d, d + i, Rat(1)));
    for (std::size_t j = 0; j < d; ++j)
        eta.push_back(substitute(F.images.images[j].widen(2 * d), shift) -
                      F.images.images[j].widen(2 * d));

    // powers of eta_j up to n_max
    std::vector<std::vector<poly_q>> pow(d);
    for (std::size_t j = 0; j < d; ++j) {
        pow[j].push_back(poly_q::constant(2 * d, Rat(1)));
        for (std::uint64_t e = 1; e <= n_max; ++e)
            pow[j].push_back(pow[j].back() * eta[j]);
    }

    std::map<multi_index, std::map<multi_index, poly_q, grevlex_greater_t>, grevlex_greater_t> out;
    for_each_multi_index(d, n_max, [&](const multi_index& Kp) {
        poly_q prod = poly_q::constant(2 * d, Rat(1));
        for (std::size_t j = 0; j < d; ++j)
            prod *= pow[j][Kp[j]];
        Rat inv_q = Rat(1) / Rat(q_factorial(Kp, m_src, pc));

        std::map<multi_index, poly_q, grevlex_greater_t> per_L;
        for (auto& [full, c] : prod.terms()) {
            multi_index xpart(d), L(d);
            for (std::size_t i = 0; i < d; ++i) {
                xpart[i] = full[i];
                L[i] = full[d + i];
            }
            if (L.total() > n_max)
                continue;  // beyond the retained order
            auto it = per_L.find(L);
            if (it == per_L.end())
                it = per_L.emplace(L, poly_q(d)).first;
            it->second.add_term(xpart, c * inv_q * Rat(q_factorial(L, m_dst, pc)));
        }
        out.emplace(Kp, std::move(per_L));
    });
    return out;
}

}  // namespace detail

/// Pullback along a Frobenius lift: a level-(m+s) module on the same rank,
///   Theta'_L = sum_{K'} c_{K',L} F*(Theta_{K'}).
/// The output passes the level-(m+s) cocycle check, and its restriction to
/// level m is the base-change structure.
inline strat_module frobenius_pullback(const strat_module& M, const frob_lift& F)
{
    if (F.nvars() != M.nvars())
        throw domain_error("frobenius_pullback: arity mismatch");
    for (auto& [K, t] : M.thetas())
        for (std::size_t i = 0; i < M.rank(); ++i)
            for (std::size_t j = 0; j < M.rank(); ++j)
                if (!is_p_integral(t.at(i, j), M.ctx()))
                    throw non_integral_coefficient("frobenius_pullback: Theta not integral");

    unsigned m_new = M.level() + F.s;
    auto coeffs = detail::xi_pullback_coefficients(F, M.level(), m_new, M.order_bound(), M.ctx());

    strat_module out(M.ctx(), m_new, M.nvars(), M.rank(), M.order_bound(), M.ambient());
    std::map<multi_index, pmatrix, grevlex_greater_t> acc;
    for (auto& [Kp, per_L] : coeffs) {
        pmatrix pulled = M.theta(Kp).map_entries(
            [&](const poly_q& e) { return substitute(e, F.images); });
        if (pulled.is_zero())
            continue;
        for (auto& [L, c] : per_L) {
            if (c.is_zero())
                continue;
            auto it = acc.find(L);
            if (it == acc.end())
                it = acc.emplace(L, pmatrix(M.rank(), M.rank(), M.nvars())).first;
            it->second = it->second + pulled.scale_poly(c);
        }
    }
    for (auto& [L, t] : acc) {
        if (t.is_zero())
            continue;
        for (std::size_t i = 0; i < M.rank(); ++i)
            for (std::size_t j = 0; j < M.rank(); ++j)
                if (!is_p_integral(t.at(i, j), M.ctx()))
                    throw internal_error("frobenius_pullback: non-integral output at " +
                                         L.to_string());
        out.set_theta(L, t);
    }
    return out;
}

/// Restriction of a level-m module to a lower level:
///   Theta^(low)_K = (Q^(low)_K!/Q^(m)_K!) Theta_K.
inline strat_module restrict_level(const strat_module& M, unsigned m_low)
{
    if (m_low > M.level())
        throw level_error("restrict_level: target must be <= the module level");
    strat_module out(M.ctx(), m_low, M.nvars(), M.rank(), M.order_bound(), M.ambient());
    for (auto& [K, t] : M.thetas()) {
        Int num = q_factorial(K, m_low, M.ctx());
        Int den = q_factorial(K, M.level(), M.ctx());
        if (num % den != 0)
            throw internal_error("restrict_level: non-integral factor");
        pmatrix scaled = t.scale(Rat(num / den));
        if (!scaled.is_zero() || K.is_zero())
            out.set_theta(K, scaled);
    }
    return out;
}

/// The level-m base-change structure on the pullback (no level raising):
/// same expansion as frobenius_pullback but read in the level-m basis.
inline strat_module frobenius_base_change(const strat_module& M, const frob_lift& F)
{
    auto coeffs =
        detail::xi_pullback_coefficients(F, M.level(), M.level(), M.order_bound(), M.ctx());
    strat_module out(M.ctx(), M.level(), M.nvars(), M.rank(), M.order_bound(), M.ambient());
    std::map<multi_index, pmatrix, grevlex_greater_t> acc;
    for (auto& [Kp, per_L] : coeffs) {
        pmatrix pulled = M.theta(Kp).map_entries(
            [&](const poly_q& e) { return substitute(e, F.images); });
        if (pulled.is_zero())
            continue;
        for (auto& [L, c] : per_L) {
            if (c.is_zero())
                continue;
            auto it = acc.find(L);
            if (it == acc.end())
                it = acc.emplace(L, pmatrix(M.rank(), M.rank(), M.nvars())).first;
            it->second = it->second + pulled.scale_poly(c);
        }
    }
    for (auto& [L, t] : acc)
        if (!t.is_zero() || L.is_zero())
            out.set_theta(L, t);
    return out;
}

// ---------------------------------------------------------------------------

/// Comparison of two Frobenius lifts agreeing mod p: the matrix
///   tau = sum_K F*(Theta_K) eta^{K}_(m),   eta_j = F'(x_j) - F(x_j),
/// computed mod p^N.  The sum is certified finite mod p^N through the
/// valuation growth v(eta^{K}_(m)) >= |K| (h + c - 1/(p^m (p-1))) with
/// h = min v(eta), c = the observed valuation slope of Theta; when that
/// slope is not positive the series genuinely fails to converge.
inline pmatrix frobenius_comparison(const strat_module& M, const frob_lift& F,
                                    const frob_lift& F2, unsigned N)
{
    if (F.nvars() != M.nvars() || F2.nvars() != M.nvars())
        throw domain_error("frobenius_comparison: arity mismatch");
    if (F.s != F2.s)
        throw domain_error("frobenius_comparison: lifts of different Frobenius powers");
    const prime_ctx& pc = M.ctx();
    std::size_t d = M.nvars();

    std::vector<poly_q> eta;
    long long h = -1;  // min valuation over nonzero eta_j
    for (std::size_t j = 0; j < d; ++j) {
        poly_q e = F2.images.images[j] - F.images.images[j];
        if (!e.is_zero()) {
            padic_val v = min_valuation(e, pc);
            if (!v.at_least(1))
                throw congruence_failure("frobenius_comparison: lifts disagree mod p");
            if (h < 0 || v.v < h)
                h = v.v;
        }
        eta.push_back(std::move(e));
    }
    Int modulus = pow_int(pc.p, N);

    if (h < 0) {
        // identical lifts: tau is the identity
        return pmatrix::identity(M.rank(), d);
    }

    // observed Theta slope: c = min over K != 0 of v(Theta_K)/|K| (>= 0 for
    // integral data; infinite when all higher Theta vanish)
    Rat c_slope;
    bool c_finite = false;
    for (auto& [K, t] : M.thetas()) {
        if (K.is_zero() || t.is_zero())
            continue;
        padic_val v = padic_val::infinity();
        for (std::size_t i = 0; i < M.rank(); ++i)
            for (std::size_t j = 0; j < M.rank(); ++j) {
                padic_val w = min_valuation(t.at(i, j), pc);
                if (w < v)
                    v = w;
            }
        if (v.infinite)
            continue;
        if (!v.at_least(0))
            throw non_integral_coefficient("frobenius_comparison: Theta not integral");
        Rat slope = Rat(v.v) / Rat(Int(K.total()));
        if (!c_finite || slope < c_slope) {
            c_slope = slope;
            c_finite = true;
        }
    }
    if (!c_finite)
        c_slope = Rat(0);  // only Theta_0 present: finite sum either way

    // per-order valuation bound: |K| (h + c) - v_p(Q_K!) >= |K| sigma with
    // sigma = h + c - 1/(p^m (p-1))
    Rat sigma = Rat(h) + c_slope -
                Rat(1) / (Rat(pow_int(pc.p, M.level())) * Rat(pc.p - 1));
    if (!(Rat(0) < sigma))
        throw non_convergence(
            "frobenius_comparison: valuations do not grow (p = " + pc.p.str() +
            ", m = " + std::to_string(M.level()) + "); quasi-nilpotent data required");
    // smallest order n0 with n0 * sigma >= N
    std::uint64_t n0 = 0;
    {
        Rat bound = Rat(static_cast<long long>(N)) / sigma;
        Int fl = bound.num() / bound.den();
        n0 = fl.convert_to<std::uint64_t>();
        if (Rat(Int(n0)) < bound)
            ++n0;
    }
    if (n0 > M.order_bound() + 1)
        throw non_convergence("frobenius_comparison: order bound " +
                              std::to_string(M.order_bound()) +
                              " too small to certify precision p^" + std::to_string(N));

    pmatrix tau(M.rank(), M.rank(), d);
    for_each_multi_index(d, n0 > 0 ? n0 - 1 : 0, [&](const multi_index& K) {
        pmatrix t = M.theta(K);
        if (t.is_zero())
            return;
        poly_q scalar = poly_q::constant(d, Rat(1) / Rat(q_factorial(K, M.level(), pc)));
        for (std::size_t j = 0; j < d; ++j)
            scalar *= eta[j].pow(K[j]);
        if (scalar.is_zero())
            return;
        pmatrix pulled = t.map_entries([&](const poly_q& e) { return substitute(e, F.images); });
        tau = tau + pulled.scale_poly(scalar);
    });
    // reduce entries mod p^N to the canonical lift
    return tau.map_entries(
        [&](const poly_q& e) { return lift_to_q(reduce_mod(e, modulus, pc)); });
}

// ---------------------------------------------------------------------------

/// Basis of module maps phi: M -> M2 horizontal for the level-m actions,
/// with polynomial entries of degree <= D:
///   sum_{I+K=L} qfac(L,I) Theta2_K del^{I}(phi) = phi Theta_L  for all L.
inline std::vector<pmatrix> horizontal_hom(const strat_module& M, const strat_module& M2,
                                           std::uint64_t D)
{
    if (M.level() != M2.level() || M.nvars() != M2.nvars())
        throw domain_error("horizontal_hom: level or arity mismatch");
    std::size_t d = M.nvars();
    std::size_t r = M.rank(), r2 = M2.rank();
    std::uint64_t n = std::min(M.order_bound(), M2.order_bound());

    std::vector<multi_index> monos;
    for_each_multi_index(d, D, [&](const multi_index& k) { monos.push_back(k); });
    std::size_t nm = monos.size();
    std::size_t unknowns = r2 * r * nm;

    // residual degree bound: theta entries can raise degree
    std::uint64_t g = 0;
    for (auto& [K, t] : M.thetas())
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                g = std::max(g, t.at(i, j).degree());
    for (auto& [K, t] : M2.thetas())
        for (std::size_t i = 0; i < r2; ++i)
            for (std::size_t j = 0; j < r2; ++j)
                g = std::max(g, t.at(i, j).degree());
    std::vector<multi_index> res_monos;
    for_each_multi_index(d, D + g, [&](const multi_index& k) { res_monos.push_back(k); });

    auto mono_index = [&](const multi_index& k) {
        for (std::size_t i = 0; i < res_monos.size(); ++i)
            if (res_monos[i] == k)
                return i;
        throw internal_error("horizontal_hom: residual monomial out of range");
    };

    std::vector<std::vector<Rat>> rows;
    for_each_multi_index(d, n, [&](const multi_index& L) {
        if (L.is_zero())
            return;
        // residual(L) = sum_{I<=L} qfac(L,I) Theta2_{L-I} del^{I}(phi) - phi Theta_L
        // one equation per (entry, residual monomial), built sparsely
        std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<Rat>> eq;
        auto add_coeff = [&](std::size_t a, std::size_t b, const multi_index& mu,
                             std::size_t unknown, const Rat& c) {
            auto key = std::make_tuple(a, b, mono_index(mu));
            auto it = eq.find(key);
            if (it == eq.end())
                it = eq.emplace(key, std::vector<Rat>(unknowns)).first;
            it->second[unknown] += c;
        };
        auto unknown_of = [&](std::size_t a, std::size_t b, std::size_t mi) {
            return (a * r + b) * nm + mi;
        };

        for_each_below(L, [&](const multi_index& I) {
            multi_index K = L - I;
            Rat w(qfac_ratio(L, I, M.level(), M.ctx()));
            Int qi = q_factorial(I, M.level(), M.ctx());
            pmatrix T2 = M2.theta(K);
            // Theta2_K * del^{I}(phi): entry (a,b) = sum_t T2(a,t) del^I(phi(t,b))
            for (std::size_t a = 0; a < r2; ++a)
                for (std::size_t t = 0; t < r2; ++t) {
                    const poly_q& coeff = T2.at(a, t);
                    if (coeff.is_zero())
                        continue;
                    for (std::size_t b = 0; b < r; ++b)
                        for (std::size_t mi = 0; mi < nm; ++mi) {
                            // del^{I}(x^mu) = qi * C(mu, I) x^{mu-I}
                            Int bin = multi_binom(monos[mi], I);
                            if (bin == 0)
                                continue;
                            poly_q term =
                                coeff * poly_q::monomial(monos[mi] - I, Rat(bin * qi) * w);
                            for (auto& [nu, cc] : term.terms())
                                add_coeff(a, b, nu, unknown_of(t, b, mi), cc);
                        }
                }
        });
        // - phi Theta_L: entry (a,b) = sum_t phi(a,t) Theta_L(t,b)
        pmatrix TL = M.theta(L);
        for (std::size_t a = 0; a < r2; ++a)
            for (std::size_t t = 0; t < r; ++t)
                for (std::size_t b = 0; b < r; ++b) {
                    const poly_q& coeff = TL.at(t, b);
                    if (coeff.is_zero())
                        continue;
                    for (std::size_t mi = 0; mi < nm; ++mi) {
                        poly_q term = coeff * poly_q::monomial(monos[mi], Rat(1));
                        for (auto& [nu, cc] : term.terms())
                            add_coeff(a, b, nu, unknown_of(a, t, mi), -cc);
                    }
                }
        for (auto& [key, row] : eq) {
            bool nonzero = false;
            for (auto& c : row)
                if (!c.is_zero()) {
                    nonzero = true;
                    break;
                }
            if (nonzero)
                rows.push_back(row);
        }
    });

    qmatrix sys(rows.size(), unknowns);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < unknowns; ++j)
            sys.at(i, j) = rows[i][j];
    auto basis = nullspace(sys);

    std::vector<pmatrix> out;
    for (auto& v : basis) {
        pmatrix phi(r2, r, d);
        for (std::size_t a = 0; a < r2; ++a)
            for (std::size_t b = 0; b < r; ++b)
                for (std::size_t mi = 0; mi < nm; ++mi) {
                    Rat c = v[(a * r + b) * nm + mi];
                    if (!c.is_zero())
                        phi.at(a, b).add_term(monos[mi], c);
                }
        out.push_back(std::move(phi));
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Tower of modules over shrinking tubes: M_m over B_m = A[J^{p^{m+1}}] for
/// m in [m_lo, m_hi], with transition matrices f_{m m'} over B_m for m <= m'.
struct isoc_system {
    std::vector<strat_module> modules;          // index m - m_lo
    unsigned m_lo = 0;
    std::map<std::pair<unsigned, unsigned>, pmatrix> transitions;  // (m, m') -> f_{mm'}

    const strat_module& at(unsigned m) const { return modules.at(m - m_lo); }
    const pmatrix& f(unsigned m, unsigned m2) const
    {
        auto it = transitions.find({m, m2});
        if (it == transitions.end())
            throw domain_error("isoc_system: missing transition");
        return it->second;
    }
};

/// A transition f: (M_{m'} restricted to level m) -> M_m is horizontal when
///   sum_{I+K=L} qfac(L,I) Theta^(m)_K del^{I}(f) = f Theta^(restr)_L.
inline bool transition_is_horizontal(const strat_module& target, const strat_module& source,
                                     const pmatrix& f)
{
    strat_module restr = restrict_level(source, target.level());
    std::uint64_t n = std::min(target.order_bound(), source.order_bound());
    bool ok = true;
    for_each_multi_index(target.nvars(), n, [&](const multi_index& L) {
        if (!ok || L.is_zero())
            return;
        pmatrix lhs(target.rank(), source.rank(), target.nvars());
        for_each_below(L, [&](const multi_index& I) {
            multi_index K = L - I;
            Rat w(qfac_ratio(L, I, target.level(), target.ctx()));
            Int qi = q_factorial(I, target.level(), target.ctx());
            pmatrix derf = f.map_entries(
                [&](const poly_q& e) { return divided_derivative(e, I) * Rat(qi); });
            lhs = lhs + (target.theta(K) * derf).scale(w);
        });
        pmatrix rhs = f * restr.theta(L);
        if (lhs != rhs)
            ok = false;
    });
    return ok;
}

inline poly_q pmatrix_det(const pmatrix& t)
{
    if (t.rows() != t.cols())
        throw domain_error("pmatrix_det: square matrix required");
    std::size_t n = t.rows();
    if (n == 0)
        return poly_q::constant(t.nvars(), Rat(1));
    if (n == 1)
        return t.at(0, 0);
    poly_q det(t.nvars());
    for (std::size_t j = 0; j < n; ++j) {
        pmatrix minor(n - 1, n - 1, t.nvars());
        for (std::size_t r = 1; r < n; ++r)
            for (std::size_t c = 0, cc = 0; c < n; ++c) {
                if (c == j)
                    continue;
                minor.at(r - 1, cc++) = t.at(r, c);
            }
        poly_q term = t.at(0, j) * pmatrix_det(minor);
        det = (j % 2 == 0) ? det + term : det - term;
    }
    return det;
}

/// Every transition invertible over the rational ambient and horizontal,
/// plus transitivity f_{mm'} f_{m'm''} = f_{mm''}.
inline bool isoc_compat_check(const isoc_system& S)
{
    unsigned lo = S.m_lo;
    unsigned hi = lo + static_cast<unsigned>(S.modules.size()) - 1;
    for (unsigned m = lo; m <= hi; ++m)
        for (unsigned m2 = m + 1; m2 <= hi; ++m2) {
            const pmatrix& f = S.f(m, m2);
            // invertibility over B_Q: the determinant must be a nonzero
            // scalar (the units of the polynomial model of the ambient)
            poly_q det = pmatrix_det(f);
            if (det.is_zero() || det.degree() > 0)
                return false;
            if (!transition_is_horizontal(S.at(m), S.at(m2), f))
                return false;
            for (unsigned m3 = m2 + 1; m3 <= hi; ++m3)
                if (S.f(m, m2) * S.f(m2, m3) != S.f(m, m3))
                    return false;
        }
    return true;
}

}  // namespace dcalc
