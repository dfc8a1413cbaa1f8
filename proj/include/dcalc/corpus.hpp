// Deterministic random generation for the property suites and the CLI
// corpus command.  The generator is a fixed 64-bit mix (splitmix64), so the
// same seed yields the same corpus on every platform.
#pragma once

#include "dcalc/dop.hpp"
#include "dcalc/poly.hpp"
#include "dcalc/strat.hpp"

#include <cstdint>

namespace dcalc {

class rng {
public:
    explicit rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
    long long in_range(long long lo, long long hi)  // inclusive
    {
        return lo + static_cast<long long>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

private:
    std::uint64_t state_;
};

struct corpus_sizes {
    std::size_t nvars = 1;
    unsigned max_degree = 3;
    int terms = 3;
    long long coeff_bound = 9;
};

inline poly_q random_poly(rng& g, const corpus_sizes& sz)
{
    poly_q f(sz.nvars);
    for (int t = 0; t < sz.terms; ++t) {
        multi_index k(sz.nvars);
        std::uint64_t left = sz.max_degree;
        for (std::size_t i = 0; i < sz.nvars; ++i) {
            k[i] = static_cast<std::uint32_t>(g.below(left + 1));
            left -= k[i];
        }
        f.add_term(k, Rat(g.in_range(-sz.coeff_bound, sz.coeff_bound)));
    }
    return f;
}

inline diff_op random_op(rng& g, const prime_ctx& pc, unsigned m, const corpus_sizes& sz,
                         std::uint64_t max_order)
{
    diff_op op(pc, m, sz.nvars);
    int nterms = 1 + static_cast<int>(g.below(static_cast<std::uint64_t>(sz.terms)));
    for (int t = 0; t < nterms; ++t) {
        multi_index K(sz.nvars);
        std::uint64_t left = max_order;
        for (std::size_t i = 0; i < sz.nvars; ++i) {
            K[i] = static_cast<std::uint32_t>(g.below(left + 1));
            left -= K[i];
        }
        op.add(K, random_poly(g, sz));
    }
    return op;
}

/// Gauge transform of the trivial module by a unipotent polynomial matrix;
/// an honest module at every level, used as the stratified-module corpus.
inline strat_module random_gauge_module(rng& g, const prime_ctx& pc, unsigned m,
                                        const corpus_sizes& sz, std::size_t rank,
                                        std::uint64_t n_max)
{
    pmatrix u = pmatrix::identity(rank, sz.nvars);
    pmatrix n(rank, rank, sz.nvars);
    for (std::size_t i = 0; i < rank; ++i)
        for (std::size_t j = i + 1; j < rank; ++j)
            n.at(i, j) = random_poly(g, sz);
    u = u + n;
    pmatrix uinv = pmatrix::identity(rank, sz.nvars);
    pmatrix pw = n;
    int sign = -1;
    for (std::size_t t = 1; t < rank; ++t) {
        uinv = sign > 0 ? uinv + pw : uinv - pw;
        pw = pw * n;
        sign = -sign;
    }

    strat_module M(pc, m, sz.nvars, rank, n_max);
    for_each_multi_index(sz.nvars, n_max, [&](const multi_index& K) {
        if (K.is_zero())
            return;
        Int qf = q_factorial(K, m, pc);
        pmatrix der =
            u.map_entries([&](const poly_q& e) { return divided_derivative(e, K) * Rat(qf); });
        pmatrix t = uinv * der;
        if (!t.is_zero())
            M.set_theta(K, t);
    });
    return M;
}

/// Frobenius lift x_j -> x_j^q + p * (random perturbation).
inline frob_lift random_frob_lift(rng& g, const prime_ctx& pc, unsigned s, const corpus_sizes& sz)
{
    unsigned q = pow_int(pc.p, s).convert_to<unsigned>();
    ring_map<Rat> F;
    for (std::size_t j = 0; j < sz.nvars; ++j) {
        poly_q pert = random_poly(g, sz) * Rat(pc.p);
        F.images.push_back(poly_q::variable(sz.nvars, j, Rat(1)).pow(q) + pert);
    }
    return frob_lift(pc, s, F);
}

}  // namespace dcalc
