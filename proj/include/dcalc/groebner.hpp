// Minimal Buchberger engine over a field (Q or F_p), grevlex only.
// Downstream consumers only ever ask for ideal membership.
#pragma once

#include "dcalc/poly.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

namespace dcalc {

namespace detail {

inline multi_index lcm_index(const multi_index& a, const multi_index& b)
{
    a.check_same_arity(b);
    multi_index r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        r[i] = std::max(a[i], b[i]);
    return r;
}

inline bool divides(const multi_index& a, const multi_index& b)
{
    return a.leq(b);
}

inline Rat coeff_inverse(const Rat& c) { return Rat(1) / c; }
inline zmod coeff_inverse(const zmod& c) { return c.inverse(); }

// the field's 1, derived from a sample value (zmod carries its modulus)
inline Rat coeff_one(const Rat&) { return Rat(1); }
inline zmod coeff_one(const zmod& c) { return zmod(1, c.modulus()); }

}  // namespace detail

/// Remainder of f on division by G; no term of the result is divisible by
/// any leading monomial of G.
template <class C>
polynomial<C> normal_form(const polynomial<C>& f, const std::vector<polynomial<C>>& G)
{
    polynomial<C> rem(f.nvars());
    polynomial<C> work = f;
    while (!work.is_zero()) {
        const auto& [lm, lc] = work.leading();
        bool reduced = false;
        for (const auto& g : G) {
            const auto& [glm, glc] = g.leading();
            if (detail::divides(glm, lm)) {
                polynomial<C> factor =
                    polynomial<C>::monomial(lm - glm, lc / glc);
                work -= factor * g;
                reduced = true;
                break;
            }
        }
        if (!reduced) {
            rem.add_term(lm, lc);
            polynomial<C> lt = polynomial<C>::monomial(lm, lc);
            work -= lt;
        }
    }
    return rem;
}

template <class C>
struct groebner_basis {
    std::size_t nvars = 0;
    std::vector<polynomial<C>> gens;  // reduced basis, monic, grevlex

    bool is_zero_ideal() const { return gens.empty(); }
};

template <class C>
groebner_basis<C> buchberger(std::vector<polynomial<C>> gens)
{
    groebner_basis<C> gb;
    gens.erase(std::remove_if(gens.begin(), gens.end(),
                              [](const polynomial<C>& g) { return g.is_zero(); }),
               gens.end());
    if (gens.empty())
        return gb;
    gb.nvars = gens[0].nvars();
    for (auto& g : gens)
        g.check_arity(gens[0]);

    std::vector<polynomial<C>> G = std::move(gens);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < G.size(); ++i)
        for (std::size_t j = i + 1; j < G.size(); ++j)
            pairs.emplace_back(i, j);

    auto lm = [&](std::size_t i) -> const multi_index& { return G[i].leading().first; };

    while (!pairs.empty()) {
        auto [i, j] = pairs.back();
        pairs.pop_back();

        multi_index l = detail::lcm_index(lm(i), lm(j));

        // product criterion: coprime leading monomials reduce to zero
        if (l == lm(i) + lm(j))
            continue;
        // chain criterion: some third generator divides the lcm and both
        // companion pairs are gone from the queue
        bool chained = false;
        for (std::size_t k = 0; k < G.size() && !chained; ++k) {
            if (k == i || k == j || !detail::divides(lm(k), l))
                continue;
            auto live = [&](std::size_t a, std::size_t b) {
                if (a > b)
                    std::swap(a, b);
                return std::find(pairs.begin(), pairs.end(), std::make_pair(a, b)) != pairs.end();
            };
            if (!live(i, k) && !live(k, j))
                chained = true;
        }
        if (chained)
            continue;

        const auto& [lmi, lci] = G[i].leading();
        const auto& [lmj, lcj] = G[j].leading();
        polynomial<C> s = polynomial<C>::monomial(l - lmi, lcj) * G[i] -
                          polynomial<C>::monomial(l - lmj, lci) * G[j];
        polynomial<C> r = normal_form(s, G);
        if (!r.is_zero()) {
            for (std::size_t k = 0; k < G.size(); ++k)
                pairs.emplace_back(k, G.size());
            G.push_back(std::move(r));
        }
    }

    // minimalize: keep only generators whose leading monomial is not
    // divisible by another kept one (this also swallows duplicates)
    std::sort(G.begin(), G.end(), [](const polynomial<C>& a, const polynomial<C>& b) {
        return grevlex_less(a.leading().first, b.leading().first);
    });
    std::vector<polynomial<C>> red;
    for (auto& g : G) {
        bool redundant = false;
        for (auto& h : red)
            if (detail::divides(h.leading().first, g.leading().first)) {
                redundant = true;
                break;
            }
        if (!redundant)
            red.push_back(g);
    }
    // inter-reduce the tails; leading monomials are now pairwise indivisible
    for (std::size_t i = 0; i < red.size(); ++i) {
        std::vector<polynomial<C>> others;
        for (std::size_t j = 0; j < red.size(); ++j)
            if (j != i)
                others.push_back(red[j]);
        red[i] = normal_form(red[i], others);
    }
    for (auto& g : red) {
        C c = g.leading().second;
        g = g * detail::coeff_inverse(c);
    }
    std::sort(red.begin(), red.end(), [](const polynomial<C>& a, const polynomial<C>& b) {
        return grevlex_less(a.leading().first, b.leading().first);
    });

    // post-construction invariant: every S-polynomial of the final basis
    // reduces to zero
    for (std::size_t i = 0; i < red.size(); ++i)
        for (std::size_t j = i + 1; j < red.size(); ++j) {
            multi_index l = detail::lcm_index(red[i].leading().first, red[j].leading().first);
            polynomial<C> s =
                polynomial<C>::monomial(l - red[i].leading().first, red[j].leading().second) *
                    red[i] -
                polynomial<C>::monomial(l - red[j].leading().first, red[i].leading().second) *
                    red[j];
            if (!normal_form(s, red).is_zero())
                throw internal_error("buchberger: basis failed the S-polynomial check");
        }

    gb.gens = std::move(red);
    return gb;
}

/// f is in the ideal iff its normal form vanishes.
template <class C>
bool ideal_member(const polynomial<C>& f, const groebner_basis<C>& gb)
{
    if (f.is_zero())
        return true;
    if (gb.is_zero_ideal())
        return false;
    if (f.nvars() != gb.nvars)
        throw domain_error("ideal_member: arity mismatch");
    return normal_form(f, gb.gens).is_zero();
}

}  // namespace dcalc
