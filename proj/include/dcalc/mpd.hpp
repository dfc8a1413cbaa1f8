// Level-m divided-power combinatorics and truncated envelopes of the
// diagonal: the divided-monomial basis xi^{K}, its product and coproduct,
// the Taylor map, change of level, and the phi polynomial that witnesses
// divisibility of r-th power differences.
//
// Conventions, fixed once and used everywhere: for K = p^m Q + R with
// R < p^m componentwise,
//   xi^{K}   has Q-image xi^K / Q!        (divided basis monomial)
//   del^{K}  = Q! * del^[K]               (dual operator basis)
// so the Leibniz weight is qfac_ratio(K,I) = Q_K!/(Q_I! Q_{K-I}!) and the
// composition/comultiplication weight is padic_binom(K,I) = C(K,I)/qfac.
// The Kronecker duality and Leibniz consistency tests lock these in.
#pragma once

#include "dcalc/arith.hpp"
#include "dcalc/multi_index.hpp"
#include "dcalc/poly.hpp"

#include <map>
#include <string>
#include <utility>

namespace dcalc {

// ---------------------------------------------------------------------------
// Level decomposition K = p^m Q + R, 0 <= R < p^m.

struct level_decomp {
    multi_index K, Q, R;
    unsigned m = 0;
};

inline std::pair<Int, Int> level_decompose_scalar(std::uint32_t k, unsigned m, const prime_ctx& ctx)
{
    Int pm = pow_int(ctx.p, m);
    Int q = Int(k) / pm;
    Int r = Int(k) % pm;
    return {q, r};
}

inline level_decomp level_decompose(const multi_index& K, unsigned m, const prime_ctx& ctx)
{
    level_decomp d;
    d.K = K;
    d.m = m;
    d.Q = multi_index(K.size());
    d.R = multi_index(K.size());
    for (std::size_t i = 0; i < K.size(); ++i) {
        auto [q, r] = level_decompose_scalar(K[i], m, ctx);
        d.Q[i] = static_cast<std::uint32_t>(q);
        d.R[i] = static_cast<std::uint32_t>(r);
    }
    return d;
}

/// Q_K! = prod_i (k_i div p^m)!
inline Int q_factorial(const multi_index& K, unsigned m, const prime_ctx& ctx)
{
    Int r = 1;
    for (std::size_t i = 0; i < K.size(); ++i) {
        auto [q, rem] = level_decompose_scalar(K[i], m, ctx);
        r *= factorial(q);
    }
    return r;
}

/// Leibniz weight Q_K!/(Q_I! Q_{K-I}!); an integer, componentwise.
inline Int qfac_ratio(const multi_index& K, const multi_index& I, unsigned m, const prime_ctx& ctx)
{
    if (!I.leq(K))
        throw domain_error("qfac_ratio: I <= K required");
    Int num = q_factorial(K, m, ctx);
    Int den = q_factorial(I, m, ctx) * q_factorial(K - I, m, ctx);
    if (num % den != 0)
        throw internal_error("qfac_ratio: non-integral ratio");
    return num / den;
}

/// Composition weight C(K,I)/qfac_ratio(K,I); p-integral (tested
/// exhaustively in the acceptance suite).
inline Rat padic_binom(const multi_index& K, const multi_index& I, unsigned m, const prime_ctx& ctx)
{
    if (!I.leq(K))
        throw domain_error("padic_binom: I <= K required");
    return Rat(multi_binom(K, I)) / Rat(qfac_ratio(K, I, m, ctx));
}

// ---------------------------------------------------------------------------

/// Element of a truncated divided-power envelope: a finite sum of basis
/// monomials xi^{K} (|K| <= order) with polynomial coefficients.  The index
/// may span several blocks of pd variables (two-copy and three-copy forms).
class envelope_elt {
public:
    using coef_map = std::map<multi_index, poly_q, grevlex_greater_t>;

    envelope_elt(prime_ctx pc, unsigned m, std::size_t coeff_vars, std::size_t pd_vars,
                 std::uint64_t order)
        : pc_(std::move(pc)), m_(m), a_(coeff_vars), b_(pd_vars), order_(order)
    {
    }

    const prime_ctx& ctx() const { return pc_; }
    unsigned level() const { return m_; }
    std::size_t coeff_vars() const { return a_; }
    std::size_t pd_vars() const { return b_; }
    std::uint64_t order() const { return order_; }
    const coef_map& coefficients() const { return coef_; }
    bool is_zero() const { return coef_.empty(); }

    poly_q coefficient(const multi_index& K) const
    {
        auto it = coef_.find(K);
        return it == coef_.end() ? poly_q(a_) : it->second;
    }
    poly_q constant_term() const { return coefficient(multi_index(b_)); }

    void add(const multi_index& K, const poly_q& c)
    {
        if (K.size() != b_)
            throw domain_error("envelope_elt: index arity mismatch");
        if (c.nvars() != a_)
            throw domain_error("envelope_elt: coefficient arity mismatch");
        if (K.total() > order_ || c.is_zero())
            return;  // truncation ideal
        auto it = coef_.find(K);
        if (it == coef_.end()) {
            coef_.emplace(K, c);
            return;
        }
        it->second += c;
        if (it->second.is_zero())
            coef_.erase(it);
    }

    envelope_elt operator+(const envelope_elt& o) const
    {
        check_compatible(o);
        envelope_elt r(*this);
        for (auto& [K, c] : o.coef_)
            r.add(K, c);
        return r;
    }
    envelope_elt operator-(const envelope_elt& o) const
    {
        check_compatible(o);
        envelope_elt r(*this);
        for (auto& [K, c] : o.coef_)
            r.add(K, -c);
        return r;
    }
    envelope_elt scale(const Rat& c) const
    {
        envelope_elt r(pc_, m_, a_, b_, order_);
        for (auto& [K, f] : coef_)
            r.add(K, f * c);
        return r;
    }
    envelope_elt scale_poly(const poly_q& g) const
    {
        envelope_elt r(pc_, m_, a_, b_, order_);
        for (auto& [K, f] : coef_)
            r.add(K, f * g);
        return r;
    }

    bool operator==(const envelope_elt& o) const
    {
        return m_ == o.m_ && a_ == o.a_ && b_ == o.b_ && coef_ == o.coef_;
    }
    bool operator!=(const envelope_elt& o) const { return !(*this == o); }

    /// The canonical embedding into Q[x, xi]: xi^{K} -> xi^K / Q_K!.
    /// Variables: x1..xa are the coefficient variables, the pd variables
    /// follow.  Equality of represented elements is equality of images.
    poly_q q_image() const
    {
        poly_q img(a_ + b_);
        for (auto& [K, f] : coef_) {
            Rat w = Rat(1) / Rat(q_factorial(K, m_, pc_));
            for (auto& [L, c] : f.terms()) {
                multi_index full(a_ + b_);
                for (std::size_t i = 0; i < a_; ++i)
                    full[i] = L[i];
                for (std::size_t i = 0; i < b_; ++i)
                    full[a_ + i] = K[i];
                img.add_term(full, c * w);
            }
        }
        return img;
    }

    /// Inverse of q_image on represented elements.  When `require_integral`
    /// the reconstructed basis coefficients must be p-integral.
    static envelope_elt from_q_image(const poly_q& img, prime_ctx pc, unsigned m,
                                     std::size_t coeff_vars, std::size_t pd_vars,
                                     std::uint64_t order, bool require_integral = true)
    {
        envelope_elt e(std::move(pc), m, coeff_vars, pd_vars, order);
        std::map<multi_index, poly_q, grevlex_greater_t> buckets;
        for (auto& [full, c] : img.terms()) {
            multi_index K(pd_vars), L(coeff_vars);
            for (std::size_t i = 0; i < coeff_vars; ++i)
                L[i] = full[i];
            for (std::size_t i = 0; i < pd_vars; ++i)
                K[i] = full[coeff_vars + i];
            if (K.total() > order)
                throw domain_error("envelope_elt: image exceeds the order bound");
            auto it = buckets.find(K);
            if (it == buckets.end())
                it = buckets.emplace(K, poly_q(coeff_vars)).first;
            it->second.add_term(L, c);
        }
        for (auto& [K, f] : buckets) {
            poly_q scaled = f * Rat(q_factorial(K, m, e.pc_));
            if (require_integral && !is_p_integral(scaled, e.pc_))
                throw non_integral_coefficient(
                    "envelope_elt: image does not lie in the integral envelope at index " +
                    K.to_string());
            e.add(K, scaled);
        }
        return e;
    }

    /// membership in the canonical divided-power ideal (zero constant term)
    bool in_ideal_positive_order() const { return constant_term().is_zero(); }

    /// membership in the canonical PD-ideal: generated by p and the xi^{K}
    /// with some entry >= p^m; i.e. every coefficient at an index with all
    /// entries < p^m must be divisible by p.
    bool in_pd_ideal() const
    {
        Int pm = pow_int(pc_.p, m_);
        for (auto& [K, f] : coef_) {
            bool small = true;
            for (std::size_t i = 0; i < b_; ++i)
                if (Int(K[i]) >= pm) {
                    small = false;
                    break;
                }
            if (small && !min_valuation(f, pc_).at_least(1))
                return false;
        }
        return true;
    }

    void check_compatible(const envelope_elt& o) const
    {
        if (!(pc_ == o.pc_) || m_ != o.m_ || a_ != o.a_ || b_ != o.b_)
            throw domain_error("envelope_elt: context mismatch");
    }

private:
    prime_ctx pc_;
    unsigned m_;
    std::size_t a_, b_;
    std::uint64_t order_;
    coef_map coef_;
};

/// Bilinear product: xi^{K} xi^{L} = qfac_ratio(K+L, K) xi^{K+L}, indices
/// beyond the order bound dropped.
inline envelope_elt env_mul(const envelope_elt& x, const envelope_elt& y)
{
    x.check_compatible(y);
    std::uint64_t order = std::min(x.order(), y.order());
    envelope_elt r(x.ctx(), x.level(), x.coeff_vars(), x.pd_vars(), order);
    for (auto& [K, f] : x.coefficients())
        for (auto& [L, g] : y.coefficients()) {
            multi_index KL = K + L;
            if (KL.total() > order)
                continue;
            Rat w(qfac_ratio(KL, K, x.level(), x.ctx()));
            r.add(KL, f * g * w);
        }
    return r;
}

/// Taylor expansion of f: coefficient of xi^{K} is Q_K! * del^[K](f).
inline envelope_elt taylor_expand(const poly_q& f, std::uint64_t order, unsigned m,
                                  const prime_ctx& ctx)
{
    if (!is_p_integral(f, ctx))
        throw non_integral_coefficient("taylor_expand: f must have p-integral coefficients");
    std::size_t d = f.nvars();
    envelope_elt e(ctx, m, d, d, order);
    std::uint64_t cap = std::min<std::uint64_t>(order, f.degree());
    for_each_multi_index(d, cap, [&](const multi_index& K) {
        poly_q c = divided_derivative(f, K) * Rat(q_factorial(K, m, ctx));
        e.add(K, c);
    });
    return e;
}

/// Apply the dual-basis pairing <del^{K}, -> : P^n -> A through the Q-image
/// (independent of the coefficient bookkeeping above).
inline poly_q envelope_pairing(const multi_index& K, const envelope_elt& e)
{
    if (K.size() != e.pd_vars())
        throw domain_error("envelope_pairing: index arity mismatch");
    poly_q img = e.q_image();
    // divided derivative in the pd block only, then set the pd variables to 0
    std::size_t a = e.coeff_vars(), b = e.pd_vars();
    multi_index full(a + b);
    for (std::size_t i = 0; i < b; ++i)
        full[a + i] = K[i];
    poly_q der = divided_derivative(img, full);
    poly_q out(a);
    for (auto& [L, c] : der.terms()) {
        bool pd_free = true;
        for (std::size_t i = 0; i < b; ++i)
            if (L[a + i] != 0) {
                pd_free = false;
                break;
            }
        if (!pd_free)
            continue;
        multi_index xpart(a);
        for (std::size_t i = 0; i < a; ++i)
            xpart[i] = L[i];
        out.add_term(xpart, c);
    }
    return out * Rat(q_factorial(K, e.level(), e.ctx()));
}

/// Split one pd block into two (the coproduct):
/// xi^{K} -> sum_{I+J=K} padic_binom(K,I) xi^{I} (x) xi^{J},
/// with |I| <= order_left and |J| <= order_right.
inline envelope_elt delta_comult(const envelope_elt& e, std::uint64_t order_left,
                                 std::uint64_t order_right, std::size_t block = 0,
                                 std::size_t block_len = 0)
{
    std::size_t b = e.pd_vars();
    if (block_len == 0)
        block_len = b;  // default: the element has a single block
    std::size_t off = block * block_len;
    if (off + block_len > b)
        throw domain_error("delta_comult: bad block");

    envelope_elt r(e.ctx(), e.level(), e.coeff_vars(), b + block_len, e.order());
    for (auto& [K, f] : e.coefficients()) {
        multi_index Kb = K.block(off, block_len);
        for_each_below(Kb, [&](const multi_index& I) {
            multi_index J = Kb - I;
            if (I.total() > order_left || J.total() > order_right)
                return;
            Rat w = padic_binom(Kb, I, e.level(), e.ctx());
            // assemble the (b + block_len)-slot index: the block splits into
            // two adjacent blocks, all other slots keep their position
            multi_index full(b + block_len);
            for (std::size_t i = 0; i < off; ++i)
                full[i] = K[i];
            for (std::size_t i = 0; i < block_len; ++i) {
                full[off + i] = I[i];
                full[off + block_len + i] = J[i];
            }
            for (std::size_t i = off + block_len; i < b; ++i)
                full[i + block_len] = K[i];
            r.add(full, f * w);
        });
    }
    return r;
}

/// Change of level on envelopes, from level m down to target <= m:
/// xi^{K}_(m) -> (Q^(target)!/Q^(m)!) xi^{K}_(target).
inline envelope_elt env_change_level(const envelope_elt& e, unsigned target)
{
    if (target > e.level())
        throw level_error("env_change_level: target level must be <= the element's level");
    envelope_elt r(e.ctx(), target, e.coeff_vars(), e.pd_vars(), e.order());
    for (auto& [K, f] : e.coefficients()) {
        Int num = q_factorial(K, target, e.ctx());
        Int den = q_factorial(K, e.level(), e.ctx());
        if (num % den != 0)
            throw internal_error("env_change_level: non-integral factor");
        r.add(K, f * Rat(num / den));
    }
    return r;
}

/// The polynomial phi_r with p*phi_r(X1, X2) = X2^r - X1^r, expressed in the
/// level-m basis of Z_(p)[X1]<eta>, eta = X2 - X1.  Exists iff p^{m+1} | r.
inline envelope_elt phi_poly(std::uint64_t r, unsigned m, const prime_ctx& ctx)
{
    if (Int(r) % pow_int(ctx.p, m + 1) != 0)
        throw not_divisible("phi_poly: p^(m+1) must divide r");
    poly_q xr = poly_q::monomial(multi_index{static_cast<std::uint32_t>(r)}, Rat(1));
    envelope_elt t = taylor_expand(xr, r, m, ctx);
    envelope_elt out(ctx, m, 1, 1, r);
    for (auto& [K, f] : t.coefficients()) {
        if (K.is_zero())
            continue;  // drop X1^r itself
        poly_q halved(1);
        for (auto& [L, c] : f.terms()) {
            if (!valuation(c, ctx).at_least(1))
                throw internal_error("phi_poly: exact division by p failed at index " +
                                     K.to_string());
            halved.add_term(L, c / Rat(ctx.p));
        }
        out.add(K, halved);
    }
    return out;
}

}  // namespace dcalc
