// The ring of level-m differential operators over A = Z_(p)[x1..xd]:
// finite sums  sum_K a_K del^{K}  in normal form (coefficients on the left),
// with the level-m Leibniz identity as the rewrite engine, change of level,
// and the horizontality test for ideals.
#pragma once

#include "dcalc/groebner.hpp"
#include "dcalc/mpd.hpp"
#include "dcalc/poly.hpp"

#include <map>
#include <vector>

namespace dcalc {

class diff_op {
public:
    using term_map = std::map<multi_index, poly_q, grevlex_greater_t>;

    diff_op(prime_ctx pc, unsigned m, std::size_t d) : pc_(std::move(pc)), m_(m), d_(d) {}

    static diff_op basis(prime_ctx pc, unsigned m, const multi_index& K)
    {
        diff_op op(std::move(pc), m, K.size());
        op.add(K, poly_q::constant(K.size(), Rat(1)));
        return op;
    }

    const prime_ctx& ctx() const { return pc_; }
    unsigned level() const { return m_; }
    std::size_t nvars() const { return d_; }
    const term_map& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    std::uint64_t order() const
    {
        std::uint64_t n = 0;
        for (auto& [K, c] : terms_)
            n = std::max(n, K.total());
        return n;
    }

    poly_q coefficient(const multi_index& K) const
    {
        auto it = terms_.find(K);
        return it == terms_.end() ? poly_q(d_) : it->second;
    }

    void add(const multi_index& K, const poly_q& c)
    {
        if (K.size() != d_ || c.nvars() != d_)
            throw domain_error("diff_op: arity mismatch");
        if (c.is_zero())
            return;
        auto it = terms_.find(K);
        if (it == terms_.end()) {
            terms_.emplace(K, c);
            return;
        }
        it->second += c;
        if (it->second.is_zero())
            terms_.erase(it);
    }

    diff_op operator+(const diff_op& o) const
    {
        check_compatible(o);
        diff_op r(*this);
        for (auto& [K, c] : o.terms_)
            r.add(K, c);
        return r;
    }
    diff_op operator-(const diff_op& o) const
    {
        check_compatible(o);
        diff_op r(*this);
        for (auto& [K, c] : o.terms_)
            r.add(K, -c);
        return r;
    }
    diff_op scale(const poly_q& g) const
    {
        diff_op r(pc_, m_, d_);
        for (auto& [K, c] : terms_)
            r.add(K, c * g);
        return r;
    }

    bool operator==(const diff_op& o) const
    {
        return m_ == o.m_ && d_ == o.d_ && terms_ == o.terms_;
    }
    bool operator!=(const diff_op& o) const { return !(*this == o); }

    void check_compatible(const diff_op& o) const
    {
        if (!(pc_ == o.pc_) || d_ != o.d_)
            throw domain_error("diff_op: context mismatch");
        if (m_ != o.m_)
            throw level_error("diff_op: level mismatch (use change_level first)");
    }

private:
    prime_ctx pc_;
    unsigned m_;
    std::size_t d_;
    term_map terms_;
};

/// Action on polynomials: del^{K}(x^L) = Q_K! C(L,K) x^{L-K}.
inline poly_q apply(const diff_op& op, const poly_q& f)
{
    if (f.nvars() != op.nvars())
        throw domain_error("apply: arity mismatch");
    poly_q out(f.nvars());
    for (auto& [K, a] : op.terms()) {
        poly_q der = divided_derivative(f, K) * Rat(q_factorial(K, op.level(), op.ctx()));
        out += a * der;
    }
    return out;
}

/// Noncommutative product in normal form.  Coefficients move left through
/// the level-m Leibniz identity
///   del^{K} f = sum_{I+J=K} qfac(K,I) del^{I}(f) del^{J}
/// and basis elements compose with the p-adic binomial weight
///   del^{I} del^{J} = padic_binom(I+J, I) del^{I+J}.
inline diff_op compose(const diff_op& P, const diff_op& Q)
{
    P.check_compatible(Q);
    const prime_ctx& pc = P.ctx();
    unsigned m = P.level();
    diff_op out(pc, m, P.nvars());
    for (auto& [I, a] : P.terms()) {
        for (auto& [J, b] : Q.terms()) {
            for_each_below(I, [&](const multi_index& I1) {
                multi_index I2 = I - I1;
                poly_q moved =
                    divided_derivative(b, I1) * Rat(q_factorial(I1, m, pc) * qfac_ratio(I, I1, m, pc));
                if (moved.is_zero())
                    return;
                multi_index IJ = I2 + J;
                Rat w = padic_binom(IJ, I2, m, pc);
                out.add(IJ, a * moved * w);
            });
        }
    }
    return out;
}

/// Level raising: del^{K}_(m) -> (Q^(m)!/Q^(m')!) del^{K}_(m'), m' >= m.
/// A ring homomorphism preserving the action on polynomials.
inline diff_op change_level(const diff_op& op, unsigned m_new)
{
    if (m_new < op.level())
        throw level_error("change_level: target level must be >= current level");
    diff_op out(op.ctx(), m_new, op.nvars());
    for (auto& [K, a] : op.terms()) {
        Int num = q_factorial(K, op.level(), op.ctx());
        Int den = q_factorial(K, m_new, op.ctx());
        if (num % den != 0)
            throw internal_error("change_level: non-integral factor");
        out.add(K, a * Rat(num / den));
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Ideal of A spanned by the given generators together with p (always
/// implicitly adjoined).
struct ideal_spec {
    std::vector<poly_q> gens;

    std::size_t nvars() const { return gens.empty() ? 0 : gens[0].nvars(); }
};

/// A two-sided reduction of the operator ring mod J exists iff J is
/// horizontal: del^{K}(g) in J for every generator g.  Since p in J it
/// suffices to check mod p, and ring generation bounds the order by
/// |K| <= p^m.
inline bool is_horizontal(const ideal_spec& J, unsigned m, const prime_ctx& ctx)
{
    if (J.gens.empty())
        return true;  // the ideal (p); zero mod p
    std::size_t d = J.gens[0].nvars();

    std::vector<poly_m> red;
    for (auto& g : J.gens) {
        if (!is_p_integral(g, ctx))
            throw non_integral_coefficient("is_horizontal: generators must be p-integral");
        poly_m gm = reduce_mod_p(g, ctx);
        if (!gm.is_zero())
            red.push_back(gm);
    }
    auto gb = buchberger(red);

    std::uint64_t bound = pow_int(ctx.p, m).convert_to<std::uint64_t>();
    for (auto& g : J.gens) {
        bool ok = true;
        for_each_multi_index(d, bound, [&](const multi_index& K) {
            if (!ok || K.is_zero())
                return;
            poly_q der = divided_derivative(g, K) * Rat(q_factorial(K, m, ctx));
            if (!ideal_member(reduce_mod_p(der, ctx), gb))
                ok = false;
        });
        if (!ok)
            return false;
    }
    return true;
}

}  // namespace dcalc
