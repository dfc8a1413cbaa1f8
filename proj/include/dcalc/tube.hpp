// Tube algebras A[N]: the p-integral subring of Q[x] generated by A and the
// symbols T_f = f/p for f in N.  Elements are identified with their images
// in Q[x] (A is flat, so the identification is faithful); an optional
// generator-expression witness records how an element was produced.
#pragma once

#include "dcalc/dop.hpp"
#include "dcalc/mpd.hpp"
#include "dcalc/poly.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace dcalc {

enum class tube_shape { variable_powers, principal_regular, general };

/// Ambient ring A = Z_(p)[x1..xd] together with the generator set N.
/// Membership is decidable for the variable_powers and principal_regular
/// shapes only.
struct tube_ctx {
    prime_ctx pc;
    std::size_t d = 0;
    std::vector<poly_q> gens;
    tube_shape shape = tube_shape::general;

    tube_ctx(prime_ctx pc_, std::size_t d_, std::vector<poly_q> gens_, tube_shape shape_)
        : pc(std::move(pc_)), d(d_), gens(std::move(gens_)), shape(shape_)
    {
        for (auto& g : gens) {
            if (g.nvars() != d)
                throw domain_error("tube_ctx: generator arity mismatch");
            if (!is_p_integral(g, pc))
                throw non_integral_coefficient("tube_ctx: generators must lie in A");
        }
        if (shape == tube_shape::variable_powers)
            validate_variable_powers();
        if (shape == tube_shape::principal_regular)
            validate_principal();
    }

    /// for variable_powers: exponent of the pure power in generator i
    std::uint32_t var_exponent(std::size_t gen) const
    {
        auto& [k, c] = gens[gen].leading();
        return k[var_of(gen)];
    }
    std::size_t var_of(std::size_t gen) const
    {
        auto& [k, c] = gens[gen].leading();
        for (std::size_t i = 0; i < d; ++i)
            if (k[i] != 0)
                return i;
        throw internal_error("tube_ctx: constant generator escaped validation");
    }

private:
    void validate_variable_powers()
    {
        std::vector<bool> used(d, false);
        for (auto& g : gens) {
            if (g.term_count() != 1)
                throw domain_error("tube_ctx: variable-powers generators must be monomials");
            auto& [k, c] = g.leading();
            if (!c.is_one())
                throw domain_error("tube_ctx: variable-powers generators must be monic");
            std::size_t nz = 0, var = 0;
            for (std::size_t i = 0; i < d; ++i)
                if (k[i] != 0) {
                    ++nz;
                    var = i;
                }
            if (nz != 1)
                throw domain_error("tube_ctx: variable-powers generators must be pure powers");
            if (used[var])
                throw domain_error("tube_ctx: repeated variable in variable-powers shape");
            used[var] = true;
        }
    }
    void validate_principal()
    {
        if (gens.size() != 1)
            throw domain_error("tube_ctx: principal shape needs exactly one generator");
        if (gens[0].is_zero() || gens[0].degree() == 0)
            throw domain_error("tube_ctx: principal generator must be nonconstant");
        if (!valuation(gens[0].leading().second, pc).at_least(0) ||
            valuation(gens[0].leading().second, pc).at_least(1))
            throw domain_error("tube_ctx: principal generator needs a unit leading coefficient");
    }
};

// ---------------------------------------------------------------------------

/// Expression tree over {A-constants, T_f generators, +, x}.
class tube_witness {
public:
    enum class kind { constant, generator, sum, product };

    static tube_witness constant(poly_q c)
    {
        tube_witness w;
        w.root_ = std::make_shared<node>(node{kind::constant, std::move(c), 0, nullptr, nullptr});
        return w;
    }
    static tube_witness generator(std::size_t i)
    {
        tube_witness w;
        w.root_ = std::make_shared<node>(node{kind::generator, poly_q(), i, nullptr, nullptr});
        return w;
    }
    static tube_witness sum(tube_witness a, tube_witness b)
    {
        tube_witness w;
        w.root_ = std::make_shared<node>(node{kind::sum, poly_q(), 0, a.root_, b.root_});
        return w;
    }
    static tube_witness product(tube_witness a, tube_witness b)
    {
        tube_witness w;
        w.root_ = std::make_shared<node>(node{kind::product, poly_q(), 0, a.root_, b.root_});
        return w;
    }

    /// Evaluate with T_f := f/p.
    poly_q evaluate(const tube_ctx& ctx) const { return eval(root_.get(), ctx); }

    /// Rewrite generator leaves; used by the inclusion and mod-p maps.
    tube_witness map_generators(const std::function<tube_witness(std::size_t)>& fn) const
    {
        return tube_witness{map(root_.get(), fn)};
    }

    /// Structural recursion into any algebra.
    template <class T>
    T fold(const std::function<T(const poly_q&)>& on_const,
           const std::function<T(std::size_t)>& on_gen,
           const std::function<T(const T&, const T&)>& on_sum,
           const std::function<T(const T&, const T&)>& on_prod) const
    {
        std::function<T(const node*)> rec = [&](const node* n) -> T {
            switch (n->k) {
            case kind::constant:
                return on_const(n->c);
            case kind::generator:
                return on_gen(n->gen);
            case kind::sum: {
                T a = rec(n->l.get()), b = rec(n->r.get());
                return on_sum(a, b);
            }
            case kind::product: {
                T a = rec(n->l.get()), b = rec(n->r.get());
                return on_prod(a, b);
            }
            }
            throw internal_error("tube_witness: bad node");
        };
        return rec(root_.get());
    }

private:
    struct node {
        kind k;
        poly_q c;
        std::size_t gen;
        std::shared_ptr<const node> l, r;
    };
    std::shared_ptr<const node> root_;

    tube_witness() = default;
    explicit tube_witness(std::shared_ptr<const node> n) : root_(std::move(n)) {}

    static poly_q eval(const node* n, const tube_ctx& ctx)
    {
        switch (n->k) {
        case kind::constant:
            if (n->c.nvars() != ctx.d)
                throw domain_error("tube_witness: constant arity mismatch");
            if (!is_p_integral(n->c, ctx.pc))
                throw non_integral_coefficient("tube_witness: constants must lie in A");
            return n->c;
        case kind::generator:
            if (n->gen >= ctx.gens.size())
                throw domain_error("tube_witness: unknown generator symbol T_" +
                                   std::to_string(n->gen));
            return ctx.gens[n->gen] * Rat(Int(1), ctx.pc.p);
        case kind::sum:
            return eval(n->l.get(), ctx) + eval(n->r.get(), ctx);
        case kind::product:
            return eval(n->l.get(), ctx) * eval(n->r.get(), ctx);
        }
        throw internal_error("tube_witness: bad node");
    }

    static std::shared_ptr<const node> map(const node* n,
                                           const std::function<tube_witness(std::size_t)>& fn)
    {
        switch (n->k) {
        case kind::constant:
            return std::make_shared<node>(*n);
        case kind::generator:
            return fn(n->gen).root_;
        case kind::sum:
        case kind::product:
            return std::make_shared<node>(node{n->k, poly_q(), 0, map(n->l.get(), fn), map(n->r.get(), fn)});
        }
        throw internal_error("tube_witness: bad node");
    }
};

/// Element of A[N]; equality is equality of images in Q[x].
struct tube_elt {
    poly_q image;
    std::optional<tube_witness> witness;

    bool operator==(const tube_elt& o) const { return image == o.image; }
};

inline tube_elt from_witness(const tube_witness& w, const tube_ctx& ctx)
{
    return tube_elt{w.evaluate(ctx), w};
}

inline tube_elt tube_add(const tube_elt& a, const tube_elt& b)
{
    std::optional<tube_witness> w;
    if (a.witness && b.witness)
        w = tube_witness::sum(*a.witness, *b.witness);
    return tube_elt{a.image + b.image, w};
}

inline tube_elt tube_mul(const tube_elt& a, const tube_elt& b)
{
    std::optional<tube_witness> w;
    if (a.witness && b.witness)
        w = tube_witness::product(*a.witness, *b.witness);
    return tube_elt{a.image * b.image, w};
}

// ---------------------------------------------------------------------------
// Membership.

namespace detail {

/// digits of g in powers of f: g = sum_j r_j f^j with no term of r_j
/// divisible by the leading monomial of f (canonical single-divisor
/// division, valid since LC(f) is a p-unit)
inline std::vector<poly_q> f_adic_digits(const poly_q& g, const poly_q& f)
{
    std::vector<poly_q> digits;
    poly_q cur = g;
    const auto& [flm, flc] = f.leading();
    while (!cur.is_zero()) {
        poly_q quot(cur.nvars()), rem(cur.nvars());
        poly_q work = cur;
        while (!work.is_zero()) {
            const auto& [lm, lc] = work.leading();
            if (flm.leq(lm)) {
                poly_q t = poly_q::monomial(lm - flm, lc / flc);
                quot += t;
                work -= t * f;
            } else {
                rem.add_term(lm, lc);
                work -= poly_q::monomial(lm, lc);
            }
        }
        digits.push_back(rem);
        cur = quot;
    }
    return digits;
}

}  // namespace detail

/// Decide g in A[N] for the decidable shapes.
///   variable_powers: every monomial c x^L needs
///     v_p(c) + sum_i floor(l_i / e_i) >= 0;
///   principal_regular: the f-adic digit r_j needs v_p(r_j) >= -j.
inline bool membership(const poly_q& g, const tube_ctx& ctx)
{
    if (g.nvars() != ctx.d)
        throw domain_error("membership: arity mismatch");
    switch (ctx.shape) {
    case tube_shape::variable_powers: {
        for (auto& [L, c] : g.terms()) {
            padic_val v = valuation(c, ctx.pc);
            if (v.infinite)
                continue;
            long long gain = 0;
            for (std::size_t j = 0; j < ctx.gens.size(); ++j)
                gain += L[ctx.var_of(j)] / ctx.var_exponent(j);
            if (v.v + gain < 0)
                return false;
        }
        return true;
    }
    case tube_shape::principal_regular: {
        auto digits = detail::f_adic_digits(g, ctx.gens[0]);
        for (std::size_t j = 0; j < digits.size(); ++j) {
            padic_val v = min_valuation(digits[j], ctx.pc);
            if (!v.at_least(-static_cast<long long>(j)))
                return false;
        }
        return true;
    }
    case tube_shape::general:
        throw unsupported_shape("membership: undecidable for general generator sets");
    }
    throw internal_error("membership: bad shape");
}

// ---------------------------------------------------------------------------
// Canonical maps between tubes.

/// A[N^r] -> A[N], T_{f^r} |-> f^{r-1} T_f; the identity on images.
inline tube_elt incl_power_map(const tube_elt& e, unsigned r, const tube_ctx& ctx_pow,
                               const tube_ctx& ctx_base)
{
    if (ctx_pow.gens.size() != ctx_base.gens.size())
        throw domain_error("incl_power_map: generator count mismatch");
    for (std::size_t i = 0; i < ctx_base.gens.size(); ++i)
        if (ctx_pow.gens[i] != ctx_base.gens[i].pow(r))
            throw domain_error("incl_power_map: source generators are not r-th powers");

    tube_elt out{e.image, std::nullopt};
    if (e.witness) {
        out.witness = e.witness->map_generators([&](std::size_t i) {
            return tube_witness::product(tube_witness::constant(ctx_base.gens[i].pow(r - 1)),
                                         tube_witness::generator(i));
        });
        if (out.witness->evaluate(ctx_base) != e.image)
            throw internal_error("incl_power_map: image changed");
    }
    return out;
}

/// A[N] -> A[N'] for N' congruent to N mod p, T_f |-> T_{f'} + (f - f')/p.
inline tube_elt modp_iso(const tube_elt& e, const tube_ctx& ctx_from, const tube_ctx& ctx_to)
{
    if (ctx_from.gens.size() != ctx_to.gens.size())
        throw domain_error("modp_iso: generator count mismatch");
    std::vector<poly_q> shift;
    for (std::size_t i = 0; i < ctx_from.gens.size(); ++i) {
        poly_q diff = ctx_from.gens[i] - ctx_to.gens[i];
        if (!min_valuation(diff, ctx_from.pc).at_least(1))
            throw congruence_failure("modp_iso: generators " + std::to_string(i) +
                                     " disagree mod p");
        shift.push_back(diff * Rat(Int(1), ctx_from.pc.p));
    }
    tube_elt out{e.image, std::nullopt};
    if (e.witness) {
        out.witness = e.witness->map_generators([&](std::size_t i) {
            return tube_witness::sum(tube_witness::generator(i),
                                     tube_witness::constant(shift[i]));
        });
        if (out.witness->evaluate(ctx_to) != e.image)
            throw internal_error("modp_iso: image changed");
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Action of del^{K}_(m) on a tube over N^{p^i}; defined only for i > m,
/// where the result provably stays in the tube (verified on decidable
/// shapes).  At i = m closure genuinely fails.
inline tube_elt dm_act(const multi_index& K, const tube_elt& e, const tube_ctx& ctx, unsigned m,
                       unsigned i)
{
    if (i <= m)
        throw level_error("dm_act: requires i > m; the level-" + std::to_string(m) +
                          " action does not preserve the p^" + std::to_string(i) + " tube");
    poly_q img = divided_derivative(e.image, K) * Rat(q_factorial(K, m, ctx.pc));
    if (ctx.shape != tube_shape::general && !membership(img, ctx))
        throw internal_error("dm_act: result left the tube algebra");
    return tube_elt{img, std::nullopt};
}

// ---------------------------------------------------------------------------
// Envelope <-> tube comparison maps.  The envelope of the ideal generated by
// base elements g_1..g_b is free on the divided monomials g^{K}; its
// elements use coeff_vars = 0 and pd_vars = b, with Q-image read through the
// base variables.  Supported bases are single variables g_j = x_{i_j}.

namespace detail {

inline bool is_single_variable(const poly_q& g)
{
    return g.term_count() == 1 && g.leading().second.is_one() && g.leading().first.total() == 1;
}

inline void check_variable_base(const std::vector<poly_q>& base)
{
    for (auto& g : base)
        if (!is_single_variable(g))
            throw unsupported_shape("envelope/tube comparison: base must be single variables");
}

inline std::size_t base_var(const poly_q& g)
{
    const multi_index& k = g.leading().first;
    for (std::size_t v = 0; v < k.size(); ++v)
        if (k[v] != 0)
            return v;
    throw internal_error("base_var: constant base element");
}

/// Q-image of an envelope element over the given base, as a polynomial in
/// the ambient d variables: g^{K}_(m) -> (prod g_j^{k_j})/Q_K!.
inline poly_q env_image_in_ambient(const envelope_elt& e, const std::vector<poly_q>& base,
                                   std::size_t d)
{
    poly_q img(d);
    for (auto& [K, c] : e.coefficients()) {
        Rat coeff = c.coefficient(multi_index(std::size_t(0)));
        poly_q term = poly_q::constant(d, coeff / Rat(q_factorial(K, e.level(), e.ctx())));
        for (std::size_t j = 0; j < base.size(); ++j)
            if (K[j] > 0)
                term *= base[j].pow(K[j]);
        img += term;
    }
    return img;
}

}  // namespace detail

/// P_(m)(I) -> A[N^{p^m}]:  g^{k}_(m) |-> g^r (p^q/q!) T^q, componentwise.
/// On Q-images this is the identity embedding.  Supported for regular bases
/// given by single variables or a single principal generator.
inline tube_elt env_to_tube(const envelope_elt& e, const std::vector<poly_q>& base,
                            const tube_ctx& ctx)
{
    if (e.coeff_vars() != 0 || e.pd_vars() != base.size() || ctx.gens.size() != base.size())
        throw domain_error("env_to_tube: shape mismatch");
    bool variables = true;
    for (auto& g : base)
        variables = variables && detail::is_single_variable(g);
    if (!variables && base.size() != 1)
        throw unsupported_shape("env_to_tube: base must be variables or a single generator");
    unsigned pm = pow_int(ctx.pc.p, e.level()).convert_to<unsigned>();
    for (std::size_t j = 0; j < base.size(); ++j)
        if (ctx.gens[j] != base[j].pow(pm))
            throw domain_error("env_to_tube: tube generators must be p^m-th powers of the base");

    std::optional<tube_witness> acc;
    poly_q image(ctx.d);
    for (auto& [K, c] : e.coefficients()) {
        Rat coeff = c.coefficient(multi_index(std::size_t(0)));
        tube_witness w = tube_witness::constant(poly_q::constant(ctx.d, coeff));
        for (std::size_t j = 0; j < base.size(); ++j) {
            auto [q, r] = level_decompose_scalar(K[j], e.level(), ctx.pc);
            unsigned qq = q.convert_to<unsigned>();
            Rat unit = Rat(pow_int(ctx.pc.p, qq)) / Rat(factorial(q));
            poly_q head = base[j].pow(r.convert_to<unsigned>()) * unit;
            w = tube_witness::product(w, tube_witness::constant(head));
            for (unsigned t = 0; t < qq; ++t)
                w = tube_witness::product(w, tube_witness::generator(j));
        }
        acc = acc ? tube_witness::sum(*acc, w) : w;
    }
    if (!acc)
        return tube_elt{poly_q(ctx.d), std::nullopt};
    tube_elt out = from_witness(*acc, ctx);
    if (out.image != detail::env_image_in_ambient(e, base, ctx.d))
        throw internal_error("env_to_tube: image is not the identity embedding");
    return out;
}

/// A[N^{p^{m+1}}] -> P_(m)(I):  T_{g^{p^{m+1}}} |-> (p-1)! g^{p^{m+1}}_(m).
/// Requires a witness (the element must be presented by generators).
inline envelope_elt tube_to_env(const tube_elt& e, const std::vector<poly_q>& base,
                                const tube_ctx& ctx, unsigned m, std::uint64_t order)
{
    if (!e.witness)
        throw domain_error("tube_to_env: a generator-expression witness is required");
    if (ctx.gens.size() != base.size())
        throw domain_error("tube_to_env: shape mismatch");
    bool variables = true;
    for (auto& g : base)
        variables = variables && detail::is_single_variable(g);
    if (!variables && base.size() != 1)
        throw unsupported_shape("tube_to_env: base must be variables or a single generator");
    std::size_t b = base.size();
    unsigned pm1 = pow_int(ctx.pc.p, m + 1).convert_to<unsigned>();
    for (std::size_t j = 0; j < b; ++j)
        if (ctx.gens[j] != base[j].pow(pm1))
            throw domain_error("tube_to_env: generators must be p^{m+1}-th powers of the base");

    prime_ctx pc = ctx.pc;
    Rat pd_unit = Rat(factorial(pc.p - 1));  // (p-1)!

    std::function<envelope_elt(const poly_q&)> const_to_env = [&](const poly_q& a) {
        if (!is_p_integral(a, pc))
            throw non_integral_coefficient("tube_to_env: constant outside A");
        envelope_elt r(pc, m, 0, b, order);
        if (variables) {
            // A-constant sum c_L x^L -> sum c_L Q_L! g^{L}_(m)
            for (auto& [L, c] : a.terms()) {
                multi_index K(b);
                for (std::size_t j = 0; j < b; ++j)
                    K[j] = L[detail::base_var(base[j])];
                r.add(K, poly_q::constant(std::size_t(0), c * Rat(q_factorial(K, m, pc))));
            }
            return r;
        }
        // single principal generator: expand in base-adic digits; only
        // digits from the coefficient ring (here: constants) are
        // representable in the constant-coefficient presentation
        auto digits = detail::f_adic_digits(a, base[0]);
        for (std::size_t j = 0; j < digits.size(); ++j) {
            if (digits[j].is_zero())
                continue;
            if (digits[j].degree() > 0)
                throw unsupported_shape(
                    "tube_to_env: constant with a nonscalar digit over a principal base");
            multi_index K{static_cast<std::uint32_t>(j)};
            r.add(K, poly_q::constant(std::size_t(0),
                                      digits[j].coefficient(multi_index(a.nvars())) *
                                          Rat(q_factorial(K, m, pc))));
        }
        return r;
    };
    std::function<envelope_elt(std::size_t)> gen_to_env = [&](std::size_t j) {
        envelope_elt r(pc, m, 0, b, order);
        multi_index K(b);
        K[j] = pm1;
        r.add(K, poly_q::constant(std::size_t(0), pd_unit));
        return r;
    };
    std::function<envelope_elt(const envelope_elt&, const envelope_elt&)> add =
        [](const envelope_elt& x, const envelope_elt& y) { return x + y; };
    std::function<envelope_elt(const envelope_elt&, const envelope_elt&)> mul =
        [](const envelope_elt& x, const envelope_elt& y) { return env_mul(x, y); };

    envelope_elt out = e.witness->fold<envelope_elt>(const_to_env, gen_to_env, add, mul);

    // the map preserves Q-images up to the order truncation (for a variable
    // base, basis index total = ambient total degree)
    poly_q expected = e.image;
    if (variables) {
        expected = poly_q(ctx.d);
        for (auto& [L, c] : e.image.terms())
            if (L.total() <= order)
                expected.add_term(L, c);
    }
    if (detail::env_image_in_ambient(out, base, ctx.d) != expected)
        throw domain_error(
            "tube_to_env: image not preserved (is the order bound large enough?)");
    return out;
}

// ---------------------------------------------------------------------------

/// Frobenius witness: for a lift F with F(x_j) = x_j^q mod p (q = p^s) and
/// i > m, F(f^{p^i}) = g^{p^{i+s}} + p h' exactly, where f is the canonical
/// lift of g.  Returns h' and the element F(T_{f^{p^i}}) - h', whose image
/// equals that of T_{g^{p^{i+s}}}; this realizes the surjectivity of the
/// pullback onto the smaller tube.
struct frobenius_witness {
    poly_q h_prime;
    tube_elt preimage;
};

inline frobenius_witness frobenius_tube_witness(const poly_q& g, const ring_map<Rat>& F,
                                                unsigned i, unsigned s, unsigned m,
                                                const tube_ctx& ctx)
{
    if (i <= m)
        throw level_error("frobenius_tube_witness: requires i > m");
    if (F.arity_in() != ctx.d || g.nvars() != ctx.d)
        throw domain_error("frobenius_tube_witness: arity mismatch");
    unsigned q = pow_int(ctx.pc.p, s).convert_to<unsigned>();
    for (std::size_t j = 0; j < ctx.d; ++j) {
        poly_q diff = F.images[j] - poly_q::variable(ctx.d, j, Rat(1)).pow(q);
        if (!diff.is_zero() && !min_valuation(diff, ctx.pc).at_least(1))
            throw domain_error("frobenius_tube_witness: F(x_" + std::to_string(j + 1) +
                               ") is not x^q mod p; not a Frobenius lift");
    }

    std::uint64_t pi = pow_int(ctx.pc.p, i).convert_to<std::uint64_t>();
    std::uint64_t pis = pow_int(ctx.pc.p, i + s).convert_to<std::uint64_t>();
    poly_q lhs = substitute(g.pow(pi), F);
    poly_q target = g.pow(pis);
    poly_q num = lhs - target;

    poly_q h(ctx.d);
    for (auto& [L, c] : num.terms()) {
        if (!valuation(c, ctx.pc).at_least(1))
            throw domain_error("frobenius_tube_witness: exact division by p failed at monomial " +
                               L.to_string() + "; F is not a valid Frobenius lift");
        h.add_term(L, c / Rat(ctx.pc.p));
    }

    // preimage element: image (F(f^{p^i}) - p h')/p = g^{p^{i+s}}/p
    tube_ctx pulled(ctx.pc, ctx.d, {lhs}, tube_shape::general);
    tube_witness w = tube_witness::sum(tube_witness::generator(0), tube_witness::constant(-h));
    frobenius_witness out{h, from_witness(w, pulled)};
    if (out.preimage.image != target * Rat(Int(1), ctx.pc.p))
        throw internal_error("frobenius_tube_witness: witness image mismatch");
    return out;
}

// ---------------------------------------------------------------------------

/// Analytic stratification of the two-copy diagonal tube, on a generator:
/// the two ways of viewing T_{f^{p^i}} from the second copy.  Variables
/// double: x1..xd is the left copy, x_{d+1}..x_{2d} the right one.
/// Requires i >= m (the radius condition making both one-sided algebras
/// agree); the two images coincide.
struct analytic_strat_pair {
    tube_elt via_right;  // 1 (x) T_{f^{p^i}}
    tube_elt via_left;   // T_{f^{p^i}} (x) 1 + T_{delta(f^{p^i})}
};

inline analytic_strat_pair analytic_strat_image(const poly_q& f, unsigned i, unsigned m,
                                                const prime_ctx& pc)
{
    if (i < m)
        throw level_error("analytic_strat_image: requires i >= m");
    std::size_t d = f.nvars();
    if (!is_p_integral(f, pc))
        throw non_integral_coefficient("analytic_strat_image: f must lie in A");

    std::uint64_t pi = pow_int(pc.p, i).convert_to<std::uint64_t>();
    poly_q fp = f.pow(pi).widen(2 * d);

    ring_map<Rat> to_right;
    for (std::size_t j = 0; j < d; ++j)
        to_right.images.push_back(poly_q::variable(2 * d, d + j, Rat(1)));
    for (std::size_t j = 0; j < d; ++j)
        to_right.images.push_back(poly_q::variable(2 * d, d + j, Rat(1)));
    poly_q fp_right = substitute(f.pow(pi).widen(2 * d), to_right);

    Rat invp = Rat(Int(1), pc.p);
    tube_elt rhs{fp * invp + (fp_right - fp) * invp, std::nullopt};
    tube_elt lhs{fp_right * invp, std::nullopt};
    if (lhs.image != rhs.image)
        throw internal_error("analytic_strat_image: sides disagree");
    return analytic_strat_pair{lhs, rhs};
}

}  // namespace dcalc
