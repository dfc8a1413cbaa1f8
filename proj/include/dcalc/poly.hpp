// Sparse multivariate polynomials with exact coefficients (Q or Z/m),
// substitution homomorphisms, divided-power derivatives, and the text
// grammar "3/5*x1^2*x2 - 7" used by the CLI and test corpora.
#pragma once

#include "dcalc/arith.hpp"
#include "dcalc/multi_index.hpp"

#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace dcalc {

// ---------------------------------------------------------------------------
// Z/m with runtime modulus (m a prime or prime power).  Mixing moduli is an
// error, never a coercion.

class zmod {
public:
    // the default state is a zero not yet attached to a modulus; it combines
    // with any modulus and compares equal to any zero
    zmod() : v_(0), m_(0) {}
    zmod(Int v, Int m) : v_(std::move(v)), m_(std::move(m))
    {
        if (m_ == 0) {
            if (v_ != 0)
                throw domain_error("zmod: nonzero value without modulus");
            return;
        }
        if (m_ < 2)
            throw domain_error("zmod: modulus must be >= 2");
        v_ %= m_;
        if (v_ < 0)
            v_ += m_;
    }

    const Int& value() const { return v_; }
    const Int& modulus() const { return m_; }
    bool is_zero() const { return v_ == 0; }
    bool is_one() const { return v_ == 1; }

    zmod operator-() const { return m_ == 0 ? zmod() : zmod(m_ - v_, m_); }
    zmod operator+(const zmod& o) const { return zmod(v_ + o.v_, joint(o)); }
    zmod operator-(const zmod& o) const { return zmod(v_ - o.v_, joint(o)); }
    zmod operator*(const zmod& o) const
    {
        Int m = joint(o);
        if (m == 0)
            return zmod();
        return zmod(v_ * o.v_, m);
    }
    zmod inverse() const
    {
        if (m_ == 0)
            throw domain_error("zmod: cannot invert detached zero");
        // extended gcd; valid only for units
        Int r0 = m_, r1 = v_, t0 = 0, t1 = 1;
        while (r1 != 0) {
            Int q = r0 / r1;
            Int r2 = r0 - q * r1;
            Int t2 = t0 - q * t1;
            r0 = r1;
            r1 = r2;
            t0 = t1;
            t1 = t2;
        }
        if (r0 != 1)
            throw domain_error("zmod: " + v_.str() + " not a unit mod " + m_.str());
        return zmod(t0, m_);
    }
    zmod operator/(const zmod& o) const { return *this * o.inverse(); }

    bool operator==(const zmod& o) const
    {
        if (m_ == 0 || o.m_ == 0)
            return v_ == 0 && o.v_ == 0;
        return m_ == o.m_ && v_ == o.v_;
    }
    bool operator!=(const zmod& o) const { return !(*this == o); }

    std::string to_string() const { return v_.str(); }

private:
    Int v_, m_;

    Int joint(const zmod& other) const
    {
        if (m_ == 0)
            return other.m_;
        if (other.m_ == 0)
            return m_;
        if (m_ != other.m_)
            throw domain_error("zmod: modulus mismatch " + m_.str() + " vs " + other.m_.str());
        return m_;
    }
};

namespace detail {
inline bool coeff_is_zero(const Rat& c) { return c.is_zero(); }
inline bool coeff_is_zero(const zmod& c) { return c.is_zero(); }
inline std::string coeff_str(const Rat& c) { return c.to_string(); }
inline std::string coeff_str(const zmod& c) { return c.to_string(); }
}  // namespace detail

// ---------------------------------------------------------------------------

/// Sparse polynomial; no zero coefficients are stored, terms are kept in
/// grevlex-descending order so begin() is the leading term.
template <class C>
class polynomial {
public:
    using coeff_type = C;
    using term_map = std::map<multi_index, C, grevlex_greater_t>;

    polynomial() : d_(0) {}
    explicit polynomial(std::size_t d) : d_(d) {}

    static polynomial constant(std::size_t d, C c)
    {
        polynomial f(d);
        f.add_term(multi_index(d), std::move(c));
        return f;
    }
    static polynomial variable(std::size_t d, std::size_t i, C one)
    {
        polynomial f(d);
        multi_index k(d);
        k[i] = 1;
        f.add_term(k, std::move(one));
        return f;
    }
    static polynomial monomial(multi_index k, C c)
    {
        polynomial f(k.size());
        f.add_term(std::move(k), std::move(c));
        return f;
    }

    std::size_t nvars() const { return d_; }
    bool is_zero() const { return terms_.empty(); }
    std::size_t term_count() const { return terms_.size(); }
    const term_map& terms() const { return terms_; }

    std::uint64_t degree() const
    {
        std::uint64_t m = 0;
        for (auto& [k, c] : terms_)
            m = std::max(m, k.total());
        return m;
    }

    C coefficient(const multi_index& k) const
    {
        auto it = terms_.find(k);
        if (it == terms_.end())
            return C{};
        return it->second;
    }

    void add_term(multi_index k, C c)
    {
        if (k.size() != d_)
            throw domain_error("polynomial: term arity mismatch");
        if (detail::coeff_is_zero(c))
            return;
        auto it = terms_.find(k);
        if (it == terms_.end()) {
            terms_.emplace(std::move(k), std::move(c));
            return;
        }
        it->second = it->second + c;
        if (detail::coeff_is_zero(it->second))
            terms_.erase(it);
    }

    const std::pair<const multi_index, C>& leading() const
    {
        if (terms_.empty())
            throw domain_error("polynomial: leading term of zero");
        return *terms_.begin();
    }

    polynomial operator-() const
    {
        polynomial r(d_);
        for (auto& [k, c] : terms_)
            r.terms_.emplace(k, -c);
        return r;
    }
    polynomial operator+(const polynomial& o) const
    {
        check_arity(o);
        polynomial r(*this);
        for (auto& [k, c] : o.terms_)
            r.add_term(k, c);
        return r;
    }
    polynomial operator-(const polynomial& o) const { return *this + (-o); }
    polynomial operator*(const polynomial& o) const
    {
        check_arity(o);
        polynomial r(d_);
        for (auto& [ka, ca] : terms_)
            for (auto& [kb, cb] : o.terms_)
                r.add_term(ka + kb, ca * cb);
        return r;
    }
    polynomial operator*(const C& c) const
    {
        polynomial r(d_);
        if (detail::coeff_is_zero(c))
            return r;
        for (auto& [k, cc] : terms_)
            r.add_term(k, cc * c);
        return r;
    }
    polynomial& operator+=(const polynomial& o) { return *this = *this + o; }
    polynomial& operator-=(const polynomial& o) { return *this = *this - o; }
    polynomial& operator*=(const polynomial& o) { return *this = *this * o; }

    bool operator==(const polynomial& o) const { return d_ == o.d_ && terms_ == o.terms_; }
    bool operator!=(const polynomial& o) const { return !(*this == o); }

    polynomial pow(std::uint64_t e) const
    {
        if (e == 0)
            return constant(d_, one_like());
        if (is_zero())
            return *this;
        polynomial r = *this;
        polynomial b = *this;
        --e;
        while (e) {
            if (e & 1)
                r *= b;
            if (e >>= 1)
                b *= b;
        }
        return r;
    }

    /// extend to more variables (existing variables keep their slots)
    polynomial widen(std::size_t new_d) const
    {
        if (new_d < d_)
            throw domain_error("polynomial: widen shrinks arity");
        polynomial r(new_d);
        for (auto& [k, c] : terms_) {
            multi_index nk(new_d);
            for (std::size_t i = 0; i < d_; ++i)
                nk[i] = k[i];
            r.add_term(nk, c);
        }
        return r;
    }

    void check_arity(const polynomial& o) const
    {
        if (d_ != o.d_)
            throw domain_error("polynomial: arity mismatch");
    }

private:
    std::size_t d_;
    term_map terms_;

    C one_like() const
    {
        if constexpr (std::is_same_v<C, Rat>)
            return Rat(1);
        else {
            if (terms_.empty())
                throw domain_error("polynomial<zmod>: cannot infer modulus for 1");
            return zmod(1, terms_.begin()->second.modulus());
        }
    }
};

using poly_q = polynomial<Rat>;
using poly_m = polynomial<zmod>;

// ---------------------------------------------------------------------------

/// Componentwise product of binomial coefficients; 0 unless K <= L.
inline Int multi_binom(const multi_index& L, const multi_index& K)
{
    L.check_same_arity(K);
    Int r = 1;
    for (std::size_t i = 0; i < L.size(); ++i) {
        r *= binomial(Int(L[i]), Int(K[i]));
        if (r == 0)
            return r;
    }
    return r;
}

/// Grothendieck divided derivative: x^L |-> C(L,K) x^{L-K}, extended linearly.
inline poly_q divided_derivative(const poly_q& f, const multi_index& K)
{
    poly_q r(f.nvars());
    for (auto& [L, c] : f.terms()) {
        Int b = multi_binom(L, K);
        if (b == 0)
            continue;
        r.add_term(L - K, c * Rat(b));
    }
    return r;
}

// ---------------------------------------------------------------------------

/// Substitution homomorphism x_i |-> images[i].
template <class C>
struct ring_map {
    std::vector<polynomial<C>> images;

    std::size_t arity_in() const { return images.size(); }
    std::size_t arity_out() const { return images.empty() ? 0 : images[0].nvars(); }
};

template <class C>
polynomial<C> substitute(const polynomial<C>& f, const ring_map<C>& phi)
{
    if (f.nvars() != phi.arity_in())
        throw domain_error("substitute: arity mismatch");
    std::size_t dout = phi.arity_out();
    polynomial<C> r(dout);
    for (auto& [k, c] : f.terms()) {
        polynomial<C> t = polynomial<C>::constant(dout, c);
        for (std::size_t i = 0; i < k.size(); ++i)
            if (k[i] > 0)
                t *= phi.images[i].pow(k[i]);
        r += t;
    }
    return r;
}

// ---------------------------------------------------------------------------

/// Coefficientwise reduction of a p-integral polynomial mod p^N.
inline poly_m reduce_mod(const poly_q& f, const Int& modulus, const prime_ctx& ctx)
{
    poly_m r(f.nvars());
    for (auto& [k, c] : f.terms()) {
        if (!c.is_p_integral(ctx.p))
            throw non_integral_coefficient("reduce_mod: coefficient " + c.to_string() +
                                           " is not p-integral at p = " + ctx.p.str());
        // c = a/b with b a unit mod p^N
        zmod num(c.num(), modulus), den(c.den(), modulus);
        r.add_term(k, num / den);
    }
    return r;
}

inline poly_m reduce_mod_p(const poly_q& f, const prime_ctx& ctx)
{
    return reduce_mod(f, ctx.p, ctx);
}

/// Lift of a mod-p^N polynomial back to Q with coefficients in [0, p^N).
inline poly_q lift_to_q(const poly_m& f)
{
    poly_q r(f.nvars());
    for (auto& [k, c] : f.terms())
        r.add_term(k, Rat(c.value()));
    return r;
}

inline bool is_p_integral(const poly_q& f, const prime_ctx& ctx)
{
    for (auto& [k, c] : f.terms())
        if (!c.is_p_integral(ctx.p))
            return false;
    return true;
}

inline padic_val min_valuation(const poly_q& f, const prime_ctx& ctx)
{
    padic_val v = padic_val::infinity();
    for (auto& [k, c] : f.terms()) {
        padic_val vc = valuation(c, ctx);
        if (vc < v)
            v = vc;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Text grammar.  Terms look like "3/5*x1^2*x2", combined with '+'/'-'.
// Parser and printer are mutually inverse up to normalization.

namespace detail {

struct poly_lexer {
    std::string_view s;
    std::size_t i = 0;

    void skip_ws()
    {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
            ++i;
    }
    bool done()
    {
        skip_ws();
        return i >= s.size();
    }
    char peek()
    {
        skip_ws();
        return i < s.size() ? s[i] : '\0';
    }
    char take() { return s[i++]; }
};

}  // namespace detail

/// Parse the polynomial grammar over Q in variables x1..xd.
inline poly_q parse_poly(std::string_view text, std::size_t d)
{
    detail::poly_lexer lx{text};
    poly_q out(d);

    auto parse_number = [&]() -> Rat {
        lx.skip_ws();
        std::size_t start = lx.i;
        while (lx.i < lx.s.size() && (std::isdigit(static_cast<unsigned char>(lx.s[lx.i])) || lx.s[lx.i] == '/'))
            ++lx.i;
        if (start == lx.i)
            throw parse_error("expected number in polynomial: '" + std::string(text) + "'");
        return Rat::parse(lx.s.substr(start, lx.i - start));
    };
    auto parse_exponent = [&]() -> std::uint32_t {
        lx.skip_ws();
        std::size_t start = lx.i;
        while (lx.i < lx.s.size() && std::isdigit(static_cast<unsigned char>(lx.s[lx.i])))
            ++lx.i;
        if (start == lx.i)
            throw parse_error("expected exponent in polynomial: '" + std::string(text) + "'");
        return static_cast<std::uint32_t>(std::stoul(std::string(lx.s.substr(start, lx.i - start))));
    };

    bool first = true;
    while (!lx.done()) {
        int sign = 1;
        char c = lx.peek();
        if (c == '+' || c == '-') {
            lx.take();
            sign = (c == '-') ? -1 : 1;
        } else if (!first) {
            throw parse_error("expected '+' or '-' between terms: '" + std::string(text) + "'");
        }
        first = false;

        Rat coeff(1);
        multi_index k(d);
        bool saw_factor = false;
        bool expect_factor = true;
        while (expect_factor) {
            lx.skip_ws();
            char h = lx.peek();
            if (std::isdigit(static_cast<unsigned char>(h))) {
                coeff *= parse_number();
                saw_factor = true;
            } else if (h == 'x') {
                lx.take();
                std::size_t start = lx.i;
                while (lx.i < lx.s.size() && std::isdigit(static_cast<unsigned char>(lx.s[lx.i])))
                    ++lx.i;
                // bare "x" is shorthand for x1 in one-variable contexts
                std::size_t idx =
                    (start == lx.i) ? 1 : std::stoul(std::string(lx.s.substr(start, lx.i - start)));
                if (idx < 1 || idx > d)
                    throw parse_error("variable x" + std::to_string(idx) + " out of range (d = " +
                                      std::to_string(d) + ")");
                std::uint32_t e = 1;
                if (lx.peek() == '^') {
                    lx.take();
                    e = parse_exponent();
                }
                k[idx - 1] += e;
                saw_factor = true;
            } else {
                throw parse_error("unexpected character in polynomial: '" + std::string(text) + "'");
            }
            if (lx.peek() == '*') {
                lx.take();
                expect_factor = true;
            } else {
                expect_factor = false;
            }
        }
        if (!saw_factor)
            throw parse_error("empty term in polynomial: '" + std::string(text) + "'");
        out.add_term(k, Rat(sign) * coeff);
    }
    return out;
}

/// Canonical printing: grevlex-descending terms, '*' between factors,
/// exponent 1 and unit coefficients omitted.
inline std::string to_string(const poly_q& f)
{
    if (f.is_zero())
        return "0";
    std::string s;
    bool first = true;
    for (auto& [k, c] : f.terms()) {
        Rat a = c;
        bool neg = a < Rat(0);
        if (neg)
            a = -a;
        if (first) {
            if (neg)
                s += "-";
            first = false;
        } else {
            s += neg ? " - " : " + ";
        }
        std::string factors;
        for (std::size_t i = 0; i < k.size(); ++i) {
            if (k[i] == 0)
                continue;
            if (!factors.empty())
                factors += "*";
            factors += "x" + std::to_string(i + 1);
            if (k[i] > 1)
                factors += "^" + std::to_string(k[i]);
        }
        if (factors.empty())
            s += a.to_string();
        else if (a.is_one())
            s += factors;
        else
            s += a.to_string() + "*" + factors;
    }
    return s;
}

}  // namespace dcalc
