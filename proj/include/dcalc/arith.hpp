// Exact coefficient arithmetic: arbitrary-precision rationals with p-adic
// valuation bookkeeping.  Everything downstream works over Q, with membership
// in Z_(p) (denominator prime to p) checked at operation boundaries.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dcalc {

using Int = boost::multiprecision::cpp_int;

// ---------------------------------------------------------------------------
// Error taxonomy.  The CLI maps these onto its exit codes: parse_error -> 2,
// domain_error and subclasses -> 3, internal_error -> 4.

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// malformed input text / JSON
struct parse_error : error {
    using error::error;
};

// violated operation precondition (arity, ring, level, shape, divisibility)
struct domain_error : error {
    using error::error;
};

struct not_divisible : domain_error {
    using domain_error::domain_error;
};
struct non_integral_coefficient : domain_error {
    using domain_error::domain_error;
};
struct congruence_failure : domain_error {
    using domain_error::domain_error;
};
struct unsupported_shape : domain_error {
    using domain_error::domain_error;
};
struct level_error : domain_error {
    using domain_error::domain_error;
};
struct non_convergence : domain_error {
    using domain_error::domain_error;
};

// an identity the theory guarantees failed to hold; always a bug
struct internal_error : error {
    using error::error;
};

// ---------------------------------------------------------------------------

inline bool is_prime(const Int& n)
{
    if (n < 2)
        return false;
    for (Int q = 2; q * q <= n; ++q)
        if (n % q == 0)
            return false;
    return true;
}

/// Fixed prime p plus an optional working precision p^N for truncated rings.
struct prime_ctx {
    Int p;
    std::optional<unsigned> prec;  // N in Z/p^N, when present

    explicit prime_ctx(Int prime, std::optional<unsigned> n = std::nullopt)
        : p(std::move(prime)), prec(n)
    {
        if (!is_prime(p))
            throw domain_error("prime_ctx: p must be prime, got " + p.str());
        if (prec && *prec < 1)
            throw domain_error("prime_ctx: precision must be >= 1");
    }

    Int modulus() const
    {
        if (!prec)
            throw domain_error("prime_ctx: no precision set");
        Int m = 1;
        for (unsigned i = 0; i < *prec; ++i)
            m *= p;
        return m;
    }

    bool operator==(const prime_ctx& o) const { return p == o.p && prec == o.prec; }
};

// ---------------------------------------------------------------------------
// p-adic valuation with a dedicated +infinity sentinel for v(0).

struct padic_val {
    bool infinite = false;
    long long v = 0;

    static padic_val infinity() { return {true, 0}; }
    static padic_val finite(long long x) { return {false, x}; }

    bool operator==(const padic_val& o) const
    {
        return infinite == o.infinite && (infinite || v == o.v);
    }
    bool operator<(const padic_val& o) const
    {
        if (infinite)
            return false;
        if (o.infinite)
            return true;
        return v < o.v;
    }
    bool operator>=(const padic_val& o) const { return !(*this < o); }
    bool operator<=(long long x) const { return !infinite && v <= x; }
    bool at_least(long long x) const { return infinite || v >= x; }

    padic_val operator+(const padic_val& o) const
    {
        if (infinite || o.infinite)
            return infinity();
        return finite(v + o.v);
    }

    std::string to_string() const { return infinite ? "+inf" : std::to_string(v); }
};

inline padic_val valuation(const Int& n, const Int& p)
{
    if (n == 0)
        return padic_val::infinity();
    Int a = n;
    long long v = 0;
    while (a % p == 0) {
        a /= p;
        ++v;
    }
    return padic_val::finite(v);
}

// ---------------------------------------------------------------------------

/// Exact rational in lowest terms with positive denominator.
class Rat {
public:
    Rat() : num_(0), den_(1) {}
    Rat(int n) : num_(n), den_(1) {}
    Rat(long long n) : num_(n), den_(1) {}
    Rat(Int n) : num_(std::move(n)), den_(1) {}
    Rat(Int n, Int d) : num_(std::move(n)), den_(std::move(d)) { normalize(); }

    const Int& num() const { return num_; }
    const Int& den() const { return den_; }

    bool is_zero() const { return num_ == 0; }
    bool is_one() const { return num_ == 1 && den_ == 1; }
    bool is_integer() const { return den_ == 1; }
    bool is_p_integral(const Int& p) const { return den_ % p != 0; }

    Rat operator-() const
    {
        Rat r;
        r.num_ = -num_;
        r.den_ = den_;
        return r;
    }
    Rat operator+(const Rat& o) const { return Rat(num_ * o.den_ + o.num_ * den_, den_ * o.den_); }
    Rat operator-(const Rat& o) const { return Rat(num_ * o.den_ - o.num_ * den_, den_ * o.den_); }
    Rat operator*(const Rat& o) const { return Rat(num_ * o.num_, den_ * o.den_); }
    Rat operator/(const Rat& o) const
    {
        if (o.num_ == 0)
            throw domain_error("Rat: division by zero");
        return Rat(num_ * o.den_, den_ * o.num_);
    }
    Rat& operator+=(const Rat& o) { return *this = *this + o; }
    Rat& operator-=(const Rat& o) { return *this = *this - o; }
    Rat& operator*=(const Rat& o) { return *this = *this * o; }
    Rat& operator/=(const Rat& o) { return *this = *this / o; }

    bool operator==(const Rat& o) const { return num_ == o.num_ && den_ == o.den_; }
    bool operator!=(const Rat& o) const { return !(*this == o); }
    bool operator<(const Rat& o) const { return num_ * o.den_ < o.num_ * den_; }

    /// Accepts "a" or "a/b" with optional sign.
    static Rat parse(std::string_view s)
    {
        auto bad = [&] { throw parse_error("bad rational literal: '" + std::string(s) + "'"); };
        if (s.empty())
            bad();
        std::size_t slash = s.find('/');
        auto parse_int = [&](std::string_view t) -> Int {
            if (t.empty())
                bad();
            std::size_t i = (t[0] == '+' || t[0] == '-') ? 1 : 0;
            if (i == t.size())
                bad();
            for (std::size_t j = i; j < t.size(); ++j)
                if (t[j] < '0' || t[j] > '9')
                    bad();
            return Int(std::string(t));
        };
        if (slash == std::string_view::npos)
            return Rat(parse_int(s));
        Int n = parse_int(s.substr(0, slash));
        Int d = parse_int(s.substr(slash + 1));
        if (d == 0)
            bad();
        return Rat(n, d);
    }

    std::string to_string() const
    {
        if (den_ == 1)
            return num_.str();
        return num_.str() + "/" + den_.str();
    }

private:
    Int num_, den_;

    void normalize()
    {
        if (den_ == 0)
            throw domain_error("Rat: zero denominator");
        if (den_ < 0) {
            num_ = -num_;
            den_ = -den_;
        }
        Int g = boost::multiprecision::gcd(num_, den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
        if (num_ == 0)
            den_ = 1;
    }
};

inline padic_val valuation(const Rat& x, const prime_ctx& ctx)
{
    if (x.is_zero())
        return padic_val::infinity();
    padic_val vn = valuation(x.num(), ctx.p);
    padic_val vd = valuation(x.den(), ctx.p);
    return padic_val::finite(vn.v - vd.v);
}

/// v_p(n!) by Legendre's formula (n - digit_sum_p(n)) / (p - 1).
inline Int factorial_valuation(const Int& n, const prime_ctx& ctx)
{
    if (n < 0)
        throw domain_error("factorial_valuation: n must be >= 0");
    Int s = 0, a = n;
    while (a > 0) {
        s += a % ctx.p;
        a /= ctx.p;
    }
    return (n - s) / (ctx.p - 1);
}

/// x / p for x of valuation >= 1; refuses anything else.
inline Rat exact_divide_by_p(const Rat& x, const prime_ctx& ctx)
{
    if (x.is_zero())
        return x;
    if (!valuation(x, ctx).at_least(1))
        throw not_divisible("exact_divide_by_p: v_p(x) <= 0 for x = " + x.to_string());
    return x / Rat(ctx.p);
}

// ---------------------------------------------------------------------------
// Small exact combinatorics used throughout; no shared caches.

inline Int factorial(const Int& n)
{
    Int r = 1;
    for (Int i = 2; i <= n; ++i)
        r *= i;
    return r;
}

inline Int binomial(const Int& n, const Int& k)
{
    if (k < 0 || k > n)
        return 0;
    Int kk = k;
    if (n - k < kk)
        kk = n - k;
    Int r = 1;
    for (Int i = 1; i <= kk; ++i) {
        r *= n - kk + i;
        r /= i;  // exact at every step
    }
    return r;
}

inline Int pow_int(const Int& b, unsigned e)
{
    Int r = 1;
    for (unsigned i = 0; i < e; ++i)
        r *= b;
    return r;
}

}  // namespace dcalc
