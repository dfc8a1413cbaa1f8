// Multi-indices in N^d: exponent vectors of monomials, indices of the
// divided-power basis elements, and operator basis indices.  Monomial order
// is graded reverse lexicographic throughout.
#pragma once

#include "dcalc/arith.hpp"

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

namespace dcalc {

class multi_index {
public:
    multi_index() = default;
    explicit multi_index(std::size_t d) : e_(d, 0) {}
    multi_index(std::initializer_list<std::uint32_t> l) : e_(l) {}
    explicit multi_index(std::vector<std::uint32_t> v) : e_(std::move(v)) {}

    std::size_t size() const { return e_.size(); }
    std::uint32_t operator[](std::size_t i) const { return e_[i]; }
    std::uint32_t& operator[](std::size_t i) { return e_[i]; }
    const std::vector<std::uint32_t>& entries() const { return e_; }

    std::uint64_t total() const
    {
        std::uint64_t s = 0;
        for (auto x : e_)
            s += x;
        return s;
    }
    bool is_zero() const { return total() == 0; }

    bool operator==(const multi_index& o) const { return e_ == o.e_; }
    bool operator!=(const multi_index& o) const { return e_ != o.e_; }

    /// componentwise partial order
    bool leq(const multi_index& o) const
    {
        check_same_arity(o);
        for (std::size_t i = 0; i < e_.size(); ++i)
            if (e_[i] > o.e_[i])
                return false;
        return true;
    }

    multi_index operator+(const multi_index& o) const
    {
        check_same_arity(o);
        multi_index r(*this);
        for (std::size_t i = 0; i < e_.size(); ++i)
            r.e_[i] += o.e_[i];
        return r;
    }

    /// componentwise difference; caller guarantees o <= *this
    multi_index operator-(const multi_index& o) const
    {
        check_same_arity(o);
        multi_index r(*this);
        for (std::size_t i = 0; i < e_.size(); ++i) {
            if (o.e_[i] > e_[i])
                throw domain_error("multi_index: subtraction underflow");
            r.e_[i] -= o.e_[i];
        }
        return r;
    }

    /// concatenate index blocks (two-copy and three-copy envelope indexing)
    multi_index concat(const multi_index& o) const
    {
        multi_index r(*this);
        r.e_.insert(r.e_.end(), o.e_.begin(), o.e_.end());
        return r;
    }
    multi_index block(std::size_t from, std::size_t len) const
    {
        return multi_index(std::vector<std::uint32_t>(e_.begin() + from, e_.begin() + from + len));
    }

    std::string to_string() const
    {
        std::string s = "(";
        for (std::size_t i = 0; i < e_.size(); ++i) {
            if (i)
                s += ",";
            s += std::to_string(e_[i]);
        }
        return s + ")";
    }

    void check_same_arity(const multi_index& o) const
    {
        if (e_.size() != o.e_.size())
            throw domain_error("multi_index: arity mismatch " + std::to_string(e_.size()) +
                               " vs " + std::to_string(o.e_.size()));
    }

private:
    std::vector<std::uint32_t> e_;
};

/// grevlex: compare by total degree, ties broken by the *last* differing
/// entry, larger entry first.
inline bool grevlex_less(const multi_index& a, const multi_index& b)
{
    a.check_same_arity(b);
    auto ta = a.total(), tb = b.total();
    if (ta != tb)
        return ta < tb;
    for (std::size_t i = a.size(); i-- > 0;)
        if (a[i] != b[i])
            return a[i] > b[i];
    return false;
}

struct grevlex_greater_t {
    bool operator()(const multi_index& a, const multi_index& b) const
    {
        return grevlex_less(b, a);
    }
};

/// Visit every K in N^d with |K| <= n, in grevlex-ascending order per degree.
inline void for_each_multi_index(std::size_t d, std::uint64_t n,
                                 const std::function<void(const multi_index&)>& fn)
{
    multi_index k(d);
    std::function<void(std::size_t, std::uint64_t)> rec = [&](std::size_t pos,
                                                              std::uint64_t left) {
        if (pos + 1 == d || d == 0) {
            if (d != 0) {
                for (std::uint64_t v = 0; v <= left; ++v) {
                    k[pos] = static_cast<std::uint32_t>(v);
                    fn(k);
                }
                k[pos] = 0;
            } else {
                fn(k);
            }
            return;
        }
        for (std::uint64_t v = 0; v <= left; ++v) {
            k[pos] = static_cast<std::uint32_t>(v);
            rec(pos + 1, left - v);
        }
        k[pos] = 0;
    };
    rec(0, n);
}

/// Visit every I with I <= K componentwise.
inline void for_each_below(const multi_index& K,
                           const std::function<void(const multi_index&)>& fn)
{
    multi_index i(K.size());
    std::function<void(std::size_t)> rec = [&](std::size_t pos) {
        if (pos == K.size()) {
            fn(i);
            return;
        }
        for (std::uint32_t v = 0; v <= K[pos]; ++v) {
            i[pos] = v;
            rec(pos + 1);
        }
        i[pos] = 0;
    };
    rec(0);
}

}  // namespace dcalc
