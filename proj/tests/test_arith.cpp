#include "dcalc/arith.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace dcalc;

TEST_CASE("valuation of integers and rationals")
{
    prime_ctx p2{2}, p3{3}, p5{5};

    CHECK(valuation(Rat(12), p2) == padic_val::finite(2));  // 12 = 4*3
    CHECK(valuation(Rat(0), p3) == padic_val::infinity());
    CHECK(valuation(Rat(3, 5), p5) == padic_val::finite(-1));

    CHECK(valuation(Rat(1, 8), p2) == padic_val::finite(-3));
    CHECK(valuation(Rat(18, 5), p3) == padic_val::finite(2));
}

TEST_CASE("valuation is additive and ultrametric on random pairs")
{
    prime_ctx p3{3};
    std::mt19937_64 rng(42);
    for (int i = 0; i < 300; ++i) {
        Int an = Int(static_cast<long long>(rng() % 2001)) - 1000;
        Int ad = Int(static_cast<long long>(rng() % 999)) + 1;
        Int bn = Int(static_cast<long long>(rng() % 2001)) - 1000;
        Int bd = Int(static_cast<long long>(rng() % 999)) + 1;
        Rat x(an, ad), y(bn, bd);
        padic_val vx = valuation(x, p3), vy = valuation(y, p3);
        CHECK(valuation(x * y, p3) == vx + vy);
        padic_val vmin = vx < vy ? vx : vy;
        CHECK(valuation(x + y, p3) >= vmin);
    }
}

TEST_CASE("factorial valuation via Legendre")
{
    prime_ctx p2{2}, p3{3}, p7{7};
    CHECK(factorial_valuation(4, p2) == 3);  // 4! = 24 = 2^3 * 3
    CHECK(factorial_valuation(0, p7) == 0);
    CHECK(factorial_valuation(6, p3) == 2);  // 720 = 9 * 80

    // agreement with the direct count, and the strict bound v_p(n!) < n
    for (Int n = 1; n <= 60; ++n) {
        Int direct = valuation(factorial(n), p2.p).v;
        CHECK(factorial_valuation(n, p2) == direct);
        CHECK(factorial_valuation(n, p2) < n);
        CHECK(factorial_valuation(n, p3) < n);
    }
}

TEST_CASE("exact division by p")
{
    prime_ctx p2{2};
    CHECK(exact_divide_by_p(Rat(6), p2) == Rat(3));
    CHECK(exact_divide_by_p(Rat(2, 3), p2) == Rat(1, 3));
    CHECK_THROWS_AS(exact_divide_by_p(Rat(3), p2), not_divisible);
    CHECK_THROWS_AS(exact_divide_by_p(Rat(1, 2), p2), not_divisible);

    // round trip p*x -> x for p-integral x (odd denominator)
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        Rat x(Int(static_cast<long long>(rng() % 401)) - 200,
              2 * Int(static_cast<long long>(rng() % 50)) + 1);
        CHECK(exact_divide_by_p(x * Rat(2), p2) == x);
    }
}

TEST_CASE("rational literal grammar")
{
    CHECK(Rat::parse("3/5") == Rat(3, 5));
    CHECK(Rat::parse("-4/6") == Rat(-2, 3));
    CHECK(Rat::parse("7") == Rat(7));
    CHECK(Rat::parse("-0") == Rat(0));
    CHECK_THROWS_AS(Rat::parse("1/0"), parse_error);
    CHECK_THROWS_AS(Rat::parse("a"), parse_error);
    CHECK_THROWS_AS(Rat::parse(""), parse_error);
}

TEST_CASE("prime context validation")
{
    CHECK_THROWS_AS(prime_ctx(4), domain_error);
    CHECK_THROWS_AS(prime_ctx(1), domain_error);
    CHECK_THROWS_AS(prime_ctx(2, 0u), domain_error);
    prime_ctx c(2, 3u);
    CHECK(c.modulus() == 8);
}

TEST_CASE("p-integrality bookkeeping")
{
    prime_ctx p5{5};
    CHECK(Rat(3, 4).is_p_integral(p5.p));
    CHECK_FALSE(Rat(1, 5).is_p_integral(p5.p));
    CHECK(Rat(10, 7).is_p_integral(p5.p));
}
