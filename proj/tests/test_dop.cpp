#include "dcalc/dop.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace dcalc;

namespace {

poly_q rand_ipoly(std::mt19937_64& rng, std::size_t d, unsigned maxdeg, int terms)
{
    poly_q f(d);
    for (int t = 0; t < terms; ++t) {
        multi_index k(d);
        for (std::size_t i = 0; i < d; ++i)
            k[i] = rng() % (maxdeg + 1);
        f.add_term(k, Rat(static_cast<long long>(rng() % 21) - 10));
    }
    return f;
}

diff_op rand_op(std::mt19937_64& rng, const prime_ctx& pc, unsigned m, std::size_t d,
                std::uint64_t max_order, int terms)
{
    diff_op op(pc, m, d);
    for (int t = 0; t < terms; ++t) {
        multi_index K(d);
        std::uint64_t left = max_order;
        for (std::size_t i = 0; i < d; ++i) {
            K[i] = static_cast<std::uint32_t>(rng() % (left + 1));
            left -= K[i];
        }
        op.add(K, rand_ipoly(rng, d, 3, 2));
    }
    return op;
}

}  // namespace

TEST_CASE("basis action")
{
    prime_ctx p2{2};
    poly_q x3 = parse_poly("x1^3", 1);

    // level 0: del^{2} = d^2, so del^{2}(x^3) = 6x
    auto d2m0 = diff_op::basis(p2, 0, multi_index{2});
    CHECK(apply(d2m0, x3) == parse_poly("6*x1", 1));

    // level 1: Q = 1, so the action is the divided derivative: 3x
    auto d2m1 = diff_op::basis(p2, 1, multi_index{2});
    CHECK(apply(d2m1, x3) == parse_poly("3*x1", 1));

    // identity
    auto d0 = diff_op::basis(p2, 2, multi_index{0});
    poly_q f = parse_poly("5*x1^4 - 2*x1 + 1", 1);
    CHECK(apply(d0, f) == f);

    CHECK_THROWS_AS(apply(d0, parse_poly("x1*x2", 2)), domain_error);
}

TEST_CASE("composition rewrites")
{
    prime_ctx p2{2};

    // [d, x] = 1 at level 0: d o x = x d + 1
    auto d1 = diff_op::basis(p2, 0, multi_index{1});
    diff_op mul_x(p2, 0, 1);
    mul_x.add(multi_index{0}, parse_poly("x1", 1));
    auto dx = compose(d1, mul_x);
    CHECK(dx.coefficient(multi_index{1}) == parse_poly("x1", 1));
    CHECK(dx.coefficient(multi_index{0}) == poly_q::constant(1, Rat(1)));

    // level 0 basis composition: plain addition of orders
    auto d2 = diff_op::basis(p2, 0, multi_index{2});
    auto d3 = diff_op::basis(p2, 0, multi_index{3});
    auto d5 = compose(d2, d3);
    CHECK(d5.coefficient(multi_index{5}) == poly_q::constant(1, Rat(1)));
    CHECK(d5.terms().size() == 1);

    // p=2, m=1: del^{1} o del^{1} = padic_binom((2),(1),1) del^{2} = 2 del^{2}
    // (del^{1} is the plain derivative, del^{2} is d^2/2)
    auto e1 = diff_op::basis(p2, 1, multi_index{1});
    auto e2 = compose(e1, e1);
    CHECK(e2.coefficient(multi_index{2}) == poly_q::constant(1, Rat(2)));
    CHECK(e2.terms().size() == 1);

    // level mismatch refuses
    CHECK_THROWS_AS(compose(d1, e1), level_error);
}

TEST_CASE("compose agrees with the apply oracle")
{
    std::mt19937_64 rng(21);
    for (long long p : {2, 3}) {
        prime_ctx pc{Int(p)};
        for (unsigned m = 0; m <= 2; ++m) {
            std::uint64_t max_order = pow_int(pc.p, m + 1).convert_to<std::uint64_t>();
            for (int rep = 0; rep < 12; ++rep) {
                std::size_t d = 1 + rng() % 2;
                auto P = rand_op(rng, pc, m, d, max_order, 2);
                auto Q = rand_op(rng, pc, m, d, max_order, 2);
                poly_q f = rand_ipoly(rng, d, 8, 4);
                CHECK(apply(compose(P, Q), f) == apply(P, apply(Q, f)));
            }
        }
    }
}

TEST_CASE("composition is associative")
{
    std::mt19937_64 rng(22);
    for (long long p : {2, 3}) {
        prime_ctx pc{Int(p)};
        for (unsigned m = 0; m <= 1; ++m) {
            for (int rep = 0; rep < 6; ++rep) {
                std::size_t d = 1 + rng() % 2;
                auto P = rand_op(rng, pc, m, d, 4, 2);
                auto Q = rand_op(rng, pc, m, d, 4, 2);
                auto R = rand_op(rng, pc, m, d, 4, 2);
                CHECK(compose(compose(P, Q), R) == compose(P, compose(Q, R)));
            }
        }
    }
}

TEST_CASE("change of level")
{
    prime_ctx p2{2};

    // K=(2), m: 0 -> 1 gives 2!/1! = 2
    auto d2 = diff_op::basis(p2, 0, multi_index{2});
    auto r = change_level(d2, 1);
    CHECK(r.coefficient(multi_index{2}) == poly_q::constant(1, Rat(2)));

    // identity when m' = m
    CHECK(change_level(d2, 0) == d2);

    // small K: all quotients zero, factor 1
    auto d1 = diff_op::basis(p2, 0, multi_index{1});
    CHECK(change_level(d1, 3).coefficient(multi_index{1}) == poly_q::constant(1, Rat(1)));

    CHECK_THROWS_AS(change_level(r, 0), level_error);

    // ring homomorphism + apply preservation on random operators
    std::mt19937_64 rng(23);
    for (long long p : {2, 3}) {
        prime_ctx pc{Int(p)};
        for (int rep = 0; rep < 10; ++rep) {
            unsigned m = rng() % 2;
            unsigned m2 = m + 1 + rng() % 2;
            std::size_t d = 1 + rng() % 2;
            auto P = rand_op(rng, pc, m, d, 5, 2);
            auto Q = rand_op(rng, pc, m, d, 5, 2);
            CHECK(change_level(compose(P, Q), m2) == compose(change_level(P, m2), change_level(Q, m2)));
            poly_q f = rand_ipoly(rng, d, 6, 3);
            CHECK(apply(change_level(P, m2), f) == apply(P, f));
        }
    }
}

TEST_CASE("level-m Leibniz on products")
{
    std::mt19937_64 rng(24);
    for (long long p : {2, 3}) {
        prime_ctx pc{Int(p)};
        for (unsigned m = 0; m <= 2; ++m) {
            for (int rep = 0; rep < 8; ++rep) {
                std::size_t d = 1 + rng() % 2;
                poly_q f = rand_ipoly(rng, d, 4, 3);
                poly_q g = rand_ipoly(rng, d, 4, 3);
                multi_index K(d);
                K[0] = 1 + rng() % 6;

                poly_q lhs = apply(diff_op::basis(pc, m, K), f * g);
                poly_q rhs(d);
                for_each_below(K, [&](const multi_index& I) {
                    rhs += apply(diff_op::basis(pc, m, I), f) *
                           apply(diff_op::basis(pc, m, K - I), g) *
                           Rat(qfac_ratio(K, I, m, pc));
                });
                CHECK(lhs == rhs);
            }
        }
    }
}

TEST_CASE("horizontality of ideals")
{
    prime_ctx p2{2};

    // (2, x^4) at m=1: derivatives of x^4 vanish mod 2 up to order 2
    CHECK(is_horizontal(ideal_spec{{parse_poly("x1^4", 1)}}, 1, p2));

    // (2, x^2) at m=1: del^{2}(x^2) = 1 is not in (x^2) mod 2
    CHECK_FALSE(is_horizontal(ideal_spec{{parse_poly("x1^2", 1)}}, 1, p2));

    // (p) alone: zero ideal mod p
    CHECK(is_horizontal(ideal_spec{}, 1, p2));
    CHECK(is_horizontal(ideal_spec{{parse_poly("2", 1)}}, 2, p2));

    // the family (p, f^{p^{m+1}}) is horizontal: entries of K stay below
    // p^{m+1}, so every divided derivative of a p^{m+1}-th power dies mod p
    std::mt19937_64 rng(25);
    for (long long p : {2, 3}) {
        prime_ctx pc{Int(p)};
        for (unsigned m = 0; m <= 1; ++m) {
            for (int rep = 0; rep < 5; ++rep) {
                std::size_t d = 1 + rng() % 2;
                poly_q f = rand_ipoly(rng, d, 2, 2);
                std::uint64_t e = pow_int(pc.p, m + 1).convert_to<std::uint64_t>();
                CHECK(is_horizontal(ideal_spec{{f.pow(e)}}, m, pc));
            }
        }
    }

    // negative witnesses (p, x^{p^m}) for m >= 1
    for (long long p : {2, 3}) {
        prime_ctx pc{Int(p)};
        for (unsigned m = 1; m <= 2; ++m) {
            std::uint64_t e = pow_int(pc.p, m).convert_to<std::uint64_t>();
            poly_q xe = poly_q::monomial(multi_index{static_cast<std::uint32_t>(e)}, Rat(1));
            CHECK_FALSE(is_horizontal(ideal_spec{{xe}}, m, pc));
        }
    }
}

TEST_CASE("horizontality cross-checked against the linear-algebra oracle")
{
    // same membership questions, answered by degree-bounded span search
    std::mt19937_64 rng(26);
    prime_ctx pc{2};
    unsigned m = 1;
    for (int rep = 0; rep < 10; ++rep) {
        std::size_t d = 1 + rng() % 2;
        poly_q f = rand_ipoly(rng, d, 1, 2);
        poly_q g = f.pow(4);  // p^{m+1} = 4
        ideal_spec J{{g}};

        poly_m gm = reduce_mod_p(g, pc);
        std::vector<poly_m> gens;
        if (!gm.is_zero())
            gens.push_back(gm);
        bool horizontal_by_oracle = true;
        std::uint64_t nf_bound = std::max<std::uint64_t>(g.degree(), 1);
        for_each_multi_index(d, 2, [&](const multi_index& K) {
            if (K.is_zero() || !horizontal_by_oracle)
                return;
            poly_q der = divided_derivative(g, K) * Rat(q_factorial(K, m, pc));
            poly_m dm = reduce_mod_p(der, pc);
            if (gens.empty()) {
                if (!dm.is_zero())
                    horizontal_by_oracle = false;
                return;
            }
            if (!oracles::ideal_member_linear(dm, gens, nf_bound))
                horizontal_by_oracle = false;
        });
        CHECK(is_horizontal(J, m, pc) == horizontal_by_oracle);
    }
}
