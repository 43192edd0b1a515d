#include "catch_amalgamated.hpp"

#include <random>

#include "support.hpp"
#include "transfer/omega.hpp"

using namespace transfer;
using namespace transfer::omega;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

DomainSpec disk(double r) { return DomainSpec(Disk{Complex(0.0), r}, Complex(0.0)); }

auto exp_sequence(double radius = 1.0)
{
    return CompositionSequence([](std::size_t j, Complex s, Complex z) { return std::exp(s - double(j) + z); },
                               disk(radius));
}

} // namespace

TEST_CASE("single-term composition is the map itself")
{
    const auto seq = exp_sequence();
    for (std::size_t n : {1u, 4u, 9u})
        CHECK(compose_finite(seq, n, n, Complex(-3.0, 0.2), Complex(0.1, -0.1)) ==
              std::exp(Complex(-3.0, 0.2) - double(n) + Complex(0.1, -0.1)));
}

TEST_CASE("affine composition matches the hand computation")
{
    const CompositionSequence seq([](std::size_t j, Complex, Complex z) { return z / 2.0 + std::pow(4.0, -double(j)); },
                                  disk(2.0));
    CHECK(compose_finite(seq, 1, 3, Complex(-7.0), Complex(0.0)) == Complex(testing::oracle::affine));
}

TEST_CASE("two-term exponential composition")
{
    const auto seq = exp_sequence();
    const Complex v = compose_finite(seq, 1, 2, Complex(-10.0), Complex(0.0));
    CHECK_THAT(v.real(), WithinRel(testing::oracle::two_term_exp, 1e-15));
    CHECK(v.imag() == 0.0);
}

TEST_CASE("compose_finite validates its arguments")
{
    const auto seq = exp_sequence(0.5);
    CHECK_THROWS_AS(compose_finite(seq, 0, 2, Complex(-10.0), Complex(0.0)), InvalidArgument);
    CHECK_THROWS_AS(compose_finite(seq, 3, 2, Complex(-10.0), Complex(0.0)), InvalidArgument);
    CHECK_THROWS_AS(compose_finite(seq, 1, 2, Complex(-10.0), Complex(0.6)), DomainEscape);
    // e^{s - 1 + z} at s = 1 lands outside |z| < 0.5.
    try {
        compose_finite(seq, 1, 3, Complex(1.0), Complex(0.0));
        FAIL("expected DomainEscape");
    } catch (const DomainEscape& e) {
        CHECK(std::abs(e.point) >= 0.5);
    }
    const CompositionSequence unchecked([](std::size_t j, Complex s, Complex z) { return std::exp(s - double(j) + z); },
                                        disk(0.5), false);
    CHECK_NOTHROW(compose_finite(unchecked, 1, 3, Complex(1.0), Complex(0.0)));
    const CompositionSequence blowup([](std::size_t, Complex, Complex z) { return 1e300 * (z + 1.0) * 1e300; },
                                     disk(1.0), false);
    CHECK_THROWS_AS(compose_finite(blowup, 1, 2, Complex(0.0), Complex(0.0)), NonFiniteValue);
}

TEST_CASE("rho estimates")
{
    const CompositionSequence at_anchor([](std::size_t, Complex, Complex) { return Complex(0.0); }, disk(1.0));
    const CompactSample strip{{Complex(-10.0, 0.0), Complex(-12.0, 0.5)}, "two points"};
    const CompactSample dom = sample_disk(Disk{Complex(0.0), 0.5}, 8, 8);
    CHECK(estimate_rho(at_anchor, 3, strip, dom) == 0.0);

    const CompositionSequence tiny([](std::size_t, Complex, Complex z) { return 1e-14 * z; }, disk(1.0));
    CHECK(estimate_rho(tiny, 2, strip, dom) <= 1e-13);

    // e^{Re s - j + Re z} with Re s <= -10 and |z| <= 0.5: sup e^{-9.5 - j}.
    CompactSample strip_grid;
    for (int i = 0; i <= 4; ++i)
        for (int m = 0; m <= 4; ++m)
            strip_grid.points.emplace_back(-10.0 - 0.5 * i, -0.5 + 0.25 * m);
    const auto seq = exp_sequence();
    for (std::size_t j : {1u, 3u, 7u}) {
        const double coarse = estimate_rho(seq, j, strip_grid, dom);
        const double dense = estimate_rho(seq, j, strip_grid, sample_disk(Disk{Complex(0.0), 0.5}, 100, 100));
        const double exact = std::exp(-9.5 - double(j));
        CHECK(coarse <= dense);
        CHECK_THAT(dense, WithinRel(exact, 1e-5));
        CHECK_THAT(coarse, WithinRel(exact, 1e-5));
    }
    CHECK_THROWS_AS(estimate_rho(seq, 1, CompactSample{}, dom), InvalidArgument);
}

TEST_CASE("tail estimate accumulates rho")
{
    const auto seq = exp_sequence();
    const CompactSample strip{{Complex(-10.0)}, "one point"};
    const CompactSample dom{{Complex(0.0)}, "anchor"};
    const TailEstimate t = estimate_tail(seq, 5, strip, dom);
    REQUIRE(t.rho.size() == 5);
    double sum = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
        sum += t.rho[j];
        CHECK(t.partial_sums[j] == sum);
        CHECK_THAT(t.rho[j], WithinRel(std::exp(-10.0 - double(j + 1)), 1e-15));
    }
}

TEST_CASE("adaptive composition examples")
{
    const CompositionSequence at_anchor([](std::size_t, Complex, Complex) { return Complex(0.0); }, disk(1.0));
    const AdaptiveResult trivial = compose_adaptive(at_anchor, Complex(-3.0), Complex(0.4), 1e-12, 50);
    CHECK(trivial.value == Complex(0.0));
    CHECK(trivial.n_used == 1);

    const auto seq = exp_sequence();
    const AdaptiveResult r = compose_adaptive(seq, Complex(-10.0), Complex(0.0), 1e-14, 200);
    CHECK(std::abs(r.value - testing::oracle::depth60_exp) < 1e-13);
    CHECK(r.n_used <= 12);
    CHECK(std::abs(compose_finite(seq, 1, 60, Complex(-10.0), Complex(0.0)) - testing::oracle::depth60_exp) < 1e-19);

    const AdaptiveResult r4 = compose_adaptive(seq, Complex(-10.0), Complex(0.4), 1e-14, 200);
    CHECK(std::abs(r.value - r4.value) < 1e-12);
}

TEST_CASE("adaptive composition gives up at n_max")
{
    // z -> z / 2 + 0.4 never forgets its start value within three steps.
    const CompositionSequence slow([](std::size_t, Complex, Complex z) { return 0.5 * z + 0.4; }, disk(1.0));
    CHECK_THROWS_AS(compose_adaptive(slow, Complex(0.0), Complex(0.0), 1e-12, 3), TruncationLimit);
    CHECK_THROWS_AS(compose_adaptive(slow, Complex(0.0), Complex(0.0), 0.0, 3), InvalidArgument);
    CHECK_NOTHROW(compose_adaptive(slow, Complex(0.0), Complex(0.0), 1e-12, 200));
}

TEST_CASE("splitting identity holds at every split point")
{
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double c = 0.3 + 0.2 * u(rng);
        const Complex w(u(rng), u(rng));
        const CompositionSequence seq(
            [c, w](std::size_t j, Complex s, Complex z) { return c * std::sin(z + w) * std::exp(s - 0.5 * double(j)); },
            disk(2.0));
        const Complex s(-2.0 + u(rng), 0.3 * u(rng));
        const Complex z(0.5 * u(rng), 0.5 * u(rng));
        const std::size_t m = 12;
        const Complex whole = compose_finite(seq, 1, m, s, z);
        for (std::size_t j = 1; j < m; ++j) {
            const Complex split = compose_finite(seq, 1, j, s, compose_finite(seq, j + 1, m, s, z));
            CHECK(std::abs(split - whole) <= 1e-13 * std::abs(whole));
        }
    }
}

TEST_CASE("tail bound for the exponential sequence")
{
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double radius = 0.5;
    const auto seq = exp_sequence(radius);
    const CompactSample dom = sample_disk(Disk{Complex(0.0), radius}, 16, 16);
    for (int trial = 0; trial < 50; ++trial) {
        const Complex s(-10.0 - 10.0 * u(rng), -0.5 + u(rng));
        const Complex z = std::polar(0.45 * u(rng), 6.283185307179586 * u(rng));
        const CompactSample at_s{{s}, "s"};
        for (std::size_t n = 1; n <= 5; ++n) {
            const double rho = estimate_rho(seq, n, at_s, dom);
            for (std::size_t m = n; m <= n + 30; ++m)
                CHECK(std::abs(compose_finite(seq, n, m, s, z)) <= rho * (1.0 + 1e-6));
        }
    }
}

TEST_CASE("tightening eps tenfold changes the value by less than 10 eps")
{
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto seq = exp_sequence();
    for (double eps : {1e-8, 1e-10, 1e-12}) {
        for (int trial = 0; trial < 10; ++trial) {
            const Complex s(-4.0 + 2.0 * u(rng), 0.5 * u(rng));
            const Complex z(0.6 * u(rng), 0.6 * u(rng));
            const Complex a = compose_adaptive(seq, s, z, eps, 200).value;
            const Complex b = compose_adaptive(seq, s, z, eps / 10.0, 200).value;
            CHECK(std::abs(a - b) <= 10.0 * eps);
        }
    }
}

TEST_CASE("composition is deterministic")
{
    const auto seq = exp_sequence();
    const AdaptiveResult a = compose_adaptive(seq, Complex(-3.5, 0.25), Complex(0.2, 0.1), 1e-13, 200);
    const AdaptiveResult b = compose_adaptive(seq, Complex(-3.5, 0.25), Complex(0.2, 0.1), 1e-13, 200);
    CHECK(a.value == b.value);
    CHECK(a.n_used == b.n_used);
}

TEST_CASE("polynomial decay terminates")
{
    // rho_j ~ 1 / j^2 as in the rational example.
    const CompositionSequence seq(
        [](std::size_t j, Complex s, Complex z) {
            const Complex t = s - 2.0 * double(j);
            return (z + 0.25) / (1.0 + t * t);
        },
        disk(1.0));
    const AdaptiveResult r = compose_adaptive(seq, Complex(-20.0), Complex(0.0), 1e-12, 200);
    const Complex deep = compose_finite(seq, 1, 150, Complex(-20.0), Complex(0.0));
    CHECK(std::abs(r.value - deep) < 1e-11);
}
