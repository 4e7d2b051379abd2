#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ipn/measure.hpp"

using ipn::AtomicMeasure;

TEST_CASE("construction validates and canonicalizes") {
    CHECK_THROWS_AS(AtomicMeasure({}), ipn::ConfigError);
    CHECK_THROWS_AS(AtomicMeasure({{-1.0, 1.0}}), ipn::ConfigError);
    CHECK_THROWS_AS(AtomicMeasure({{0.0, 0.5}}), ipn::ConfigError);
    CHECK_THROWS_AS(AtomicMeasure({{1.0, 0.5}, {2.0, 0.6}}), ipn::ConfigError);

    // duplicates merged
    const AtomicMeasure m({{1.0, 0.25}, {1.0, 0.25}, {3.0, 0.5}});
    CHECK(m.size() == 2);
    CHECK(m.weights()[0] == doctest::Approx(0.5));

    // unsorted input accepted
    const AtomicMeasure s({{3.0, 0.5}, {1.0, 0.5}});
    CHECK(s.locations()[0] == 1.0);
}

TEST_CASE("stieltjes examples") {
    const auto d0 = AtomicMeasure::dirac(0.0);
    CHECK(d0.stieltjes(2.0) == doctest::Approx(0.5));
    const auto gi = d0.stieltjes(std::complex<double>(0, 1));
    CHECK(gi.real() == doctest::Approx(0.0));
    CHECK(gi.imag() == doctest::Approx(-1.0));

    const auto m = AtomicMeasure::two_point(1.0, 0.5, 3.0, 0.5);
    CHECK(m.stieltjes(2.0) == doctest::Approx(0.0));

    CHECK_THROWS_AS(d0.stieltjes(0.0), ipn::DomainError);
}

TEST_CASE("stieltjes derivative examples and finite differences") {
    const auto d0 = AtomicMeasure::dirac(0.0);
    CHECK(d0.stieltjes_derivative(2.0) == doctest::Approx(-0.25));
    CHECK(d0.stieltjes_derivative(1.0) == doctest::Approx(-1.0));
    const auto m = AtomicMeasure::two_point(1.0, 0.5, 3.0, 0.5);
    CHECK(m.stieltjes_derivative(2.0) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(m.stieltjes_derivative(3.0), ipn::DomainError);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> off(3.5, 20.0);
    for (int k = 0; k < 50; ++k) {
        const double x = off(rng);
        const double h = 1e-5 * (1.0 + std::abs(x));
        const double fd = (m.stieltjes(x + h) - m.stieltjes(x - h)) / (2 * h);
        CHECK(m.stieltjes_derivative(x) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("upper half-plane mapping properties") {
    const auto m = AtomicMeasure({{0.5, 0.2}, {1.0, 0.3}, {4.0, 0.5}});
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> re(-5.0, 8.0), im(1e-6, 10.0);
    for (int k = 0; k < 200; ++k) {
        const std::complex<double> z(re(rng), im(rng));
        const auto g = m.stieltjes(z);
        CHECK(g.imag() < 0);
        CHECK(std::abs(g) <= 1.0 / z.imag() + 1e-12);
        const auto gc = m.stieltjes(std::conj(z));
        CHECK(gc.real() == doctest::Approx(g.real()));
        CHECK(gc.imag() == doctest::Approx(-g.imag()));
    }
    // z g(z) -> 1 along the imaginary axis
    const std::complex<double> big(0, 1e6);
    CHECK(std::abs(big * m.stieltjes(big) - 1.0) < 1e-5);
}

TEST_CASE("quantile discretization") {
    const auto u2 = AtomicMeasure::uniform(0.0, 1.0, 2);
    CHECK(u2.locations() == std::vector<double>{0.25, 0.75});
    CHECK(u2.weights() == std::vector<double>{0.5, 0.5});

    const auto u4 = AtomicMeasure::uniform(0.0, 1.0, 4);
    CHECK(u4.locations() == std::vector<double>{0.125, 0.375, 0.625, 0.875});

    const auto u1000 = AtomicMeasure::uniform(0.0, 1.0, 1000);
    CHECK(u1000.max_atom() == doctest::Approx(0.9995));

    for (int m = 1; m <= 40; ++m) {
        const auto u = AtomicMeasure::uniform(0.2, 3.4, m);
        CHECK(std::abs(u.mean() - 1.8) <= (3.4 - 0.2) / (2 * m));
    }
}

TEST_CASE("gaps") {
    const auto d0 = AtomicMeasure::dirac(0.0);
    auto g = d0.gaps(10.0);
    REQUIRE(g.size() == 2);
    CHECK(g[0].lo == doctest::Approx(-10.0));
    CHECK(g[0].hi == doctest::Approx(0.0));
    CHECK(g[1].lo == doctest::Approx(0.0));
    CHECK(std::isinf(g[1].hi));

    const auto m = AtomicMeasure::two_point(1.0, 0.5, 3.0, 0.5);
    g = m.gaps(10.0);
    REQUIRE(g.size() == 3);
    CHECK(g[0].lo == doctest::Approx(-9.0));
    CHECK(g[1].lo == doctest::Approx(1.0));
    CHECK(g[1].hi == doctest::Approx(3.0));
    CHECK(g[2].lo == doctest::Approx(3.0));
}

TEST_CASE("json round trip") {
    const auto m = AtomicMeasure({{0.5, 0.25}, {2.0, 0.75}});
    const auto back = AtomicMeasure::from_json(m.to_json());
    CHECK(back.locations() == m.locations());
    CHECK(back.weights() == m.weights());
}
