#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ipn/spikes.hpp"

using namespace ipn;

TEST_CASE("classification, dirac reference model") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0), {{2.0, 1}, {0.5, 1}});
    const auto prof = support(p);
    const auto preds = classify(p, prof);
    REQUIRE(preds.size() == 2);

    CHECK(preds[0].in_outlier_set);
    CHECK(*preds[0].rho == doctest::Approx(3.75).epsilon(1e-10));
    CHECK(*preds[0].tau == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(preds[0].rank_range == std::pair<int, int>{1, 1});
    // rho strictly outside the bulk
    CHECK(*preds[0].rho > prof.support.back().hi);

    // theta = 0.5 below the threshold sigma^2 sqrt(c) = 0.7071
    CHECK_FALSE(preds[1].in_outlier_set);
    CHECK_FALSE(preds[1].rho.has_value());
    CHECK_FALSE(preds[1].tau.has_value());
}

TEST_CASE("tau: two routes and closed form") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0), {{4.0, 1}, {2.0, 1}});
    const auto prof = support(p);

    CHECK(tau_value(p, 2.0) == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(tau_value(p, 4.0) == doctest::Approx(0.96875 / 1.125).epsilon(1e-10));
    CHECK_THROWS_AS(tau_value(p, 0.5), DomainError);

    // second route: (1 - s^2 c g_mu(rho)) / omega'(rho), omega' by finite
    // differences of omega_on_gap at rho
    for (double theta : {2.0, 4.0}) {
        const double rho = phi(p, theta);
        const double h = 1e-6 * (1.0 + rho);
        const double omega_prime =
            (omega_on_gap(p, rho + h, prof) - omega_on_gap(p, rho - h, prof)) / (2 * h);
        const double route2 = (1.0 - p.sigma * p.sigma * p.c * g_mu_on_gap(p, rho, prof)) /
                              omega_prime;
        CHECK(tau_value(p, theta) == doctest::Approx(route2).epsilon(1e-6));
        // omega'(rho) = 1 / Phi'(theta)
        CHECK(omega_prime == doctest::Approx(1.0 / phi_prime(p, theta)).epsilon(1e-6));
    }
}

TEST_CASE("sigma -> 0: tau -> 1") {
    const ModelParams p(1e-8, 0.5, AtomicMeasure::dirac(0.0), {{2.0, 1}});
    CHECK(tau_value(p, 2.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("tau -> 1 as theta -> infinity") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0));
    CHECK(std::abs(tau_value(p, 1e6) - 1.0) < 1e-4);
}

TEST_CASE("rho increases with theta; ranks stack by multiplicity") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0), {{6.0, 2}, {3.0, 1}, {2.0, 1}});
    const auto prof = support(p);
    const auto preds = classify(p, prof);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& pr : preds) {
        REQUIRE(pr.in_outlier_set);
        CHECK(*pr.rho < prev);
        prev = *pr.rho;
    }
    CHECK(preds[0].rank_range == std::pair<int, int>{1, 2});
    CHECK(preds[1].rank_range == std::pair<int, int>{3, 3});
    CHECK(preds[2].rank_range == std::pair<int, int>{4, 4});

    // omega(rho) = theta round trip
    for (const auto& pr : preds)
        CHECK(omega_on_gap(p, *pr.rho, prof) == doctest::Approx(pr.theta).epsilon(1e-9));
}

TEST_CASE("outlier set S") {
    const ModelParams none(1.0, 0.5, AtomicMeasure::dirac(0.0));
    const auto prof0 = support(none);
    const auto S0 = outlier_set_S(none, prof0);
    CHECK(S0.points.empty());
    CHECK(S0.support.size() == prof0.support.size());

    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0), {{2.0, 1}, {0.5, 1}});
    const auto S = outlier_set_S(p, support(p));
    REQUIRE(S.points.size() == 1);  // sub-threshold spike contributes nothing
    CHECK(S.points[0] == doctest::Approx(3.75).epsilon(1e-10));

    CHECK(S.dist(3.75) == doctest::Approx(0.0));
    CHECK(S.dist(1.0) == doctest::Approx(0.0));
    CHECK(S.dist(3.3) == doctest::Approx(std::min(3.75 - 3.3, 3.3 - S.support[0].hi)));
}

TEST_CASE("aggregate sum rule: k tau per spike") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0), {{2.0, 2}});
    const auto preds = classify(p, support(p));
    REQUIRE(preds[0].in_outlier_set);
    CHECK(preds[0].multiplicity * *preds[0].tau == doctest::Approx(1.4).epsilon(1e-10));
}
