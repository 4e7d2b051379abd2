#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ipn/ensemble.hpp"

using namespace ipn;

namespace {

EnsembleConfig cfg_for(const ModelParams& p, int N, EntryLaw law = EntryLaw::ComplexGaussian,
                       uint64_t seed = 42,
                       std::optional<TruncationParams> trunc = std::nullopt) {
    EnsembleConfig c;
    c.N = N;
    c.law = law;
    c.seed = seed;
    c.trunc = trunc;
    c.validate(p);
    return c;
}

}  // namespace

TEST_CASE("build_a layouts") {
    const ModelParams p1(1.0, 0.5, AtomicMeasure::dirac(0.0), {{2.0, 1}});
    EnsembleConfig c1;
    c1.N = 8;
    c1.n = 4;
    c1.validate(p1);
    const auto a1 = build_a(p1, c1);
    REQUIRE(a1.diagonal.size() == 4);
    CHECK(a1.diagonal(0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(a1.diagonal(1) == 0.0);
    CHECK(a1.diagonal(3) == 0.0);
    CHECK(a1.rank_ranges[0] == std::pair<int, int>{1, 1});

    const ModelParams p2(1.0, 0.5, AtomicMeasure::two_point(1.0, 0.5, 3.0, 0.5));
    EnsembleConfig c2;
    c2.N = 8;
    c2.n = 4;
    c2.validate(p2);
    const auto a2 = build_a(p2, c2);
    std::vector<double> sq;
    for (int i = 0; i < 4; ++i) sq.push_back(a2.diagonal(i) * a2.diagonal(i));
    std::sort(sq.begin(), sq.end(), std::greater<>());
    const std::vector<double> want{3.0, 3.0, 1.0, 1.0};
    REQUIRE(sq.size() == want.size());
    for (size_t i = 0; i < want.size(); ++i) CHECK(sq[i] == doctest::Approx(want[i]));

    const ModelParams p3(1.0, 0.5, AtomicMeasure::dirac(0.0), {{2.0, 2}});
    EnsembleConfig c3;
    c3.N = 10;
    c3.n = 5;
    c3.validate(p3);
    const auto a3 = build_a(p3, c3);
    CHECK(a3.diagonal(0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(a3.diagonal(1) == doctest::Approx(std::sqrt(2.0)));
    CHECK(a3.diagonal(2) == 0.0);
    CHECK(a3.rank_ranges[0] == std::pair<int, int>{1, 2});
}

TEST_CASE("apportionment matches weights as n grows") {
    const ModelParams p(1.0, 1.0, AtomicMeasure({{0.5, 0.25}, {1.5, 0.25}, {4.0, 0.5}}));
    EnsembleConfig c;
    c.N = 1000;
    c.validate(p);
    const auto a = build_a(p, c);
    int n_at_4 = 0;
    for (int i = 0; i < a.diagonal.size(); ++i)
        if (std::abs(a.diagonal(i) * a.diagonal(i) - 4.0) < 1e-12) ++n_at_4;
    CHECK(n_at_4 == 500);
}

TEST_CASE("entry law moments") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0));
    for (EntryLaw law : {EntryLaw::ComplexGaussian, EntryLaw::RealGaussianPair,
                         EntryLaw::Rademacher, EntryLaw::UniformBounded}) {
        auto c = cfg_for(p, 200, law);
        const auto X = sample_x(c, 0);
        const double nN = static_cast<double>(X.size());
        const double tol = 5.0 / std::sqrt(nN);
        CHECK(std::abs(X.real().mean()) < tol);
        CHECK(std::abs(X.imag().mean()) < tol);
        CHECK(X.real().array().square().mean() == doctest::Approx(0.5).epsilon(0.1));
        CHECK(X.imag().array().square().mean() == doctest::Approx(0.5).epsilon(0.1));
        CHECK(X.cwiseAbs2().mean() == doctest::Approx(1.0).epsilon(0.07));
    }
}

TEST_CASE("rademacher entries are (+-1 +- i)/sqrt(2)") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0));
    auto c = cfg_for(p, 50, EntryLaw::Rademacher);
    const auto X = sample_x(c, 3);
    const double s = std::sqrt(0.5);
    for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < X.cols(); ++j) {
            CHECK(std::abs(std::abs(X(i, j).real()) - s) < 1e-15);
            CHECK(std::abs(std::abs(X(i, j).imag()) - s) < 1e-15);
        }
}

TEST_CASE("truncated-smoothed law: unit variance and validation") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0));
    auto c = cfg_for(p, 400, EntryLaw::TruncatedSmoothed, 42,
                     TruncationParams{20.0, 0.1, EntryLaw::ComplexGaussian});
    const auto X = sample_x(c, 1);
    CHECK(X.real().array().square().mean() == doctest::Approx(0.5).epsilon(0.05));
    CHECK(X.imag().array().square().mean() == doctest::Approx(0.5).epsilon(0.05));

    // C below 8 E|X|^3 rejected
    CHECK_THROWS_AS(cfg_for(p, 100, EntryLaw::TruncatedSmoothed, 42,
                            TruncationParams{5.0, 0.1, EntryLaw::ComplexGaussian}),
                    ConfigError);

    // an aggressive cut (Gaussian base, small alpha) still yields variance 1/2
    auto cut = cfg_for(p, 400, EntryLaw::TruncatedSmoothed, 42,
                       TruncationParams{10.7, 0.05, EntryLaw::ComplexGaussian});
    const auto Y = sample_x(cut, 2);
    CHECK(Y.cwiseAbs2().mean() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("seed determinism and stream independence") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0));
    auto c = cfg_for(p, 60);
    const auto X1 = sample_x(c, 5);
    const auto X2 = sample_x(c, 5);
    CHECK((X1 - X2).cwiseAbs().maxCoeff() == 0.0);  // bit-identical

    const auto X3 = sample_x(c, 6);
    CHECK((X1 - X3).cwiseAbs().maxCoeff() > 0.0);

    auto c2 = cfg_for(p, 60, EntryLaw::ComplexGaussian, 43);
    const auto X4 = sample_x(c2, 5);
    CHECK((X1 - X4).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("assemble_m") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0), {{2.0, 1}});
    auto c = cfg_for(p, 8);
    c.n = 4;
    const auto a = build_a(p, c);

    // sigma = 0: M = A A*
    const auto X = sample_x(c, 0);
    const auto M0 = assemble_m(a, X, 0.0);
    CHECK((M0 - M0.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(M0(0, 0).real() == doctest::Approx(2.0));
    CHECK(std::abs(M0(1, 1)) < 1e-15);

    // X = 0: same
    const auto Mz = assemble_m(a, Eigen::MatrixXcd::Zero(4, 8), 1.0);
    CHECK((Mz - M0).cwiseAbs().maxCoeff() < 1e-15);

    // scalar case: M = |sigma x + a|^2
    const ModelParams ps(1.0, 1.0, AtomicMeasure::dirac(0.25));
    EnsembleConfig cs;
    cs.N = 1;
    cs.validate(ps);
    const auto as = build_a(ps, cs);
    Eigen::MatrixXcd x1(1, 1);
    x1(0, 0) = std::complex<double>(0.3, -0.4);
    const auto Ms = assemble_m(as, x1, 2.0);
    const std::complex<double> sig = 2.0 * x1(0, 0) + 0.5;
    CHECK(Ms(0, 0).real() == doctest::Approx(std::norm(sig)));
}

TEST_CASE("rotation carries the spike eigenspace") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0), {{2.0, 1}});
    auto c = cfg_for(p, 24);
    c.n = 12;
    c.rotate = true;
    const auto a = build_a(p, c);
    REQUIRE(a.left_rotation.has_value());
    REQUIRE(a.right_rotation.has_value());
    // unitarity
    const auto& U = *a.left_rotation;
    CHECK((U.adjoint() * U - Eigen::MatrixXcd::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-10);
    // A A* basis vector: (A A*) b = theta b for the spike basis column
    const auto A = a.materialize(24);
    const Eigen::MatrixXcd AAs = A * A.adjoint();
    const auto b = a.spike_basis(0);
    CHECK((AAs * b - 2.0 * b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("operator norm of X/sqrt(N) stays near the semicircle edge") {
    const ModelParams p(1.0, 0.5, AtomicMeasure::dirac(0.0));
    const double c_ratio = 0.5;
    const double bound = 2.0 * (1.0 + std::sqrt(c_ratio)) + 0.5;
    int violations = 0;
    for (uint64_t t = 0; t < 20; ++t) {
        auto c = cfg_for(p, 500);
        c.seed = 100 + t;
        const auto X = sample_x(c, 0);
        // largest singular value via power iteration on X X*
        Eigen::VectorXcd v = Eigen::VectorXcd::Ones(c.n).normalized();
        double lam = 0;
        for (int it = 0; it < 60; ++it) {
            v = (X * (X.adjoint() * v)).normalized();
        }
        lam = (X.adjoint() * v).squaredNorm();
        if (std::sqrt(lam / c.N) > bound) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("matrix dump header") {
    const ModelParams p(1.0, 1.0, AtomicMeasure::dirac(1.0));
    EnsembleConfig c;
    c.N = 3;
    c.validate(p);
    const auto a = build_a(p, c);
    const auto M = assemble_m(a, sample_x(c, 0), 1.0);
    const std::string path = "dump_test.ipnm";
    dump_matrix(path, M);
    std::ifstream in(path, std::ios::binary);
    char header[32];
    in.read(header, 32);
    CHECK(std::string(header, 4) == "IPNM");
    uint32_t n = 0, N = 0;
    std::memcpy(&n, header + 4, 4);
    std::memcpy(&N, header + 8, 4);
    CHECK(n == 3);
    CHECK(N == 3);
    double re = 0, im = 0;
    in.read(reinterpret_cast<char*>(&re), 8);
    in.read(reinterpret_cast<char*>(&im), 8);
    CHECK(re == M(0, 0).real());
    std::remove(path.c_str());
}
