#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ipn/equilibrium.hpp"

namespace ipn {

enum class EntryLaw {
    ComplexGaussian,
    RealGaussianPair,
    Rademacher,
    UniformBounded,
    TruncatedSmoothed,
};

inline EntryLaw entry_law_from_string(const std::string& s) {
    if (s == "complex-gaussian") return EntryLaw::ComplexGaussian;
    if (s == "real-gaussian-pair") return EntryLaw::RealGaussianPair;
    if (s == "rademacher") return EntryLaw::Rademacher;
    if (s == "uniform-bounded") return EntryLaw::UniformBounded;
    if (s == "truncated-smoothed") return EntryLaw::TruncatedSmoothed;
    throw ConfigError("unknown entry law: " + s);
}

inline std::string entry_law_to_string(EntryLaw law) {
    switch (law) {
        case EntryLaw::ComplexGaussian: return "complex-gaussian";
        case EntryLaw::RealGaussianPair: return "real-gaussian-pair";
        case EntryLaw::Rademacher: return "rademacher";
        case EntryLaw::UniformBounded: return "uniform-bounded";
        case EntryLaw::TruncatedSmoothed: return "truncated-smoothed";
    }
    throw ConfigError("unknown entry law");
}

struct TruncationParams {
    double C;
    double alpha;
    EntryLaw base;
};

// Per-trial RNG stream: the trial index is mixed into the seed through
// splitmix64, so streams are independent of worker scheduling.
class RngStream {
  public:
    RngStream(uint64_t seed, uint64_t stream) : eng_(mix(seed, stream)) {}

    static uint64_t mix(uint64_t seed, uint64_t stream) {
        uint64_t x = seed ^ (stream + 0x9E3779B97F4A7C15ULL);
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    double uniform01() {
        // 53-bit mantissa in [0, 1)
        return (eng_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; one spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 == 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    bool coin() { return (eng_() & 1ULL) != 0; }

    uint64_t raw() { return eng_(); }

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct EnsembleConfig {
    int N = 0;
    int n = 0;  // defaults to round(c * N) when 0
    EntryLaw law = EntryLaw::ComplexGaussian;
    std::optional<TruncationParams> trunc;
    bool rotate = false;
    uint64_t seed = 0;

    void validate(const ModelParams& params) {
        if (N < 1) throw ConfigError("EnsembleConfig: N must be >= 1");
        if (n == 0) n = static_cast<int>(std::lround(params.c * N));
        if (n < 1 || n > N) throw ConfigError("EnsembleConfig: n must be in [1, N]");
        const int r = params.total_multiplicity();
        if (n - r < static_cast<int>(params.nu.size()))
            throw ConfigError("EnsembleConfig: n too small for spikes plus bulk atoms");
        if (law == EntryLaw::TruncatedSmoothed) {
            if (!trunc) throw ConfigError("EnsembleConfig: truncated-smoothed needs parameters");
            if (trunc->base == EntryLaw::TruncatedSmoothed)
                throw ConfigError("EnsembleConfig: truncation base cannot itself be truncated");
            if (!(trunc->alpha > 0)) throw ConfigError("EnsembleConfig: alpha must be > 0");
            const double theta_star = third_abs_moment(trunc->base);
            if (!(trunc->C > 8.0 * theta_star))
                throw ConfigError("EnsembleConfig: need C > 8 * E|X|^3 = " +
                                  std::to_string(8.0 * theta_star));
        }
    }

    // sup E|X_11|^3 per base law.  Gaussian and Rademacher are closed form;
    // the bounded uniform law is integrated on a fixed midpoint grid.
    static double third_abs_moment(EntryLaw law) {
        switch (law) {
            case EntryLaw::ComplexGaussian:
            case EntryLaw::RealGaussianPair:
                // |X| is Rayleigh with scale 1/sqrt(2): E|X|^3 = (3/4) sqrt(pi)
                return 0.75 * std::sqrt(M_PI);
            case EntryLaw::Rademacher:
                return 1.0;
            case EntryLaw::UniformBounded: {
                const double a = std::sqrt(1.5);
                const int m = 400;
                double s = 0;
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j) {
                        const double x = -a + (2 * a) * (i + 0.5) / m;
                        const double y = -a + (2 * a) * (j + 0.5) / m;
                        s += std::pow(x * x + y * y, 1.5);
                    }
                return s / (m * static_cast<double>(m));
            }
            case EntryLaw::TruncatedSmoothed:
                throw ConfigError("third_abs_moment: not a base law");
        }
        throw ConfigError("third_abs_moment: unknown law");
    }
};

// Diagonal layout of A_N (spike blocks first, then the apportioned bulk),
// plus optional rotations.
struct ASpec {
    Eigen::VectorXd diagonal;                       // n singular values
    std::vector<std::pair<int, int>> spike_blocks;  // (offset, k) per spike, layout order
    std::vector<std::pair<int, int>> rank_ranges;   // (n_{j-1}+1, n_{j-1}+k_j), 1-based
    std::optional<Eigen::MatrixXcd> left_rotation;   // n x n unitary
    std::optional<Eigen::MatrixXcd> right_rotation;  // N x N unitary

    // Orthonormal basis of Ker(theta_j I - A A*) for spike block j.
    Eigen::MatrixXcd spike_basis(int j) const {
        const auto [off, k] = spike_blocks.at(static_cast<size_t>(j));
        const int n = static_cast<int>(diagonal.size());
        if (left_rotation) return left_rotation->middleCols(off, k);
        Eigen::MatrixXcd basis = Eigen::MatrixXcd::Zero(n, k);
        for (int q = 0; q < k; ++q) basis(off + q, q) = 1.0;
        return basis;
    }

    // The full n x N matrix A.
    Eigen::MatrixXcd materialize(int N) const {
        const int n = static_cast<int>(diagonal.size());
        Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, N);
        for (int i = 0; i < n; ++i) A(i, i) = diagonal(i);
        if (left_rotation) A = (*left_rotation) * A;
        if (right_rotation) A = A * right_rotation->adjoint();
        return A;
    }
};

namespace detail {

// Largest-remainder apportionment of `count` bulk entries over the atoms.
inline std::vector<int> apportion(const AtomicMeasure& nu, int count) {
    const size_t m = nu.size();
    std::vector<int> counts(m, 0);
    std::vector<std::pair<double, size_t>> rema(m);
    int assigned = 0;
    for (size_t i = 0; i < m; ++i) {
        const double exact = nu.weights()[i] * count;
        counts[i] = static_cast<int>(std::floor(exact));
        assigned += counts[i];
        rema[i] = {exact - counts[i], i};
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int k = 0; k < count - assigned; ++k) counts[rema[static_cast<size_t>(k)].second] += 1;
    return counts;
}

inline Eigen::MatrixXcd haar_unitary(int n, RngStream& rng) {
    Eigen::MatrixXcd G(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) G(i, j) = std::complex<double>(rng.normal(), rng.normal());
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(G);
    Eigen::MatrixXcd Q = qr.householderQ();
    // Fix the phase ambiguity so Q is a deterministic function of G.
    Eigen::MatrixXcd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        std::complex<double> d = R(j, j);
        Q.col(j) *= d / std::abs(d);
    }
    return Q;
}

}  // namespace detail

// The deterministic A_N: k_j copies of sqrt(theta_j) per spike, then the
// bulk singular values sqrt(beta_i) apportioned over the atoms of nu.
inline ASpec build_a(const ModelParams& params, const EnsembleConfig& config) {
    const int n = config.n;
    const int r = params.total_multiplicity();
    if (n - r < static_cast<int>(params.nu.size()))
        throw ConfigError("build_a: bulk apportionment infeasible (n - r < atom count)");
    ASpec a;
    a.diagonal.resize(n);
    int pos = 0;
    for (const auto& s : params.spikes) {
        a.spike_blocks.emplace_back(pos, s.multiplicity);
        for (int q = 0; q < s.multiplicity; ++q) a.diagonal(pos++) = std::sqrt(s.theta);
    }
    const auto counts = detail::apportion(params.nu, n - r);
    std::vector<double> bulk;
    bulk.reserve(static_cast<size_t>(n - r));
    for (size_t i = 0; i < params.nu.size(); ++i)
        for (int q = 0; q < counts[i]; ++q) bulk.push_back(params.nu.locations()[i]);
    for (double b : bulk) a.diagonal(pos++) = std::sqrt(b);

    // Descending ranks of each theta_j among the eigenvalues of A A*.
    for (const auto& s : params.spikes) {
        int above = 0;
        for (const auto& t : params.spikes)
            if (t.theta > s.theta) above += t.multiplicity;
        for (double b : bulk) {
            if (b == s.theta) throw ConfigError("build_a: spike ties a bulk eigenvalue");
            if (b > s.theta) above += 1;
        }
        a.rank_ranges.emplace_back(above + 1, above + s.multiplicity);
    }

    if (config.rotate) {
        RngStream rng(config.seed, 0xA5A5A5A5ULL);
        a.left_rotation = detail::haar_unitary(n, rng);
        a.right_rotation = detail::haar_unitary(config.N, rng);
    }
    return a;
}

namespace detail {

// E[Z^2 1_{|Z| <= C}] for a component Z of the base law (variance 1/2).
inline double truncated_component_variance(EntryLaw base, double C) {
    switch (base) {
        case EntryLaw::ComplexGaussian:
        case EntryLaw::RealGaussianPair: {
            const double s = std::sqrt(0.5);
            const double c = C / s;
            return 0.5 * (std::erf(c / std::sqrt(2.0)) -
                          c * std::sqrt(2.0 / M_PI) * std::exp(-0.5 * c * c));
        }
        case EntryLaw::Rademacher:
            return C >= std::sqrt(0.5) ? 0.5 : 0.0;
        case EntryLaw::UniformBounded: {
            const double a = std::sqrt(1.5);
            if (C >= a) return 0.5;
            return C * C * C / (3.0 * a);
        }
        case EntryLaw::TruncatedSmoothed:
            break;
    }
    throw ConfigError("truncated_component_variance: not a base law");
}

inline std::complex<double> draw_base(EntryLaw law, RngStream& rng) {
    switch (law) {
        case EntryLaw::ComplexGaussian:
        case EntryLaw::RealGaussianPair: {
            const double s = std::sqrt(0.5);
            const double re = s * rng.normal();
            const double im = s * rng.normal();
            return {re, im};
        }
        case EntryLaw::Rademacher: {
            const double s = std::sqrt(0.5);
            return {rng.coin() ? s : -s, rng.coin() ? s : -s};
        }
        case EntryLaw::UniformBounded: {
            const double a = std::sqrt(1.5);
            return {a * (2.0 * rng.uniform01() - 1.0), a * (2.0 * rng.uniform01() - 1.0)};
        }
        case EntryLaw::TruncatedSmoothed:
            break;
    }
    throw ConfigError("draw_base: not a base law");
}

}  // namespace detail

// One i.i.d. matrix draw for trial index `trial`.
inline Eigen::MatrixXcd sample_x(const EnsembleConfig& config, uint64_t trial) {
    RngStream rng(config.seed, trial);
    Eigen::MatrixXcd X(config.n, config.N);
    if (config.law != EntryLaw::TruncatedSmoothed) {
        for (int i = 0; i < config.n; ++i)
            for (int j = 0; j < config.N; ++j) X(i, j) = detail::draw_base(config.law, rng);
        return X;
    }
    const auto& tp = *config.trunc;
    const double v = detail::truncated_component_variance(tp.base, tp.C);
    const double rescale = 1.0 / std::sqrt(2.0 * v);
    const double mix = 1.0 / std::sqrt(1.0 + tp.alpha * tp.alpha);
    const double s = std::sqrt(0.5);
    for (int i = 0; i < config.n; ++i)
        for (int j = 0; j < config.N; ++j) {
            const std::complex<double> x = detail::draw_base(tp.base, rng);
            // All supported base laws have symmetric components, so the
            // truncation centering terms vanish.
            const double re = std::abs(x.real()) <= tp.C ? x.real() : 0.0;
            const double im = std::abs(x.imag()) <= tp.C ? x.imag() : 0.0;
            const std::complex<double> xc(re * rescale, im * rescale);
            const std::complex<double> g(s * rng.normal(), s * rng.normal());
            X(i, j) = (xc + tp.alpha * g) * mix;
        }
    return X;
}

// M = (sigma X / sqrt(N) + A)(sigma X / sqrt(N) + A)*, symmetrized.
inline Eigen::MatrixXcd assemble_m(const ASpec& a, const Eigen::MatrixXcd& x, double sigma) {
    const int n = static_cast<int>(a.diagonal.size());
    const int N = static_cast<int>(x.cols());
    if (x.rows() != n) throw ConfigError("assemble_m: dimension mismatch");
    Eigen::MatrixXcd Sigma = (sigma / std::sqrt(static_cast<double>(N))) * x;
    if (!a.left_rotation && !a.right_rotation) {
        for (int i = 0; i < n; ++i) Sigma(i, i) += a.diagonal(i);
    } else {
        Sigma += a.materialize(N);
    }
    Eigen::MatrixXcd M = Sigma * Sigma.adjoint();
    M = 0.5 * (M + M.adjoint()).eval();
    return M;
}

// Debug dump: 32-byte header {magic "IPNM", u32 n, u32 N, u32 flags, zero pad},
// then row-major interleaved (re, im) little-endian doubles.
inline void dump_matrix(const std::string& path, const Eigen::MatrixXcd& M, uint32_t flags = 0) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("dump_matrix: cannot open " + path);
    char header[32] = {};
    std::memcpy(header, "IPNM", 4);
    const uint32_t n = static_cast<uint32_t>(M.rows());
    const uint32_t N = static_cast<uint32_t>(M.cols());
    std::memcpy(header + 4, &n, 4);
    std::memcpy(header + 8, &N, 4);
    std::memcpy(header + 12, &flags, 4);
    out.write(header, sizeof(header));
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            const double re = M(i, j).real();
            const double im = M(i, j).imag();
            out.write(reinterpret_cast<const char*>(&re), sizeof(double));
            out.write(reinterpret_cast<const char*>(&im), sizeof(double));
        }
}

}  // namespace ipn
