#pragma once

#include <complex>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "ipn/ensemble.hpp"
#include "ipn/spikes.hpp"

namespace ipn {

struct EigDecomp {
    Eigen::VectorXd values;    // descending
    Eigen::MatrixXcd vectors;  // columns match values
};

// Hermitian eigendecomposition (LAPACK zheevd), eigenvalues descending.
inline EigDecomp eig_h(const Eigen::MatrixXcd& M) {
    const int n = static_cast<int>(M.rows());
    if (M.cols() != n) throw ConfigError("eig_h: matrix not square");
    if ((M - M.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + M.cwiseAbs().maxCoeff()))
        throw ConfigError("eig_h: matrix not Hermitian");
    Eigen::MatrixXcd work = M;
    Eigen::VectorXd w(n);
    const int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                    reinterpret_cast<lapack_complex_double*>(work.data()), n,
                                    w.data());
    if (info != 0)
        throw SolverError("eig_h: zheevd failed with info " + std::to_string(info),
                          static_cast<double>(info));
    EigDecomp out;
    out.values = w.reverse();
    out.vectors = work.rowwise().reverse();
    return out;
}

// Squared projection norms of the outlier eigenvectors of spike block j
// onto the spike eigenspace of block l (l = j by default).
inline std::vector<double> spike_projection(const EigDecomp& ed, const ASpec& a, int j, int l = -1) {
    if (l < 0) l = j;
    const auto [first, last] = a.rank_ranges.at(static_cast<size_t>(j));
    if (last > ed.values.size()) throw ConfigError("spike_projection: rank range exceeds n");
    const Eigen::MatrixXcd basis = a.spike_basis(l);
    std::vector<double> out;
    for (int rank = first; rank <= last; ++rank) {
        const auto xi = ed.vectors.col(rank - 1);
        out.push_back((basis.adjoint() * xi).squaredNorm());
    }
    return out;
}

// Sum over spike j's outlier eigenvectors of the squared projection onto
// spike l's eigenspace; limit k_j tau(theta_j) delta_{jl}.
inline double aggregate_projection(const EigDecomp& ed, const ASpec& a, int j, int l) {
    double s = 0;
    for (double v : spike_projection(ed, a, j, l)) s += v;
    return s;
}

// Exact finite-N trace identity: Tr[h(M) f(A A*)] with h, f eigenspace
// selectors, computed (a) as a sum of projection norms and (b) as the trace
// of the product of the two projectors.  Returns |a - b|.
inline double trace_projection_identity_gap(const EigDecomp& ed, const ASpec& a, int j) {
    const auto [first, last] = a.rank_ranges.at(static_cast<size_t>(j));
    double route_a = 0;
    for (double v : spike_projection(ed, a, j)) route_a += v;

    const Eigen::MatrixXcd basis = a.spike_basis(j);
    const Eigen::MatrixXcd W = ed.vectors.middleCols(first - 1, last - first + 1);
    const Eigen::MatrixXcd F = basis * basis.adjoint();  // f(A A*)
    const Eigen::MatrixXcd H = W * W.adjoint();          // h(M)
    const double route_b = (H * F).trace().real();
    return std::abs(route_a - route_b);
}

struct SeparationReport {
    double omega_x = 0;
    double omega_y = 0;
    int i_N = 0;
    bool assumption_ok = false;  // omega-interval avoids spect(A A*)
    bool left_ok = false;        // lambda_{i_N+1}(M) < x
    bool right_ok = false;       // lambda_{i_N}(M) > y
};

// Exact-separation counting on a bulk gap [x, y]: map the gap through omega,
// locate the split index in the A A* spectrum, and compare eigenvalue counts
// of M on either side.  Conventions lambda_0 = +inf, lambda_{n+1} = -inf.
inline SeparationReport exact_separation_check(const Eigen::VectorXd& eigenvalues, const ASpec& a,
                                               double x, double y, const ModelParams& params,
                                               const SupportProfile& profile) {
    if (!(x < y)) throw ConfigError("exact_separation_check: needs x < y");
    SeparationReport rep;
    rep.omega_x = omega_on_gap(params, x, profile);
    rep.omega_y = omega_on_gap(params, y, profile);

    const int n = static_cast<int>(a.diagonal.size());
    std::vector<double> aa(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) aa[static_cast<size_t>(i)] = a.diagonal(i) * a.diagonal(i);
    std::sort(aa.begin(), aa.end(), std::greater<>());

    int i_N = 0;
    while (i_N < n && aa[static_cast<size_t>(i_N)] > rep.omega_y) ++i_N;
    rep.i_N = i_N;
    const double lam_next = i_N < n ? aa[static_cast<size_t>(i_N)]
                                    : -std::numeric_limits<double>::infinity();
    rep.assumption_ok = lam_next < rep.omega_x;

    const double m_above = i_N >= 1 ? eigenvalues(i_N - 1)
                                    : std::numeric_limits<double>::infinity();
    const double m_below = i_N < eigenvalues.size() ? eigenvalues(i_N)
                                                    : -std::numeric_limits<double>::infinity();
    rep.left_ok = m_below < x;
    rep.right_ok = m_above > y;
    return rep;
}

struct ExclusionReport {
    bool ok = true;
    std::vector<double> offenders;
};

// spect(M) within distance epsilon of S.
inline ExclusionReport support_exclusion_check(const Eigen::VectorXd& eigenvalues,
                                               const OutlierSet& S, double epsilon) {
    if (!(epsilon >= 0)) throw ConfigError("support_exclusion_check: epsilon must be >= 0");
    ExclusionReport rep;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
        if (S.dist(eigenvalues(i)) > epsilon) {
            rep.ok = false;
            rep.offenders.push_back(eigenvalues(i));
        }
    return rep;
}

struct ResolventCheck {
    double max_diag_deviation = 0;
    double max_offdiag_mean = 0;
};

// Mean resolvent entries over Gaussian trials against the deterministic
// prediction (1 - s^2 c g_mu(z)) / (omega(z) - gamma_q) delta_{pq}.
// Off-diagonal means are sampled on a fixed band above the diagonal.
inline ResolventCheck resolvent_diag_check(const ModelParams& params, const EnsembleConfig& config,
                                           const ASpec& a, const std::vector<std::complex<double>>& zs,
                                           int trials) {
    if (config.law != EntryLaw::ComplexGaussian && config.law != EntryLaw::RealGaussianPair)
        throw ConfigError("resolvent_diag_check: requires a Gaussian entry law");
    if (config.rotate) throw ConfigError("resolvent_diag_check: requires rotate = false");
    for (const auto& z : zs)
        if (std::abs(z.imag()) < 0.5)
            throw ConfigError("resolvent_diag_check: need |Im z| >= 0.5");

    const int n = config.n;
    const int offdiag_pairs = std::min(64, n - 1);
    ResolventCheck out;
    for (const auto& z : zs) {
        Eigen::VectorXcd diag_mean = Eigen::VectorXcd::Zero(n);
        Eigen::VectorXcd off_mean = Eigen::VectorXcd::Zero(offdiag_pairs);
        for (int t = 0; t < trials; ++t) {
            const Eigen::MatrixXcd M = assemble_m(a, sample_x(config, static_cast<uint64_t>(t)),
                                                  params.sigma);
            Eigen::MatrixXcd zi = -M;
            zi.diagonal().array() += z;
            const Eigen::MatrixXcd G = zi.partialPivLu().inverse();
            diag_mean += G.diagonal();
            for (int p = 0; p < offdiag_pairs; ++p) off_mean(p) += G(p, p + 1);
        }
        diag_mean /= static_cast<double>(trials);
        off_mean /= static_cast<double>(trials);

        const double s2 = params.sigma * params.sigma;
        const std::complex<double> g = g_mu(params, z);
        const std::complex<double> w = omega_complex(params, z);
        const std::complex<double> numer = 1.0 - s2 * params.c * g;
        for (int q = 0; q < n; ++q) {
            const double gamma_q = a.diagonal(q) * a.diagonal(q);
            const std::complex<double> pred = numer / (w - gamma_q);
            out.max_diag_deviation = std::max(out.max_diag_deviation, std::abs(diag_mean(q) - pred));
        }
        for (int p = 0; p < offdiag_pairs; ++p)
            out.max_offdiag_mean = std::max(out.max_offdiag_mean, std::abs(off_mean(p)));
    }
    return out;
}

}  // namespace ipn
