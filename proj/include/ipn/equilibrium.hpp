#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipn/measure.hpp"

namespace ipn {

struct Spike {
    double theta;
    int multiplicity;
};

// Model parameters (sigma, c, nu, spikes).  Spikes are sorted strictly
// decreasing in theta; each theta must avoid the atoms of nu.
struct ModelParams {
    double sigma;
    double c;
    AtomicMeasure nu;
    std::vector<Spike> spikes;

    ModelParams(double sigma_, double c_, AtomicMeasure nu_, std::vector<Spike> spikes_ = {})
        : sigma(sigma_), c(c_), nu(std::move(nu_)), spikes(std::move(spikes_)) {
        if (!(sigma > 0) || sigma > 1e3) throw ConfigError("ModelParams: sigma must be in (0, 1e3]");
        if (!(c > 0) || c > 1) throw ConfigError("ModelParams: c must be in (0, 1]");
        for (size_t j = 0; j < spikes.size(); ++j) {
            const auto& s = spikes[j];
            if (s.theta < 0) throw ConfigError("ModelParams: spike theta must be >= 0");
            if (s.multiplicity < 1) throw ConfigError("ModelParams: spike multiplicity must be >= 1");
            if (nu.is_atom(s.theta)) throw ConfigError("ModelParams: spike theta collides with supp(nu)");
            if (j > 0 && !(spikes[j - 1].theta > s.theta))
                throw ConfigError("ModelParams: spikes must be strictly decreasing");
        }
    }

    int total_multiplicity() const {
        int r = 0;
        for (const auto& s : spikes) r += s.multiplicity;
        return r;
    }

    // Search pad beyond the extreme atoms of nu.
    double hull_pad() const { return 10.0 * (1.0 + sigma * sigma); }
};

// One support gap of mu paired with the E-component Phi maps onto it.
struct GapPair {
    Interval gap;        // interval in the complement of supp(mu)
    Interval component;  // matched component of E
};

struct SupportProfile {
    std::vector<Interval> admissible;  // components of E
    std::vector<Interval> support;     // closed support intervals of mu
    std::vector<GapPair> gap_map;

    std::optional<GapPair> find_gap(double x) const {
        for (const auto& gp : gap_map)
            if (gp.gap.contains(x)) return gp;
        return std::nullopt;
    }

    bool in_support(double x) const {
        for (const auto& s : support)
            if (x >= s.lo && x <= s.hi) return true;
        return false;
    }

    nlohmann::json to_json() const {
        auto ivals = [](const std::vector<Interval>& v) {
            nlohmann::json a = nlohmann::json::array();
            for (const auto& i : v) a.push_back({i.lo, i.hi});
            return a;
        };
        nlohmann::json gm = nlohmann::json::array();
        for (const auto& gp : gap_map)
            gm.push_back({{"gap", {gp.gap.lo, gp.gap.hi}},
                          {"component", {gp.component.lo, gp.component.hi}}});
        return {{"admissible", ivals(admissible)}, {"support", ivals(support)}, {"gap_map", gm}};
    }
};

// Phi(x) = x (1 + c s^2 g_nu(x))^2 + s^2 (1-c) (1 + c s^2 g_nu(x))
inline double phi(const ModelParams& p, double x) {
    const double s2 = p.sigma * p.sigma;
    const double u = 1.0 + p.c * s2 * p.nu.stieltjes(x);
    return x * u * u + s2 * (1.0 - p.c) * u;
}

inline double phi_prime(const ModelParams& p, double x) {
    const double s2 = p.sigma * p.sigma;
    const double g = p.nu.stieltjes(x);
    const double gp = p.nu.stieltjes_derivative(x);
    const double u = 1.0 + p.c * s2 * g;
    return u * u + 2.0 * x * p.c * s2 * gp * u + s2 * (1.0 - p.c) * p.c * s2 * gp;
}

namespace detail {

// One application of the fixed-point map of the self-consistent equation:
// F(g) = int dnu(t) / ((1 - s^2 c g) z - t / (1 - s^2 c g) - s^2 (1-c)).
inline std::complex<double> ts_map(const ModelParams& p, std::complex<double> z,
                                   std::complex<double> g) {
    const double s2 = p.sigma * p.sigma;
    const std::complex<double> d = 1.0 - s2 * p.c * g;
    std::complex<double> out = 0;
    const auto& t = p.nu.locations();
    const auto& w = p.nu.weights();
    for (size_t k = 0; k < t.size(); ++k)
        out += w[k] / (d * z - t[k] / d - s2 * (1.0 - p.c));
    return out;
}

// Derivative of the fixed-point map with respect to g.
inline std::complex<double> ts_map_prime(const ModelParams& p, std::complex<double> z,
                                         std::complex<double> g) {
    const double s2c = p.sigma * p.sigma * p.c;
    const std::complex<double> d = 1.0 - s2c * g;
    std::complex<double> out = 0;
    const auto& t = p.nu.locations();
    const auto& w = p.nu.weights();
    for (size_t k = 0; k < t.size(); ++k) {
        const std::complex<double> denom = d * z - t[k] / d - p.sigma * p.sigma * (1.0 - p.c);
        out += w[k] * s2c * (z + t[k] / (d * d)) / (denom * denom);
    }
    return out;
}

}  // namespace detail

namespace detail {

// Damped fixed-point iteration for g - F(g) = 0 from the given start,
// polished by Newton steps once the iterate is in the basin (a step that
// does not reduce the residual falls back to damping).  Iterates must stay
// in the lower half-plane; excursions are reflected back.
inline std::optional<std::complex<double>> iterate_g(const ModelParams& p, std::complex<double> z,
                                                     std::complex<double>& g, double tol,
                                                     int max_iter, double& resid) {
    const double lambda = 0.5;
    const int newton_after = 20;
    for (int it = 0; it < max_iter; ++it) {
        std::complex<double> f = ts_map(p, z, g);
        if (f.imag() > 0) f = std::complex<double>(f.real(), -std::abs(f.imag()));
        resid = std::abs(f - g);
        if (resid < tol) return g;
        if (it >= newton_after) {
            const std::complex<double> fp = ts_map_prime(p, z, g);
            if (std::abs(1.0 - fp) > 1e-8) {
                std::complex<double> gn = g - (g - f) / (1.0 - fp);
                if (gn.imag() > 0) gn = std::complex<double>(gn.real(), -std::abs(gn.imag()));
                const double rn = std::abs(ts_map(p, z, gn) - gn);
                if (rn < resid) {
                    g = gn;
                    if (rn < tol) return g;
                    continue;
                }
            }
        }
        g = (1.0 - lambda) * g + lambda * f;
        if (g.imag() > 0) g = std::complex<double>(g.real(), -std::abs(g.imag()));
    }
    return std::nullopt;
}

}  // namespace detail

// Solve the self-consistent equation for g_mu(z), Im z > 0.  Close to the
// real axis the equation also has nearby non-physical real roots, so the
// solve continues in the imaginary part: start at Im z = 1 where the basin
// is wide, then walk eta down to the target reusing each solution as the
// next warm start.
inline std::complex<double> solve_g_mu(const ModelParams& p, std::complex<double> z,
                                       double tol = 1e-12) {
    if (!(z.imag() > 0)) throw DomainError("solve_g_mu: Im z must be > 0");
    if (!(tol > 0)) throw ConfigError("solve_g_mu: tol must be > 0");
    const int max_iter = 100000;
    double resid = std::numeric_limits<double>::infinity();
    double eta = std::max(z.imag(), 1.0);
    std::complex<double> zc(z.real(), eta);
    std::complex<double> g = 1.0 / zc;
    for (;;) {
        if (!detail::iterate_g(p, zc, g, tol, max_iter, resid))
            throw SolverError("solve_g_mu: no convergence at z=(" + std::to_string(zc.real()) +
                                  "," + std::to_string(zc.imag()) + "), residual " +
                                  std::to_string(resid),
                              resid);
        if (eta <= z.imag()) return g;
        eta = std::max(eta / 4.0, z.imag());
        zc = std::complex<double>(z.real(), eta);
    }
}

// g_mu at conj-symmetric or complex z (Im z != 0), via conjugate symmetry.
inline std::complex<double> g_mu(const ModelParams& p, std::complex<double> z,
                                 double tol = 1e-12) {
    if (z.imag() > 0) return solve_g_mu(p, z, tol);
    if (z.imag() < 0) return std::conj(solve_g_mu(p, std::conj(z), tol));
    throw DomainError("g_mu: z must be non-real");
}

// omega(z) = z (1 - s^2 c g_mu(z))^2 - s^2 (1-c) (1 - s^2 c g_mu(z))
inline std::complex<double> omega_complex(const ModelParams& p, std::complex<double> z,
                                          double tol = 1e-12) {
    const double s2 = p.sigma * p.sigma;
    const std::complex<double> d = 1.0 - s2 * p.c * g_mu(p, z, tol);
    return z * d * d - s2 * (1.0 - p.c) * d;
}

// Components of E = {x outside supp(nu) : Phi'(x) > 0, g_nu(x) > -1/(s^2 c)}.
// Each nu-gap is scanned on a uniform grid; condition sign changes are
// bracketed and refined by bisection.
inline std::vector<Interval> admissible_set(const ModelParams& p, int grid_points = 4096) {
    const double s2c = p.sigma * p.sigma * p.c;
    const auto cond = [&](double x) {
        return phi_prime(p, x) > 0 && p.nu.stieltjes(x) > -1.0 / s2c;
    };
    // Bisect the boundary of {cond} in (a,b) where cond(a) != cond(b).
    const auto refine = [&](double a, double b, bool at_a) {
        for (int it = 0; it < 200 && b - a > 1e-10; ++it) {
            const double m = 0.5 * (a + b);
            if (cond(m) == at_a)
                a = m;
            else
                b = m;
        }
        return 0.5 * (a + b);
    };

    const double pad = p.hull_pad();
    std::vector<Interval> components;
    for (const Interval& gap : p.nu.gaps(pad)) {
        const double lo = gap.lo;
        const double hi = std::isinf(gap.hi) ? p.nu.max_atom() + pad : gap.hi;
        if (!(hi > lo)) continue;
        const double h = (hi - lo) / grid_points;
        // Stay clear of the atoms at the gap ends.
        const double eps = 1e-9 * (1.0 + std::abs(lo) + std::abs(hi));
        // Components that reach a gap end are closed at the last probed
        // point, not at the atom itself: the true condition boundary can sit
        // within O(sigma^2) of the atom, below grid resolution.  The left
        // hull bound is kept exact so unbounded components stay detectable.
        const bool at_left_hull = gap.lo <= p.nu.min_atom() - pad + eps;
        std::optional<double> open_at;
        double prev_x = lo + eps;
        bool prev = cond(prev_x);
        if (prev) open_at = at_left_hull ? lo : prev_x;
        for (int i = 1; i <= grid_points; ++i) {
            const double x = (i == grid_points) ? hi - eps : lo + i * h;
            if (!(x > prev_x)) continue;
            const bool cur = cond(x);
            if (cur != prev) {
                const double edge = refine(prev_x, x, prev);
                if (prev) {
                    components.push_back({open_at.value(), edge});
                    open_at.reset();
                } else {
                    open_at = edge;
                }
            }
            prev = cur;
            prev_x = x;
        }
        if (open_at) {
            const double right = std::isinf(gap.hi) ? std::numeric_limits<double>::infinity()
                                                    : prev_x;
            components.push_back({open_at.value(), right});
        }
    }
    return components;
}

// Support of mu: the complement of the Phi-images of the E-components,
// clipped to [0, hull).  Components touching the search pad are treated as
// unbounded (their images extend to -inf / +inf).
inline SupportProfile support(const ModelParams& p, int grid_points = 4096) {
    SupportProfile prof;
    prof.admissible = admissible_set(p, grid_points);

    const double pad = p.hull_pad();
    const double left_hull = p.nu.min_atom() - pad;
    const double inf = std::numeric_limits<double>::infinity();

    struct Image {
        Interval img;
        Interval comp;
    };
    std::vector<Image> images;
    for (const Interval& comp : prof.admissible) {
        const bool left_unbounded = comp.lo <= left_hull + 1e-8 * (1.0 + std::abs(left_hull));
        const bool right_unbounded = std::isinf(comp.hi);
        // Evaluate Phi just inside the component; the endpoints may sit on an
        // atom of nu (vanishing-sigma limit) where Phi itself is singular.
        const double width = right_unbounded ? 1.0 : comp.hi - comp.lo;
        const double nudge = 1e-12 * (1.0 + std::abs(comp.lo)) + width * 1e-13;
        const double a = left_unbounded ? -inf : phi(p, comp.lo + nudge);
        const double b = right_unbounded ? inf : phi(p, comp.hi - nudge);
        images.push_back({{a, b}, comp});
    }
    // Images are disjoint and ordered since Phi is increasing on each
    // component and components are ordered.
    prof.support.clear();
    for (size_t i = 0; i + 1 < images.size(); ++i) {
        double lo = images[i].img.hi;
        double hi = images[i + 1].img.lo;
        if (hi < lo) std::swap(lo, hi);  // guard against roundoff at kissing edges
        prof.support.push_back({std::max(0.0, lo), hi});
    }
    if (images.empty()) {
        // No admissible components at all: support fills the hull of nu.
        prof.support.push_back({std::max(0.0, p.nu.min_atom()), phi(p, p.nu.max_atom() + pad)});
    }
    for (const auto& im : images)
        prof.gap_map.push_back({im.img, im.comp});
    return prof;
}

// omega on a support gap by bisection of Phi(w) = x inside the matched
// E-component (Phi is strictly increasing there).
inline double omega_on_gap(const ModelParams& p, double x, const SupportProfile& profile) {
    const auto gp = profile.find_gap(x);
    if (!gp) throw DomainError("omega_on_gap: x not in any support gap");
    const double pad = p.hull_pad();
    double a = gp->component.lo;
    double b = std::isinf(gp->component.hi) ? p.nu.max_atom() + pad : gp->component.hi;
    // Nudge off the component endpoints (Phi' vanishes at interior edges).
    const double eps = 1e-13 * (1.0 + std::abs(a) + std::abs(b));
    a += eps;
    b -= eps;
    double fa = phi(p, a) - x;
    double fb = phi(p, b) - x;
    if (fa > 0 || fb < 0) {
        if (std::abs(fa) < 1e-9 * (1.0 + std::abs(x))) return a;
        if (std::abs(fb) < 1e-9 * (1.0 + std::abs(x))) return b;
        throw SolverError("omega_on_gap: bracket failure (inconsistent profile)", std::min(std::abs(fa), std::abs(fb)));
    }
    const double tol = 1e-12 * (1.0 + std::abs(x));
    for (int it = 0; it < 300; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = phi(p, m) - x;
        if (std::abs(fm) < tol || b - a < 1e-15 * (1.0 + std::abs(m))) return m;
        if (fm < 0)
            a = m;
        else
            b = m;
    }
    return 0.5 * (a + b);
}

// g_mu on a support gap via the algebraic identity
// g_mu(x) = g_nu(omega(x)) / (1 + s^2 c g_nu(omega(x))).
inline double g_mu_on_gap(const ModelParams& p, double x, const SupportProfile& profile) {
    if (profile.in_support(x)) throw DomainError("g_mu_on_gap: x inside the support");
    const double w = omega_on_gap(p, x, profile);
    const double gnu = p.nu.stieltjes(w);
    return gnu / (1.0 + p.sigma * p.sigma * p.c * gnu);
}

// omega on a gap from the defining formula, using g_mu_on_gap.  Cross-check
// route for omega_on_gap.
inline double omega_direct(const ModelParams& p, double x, const SupportProfile& profile) {
    const double s2 = p.sigma * p.sigma;
    const double d = 1.0 - s2 * p.c * g_mu_on_gap(p, x, profile);
    return x * d * d - s2 * (1.0 - p.c) * d;
}

// Density -Im g_mu(x + i eta) / pi per grid point; NaN where the solver fails.
inline std::vector<double> density_grid(const ModelParams& p, const std::vector<double>& xs,
                                        double eta, double tol = 1e-12) {
    if (!(eta > 0)) throw ConfigError("density_grid: eta must be > 0");
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) {
        try {
            const auto g = solve_g_mu(p, {x, eta}, tol);
            out.push_back(-g.imag() / M_PI);
        } catch (const SolverError&) {
            out.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return out;
}

}  // namespace ipn
