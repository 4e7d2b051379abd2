#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipn/errors.hpp"

namespace ipn {

struct Interval {
    double lo;
    double hi;

    bool contains(double x) const { return x > lo && x < hi; }
    double mid() const { return 0.5 * (lo + hi); }
};

// Finitely supported probability measure on [0, inf).  Atoms are kept sorted
// strictly increasing; duplicates (within 1e-12) are merged at construction.
class AtomicMeasure {
  public:
    explicit AtomicMeasure(std::vector<std::pair<double, double>> atoms) {
        if (atoms.empty()) throw ConfigError("AtomicMeasure: needs at least one atom");
        std::sort(atoms.begin(), atoms.end());
        for (const auto& [t, w] : atoms) {
            if (!std::isfinite(t) || !std::isfinite(w))
                throw ConfigError("AtomicMeasure: non-finite atom");
            if (t < 0) throw ConfigError("AtomicMeasure: negative atom location");
            if (w <= 0) throw ConfigError("AtomicMeasure: non-positive weight");
            if (!locs_.empty() && t - locs_.back() <= kMergeTol) {
                wts_.back() += w;
            } else {
                locs_.push_back(t);
                wts_.push_back(w);
            }
        }
        double total = 0;
        for (double w : wts_) total += w;
        if (std::abs(total - 1.0) > 1e-12)
            throw ConfigError("AtomicMeasure: weights sum to " + std::to_string(total));
    }

    static AtomicMeasure dirac(double t) { return AtomicMeasure({{t, 1.0}}); }

    // m equal-weight atoms at the quantiles F^{-1}((k-1/2)/m) of uniform[a,b].
    static AtomicMeasure uniform(double a, double b, int m) {
        if (m < 1) throw ConfigError("uniform: m must be >= 1");
        if (!(a < b)) throw ConfigError("uniform: needs a < b");
        std::vector<std::pair<double, double>> atoms;
        atoms.reserve(static_cast<size_t>(m));
        for (int k = 1; k <= m; ++k)
            atoms.emplace_back(a + (b - a) * (k - 0.5) / m, 1.0 / m);
        return AtomicMeasure(std::move(atoms));
    }

    static AtomicMeasure two_point(double t1, double w1, double t2, double w2) {
        return AtomicMeasure({{t1, w1}, {t2, w2}});
    }

    const std::vector<double>& locations() const { return locs_; }
    const std::vector<double>& weights() const { return wts_; }
    size_t size() const { return locs_.size(); }
    double min_atom() const { return locs_.front(); }
    double max_atom() const { return locs_.back(); }

    bool is_atom(double x, double tol = 0.0) const {
        for (double t : locs_)
            if (std::abs(x - t) <= tol) return true;
        return false;
    }

    // g(z) = sum_k w_k / (z - t_k)
    std::complex<double> stieltjes(std::complex<double> z) const {
        std::complex<double> g = 0;
        for (size_t k = 0; k < locs_.size(); ++k) g += wts_[k] / (z - locs_[k]);
        return g;
    }

    double stieltjes(double x) const {
        double g = 0;
        for (size_t k = 0; k < locs_.size(); ++k) {
            if (x == locs_[k]) throw DomainError("stieltjes: x at an atom");
            g += wts_[k] / (x - locs_[k]);
        }
        return g;
    }

    // g'(x) = -sum_k w_k / (x - t_k)^2, always negative off the atoms.
    double stieltjes_derivative(double x) const {
        double d = 0;
        for (size_t k = 0; k < locs_.size(); ++k) {
            const double dx = x - locs_[k];
            if (dx == 0) throw DomainError("stieltjes_derivative: x at an atom");
            d -= wts_[k] / (dx * dx);
        }
        return d;
    }

    // Maximal open intervals of R \ supp, padded by `pad` on the left and open
    // to +inf on the right.  The left interval (min_atom - pad, min_atom) is
    // always present; it carries the search domain for the negative branch of
    // the admissible set even when min_atom = 0.
    std::vector<Interval> gaps(double pad) const {
        std::vector<Interval> out;
        out.push_back({locs_.front() - pad, locs_.front()});
        for (size_t k = 0; k + 1 < locs_.size(); ++k)
            out.push_back({locs_[k], locs_[k + 1]});
        out.push_back({locs_.back(), std::numeric_limits<double>::infinity()});
        return out;
    }

    double mean() const {
        double m = 0;
        for (size_t k = 0; k < locs_.size(); ++k) m += wts_[k] * locs_[k];
        return m;
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (size_t k = 0; k < locs_.size(); ++k)
            arr.push_back({locs_[k], wts_[k]});
        return nlohmann::json{{"atoms", arr}};
    }

    static AtomicMeasure from_json(const nlohmann::json& j) {
        std::vector<std::pair<double, double>> atoms;
        for (const auto& a : j.at("atoms"))
            atoms.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
        return AtomicMeasure(std::move(atoms));
    }

  private:
    static constexpr double kMergeTol = 1e-12;
    std::vector<double> locs_;
    std::vector<double> wts_;
};

}  // namespace ipn
