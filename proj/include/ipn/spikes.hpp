#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipn/equilibrium.hpp"

namespace ipn {

struct SpikePrediction {
    double theta;
    int multiplicity;
    bool in_outlier_set;
    double phi_prime_at_theta;
    double g_nu_at_theta;
    std::optional<double> rho;  // Phi(theta), when in the outlier set
    std::optional<double> tau;  // overlap limit, when in the outlier set
    std::pair<int, int> rank_range;  // (n_{j-1}+1, n_{j-1}+k_j), 1-based

    nlohmann::json to_json() const {
        nlohmann::json j{{"theta", theta},
                         {"multiplicity", multiplicity},
                         {"in_outlier_set", in_outlier_set},
                         {"phi_prime_at_theta", phi_prime_at_theta},
                         {"g_nu_at_theta", g_nu_at_theta},
                         {"rank_range", {rank_range.first, rank_range.second}}};
        if (rho) j["rho"] = *rho;
        if (tau) j["tau"] = *tau;
        return j;
    }

    // CSV row: theta,k,in_set,rho,tau
    std::string to_csv_row() const {
        auto num = [](const std::optional<double>& v) {
            return v ? std::to_string(*v) : std::string();
        };
        return std::to_string(theta) + "," + std::to_string(multiplicity) + "," +
               (in_outlier_set ? "1" : "0") + "," + num(rho) + "," + num(tau);
    }
};

// tau(theta) = Phi'(theta) / (1 + s^2 c g_nu(theta)) for theta in the
// outlier set.
inline double tau_value(const ModelParams& p, double theta) {
    const double s2c = p.sigma * p.sigma * p.c;
    const double pp = phi_prime(p, theta);
    const double g = p.nu.stieltjes(theta);
    if (!(pp > 0) || !(g > -1.0 / s2c))
        throw DomainError("tau_value: theta not in the outlier set");
    return pp / (1.0 + s2c * g);
}

// One prediction per configured spike.  Degenerate condition boundaries
// (within 1e-10 of zero) classify as outside the set: the defining
// inequalities are strict.
inline std::vector<SpikePrediction> classify(const ModelParams& p, const SupportProfile& profile) {
    const double s2c = p.sigma * p.sigma * p.c;
    std::vector<SpikePrediction> out;
    int rank = 0;  // spikes are descending; bulk atoms assumed below all spikes
    for (const auto& s : p.spikes) {
        SpikePrediction pred;
        pred.theta = s.theta;
        pred.multiplicity = s.multiplicity;
        pred.phi_prime_at_theta = phi_prime(p, s.theta);
        pred.g_nu_at_theta = p.nu.stieltjes(s.theta);
        const double margin = 1e-10;
        pred.in_outlier_set = pred.phi_prime_at_theta > margin &&
                              pred.g_nu_at_theta > -1.0 / s2c + margin;
        if (pred.in_outlier_set) {
            pred.rho = phi(p, s.theta);
            pred.tau = tau_value(p, s.theta);
        }
        pred.rank_range = {rank + 1, rank + s.multiplicity};
        rank += s.multiplicity;
        out.push_back(pred);
    }
    (void)profile;
    return out;
}

// The compact set S: bulk support plus the isolated outlier locations.
struct OutlierSet {
    std::vector<Interval> support;
    std::vector<double> points;

    double dist(double x) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& s : support) {
            if (x >= s.lo && x <= s.hi) return 0.0;
            d = std::min(d, std::min(std::abs(x - s.lo), std::abs(x - s.hi)));
        }
        for (double pt : points) d = std::min(d, std::abs(x - pt));
        return d;
    }

    nlohmann::json to_json() const {
        nlohmann::json sup = nlohmann::json::array();
        for (const auto& s : support) sup.push_back({s.lo, s.hi});
        return {{"support", sup}, {"points", points}};
    }
};

inline OutlierSet outlier_set_S(const ModelParams& p, const SupportProfile& profile) {
    OutlierSet S;
    S.support = profile.support;
    for (const auto& pred : classify(p, profile))
        if (pred.in_outlier_set) S.points.push_back(*pred.rho);
    return S;
}

}  // namespace ipn
