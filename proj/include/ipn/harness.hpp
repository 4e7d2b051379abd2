#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipn/spectra.hpp"
#include "ipn/toml_lite.hpp"

namespace ipn {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
    ModelParams model;
    EnsembleConfig ensemble;
    int trials = 1;
    std::set<std::string> checks;  // subset of the known check names
    std::map<std::string, double> tolerances;
    std::string output;
    std::string format = "json";

    // Check-specific settings.
    Interval separation_gap{0, 0};
    std::vector<std::complex<double>> resolvent_z;
    int resolvent_trials = 50;

    double tol(const std::string& name) const {
        const auto it = tolerances.find(name);
        if (it != tolerances.end()) return it->second;
        static const std::map<std::string, double> defaults = {
            {"outliers", 0.1},        {"overlaps", 0.05},
            {"cross_overlaps", 0.02}, {"aggregate", 0.1},
            {"exclusion", 0.15},      {"resolvent_diag", 0.05},
            {"resolvent_offdiag", 0.02}};
        const auto d = defaults.find(name);
        if (d == defaults.end()) throw ConfigError("unknown tolerance: " + name);
        return d->second;
    }
};

namespace detail {

inline AtomicMeasure measure_from_json(const nlohmann::json& j) {
    const std::string family = j.value("family", "atoms");
    if (family == "dirac") return AtomicMeasure::dirac(j.value("location", 0.0));
    if (family == "uniform")
        return AtomicMeasure::uniform(j.at("a").get<double>(), j.at("b").get<double>(),
                                      j.value("m", 200));
    if (family == "atoms" || family == "two-point") {
        std::vector<std::pair<double, double>> atoms;
        for (const auto& a : j.at("atoms"))
            atoms.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
        return AtomicMeasure(std::move(atoms));
    }
    throw ConfigError("unknown measure family: " + family);
}

}  // namespace detail

inline ExperimentConfig load_config(const nlohmann::json& doc) {
    const auto& jm = doc.at("model");
    std::vector<Spike> spikes;
    if (jm.contains("spikes"))
        for (const auto& s : jm.at("spikes"))
            spikes.push_back({s.at("theta").get<double>(), s.value("multiplicity", 1)});
    ModelParams model(jm.at("sigma").get<double>(), jm.at("c").get<double>(),
                      detail::measure_from_json(jm.at("nu")), std::move(spikes));

    EnsembleConfig ens;
    if (doc.contains("ensemble")) {
        const auto& je = doc.at("ensemble");
        ens.N = je.value("N", 0);
        ens.n = je.value("n", 0);
        ens.law = entry_law_from_string(je.value("entry_law", "complex-gaussian"));
        ens.rotate = je.value("rotate", false);
        ens.seed = je.value("seed", 0ULL);
        if (je.contains("truncation")) {
            const auto& jt = je.at("truncation");
            ens.trunc = TruncationParams{jt.at("C").get<double>(), jt.at("alpha").get<double>(),
                                         entry_law_from_string(jt.value("base", "complex-gaussian"))};
        }
        ens.validate(model);
    }

    ExperimentConfig cfg{std::move(model), ens};
    if (doc.contains("run")) {
        const auto& jr = doc.at("run");
        cfg.trials = jr.value("trials", 1);
        if (cfg.trials < 1) throw ConfigError("run.trials must be >= 1");
        if (jr.contains("checks"))
            for (const auto& c : jr.at("checks")) cfg.checks.insert(c.get<std::string>());
        cfg.output = jr.value("output", "");
        cfg.format = jr.value("format", "json");
        if (cfg.format != "json" && cfg.format != "csv")
            throw ConfigError("run.format must be json or csv");
    }
    static const std::set<std::string> known = {"outliers",   "overlaps",  "cross_overlaps",
                                               "aggregate",  "separation", "exclusion",
                                               "resolvent"};
    for (const auto& c : cfg.checks)
        if (!known.count(c)) throw ConfigError("unknown check: " + c);
    if (doc.contains("tolerances"))
        for (const auto& [k, v] : doc.at("tolerances").items()) {
            cfg.tolerances[k] = v.get<double>();
            if (!(cfg.tolerances[k] >= 0)) throw ConfigError("tolerance " + k + " must be >= 0");
        }
    if (doc.contains("checks")) {
        const auto& jc = doc.at("checks");
        if (jc.contains("separation")) {
            const auto& g = jc.at("separation").at("gap");
            cfg.separation_gap = {g.at(0).get<double>(), g.at(1).get<double>()};
        }
        if (jc.contains("resolvent")) {
            const auto& jr = jc.at("resolvent");
            for (const auto& z : jr.at("z"))
                cfg.resolvent_z.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
            cfg.resolvent_trials = jr.value("trials", 50);
        }
    }
    if (cfg.checks.count("separation") && !(cfg.separation_gap.lo < cfg.separation_gap.hi))
        throw ConfigError("separation check needs checks.separation.gap = [x, y]");
    if (cfg.checks.count("resolvent")) {
        if (cfg.resolvent_z.empty()) throw ConfigError("resolvent check needs checks.resolvent.z");
        if (cfg.ensemble.law != EntryLaw::ComplexGaussian &&
            cfg.ensemble.law != EntryLaw::RealGaussianPair)
            throw ConfigError("resolvent check requires a Gaussian entry law");
        if (cfg.ensemble.rotate) throw ConfigError("resolvent check requires rotate = false");
    }
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    return load_config(toml_lite::parse_file(path));
}

struct TheoryBundle {
    SupportProfile profile;
    std::vector<SpikePrediction> predictions;
    OutlierSet S;

    nlohmann::json to_json() const {
        nlohmann::json preds = nlohmann::json::array();
        for (const auto& p : predictions) preds.push_back(p.to_json());
        return {{"profile", profile.to_json()}, {"spikes", preds}, {"S", S.to_json()}};
    }
};

// Deterministic-equivalent predictions; consumes no randomness.
inline TheoryBundle predict(const ExperimentConfig& cfg) {
    TheoryBundle b{support(cfg.model), {}, {}};
    b.predictions = classify(cfg.model, b.profile);
    b.S = outlier_set_S(cfg.model, b.profile);
    return b;
}

namespace detail {

struct TrialResult {
    // Indexed by spike: outlier eigenvalues, per-vector overlaps, aggregates.
    std::vector<std::vector<double>> outlier_eigs;
    std::vector<std::vector<double>> overlaps;
    std::vector<double> aggregates;
    std::map<std::pair<int, int>, double> cross;  // (j, l) -> aggregate projection
    bool separation_ok = true;
    bool separation_assumption_ok = true;
    bool exclusion_ok = true;
    std::vector<double> exclusion_offenders;
    double trace_identity_gap = 0;
};

struct Stats {
    double mean = 0, stdev = 0, min = 0, max = 0;
    size_t count = 0;

    static Stats of(const std::vector<double>& xs) {
        Stats s;
        s.count = xs.size();
        if (xs.empty()) return s;
        s.min = s.max = xs[0];
        for (double x : xs) {
            s.mean += x;
            s.min = std::min(s.min, x);
            s.max = std::max(s.max, x);
        }
        s.mean /= static_cast<double>(xs.size());
        for (double x : xs) s.stdev += (x - s.mean) * (x - s.mean);
        s.stdev = xs.size() > 1 ? std::sqrt(s.stdev / static_cast<double>(xs.size() - 1)) : 0.0;
        return s;
    }

    nlohmann::json to_json() const {
        return {{"mean", mean}, {"std", stdev}, {"min", min}, {"max", max}, {"count", count}};
    }
};

}  // namespace detail

struct ExperimentReport {
    nlohmann::json theory;
    nlohmann::json empirical;
    nlohmann::json metadata;
    bool all_pass = true;

    nlohmann::json to_json() const {
        return {{"theory", theory},
                {"empirical", empirical},
                {"metadata", metadata},
                {"all_pass", all_pass}};
    }
};

inline int default_worker_count() {
    if (const char* env = std::getenv("IPN_WORKERS")) {
        const int k = std::atoi(env);
        if (k >= 1) return k;
    }
    return 1;
}

// Runs `trials` independent draws and aggregates every requested check.
// Trials fan out over `workers` threads; results land in a per-trial slot,
// so aggregates do not depend on scheduling.
inline ExperimentReport simulate(const ExperimentConfig& cfg, int workers = 0,
                                 const std::string& dump_dir = "") {
    const auto t_start = std::chrono::steady_clock::now();
    if (workers <= 0) workers = default_worker_count();

    const TheoryBundle theory = predict(cfg);
    const ASpec a = build_a(cfg.model, cfg.ensemble);
    const int J = static_cast<int>(cfg.model.spikes.size());
    const double c_N = static_cast<double>(cfg.ensemble.n) / cfg.ensemble.N;
    (void)c_N;

    std::vector<int> in_set;
    for (int j = 0; j < J; ++j)
        if (theory.predictions[static_cast<size_t>(j)].in_outlier_set) in_set.push_back(j);

    std::vector<detail::TrialResult> results(static_cast<size_t>(cfg.trials));
    std::vector<std::string> failures(static_cast<size_t>(cfg.trials));

    auto run_trial = [&](int t) {
        detail::TrialResult& res = results[static_cast<size_t>(t)];
        const Eigen::MatrixXcd X = sample_x(cfg.ensemble, static_cast<uint64_t>(t));
        const Eigen::MatrixXcd M = assemble_m(a, X, cfg.model.sigma);
        if (!dump_dir.empty())
            dump_matrix(dump_dir + "/trial_" + std::to_string(t) + ".ipnm", M);
        const EigDecomp ed = eig_h(M);

        res.outlier_eigs.resize(static_cast<size_t>(J));
        res.overlaps.resize(static_cast<size_t>(J));
        res.aggregates.assign(static_cast<size_t>(J), 0.0);
        for (int j : in_set) {
            const auto [first, last] = a.rank_ranges[static_cast<size_t>(j)];
            for (int rank = first; rank <= last; ++rank)
                res.outlier_eigs[static_cast<size_t>(j)].push_back(ed.values(rank - 1));
            res.overlaps[static_cast<size_t>(j)] = spike_projection(ed, a, j);
            res.aggregates[static_cast<size_t>(j)] = aggregate_projection(ed, a, j, j);
            for (int l : in_set)
                if (l != j) res.cross[{j, l}] = aggregate_projection(ed, a, j, l);
            res.trace_identity_gap =
                std::max(res.trace_identity_gap, trace_projection_identity_gap(ed, a, j));
        }
        if (cfg.checks.count("separation")) {
            const auto rep = exact_separation_check(ed.values, a, cfg.separation_gap.lo,
                                                    cfg.separation_gap.hi, cfg.model,
                                                    theory.profile);
            res.separation_assumption_ok = rep.assumption_ok;
            res.separation_ok = rep.left_ok && rep.right_ok;
        }
        if (cfg.checks.count("exclusion")) {
            const auto rep = support_exclusion_check(ed.values, theory.S, cfg.tol("exclusion"));
            res.exclusion_ok = rep.ok;
            res.exclusion_offenders = rep.offenders;
        }
    };

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int t = next.fetch_add(1); t < cfg.trials; t = next.fetch_add(1)) {
            try {
                run_trial(t);
            } catch (const std::exception& e) {
                failures[static_cast<size_t>(t)] = e.what();
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < workers; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (int t = 0; t < cfg.trials; ++t)
        if (!failures[static_cast<size_t>(t)].empty())
            throw SolverError("trial " + std::to_string(t) + " (stream seed " +
                                  std::to_string(RngStream::mix(cfg.ensemble.seed,
                                                                static_cast<uint64_t>(t))) +
                                  ") failed: " + failures[static_cast<size_t>(t)],
                              0.0);

    ExperimentReport report;
    report.theory = theory.to_json();
    nlohmann::json emp = nlohmann::json::object();

    auto spike_label = [&](int j) {
        return "theta_" + std::to_string(cfg.model.spikes[static_cast<size_t>(j)].theta);
    };
    auto record = [&](const std::string& check, const std::string& key,
                      const detail::Stats& st, double target, double tol) {
        const bool pass = std::abs(st.mean - target) <= tol;
        emp[check][key] = st.to_json();
        emp[check][key]["target"] = target;
        emp[check][key]["tolerance"] = tol;
        emp[check][key]["pass"] = pass;
        if (!pass) report.all_pass = false;
    };

    if (cfg.checks.count("outliers")) {
        for (int j : in_set) {
            std::vector<double> xs;
            for (const auto& r : results)
                for (double v : r.outlier_eigs[static_cast<size_t>(j)]) xs.push_back(v);
            record("outliers", spike_label(j), detail::Stats::of(xs),
                   *theory.predictions[static_cast<size_t>(j)].rho, cfg.tol("outliers"));
        }
    }
    if (cfg.checks.count("overlaps")) {
        for (int j : in_set) {
            std::vector<double> xs;
            for (const auto& r : results)
                for (double v : r.overlaps[static_cast<size_t>(j)]) xs.push_back(v);
            record("overlaps", spike_label(j), detail::Stats::of(xs),
                   *theory.predictions[static_cast<size_t>(j)].tau, cfg.tol("overlaps"));
        }
    }
    if (cfg.checks.count("aggregate")) {
        for (int j : in_set) {
            std::vector<double> xs;
            for (const auto& r : results) xs.push_back(r.aggregates[static_cast<size_t>(j)]);
            const auto& pred = theory.predictions[static_cast<size_t>(j)];
            record("aggregate", spike_label(j), detail::Stats::of(xs),
                   pred.multiplicity * *pred.tau, cfg.tol("aggregate"));
        }
    }
    if (cfg.checks.count("cross_overlaps")) {
        for (int j : in_set)
            for (int l : in_set) {
                if (j == l) continue;
                std::vector<double> xs;
                for (const auto& r : results) xs.push_back(r.cross.at({j, l}));
                const auto st = detail::Stats::of(xs);
                const double tol = cfg.tol("cross_overlaps");
                const bool pass = st.mean <= tol;
                const std::string key = spike_label(j) + "_onto_" + spike_label(l);
                emp["cross_overlaps"][key] = st.to_json();
                emp["cross_overlaps"][key]["target"] = 0.0;
                emp["cross_overlaps"][key]["tolerance"] = tol;
                emp["cross_overlaps"][key]["pass"] = pass;
                if (!pass) report.all_pass = false;
            }
    }
    if (cfg.checks.count("separation")) {
        int ok = 0, assumption_ok = 0;
        for (const auto& r : results) {
            ok += r.separation_ok ? 1 : 0;
            assumption_ok += r.separation_assumption_ok ? 1 : 0;
        }
        const bool pass = ok == cfg.trials && assumption_ok == cfg.trials;
        emp["separation"] = {{"trials_ok", ok},
                             {"assumption_ok", assumption_ok},
                             {"trials", cfg.trials},
                             {"gap", {cfg.separation_gap.lo, cfg.separation_gap.hi}},
                             {"pass", pass}};
        if (!pass) report.all_pass = false;
    }
    if (cfg.checks.count("exclusion")) {
        int ok = 0;
        std::vector<double> offenders;
        for (const auto& r : results) {
            ok += r.exclusion_ok ? 1 : 0;
            offenders.insert(offenders.end(), r.exclusion_offenders.begin(),
                             r.exclusion_offenders.end());
        }
        const bool pass = ok == cfg.trials;
        emp["exclusion"] = {{"trials_ok", ok},
                            {"trials", cfg.trials},
                            {"epsilon", cfg.tol("exclusion")},
                            {"offenders", offenders},
                            {"pass", pass}};
        if (!pass) report.all_pass = false;
    }
    if (cfg.checks.count("resolvent")) {
        const auto rc =
            resolvent_diag_check(cfg.model, cfg.ensemble, a, cfg.resolvent_z, cfg.resolvent_trials);
        const bool pass = rc.max_diag_deviation <= cfg.tol("resolvent_diag") &&
                          rc.max_offdiag_mean <= cfg.tol("resolvent_offdiag");
        emp["resolvent"] = {{"max_diag_deviation", rc.max_diag_deviation},
                            {"max_offdiag_mean", rc.max_offdiag_mean},
                            {"tolerance_diag", cfg.tol("resolvent_diag")},
                            {"tolerance_offdiag", cfg.tol("resolvent_offdiag")},
                            {"trials", cfg.resolvent_trials},
                            {"pass", pass}};
        if (!pass) report.all_pass = false;
    }
    // Exact finite-N identity, asserted on every draw independent of the
    // requested checks (only meaningful when spikes are present).
    if (!in_set.empty()) {
        double worst = 0;
        for (const auto& r : results) worst = std::max(worst, r.trace_identity_gap);
        const bool pass = worst <= 1e-10;
        emp["trace_identity"] = {{"max_gap", worst}, {"tolerance", 1e-10}, {"pass", pass}};
        if (!pass) report.all_pass = false;
    }

    report.empirical = emp;
    nlohmann::json trial_seeds = nlohmann::json::array();
    for (int t = 0; t < cfg.trials; ++t)
        trial_seeds.push_back(RngStream::mix(cfg.ensemble.seed, static_cast<uint64_t>(t)));
    report.metadata = {{"seed", cfg.ensemble.seed},
                       {"trial_stream_seeds", trial_seeds},
                       {"trials", cfg.trials},
                       {"N", cfg.ensemble.N},
                       {"n", cfg.ensemble.n},
                       {"entry_law", entry_law_to_string(cfg.ensemble.law)},
                       {"rotate", cfg.ensemble.rotate},
                       {"version", kVersion},
                       {"elapsed_seconds",
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                            .count()}};
    return report;
}

// Flattened CSV: one row per (check, key, field).
inline std::string report_to_csv(const ExperimentReport& report) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "check,key,field,value\n";
    for (const auto& [check, body] : report.empirical.items()) {
        auto emit = [&](const std::string& key, const nlohmann::json& rec) {
            for (const auto& [field, val] : rec.items()) {
                if (val.is_number())
                    out << check << "," << key << "," << field << "," << val.get<double>() << "\n";
                else if (val.is_boolean())
                    out << check << "," << key << "," << field << "," << (val.get<bool>() ? 1 : 0)
                        << "\n";
            }
        };
        bool nested = body.is_object();
        if (nested)
            for (const auto& [k, v] : body.items())
                if (!v.is_object()) nested = false;
        if (nested)
            for (const auto& [k, v] : body.items()) emit(k, v);
        else
            emit("", body);
    }
    return out.str();
}

inline void write_report(const ExperimentReport& report, const std::string& path,
                         const std::string& format) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write report to " + path);
    if (format == "csv")
        out << report_to_csv(report);
    else
        out << report.to_json().dump(2) << "\n";
}

// predict + simulate + tolerance gating.  Returns the process exit status:
// 0 all checks pass, 1 a check failed.
inline int verify(const ExperimentConfig& cfg, ExperimentReport& report, int workers = 0,
                  const std::string& dump_dir = "") {
    report = simulate(cfg, workers, dump_dir);
    if (!cfg.output.empty()) write_report(report, cfg.output, cfg.format);
    return report.all_pass ? 0 : 1;
}

}  // namespace ipn
