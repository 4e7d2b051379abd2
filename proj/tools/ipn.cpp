// ipn: deterministic-equivalent predictions and Monte Carlo verification for
// the spiked information-plus-noise model.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "ipn/harness.hpp"

namespace {

struct GridSpec {
    double lo = 0, hi = 5;
    int points = 2000;
};

GridSpec parse_grid(const std::string& s) {
    GridSpec g;
    const size_t c1 = s.find(':');
    const size_t c2 = s.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw ipn::ConfigError("grid must be lo:hi:points");
    g.lo = std::stod(s.substr(0, c1));
    g.hi = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
    g.points = std::stoi(s.substr(c2 + 1));
    if (!(g.lo < g.hi) || g.points < 2) throw ipn::ConfigError("bad grid spec");
    return g;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw ipn::ConfigError("cannot write " + path);
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spiked information-plus-noise spectra: predictions and Monte Carlo checks"};
    app.require_subcommand(1);

    std::string config_path, output_path;
    int trials_override = 0, workers = 0;
    long long seed_override = -1;
    bool dump = false;
    double eta = 1e-6;
    std::string grid_spec = "0:5:2000";

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "TOML config file")->required();
        sub->add_option("-o,--output", output_path, "output path ('-' for stdout)");
    };

    auto* cmd_predict = app.add_subcommand("predict", "theory bundle: support, spikes, S");
    add_common(cmd_predict);

    auto* cmd_support = app.add_subcommand("support", "support intervals and admissible set");
    add_common(cmd_support);

    auto* cmd_density = app.add_subcommand("density", "spectral density on a grid (CSV)");
    add_common(cmd_density);
    cmd_density->add_option("--eta", eta, "imaginary offset")->check(CLI::PositiveNumber);
    cmd_density->add_option("--grid", grid_spec, "grid as lo:hi:points");

    auto* cmd_simulate = app.add_subcommand("simulate", "Monte Carlo trials and aggregation");
    add_common(cmd_simulate);
    cmd_simulate->add_option("--trials", trials_override, "override run.trials");
    cmd_simulate->add_option("--seed", seed_override, "override ensemble.seed");
    cmd_simulate->add_option("--workers", workers, "worker thread count");

    auto* cmd_verify = app.add_subcommand("verify", "simulate and gate on tolerances");
    add_common(cmd_verify);
    cmd_verify->add_option("--workers", workers, "worker thread count");
    cmd_verify->add_flag("--dump", dump, "dump each trial matrix next to the report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        ipn::ExperimentConfig cfg = ipn::load_config_file(config_path);
        if (trials_override > 0) cfg.trials = trials_override;
        if (seed_override >= 0) cfg.ensemble.seed = static_cast<uint64_t>(seed_override);
        if (!output_path.empty()) cfg.output = output_path;

        if (cmd_predict->parsed()) {
            write_text(cfg.output, ipn::predict(cfg).to_json().dump(2) + "\n");
            return 0;
        }
        if (cmd_support->parsed()) {
            write_text(cfg.output, ipn::support(cfg.model).to_json().dump(2) + "\n");
            return 0;
        }
        if (cmd_density->parsed()) {
            const GridSpec g = parse_grid(grid_spec);
            std::vector<double> xs(static_cast<size_t>(g.points));
            for (int i = 0; i < g.points; ++i)
                xs[static_cast<size_t>(i)] = g.lo + (g.hi - g.lo) * i / (g.points - 1);
            const auto dens = ipn::density_grid(cfg.model, xs, eta);
            std::ostringstream csv;
            csv << std::setprecision(17) << "x,density\n";
            for (int i = 0; i < g.points; ++i)
                csv << xs[static_cast<size_t>(i)] << "," << dens[static_cast<size_t>(i)] << "\n";
            write_text(cfg.output, csv.str());
            return 0;
        }
        if (cmd_simulate->parsed()) {
            const auto report = ipn::simulate(cfg, workers);
            if (!cfg.output.empty() && cfg.output != "-")
                ipn::write_report(report, cfg.output, cfg.format);
            else
                std::cout << report.to_json().dump(2) << "\n";
            return 0;
        }
        if (cmd_verify->parsed()) {
            std::string dump_dir;
            if (dump) {
                dump_dir = cfg.output.empty()
                               ? "."
                               : std::filesystem::path(cfg.output).parent_path().string();
                if (dump_dir.empty()) dump_dir = ".";
            }
            ipn::ExperimentReport report;
            const int status = ipn::verify(cfg, report, workers, dump_dir);
            for (const auto& [check, body] : report.empirical.items()) {
                bool pass = true;
                if (body.is_object() && body.contains("pass"))
                    pass = body.at("pass").get<bool>();
                else if (body.is_object())
                    for (const auto& [k, v] : body.items())
                        if (v.is_object() && v.contains("pass") && !v.at("pass").get<bool>())
                            pass = false;
                std::cout << (pass ? "[PASS] " : "[FAIL] ") << check << "\n";
            }
            return status;
        }
    } catch (const ipn::SolverError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const ipn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
