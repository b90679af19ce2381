// Command-line harness: simulate / attack / estimate / evaluate / run / sweep.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "secest/secest.hpp"

namespace fs = std::filesystem;
using namespace secest;

namespace {

enum ExitCode { kOk = 0, kRuntimeError = 1, kConfigError = 2, kPartial = 3 };

struct Common {
    std::string config;
    std::string preset;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed_override;
    std::vector<std::string> estimators;
};

void add_common(CLI::App* app, Common& c, bool needs_out = true) {
    auto* cfg = app->add_option("--config", c.config, "scenario JSON file");
    auto* pre = app->add_option("--preset", c.preset, "bundled preset name");
    cfg->excludes(pre);
    pre->excludes(cfg);
    if (needs_out) app->add_option("--out-dir", c.out_dir, "artifact directory")->capture_default_str();
    app->add_option("--seed-override", c.seed_override, "sets sim=S, attack=S+1, init=S+2");
}

void add_estimators(CLI::App* app, Common& c) {
    app->add_option("--estimators", c.estimators, "subset of secekf,origekf,secopt")->delimiter(',');
}

ScenarioConfig load(const Common& c) {
    if (c.config.empty() && c.preset.empty()) throw ConfigError("one of --config or --preset is required");
    ScenarioConfig cfg = c.config.empty() ? scenario_from_json(scenario_to_json(make_preset(c.preset)))
                                          : load_scenario(c.config);
    if (c.seed_override) {
        cfg.seeds.sim = *c.seed_override;
        cfg.seeds.attack = *c.seed_override + 1;
        cfg.seeds.init = *c.seed_override + 2;
    }
    for (const auto& e : c.estimators)
        if (std::find(known_estimators().begin(), known_estimators().end(), e) == known_estimators().end())
            throw ConfigError("--estimators: unknown estimator '" + e + "'");
    return cfg;
}

std::vector<std::string> estimators_of(const Common& c, const ScenarioConfig& cfg) {
    return c.estimators.empty() ? cfg.estimators : c.estimators;
}

void warn(const ScenarioConfig& cfg) {
    for (const auto& w : check_attack_plausibility(cfg.attack, cfg.arena.diagonal())) std::cerr << "warning: " << w << '\n';
}

int report_failures(const std::map<std::string, std::string>& failures) {
    for (const auto& [name, what] : failures) std::cerr << "estimator " << name << " failed: " << what << '\n';
    return failures.empty() ? kOk : kPartial;
}

void print_summary(const nlohmann::json& summary) {
    for (const auto& [name, rep] : summary["estimators"].items()) {
        std::cout << name << ": localization " << rep["localization_m"]["mean"].get<double>() << " m, sync "
                  << rep["sync_s"]["mean"].get<double>() * 1e6 << " us";
        if (rep.contains("mobile_localization_m"))
            std::cout << ", mobile " << rep["mobile_localization_m"]["mean"].get<double>() << " m";
        std::cout << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attack-resilient localization and clock synchronization experiments"};
    app.require_subcommand(1);

    Common sim_opt, atk_opt, est_opt, eva_opt, run_opt, sw_opt, show_opt;

    auto* sim = app.add_subcommand("simulate", "generate an attack-free measurement log");
    add_common(sim, sim_opt);

    auto* atk = app.add_subcommand("attack", "rewrite a measurement log through the attacker");
    add_common(atk, atk_opt);
    std::string atk_in, atk_out;
    atk->add_option("--input", atk_in, "clean log (default <out-dir>/measurements.log)");
    atk->add_option("--output", atk_out, "attacked log (default: overwrite the input)");

    auto* est = app.add_subcommand("estimate", "run estimators over a measurement log");
    add_common(est, est_opt);
    add_estimators(est, est_opt);
    std::string est_in;
    est->add_option("--input", est_in, "measurement log (default <out-dir>/measurements.log)");

    auto* eva = app.add_subcommand("evaluate", "score traces in <out-dir> against the log's ground truth");
    add_common(eva, eva_opt);
    add_estimators(eva, eva_opt);
    std::string eva_in;
    eva->add_option("--input", eva_in, "measurement log (default <out-dir>/measurements.log)");

    auto* run = app.add_subcommand("run", "simulate, attack, estimate and evaluate");
    add_common(run, run_opt);
    add_estimators(run, run_opt);

    auto* sw = app.add_subcommand("sweep", "SecOpt error and runtime over window sizes and penalty weights");
    add_common(sw, sw_opt);

    auto* list = app.add_subcommand("presets", "list bundled presets");
    auto* show = app.add_subcommand("show-config", "print the resolved scenario JSON");
    add_common(show, show_opt, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*list) {
            for (const auto& n : preset_names()) std::cout << n << '\n';
            return kOk;
        }
        if (*show) {
            std::cout << scenario_to_json(load(show_opt)).dump(2) << '\n';
            return kOk;
        }
        if (*sim) {
            const ScenarioConfig cfg = load(sim_opt);
            fs::create_directories(sim_opt.out_dir);
            const fs::path p = fs::path(sim_opt.out_dir) / "measurements.log";
            const MeasurementLog log = simulate(cfg);
            write_measurement_log_file(p, log);
            std::cout << "wrote " << log.records.size() << " measurements to " << p.string() << '\n';
            return kOk;
        }
        if (*atk) {
            const ScenarioConfig cfg = load(atk_opt);
            warn(cfg);
            const fs::path in = atk_in.empty() ? fs::path(atk_opt.out_dir) / "measurements.log" : fs::path(atk_in);
            const fs::path out = atk_out.empty() ? in : fs::path(atk_out);
            const MeasurementLog log = attack(read_measurement_log_file(in), cfg);
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            write_measurement_log_file(out, log);
            std::cout << "attack type " << log.header.attack_type << " applied, wrote " << out.string() << '\n';
            return kOk;
        }
        if (*est) {
            const ScenarioConfig cfg = load(est_opt);
            const fs::path in = est_in.empty() ? fs::path(est_opt.out_dir) / "measurements.log" : fs::path(est_in);
            std::map<std::string, std::string> failures;
            const auto runs = estimate_to_dir(cfg, read_measurement_log_file(in), estimators_of(est_opt, cfg),
                                              est_opt.out_dir, failures);
            for (const auto& [name, r] : runs)
                std::cout << name << ": " << r.trace.records.size() << " trace records, median "
                          << r.timing.median() * 1e3 << " ms per " << (name == "secopt" ? "window" : "step") << '\n';
            return report_failures(failures);
        }
        if (*eva) {
            const ScenarioConfig cfg = load(eva_opt);
            const fs::path in = eva_in.empty() ? fs::path(eva_opt.out_dir) / "measurements.log" : fs::path(eva_in);
            std::map<std::string, std::string> failures;
            const auto summary =
                evaluate_dir(cfg, read_measurement_log_file(in), estimators_of(eva_opt, cfg), eva_opt.out_dir, failures);
            print_summary(summary);
            return report_failures(failures);
        }
        if (*run) {
            const ScenarioConfig cfg = load(run_opt);
            warn(cfg);
            const RunResult res = secest::run(cfg, run_opt.out_dir, estimators_of(run_opt, cfg));
            print_summary(res.summary);
            return report_failures(res.failures);
        }
        if (*sw) {
            const ScenarioConfig cfg = load(sw_opt);
            fs::create_directories(sw_opt.out_dir);
            const MeasurementLog log = attack(simulate(cfg), cfg);
            nlohmann::json pts = nlohmann::json::array();
            std::ostringstream csv;
            csv << "window,lambda,error_m,median_window_s,mean_window_s,windows\n";
            for (const SweepPoint& p : sweep(cfg, log)) {
                pts.push_back({{"window", p.window},
                               {"lambda", p.lambda},
                               {"error_m", p.error_m},
                               {"median_window_s", p.median_window_s},
                               {"mean_window_s", p.mean_window_s},
                               {"windows", p.windows_solved}});
                csv << p.window << ',' << p.lambda << ',' << p.error_m << ',' << p.median_window_s << ','
                    << p.mean_window_s << ',' << p.windows_solved << '\n';
                std::cout << "L=" << p.window << " lambda=" << p.lambda << ": " << p.error_m << " m, median "
                          << p.median_window_s * 1e3 << " ms/window\n";
            }
            detail::write_file(fs::path(sw_opt.out_dir) / "sweep.json", pts.dump(2) + "\n");
            detail::write_file(fs::path(sw_opt.out_dir) / "sweep.csv", csv.str());
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const LogFormatError& e) {
        std::cerr << "log error: " << e.what() << '\n';
        return kRuntimeError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}
