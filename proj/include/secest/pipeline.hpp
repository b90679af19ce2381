#pragma once

// simulate -> attack -> estimate -> evaluate, with file artifacts:
//   measurements.log, trace-<estimator>.log, errors-<estimator>.csv, summary.json,
//   timing.json (wall-clock, not deterministic), errors.json (only on failure).

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "secest/attacker.hpp"
#include "secest/eval.hpp"
#include "secest/log_io.hpp"
#include "secest/scenario.hpp"
#include "secest/secekf.hpp"
#include "secest/secopt.hpp"
#include "secest/simulator.hpp"

namespace secest {

inline MeasurementLog simulate(const ScenarioConfig& cfg) {
    Simulator sim(sim_config(cfg));
    MeasurementLog log;
    log.header.nodes = cfg.nodes.size();
    log.header.master = cfg.master;
    log.header.scenario = cfg.name;
    log.records.reserve(sim.total_events());
    while (!sim.done()) {
        SimRecord r = sim.next();
        log.records.push_back({r.measurement, std::nullopt, std::move(r.truth)});
    }
    return log;
}

/// Rewrites values through the attacker. Records already carrying an attack are rejected.
inline MeasurementLog attack(const MeasurementLog& in, const ScenarioConfig& cfg) {
    if (in.header.attack_type != 0) throw LogFormatError("measurement log has already been attacked");
    Attacker attacker(attack_config(cfg), in.header.nodes, in.header.master);
    MeasurementLog out = in;
    out.header.attack_type = static_cast<int>(cfg.attack.type);
    for (LogRecord& r : out.records) {
        const double a = attacker.injected_value(r.measurement);
        r.measurement.value += a;
        if (cfg.attack.type != AttackType::None) r.attack = a;
    }
    return out;
}

struct StepTiming {
    std::vector<double> seconds;  // per EKF step or per SecOpt window

    double total() const { return std::accumulate(seconds.begin(), seconds.end(), 0.0); }
    double median() const {
        if (seconds.empty()) return 0.0;
        std::vector<double> s = seconds;
        std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(s.size() / 2), s.end());
        return s[s.size() / 2];
    }
    double mean() const { return seconds.empty() ? 0.0 : total() / static_cast<double>(seconds.size()); }
    double max() const { return seconds.empty() ? 0.0 : *std::max_element(seconds.begin(), seconds.end()); }
};

struct EstimatorRun {
    Trace trace;
    StepTiming timing;
    std::size_t skipped_updates = 0;  // degenerate geometry, gated, or out-of-order
    std::size_t non_converged = 0;    // SecOpt windows
};

inline EstimatorRun run_ekf(const ScenarioConfig& cfg, const std::vector<Measurement>& stream, bool secure) {
    const EkfConfig& ec = secure ? cfg.secekf : cfg.origekf;
    SecEkf ekf(ec, initial_guess(cfg));
    EstimatorRun out;
    out.trace.estimator = secure ? "secekf" : "origekf";
    out.trace.nodes = cfg.nodes.size();
    out.trace.master = cfg.master;
    out.trace.with_attacks = ec.attack_states_enabled;
    out.timing.seconds.reserve(stream.size());
    const std::size_t every = cfg.evaluation.trace_every;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const Innovation inn = ekf.step(stream[i]);
        out.timing.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        if (inn.status != UpdateStatus::Applied) ++out.skipped_updates;
        if ((i + 1) % every == 0 || i + 1 == stream.size()) {
            TraceRecord rec;
            rec.step = stream[i].index;
            rec.time = stream[i].time;
            rec.estimate = ekf.estimate();
            for (NodeId k = 0; k < cfg.nodes.size(); ++k) {
                rec.position_std.push_back(ekf.position_std(k));
                rec.offset_std.push_back(ekf.offset_std(k));
            }
            out.trace.records.push_back(std::move(rec));
        }
    }
    return out;
}

inline EstimatorRun run_secopt(const ScenarioConfig& cfg, const std::vector<Measurement>& stream,
                               const SecOptConfig* override_cfg = nullptr) {
    const SecOptConfig& sc = override_cfg ? *override_cfg : cfg.secopt;
    EstimatorRun out;
    out.trace.estimator = "secopt";
    out.trace.nodes = cfg.nodes.size();
    out.trace.master = cfg.master;
    out.trace.with_attacks = true;
    for (auto& w : run_stream(stream, initial_guess(cfg), sc)) {
        out.timing.seconds.push_back(w.wall_seconds);
        if (!w.report.converged) ++out.non_converged;
        out.trace.records.push_back(std::move(w.record));
    }
    return out;
}

inline EstimatorRun run_estimator(const ScenarioConfig& cfg, const std::vector<Measurement>& stream,
                                  const std::string& name) {
    if (name == "secekf") return run_ekf(cfg, stream, true);
    if (name == "origekf") return run_ekf(cfg, stream, false);
    if (name == "secopt") return run_secopt(cfg, stream);
    throw ConfigError("unknown estimator '" + name + "'");
}

inline EvalOptions eval_options(const ScenarioConfig& cfg) {
    EvalOptions o;
    o.warmup = cfg.evaluation.warmup;
    o.match_tolerance = cfg.evaluation.match_tolerance;
    o.reference = cfg.master;
    // With mobile nodes present, align on the static anchors only.
    if (!cfg.mobile_nodes().empty()) o.alignment_nodes = cfg.static_nodes();
    return o;
}

inline ErrorReport evaluate_trace(const ScenarioConfig& cfg, const Trace& trace, const MeasurementLog& log) {
    return evaluate(trace.records, log.truth(), eval_options(cfg));
}

inline nlohmann::json report_json(const ScenarioConfig& cfg, const ErrorReport& r) {
    using nlohmann::json;
    auto block = [&](const std::vector<SeriesStats>& per, const SeriesStats& agg) {
        json means = json::array(), stds = json::array();
        for (const auto& s : per) {
            means.push_back(s.mean);
            stds.push_back(s.std);
        }
        return json{{"per_node_mean", means}, {"per_node_std", stds}, {"mean", agg.mean}, {"std", agg.std}};
    };
    json j;
    j["instants"] = r.times.size();
    j["skipped_instants"] = r.skipped_instants;
    j["degenerate_alignments"] = r.degenerate_alignments;
    j["localization_m"] = block(r.localization_per_node, r.localization_aggregate);
    j["sync_s"] = block(r.sync_per_node, r.sync_aggregate);
    const auto mobile = cfg.mobile_nodes();
    if (!mobile.empty()) {
        std::vector<double> all;
        for (NodeId k : mobile) all.insert(all.end(), r.localization[k].begin(), r.localization[k].end());
        const SeriesStats s = stats_of(all);
        j["mobile_localization_m"] = {{"nodes", mobile}, {"mean", s.mean}, {"std", s.std}};
    }
    return j;
}

inline nlohmann::json timing_json(const EstimatorRun& run) {
    return {{"count", run.timing.seconds.size()},
            {"unit", run.trace.estimator == "secopt" ? "window" : "step"},
            {"median_s", run.timing.median()},
            {"mean_s", run.timing.mean()},
            {"max_s", run.timing.max()},
            {"total_s", run.timing.total()},
            {"skipped_updates", run.skipped_updates},
            {"non_converged_windows", run.non_converged}};
}

inline void write_errors_csv(std::ostream& out, const ErrorReport& r) {
    out << "t,node,localization_m,sync_s\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < r.times.size(); ++i)
        for (std::size_t k = 0; k < r.localization.size(); ++k)
            out << r.times[i] << ',' << k << ',' << r.localization[k][i] << ',' << r.sync[k][i] << '\n';
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}

template <class F>
std::string to_text(F&& f) {
    std::ostringstream s;
    f(s);
    return s.str();
}

}  // namespace detail

inline MeasurementLog read_measurement_log_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    return read_measurement_log(in);
}

inline Trace read_trace_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    return read_trace(in);
}

inline void write_measurement_log_file(const std::filesystem::path& p, const MeasurementLog& log) {
    detail::write_file(p, detail::to_text([&](std::ostream& o) { write_measurement_log(o, log); }));
}

/// Runs the estimators on an (attacked) log and writes trace + timing files.
/// Returns the runs that completed; failures are recorded in `failures`.
inline std::map<std::string, EstimatorRun> estimate_to_dir(const ScenarioConfig& cfg, const MeasurementLog& log,
                                                           const std::vector<std::string>& estimators,
                                                           const std::filesystem::path& dir,
                                                           std::map<std::string, std::string>& failures) {
    if (log.header.nodes != cfg.nodes.size())
        throw LogFormatError("measurement log has " + std::to_string(log.header.nodes) + " nodes, config has " +
                             std::to_string(cfg.nodes.size()));
    std::filesystem::create_directories(dir);
    const auto stream = log.measurements();
    std::map<std::string, EstimatorRun> runs;
    nlohmann::json timing = nlohmann::json::object();
    for (const auto& name : estimators) {
        try {
            EstimatorRun run = run_estimator(cfg, stream, name);
            detail::write_file(dir / ("trace-" + name + ".log"),
                               detail::to_text([&](std::ostream& o) { write_trace(o, run.trace); }));
            timing[name] = timing_json(run);
            runs.emplace(name, std::move(run));
        } catch (const std::exception& e) {
            failures[name] = e.what();
        }
    }
    detail::write_file(dir / "timing.json", timing.dump(2) + "\n");
    return runs;
}

/// Scores traces found in `dir` and writes errors-<estimator>.csv and summary.json.
inline nlohmann::json evaluate_dir(const ScenarioConfig& cfg, const MeasurementLog& log,
                                   const std::vector<std::string>& estimators, const std::filesystem::path& dir,
                                   std::map<std::string, std::string>& failures) {
    using nlohmann::json;
    json summary;
    summary["schema_version"] = kLogSchemaVersion;
    summary["scenario"] = cfg.name;
    summary["nodes"] = cfg.nodes.size();
    summary["measurements"] = log.records.size();
    summary["attack_type"] = log.header.attack_type;
    summary["estimators"] = json::object();
    for (const auto& name : estimators) {
        if (failures.count(name)) continue;
        try {
            const Trace trace = read_trace_file(dir / ("trace-" + name + ".log"));
            const ErrorReport rep = evaluate_trace(cfg, trace, log);
            detail::write_file(dir / ("errors-" + name + ".csv"),
                               detail::to_text([&](std::ostream& o) { write_errors_csv(o, rep); }));
            summary["estimators"][name] = report_json(cfg, rep);
        } catch (const std::exception& e) {
            failures[name] = e.what();
        }
    }
    if (!failures.empty()) {
        json f = json::object();
        for (const auto& [k, v] : failures) f[k] = v;
        detail::write_file(dir / "errors.json", f.dump(2) + "\n");
        summary["failed_estimators"] = f;
    }
    detail::write_file(dir / "summary.json", summary.dump(2) + "\n");
    return summary;
}

struct RunResult {
    nlohmann::json summary;
    std::map<std::string, EstimatorRun> runs;
    std::map<std::string, std::string> failures;
    std::vector<std::string> warnings;
};

/// Full pipeline into `dir`.
inline RunResult run(const ScenarioConfig& cfg, const std::filesystem::path& dir,
                     std::vector<std::string> estimators = {}) {
    if (estimators.empty()) estimators = cfg.estimators;
    std::filesystem::create_directories(dir);
    RunResult res;
    res.warnings = check_attack_plausibility(cfg.attack, cfg.arena.diagonal());
    const MeasurementLog clean = simulate(cfg);
    const MeasurementLog attacked = attack(clean, cfg);
    write_measurement_log_file(dir / "measurements.log", attacked);
    res.runs = estimate_to_dir(cfg, attacked, estimators, dir, res.failures);
    // Score from the files just written so `run` and the chained stages share one path.
    const MeasurementLog reread = read_measurement_log_file(dir / "measurements.log");
    res.summary = evaluate_dir(cfg, reread, estimators, dir, res.failures);
    return res;
}

/// Error of interest for sweeps: the mobile nodes when present, otherwise all nodes.
inline double headline_error(const ScenarioConfig& cfg, const ErrorReport& r) {
    const auto mobile = cfg.mobile_nodes();
    if (mobile.empty()) return r.localization_aggregate.mean;
    std::vector<double> all;
    for (NodeId k : mobile) all.insert(all.end(), r.localization[k].begin(), r.localization[k].end());
    return stats_of(all).mean;
}

struct SweepPoint {
    std::size_t window = 0;
    double lambda = 0.0;
    double error_m = 0.0;
    double median_window_s = 0.0;
    double mean_window_s = 0.0;
    std::size_t windows_solved = 0;
};

/// SecOpt over a grid of window sizes and penalty weights on one attacked stream.
inline std::vector<SweepPoint> sweep(const ScenarioConfig& cfg, const MeasurementLog& attacked) {
    std::vector<SweepPoint> out;
    const auto stream = attacked.measurements();
    const auto truth = attacked.truth();
    std::vector<double> lambdas = cfg.sweep.lambdas;
    if (lambdas.empty()) lambdas.push_back(cfg.secopt.lambda);
    std::vector<std::size_t> windows = cfg.sweep.windows;
    if (windows.empty()) windows.push_back(cfg.secopt.window);
    for (std::size_t L : windows)
        for (double lambda : lambdas) {
            SecOptConfig sc = cfg.secopt;
            sc.window = L;
            sc.lambda = lambda;
            const EstimatorRun run = run_secopt(cfg, stream, &sc);
            const ErrorReport rep = evaluate(run.trace.records, truth, eval_options(cfg));
            out.push_back({L, lambda, headline_error(cfg, rep), run.timing.median(), run.timing.mean(),
                           run.timing.seconds.size()});
        }
    return out;
}

}  // namespace secest
