#pragma once

// Experiment description (JSON, schema version 1) and the bundled presets.
//
// Top-level keys (all optional except "nodes"):
//   schema_version  1
//   name            string
//   arena           {"min":[x,y,z], "max":[x,y,z]}                         meters
//   master          node id of the reference clock (0)
//   nodes           [{"id", "motion", "clock"}]
//     motion        {"type":"static","position":[..]}
//                   {"type":"waypoints","points":[{"t":s,"position":[..]}]}
//                   {"type":"constant_velocity","start":[..],"velocity":[..]}
//     clock         {"initial_offset" s, "initial_bias", "bias_random_walk_std" 1/sqrt(s),
//                    "offset_process_noise_std" s}
//   topology        {"type":"full"} | {"type":"k_nearest","k":n} | {"type":"explicit","edges":[[a,b],..]}
//   measurements    {"kinds":["d","r","R"], "period" s, "include_propagation", "schedule_seed"}
//   noise           {"sigma_d" s, "sigma_r" m, "sigma_R" m}
//   duration        s
//   attack          {"type":0-5, "total_time" s, "magnitude_scale" s, "node_constants":{"id":s},
//                    "attacked_nodes":[ids]}
//   estimators      ["secekf","origekf","secopt"]
//   initial_guess   {"position_error_std" m, "mobile_position_error_std" m}
//   secekf/origekf  EKF settings (see ekf_from_json)
//   secopt          window estimator settings (see secopt_from_json)
//   evaluation      {"warmup" s, "match_tolerance" s, "trace_every" steps}
//   sweep           {"windows":[L..], "lambdas":[..]}
//   seeds           {"sim", "attack", "init"}

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "secest/attacker.hpp"
#include "secest/random.hpp"
#include "secest/secekf.hpp"
#include "secest/secopt.hpp"
#include "secest/simulator.hpp"

namespace secest {

inline constexpr int kConfigSchemaVersion = 1;

struct TopologySpec {
    enum class Kind { Full, KNearest, Explicit } kind = Kind::Full;
    std::size_t k = 4;
    std::vector<std::pair<NodeId, NodeId>> edges;
};

struct NodeSpec {
    NodeId id = 0;
    MotionModel motion = StaticMotion{};
    ClockModel clock;
};

struct Seeds {
    std::uint64_t sim = 1;
    std::uint64_t attack = 2;
    std::uint64_t init = 3;
};

struct InitialGuessSpec {
    double position_error_std = 0.3;
    double mobile_position_error_std = 1.0;
};

struct EvaluationSpec {
    double warmup = 5.0;
    double match_tolerance = 0.05;
    std::size_t trace_every = 10;
};

struct SweepSpec {
    std::vector<std::size_t> windows{50, 100, 200, 300};
    std::vector<double> lambdas;
};

struct ScenarioConfig {
    std::string name = "custom";
    Arena arena;
    NodeId master = 0;
    std::vector<NodeSpec> nodes;
    TopologySpec topology;
    std::vector<MeasurementKind> kinds{kAllKinds.begin(), kAllKinds.end()};
    double period = 0.01;
    bool include_propagation = true;
    std::uint64_t schedule_seed = 0;
    NoiseConfig noise;
    double duration = 60.0;
    AttackConfig attack;
    std::vector<std::string> estimators{"secekf", "origekf", "secopt"};
    InitialGuessSpec initial_guess;
    EkfConfig secekf;
    EkfConfig origekf;
    SecOptConfig secopt;
    EvaluationSpec evaluation;
    SweepSpec sweep;
    Seeds seeds;

    std::vector<NodeId> static_nodes() const {
        std::vector<NodeId> out;
        for (const auto& n : nodes)
            if (is_static(n.motion)) out.push_back(n.id);
        return out;
    }
    std::vector<NodeId> mobile_nodes() const {
        std::vector<NodeId> out;
        for (const auto& n : nodes)
            if (!is_static(n.motion)) out.push_back(n.id);
        return out;
    }
};

inline const std::vector<std::string>& known_estimators() {
    static const std::vector<std::string> k{"secekf", "origekf", "secopt"};
    return k;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!ok.count(it.key())) throw ConfigError(path_ + "/" + it.key() + ": unknown key");
    }

    bool has(const char* key) const { return j_.contains(key); }
    std::string at(const char* key) const { return path_ + "/" + key; }

    template <class T>
    void get(const char* key, T& out) const {
        if (!j_.contains(key)) return;
        try {
            out = j_[key].get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(at(key) + ": " + e.what());
        }
    }

    double number(const char* key, double def) const {
        double v = def;
        get(key, v);
        return v;
    }

    Reader child(const char* key) const { return Reader(j_.at(key), at(key)); }
    const json& raw(const char* key) const { return j_.at(key); }

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path_ + ": " + msg); }
    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
};

inline Vec3 vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(path + ": expected [x, y, z]");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!j[static_cast<std::size_t>(i)].is_number()) throw ConfigError(path + ": expected numbers");
        v[i] = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline MotionModel motion_from_json(const Reader& r) {
    std::string type;
    r.get("type", type);
    if (type == "static") {
        r.allow({"type", "position"});
        return StaticMotion{vec3(r.raw("position"), r.at("position"))};
    }
    if (type == "constant_velocity") {
        r.allow({"type", "start", "velocity"});
        return ConstantVelocityMotion{vec3(r.raw("start"), r.at("start")), vec3(r.raw("velocity"), r.at("velocity"))};
    }
    if (type == "waypoints") {
        r.allow({"type", "points"});
        WaypointMotion w;
        const json& pts = r.raw("points");
        if (!pts.is_array()) r.fail("points must be an array");
        for (std::size_t i = 0; i < pts.size(); ++i) {
            Reader p(pts[i], r.at("points") + "/" + std::to_string(i));
            p.allow({"t", "position"});
            Waypoint wp;
            wp.time = p.number("t", 0.0);
            wp.position = vec3(p.raw("position"), p.at("position"));
            w.points.push_back(wp);
        }
        return w;
    }
    r.fail("unknown motion type '" + type + "'");
}

inline json motion_to_json(const MotionModel& m) {
    return std::visit(
        [](const auto& v) -> json {
            using M = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<M, StaticMotion>) {
                return {{"type", "static"}, {"position", vec3_json(v.position)}};
            } else if constexpr (std::is_same_v<M, ConstantVelocityMotion>) {
                return {{"type", "constant_velocity"}, {"start", vec3_json(v.start)}, {"velocity", vec3_json(v.velocity)}};
            } else {
                json pts = json::array();
                for (const auto& p : v.points) pts.push_back({{"t", p.time}, {"position", vec3_json(p.position)}});
                return {{"type", "waypoints"}, {"points", pts}};
            }
        },
        m);
}

inline void variances_from_json(const Reader& r, FieldVariances& v) {
    r.allow({"position", "offset", "bias", "attack_offset", "attack_distance"});
    r.get("position", v.position);
    r.get("offset", v.offset);
    r.get("bias", v.bias);
    r.get("attack_offset", v.attack_offset);
    r.get("attack_distance", v.attack_distance);
}

inline json variances_to_json(const FieldVariances& v) {
    return {{"position", v.position},
            {"offset", v.offset},
            {"bias", v.bias},
            {"attack_offset", v.attack_offset},
            {"attack_distance", v.attack_distance}};
}

inline std::map<NodeId, double> node_map_from_json(const Reader& r, const char* key) {
    std::map<NodeId, double> out;
    if (!r.has(key)) return out;
    const json& j = r.raw(key);
    if (!j.is_object()) throw ConfigError(r.at(key) + ": expected an object keyed by node id");
    for (auto it = j.begin(); it != j.end(); ++it) {
        NodeId id = 0;
        try {
            id = static_cast<NodeId>(std::stoul(it.key()));
        } catch (...) {
            throw ConfigError(r.at(key) + "/" + it.key() + ": key is not a node id");
        }
        if (!it.value().is_number()) throw ConfigError(r.at(key) + "/" + it.key() + ": expected a number");
        out[id] = it.value().get<double>();
    }
    return out;
}

inline json node_map_to_json(const std::map<NodeId, double>& m) {
    json j = json::object();
    for (auto [k, v] : m) j[std::to_string(k)] = v;
    return j;
}

/// EKF keys: process_noise, initial_variance (per-field objects), position_process_noise,
/// position_initial_variance (per-node maps), sigma_d, sigma_r, sigma_R,
/// attack_states_enabled, pin_master_attack_offset, gate_sigmas.
inline void ekf_from_json(const Reader& r, EkfConfig& c) {
    r.allow({"process_noise", "initial_variance", "position_process_noise", "position_initial_variance", "sigma_d",
             "sigma_r", "sigma_R", "attack_states_enabled", "pin_master_attack_offset", "gate_sigmas"});
    if (r.has("process_noise")) variances_from_json(r.child("process_noise"), c.process_noise);
    if (r.has("initial_variance")) variances_from_json(r.child("initial_variance"), c.initial_variance);
    if (r.has("position_process_noise")) c.position_process_noise = node_map_from_json(r, "position_process_noise");
    if (r.has("position_initial_variance"))
        c.position_initial_variance = node_map_from_json(r, "position_initial_variance");
    r.get("sigma_d", c.sigma_d);
    r.get("sigma_r", c.sigma_r);
    r.get("sigma_R", c.sigma_R);
    r.get("attack_states_enabled", c.attack_states_enabled);
    r.get("pin_master_attack_offset", c.pin_master_attack_offset);
    r.get("gate_sigmas", c.gate_sigmas);
}

inline json ekf_to_json(const EkfConfig& c) {
    return {{"process_noise", variances_to_json(c.process_noise)},
            {"initial_variance", variances_to_json(c.initial_variance)},
            {"position_process_noise", node_map_to_json(c.position_process_noise)},
            {"position_initial_variance", node_map_to_json(c.position_initial_variance)},
            {"sigma_d", c.sigma_d},
            {"sigma_r", c.sigma_r},
            {"sigma_R", c.sigma_R},
            {"attack_states_enabled", c.attack_states_enabled},
            {"pin_master_attack_offset", c.pin_master_attack_offset},
            {"gate_sigmas", c.gate_sigmas}};
}

inline void secopt_from_json(const Reader& r, SecOptConfig& c) {
    r.allow({"lambda", "window", "stride", "max_iterations", "step_tolerance", "epsilon_distance", "epsilon_offset",
             "warm_start", "split_subproblems", "pin_master_attack_offset", "sigma_d", "sigma_r", "sigma_R"});
    r.get("lambda", c.lambda);
    r.get("window", c.window);
    r.get("stride", c.stride);
    r.get("max_iterations", c.max_iterations);
    r.get("step_tolerance", c.step_tolerance);
    r.get("epsilon_distance", c.epsilon_distance);
    r.get("epsilon_offset", c.epsilon_offset);
    r.get("warm_start", c.warm_start);
    r.get("split_subproblems", c.split_subproblems);
    r.get("pin_master_attack_offset", c.pin_master_attack_offset);
    r.get("sigma_d", c.sigma_d);
    r.get("sigma_r", c.sigma_r);
    r.get("sigma_R", c.sigma_R);
}

inline json secopt_to_json(const SecOptConfig& c) {
    return {{"lambda", c.lambda},
            {"window", c.window},
            {"stride", c.stride},
            {"max_iterations", c.max_iterations},
            {"step_tolerance", c.step_tolerance},
            {"epsilon_distance", c.epsilon_distance},
            {"epsilon_offset", c.epsilon_offset},
            {"warm_start", c.warm_start},
            {"split_subproblems", c.split_subproblems},
            {"pin_master_attack_offset", c.pin_master_attack_offset},
            {"sigma_d", c.sigma_d},
            {"sigma_r", c.sigma_r},
            {"sigma_R", c.sigma_R}};
}

}  // namespace detail

/// Parses and validates a scenario. Errors carry a JSON-pointer-like field path.
inline Topology build_topology(const ScenarioConfig& c);

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    using detail::Reader;
    Reader r(j, "");
    r.allow({"schema_version", "name", "arena", "master", "nodes", "topology", "measurements", "noise", "duration",
             "attack", "estimators", "initial_guess", "secekf", "origekf", "secopt", "evaluation", "sweep", "seeds"});
    int version = kConfigSchemaVersion;
    r.get("schema_version", version);
    if (version != kConfigSchemaVersion)
        throw ConfigError("/schema_version: " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kConfigSchemaVersion) + ")");
    ScenarioConfig c;
    // Estimator sections default to each other's measurement noise unless overridden.
    c.origekf.attack_states_enabled = false;
    r.get("name", c.name);
    if (r.has("arena")) {
        Reader a = r.child("arena");
        a.allow({"min", "max"});
        if (a.has("min")) c.arena.min = detail::vec3(a.raw("min"), a.at("min"));
        if (a.has("max")) c.arena.max = detail::vec3(a.raw("max"), a.at("max"));
        if (!(c.arena.max.array() > c.arena.min.array()).all()) a.fail("max must exceed min on every axis");
    }
    r.get("master", c.master);
    if (!r.has("nodes")) throw ConfigError("/nodes: required");
    const auto& nodes = r.raw("nodes");
    if (!nodes.is_array() || nodes.empty()) throw ConfigError("/nodes: expected a non-empty array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        Reader n(nodes[i], "/nodes/" + std::to_string(i));
        n.allow({"id", "motion", "clock"});
        NodeSpec s;
        s.id = i;
        n.get("id", s.id);
        if (s.id != i) n.fail("node ids must be 0..N-1 in order (got " + std::to_string(s.id) + ")");
        if (!n.has("motion")) n.fail("motion is required");
        s.motion = detail::motion_from_json(n.child("motion"));
        try {
            validate(s.motion, c.arena);
        } catch (const ConfigError& e) {
            throw ConfigError(n.at("motion") + ": " + e.what());
        }
        if (n.has("clock")) {
            Reader cl = n.child("clock");
            cl.allow({"initial_offset", "initial_bias", "bias_random_walk_std", "offset_process_noise_std"});
            cl.get("initial_offset", s.clock.initial_offset);
            cl.get("initial_bias", s.clock.initial_bias);
            cl.get("bias_random_walk_std", s.clock.bias_random_walk_std);
            cl.get("offset_process_noise_std", s.clock.offset_process_noise_std);
            try {
                s.clock.validate();
            } catch (const ConfigError& e) {
                cl.fail(e.what());
            }
            if (std::abs(s.clock.initial_bias) >= kDefaultBiasBound) cl.fail("initial_bias exceeds the 100 ppm bound");
        }
        c.nodes.push_back(s);
    }
    if (c.master >= c.nodes.size()) throw ConfigError("/master: node " + std::to_string(c.master) + " is not defined");
    if (r.has("topology")) {
        Reader t = r.child("topology");
        std::string type = "full";
        t.get("type", type);
        if (type == "full") {
            t.allow({"type"});
            c.topology.kind = TopologySpec::Kind::Full;
        } else if (type == "k_nearest") {
            t.allow({"type", "k"});
            c.topology.kind = TopologySpec::Kind::KNearest;
            t.get("k", c.topology.k);
            if (c.topology.k < 1) t.fail("k must be >= 1");
        } else if (type == "explicit") {
            t.allow({"type", "edges"});
            c.topology.kind = TopologySpec::Kind::Explicit;
            const auto& edges = t.raw("edges");
            for (std::size_t i = 0; i < edges.size(); ++i) {
                const auto& e = edges[i];
                if (!e.is_array() || e.size() != 2) throw ConfigError(t.at("edges") + "/" + std::to_string(i) + ": expected [a, b]");
                const NodeId a = e[0].get<NodeId>(), b = e[1].get<NodeId>();
                if (a >= c.nodes.size() || b >= c.nodes.size())
                    throw ConfigError(t.at("edges") + "/" + std::to_string(i) + ": references an undefined node");
                c.topology.edges.emplace_back(a, b);
            }
        } else {
            t.fail("unknown topology type '" + type + "'");
        }
    }
    if (r.has("measurements")) {
        Reader m = r.child("measurements");
        m.allow({"kinds", "period", "include_propagation", "schedule_seed"});
        if (m.has("kinds")) {
            std::vector<std::string> tags;
            m.get("kinds", tags);
            c.kinds.clear();
            for (const auto& t : tags) {
                try {
                    c.kinds.push_back(kind_from_tag(t));
                } catch (const ConfigError& e) {
                    m.fail(e.what());
                }
            }
            if (c.kinds.empty()) m.fail("kinds must not be empty");
        }
        m.get("period", c.period);
        if (!(c.period > 0.0)) m.fail("period must be > 0");
        m.get("include_propagation", c.include_propagation);
        m.get("schedule_seed", c.schedule_seed);
    }
    if (r.has("noise")) {
        Reader n = r.child("noise");
        n.allow({"sigma_d", "sigma_r", "sigma_R"});
        n.get("sigma_d", c.noise.sigma_d);
        n.get("sigma_r", c.noise.sigma_r);
        n.get("sigma_R", c.noise.sigma_R);
        try {
            c.noise.validate();
        } catch (const ConfigError& e) {
            n.fail(e.what());
        }
    }
    // Estimators use the simulated noise levels unless their sections override them.
    for (EkfConfig* e : {&c.secekf, &c.origekf}) {
        e->sigma_d = c.noise.sigma_d > 0 ? c.noise.sigma_d : e->sigma_d;
        e->sigma_r = c.noise.sigma_r > 0 ? c.noise.sigma_r : e->sigma_r;
        e->sigma_R = c.noise.sigma_R > 0 ? c.noise.sigma_R : e->sigma_R;
    }
    c.secopt.sigma_d = c.secekf.sigma_d;
    c.secopt.sigma_r = c.secekf.sigma_r;
    c.secopt.sigma_R = c.secekf.sigma_R;

    r.get("duration", c.duration);
    if (!(c.duration > 0.0)) throw ConfigError("/duration: must be > 0");
    c.attack.total_time = c.duration;
    if (r.has("attack")) {
        Reader a = r.child("attack");
        a.allow({"type", "total_time", "magnitude_scale", "node_constants", "attacked_nodes"});
        int type = 0;
        a.get("type", type);
        try {
            c.attack.type = attack_type_from_int(type);
        } catch (const ConfigError& e) {
            throw ConfigError(a.at("type") + ": " + e.what());
        }
        a.get("total_time", c.attack.total_time);
        a.get("magnitude_scale", c.attack.magnitude_scale);
        c.attack.node_constants = detail::node_map_from_json(a, "node_constants");
        a.get("attacked_nodes", c.attack.attacked_nodes);
        for (NodeId k : c.attack.attacked_nodes)
            if (k >= c.nodes.size()) throw ConfigError(a.at("attacked_nodes") + ": node " + std::to_string(k) + " is not defined");
        for (auto [k, v] : c.attack.node_constants)
            if (k >= c.nodes.size()) throw ConfigError(a.at("node_constants") + ": node " + std::to_string(k) + " is not defined");
        try {
            c.attack.validate();
        } catch (const ConfigError& e) {
            a.fail(e.what());
        }
    }
    if (r.has("estimators")) {
        r.get("estimators", c.estimators);
        for (const auto& e : c.estimators)
            if (std::find(known_estimators().begin(), known_estimators().end(), e) == known_estimators().end())
                throw ConfigError("/estimators: unknown estimator '" + e + "'");
    }
    if (r.has("initial_guess")) {
        Reader g = r.child("initial_guess");
        g.allow({"position_error_std", "mobile_position_error_std"});
        g.get("position_error_std", c.initial_guess.position_error_std);
        g.get("mobile_position_error_std", c.initial_guess.mobile_position_error_std);
    }
    if (r.has("secekf")) detail::ekf_from_json(r.child("secekf"), c.secekf);
    if (r.has("origekf")) detail::ekf_from_json(r.child("origekf"), c.origekf);
    if (r.has("secopt")) detail::secopt_from_json(r.child("secopt"), c.secopt);
    c.secopt.include_propagation = c.include_propagation;
    c.secekf.include_propagation = c.include_propagation;
    c.origekf.include_propagation = c.include_propagation;
    try {
        c.secekf.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("/secekf: ") + e.what());
    }
    try {
        c.origekf.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("/origekf: ") + e.what());
    }
    if (c.origekf.attack_states_enabled) throw ConfigError("/origekf/attack_states_enabled: must be false for the baseline");
    try {
        c.secopt.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("/secopt: ") + e.what());
    }
    if (r.has("evaluation")) {
        Reader e = r.child("evaluation");
        e.allow({"warmup", "match_tolerance", "trace_every"});
        e.get("warmup", c.evaluation.warmup);
        e.get("match_tolerance", c.evaluation.match_tolerance);
        e.get("trace_every", c.evaluation.trace_every);
        if (c.evaluation.trace_every < 1) e.fail("trace_every must be >= 1");
    }
    if (r.has("sweep")) {
        Reader s = r.child("sweep");
        s.allow({"windows", "lambdas"});
        s.get("windows", c.sweep.windows);
        s.get("lambdas", c.sweep.lambdas);
    }
    if (r.has("seeds")) {
        Reader s = r.child("seeds");
        s.allow({"sim", "attack", "init"});
        s.get("sim", c.seeds.sim);
        s.get("attack", c.seeds.attack);
        s.get("init", c.seeds.init);
    }
    try {
        build_topology(c);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("/topology: ") + e.what());
    }
    return c;
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& c) {
    using nlohmann::json;
    json nodes = json::array();
    for (const auto& n : c.nodes)
        nodes.push_back({{"id", n.id},
                         {"motion", detail::motion_to_json(n.motion)},
                         {"clock",
                          {{"initial_offset", n.clock.initial_offset},
                           {"initial_bias", n.clock.initial_bias},
                           {"bias_random_walk_std", n.clock.bias_random_walk_std},
                           {"offset_process_noise_std", n.clock.offset_process_noise_std}}}});
    json topo;
    switch (c.topology.kind) {
        case TopologySpec::Kind::Full: topo = {{"type", "full"}}; break;
        case TopologySpec::Kind::KNearest: topo = {{"type", "k_nearest"}, {"k", c.topology.k}}; break;
        case TopologySpec::Kind::Explicit: {
            json edges = json::array();
            for (auto [a, b] : c.topology.edges) edges.push_back({a, b});
            topo = {{"type", "explicit"}, {"edges", edges}};
        } break;
    }
    std::vector<std::string> kinds;
    for (auto k : c.kinds) kinds.emplace_back(to_tag(k));
    json attack = {{"type", static_cast<int>(c.attack.type)},
                   {"total_time", c.attack.total_time},
                   {"magnitude_scale", c.attack.magnitude_scale},
                   {"node_constants", detail::node_map_to_json(c.attack.node_constants)},
                   {"attacked_nodes", c.attack.attacked_nodes}};
    return {{"schema_version", kConfigSchemaVersion},
            {"name", c.name},
            {"arena", {{"min", detail::vec3_json(c.arena.min)}, {"max", detail::vec3_json(c.arena.max)}}},
            {"master", c.master},
            {"nodes", nodes},
            {"topology", topo},
            {"measurements",
             {{"kinds", kinds},
              {"period", c.period},
              {"include_propagation", c.include_propagation},
              {"schedule_seed", c.schedule_seed}}},
            {"noise", {{"sigma_d", c.noise.sigma_d}, {"sigma_r", c.noise.sigma_r}, {"sigma_R", c.noise.sigma_R}}},
            {"duration", c.duration},
            {"attack", attack},
            {"estimators", c.estimators},
            {"initial_guess",
             {{"position_error_std", c.initial_guess.position_error_std},
              {"mobile_position_error_std", c.initial_guess.mobile_position_error_std}}},
            {"secekf", detail::ekf_to_json(c.secekf)},
            {"origekf", detail::ekf_to_json(c.origekf)},
            {"secopt", detail::secopt_to_json(c.secopt)},
            {"evaluation",
             {{"warmup", c.evaluation.warmup},
              {"match_tolerance", c.evaluation.match_tolerance},
              {"trace_every", c.evaluation.trace_every}}},
            {"sweep", {{"windows", c.sweep.windows}, {"lambdas", c.sweep.lambdas}}},
            {"seeds", {{"sim", c.seeds.sim}, {"attack", c.seeds.attack}, {"init", c.seeds.init}}}};
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return scenario_from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Derived objects
// ---------------------------------------------------------------------------

inline Topology build_topology(const ScenarioConfig& c) {
    switch (c.topology.kind) {
        case TopologySpec::Kind::Full: return Topology::full(c.nodes.size());
        case TopologySpec::Kind::KNearest: {
            std::vector<Vec3> p;
            for (const auto& n : c.nodes) p.push_back(position_at(n.motion, 0.0));
            return Topology::k_nearest(p, c.topology.k);
        }
        case TopologySpec::Kind::Explicit: return Topology::from_edges(c.nodes.size(), c.topology.edges);
    }
    throw ConfigError("unknown topology");
}

inline SimConfig sim_config(const ScenarioConfig& c) {
    SimConfig s;
    s.arena = c.arena;
    for (const auto& n : c.nodes) s.nodes.push_back({n.motion, n.clock});
    s.topology = build_topology(c);
    s.kinds = c.kinds;
    s.noise = c.noise;
    s.noise.seed = c.seeds.sim;
    s.period = c.period;
    s.duration = c.duration;
    s.include_propagation = c.include_propagation;
    s.schedule_seed = c.schedule_seed;
    s.master = c.master;
    return s;
}

inline AttackConfig attack_config(const ScenarioConfig& c) {
    AttackConfig a = c.attack;
    a.seed = c.seeds.attack;
    return a;
}

/// Estimator prior: true start positions perturbed by N(0, std^2) per axis (larger for
/// mobile nodes); clocks and attack states start at zero.
inline NetworkState initial_guess(const ScenarioConfig& c) {
    Rng rng(c.seeds.init);
    NetworkState s;
    s.master = c.master;
    for (const auto& n : c.nodes) {
        NodeState ns;
        const double sd = is_static(n.motion) ? c.initial_guess.position_error_std
                                              : c.initial_guess.mobile_position_error_std;
        const Vec3 p = position_at(n.motion, 0.0);
        ns.position = p + sd * Vec3(rng.normal(), rng.normal(), rng.normal());
        s.nodes.push_back(ns);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Eight static nodes in a 10 x 9 m room: six on the ceiling (2.5 m), two at 1.0 m.
inline std::vector<Vec3> testbed_anchor_positions() {
    return {Vec3(0.6, 0.5, 2.5), Vec3(5.2, 0.4, 2.5), Vec3(9.4, 0.7, 2.5), Vec3(9.5, 4.6, 1.0),
            Vec3(9.3, 8.5, 2.5), Vec3(4.8, 8.6, 2.5), Vec3(0.5, 8.4, 2.5), Vec3(0.7, 4.3, 1.0)};
}

inline WaypointMotion quadrotor_path() {
    // Closed loop with slow and fast legs (0.2 - 0.6 m/s).
    const std::vector<Vec3> corners{Vec3(3.0, 3.0, 1.2), Vec3(7.0, 3.0, 1.5), Vec3(7.0, 6.0, 1.8),
                                    Vec3(3.0, 6.0, 1.5), Vec3(5.0, 4.5, 1.0)};
    const std::vector<double> speeds{0.2, 0.4, 0.6, 0.3, 0.5};
    WaypointMotion w;
    double t = 0.0;
    for (int lap = 0; lap < 8; ++lap)
        for (std::size_t i = 0; i < corners.size(); ++i) {
            const Vec3& p = corners[i];
            if (!w.points.empty()) t += (p - w.points.back().position).norm() / speeds[i];
            w.points.push_back({t, p});
        }
    return w;
}

inline std::vector<std::string> preset_names() {
    return {"static8-type1", "static8-type2", "static8-type3", "static8-type4", "static8-type5",
            "mobile9-full",  "mobile9-partial", "window-sweep"};
}

inline ScenarioConfig make_preset(const std::string& name) {
    ScenarioConfig c;
    c.name = name;
    c.arena = Arena{Vec3(0, 0, 0), Vec3(10, 9, 3)};
    c.origekf.attack_states_enabled = false;
    const auto anchors = testbed_anchor_positions();
    Rng clock_rng(20241016);
    auto add_node = [&](MotionModel m) {
        NodeSpec n;
        n.id = c.nodes.size();
        n.motion = std::move(m);
        if (n.id != c.master) {
            n.clock.initial_offset = clock_rng.uniform(-100e-6, 100e-6);
            n.clock.initial_bias = clock_rng.uniform(-10e-6, 10e-6);
            n.clock.bias_random_walk_std = 1e-9;
        }
        c.nodes.push_back(n);
    };
    for (const Vec3& p : anchors) add_node(StaticMotion{p});

    auto static8 = [&](int type) {
        c.duration = 120.0;
        c.attack.type = attack_type_from_int(type);
        c.attack.total_time = c.duration;
    };
    auto mobile9 = [&]() {
        add_node(quadrotor_path());
        c.duration = 90.0;
        c.attack.type = AttackType::T1Uniform;
        c.attack.total_time = c.duration;
        c.secekf.position_process_noise[8] = 0.25;
        c.origekf.position_process_noise[8] = 0.25;
        c.secekf.position_initial_variance[8] = 4.0;
        c.origekf.position_initial_variance[8] = 4.0;
    };

    if (name.rfind("static8-type", 0) == 0 && name.size() == 13 && name[12] >= '1' && name[12] <= '5') {
        static8(name[12] - '0');
    } else if (name == "mobile9-full") {
        mobile9();
    } else if (name == "mobile9-partial") {
        mobile9();
        // Nodes 0-7 ring the room; link ring neighbors at distance 1 and 2, then add chords
        // so most nodes keep five neighbors.
        c.topology.kind = TopologySpec::Kind::Explicit;
        const std::size_t n = c.nodes.size();
        for (std::size_t i = 0; i < n; ++i) {
            c.topology.edges.emplace_back(i, (i + 1) % n);
            c.topology.edges.emplace_back(i, (i + 2) % n);
        }
        for (std::size_t i = 0; i < 4; ++i) c.topology.edges.emplace_back(i, i + 4);
    } else if (name == "window-sweep") {
        mobile9();
        c.estimators = {"secopt"};
        c.sweep.windows = {50, 100, 200, 300};
        c.sweep.lambdas = {0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    c.secopt.sigma_d = c.secekf.sigma_d;
    c.secopt.sigma_r = c.secekf.sigma_r;
    c.secopt.sigma_R = c.secekf.sigma_R;
    return c;
}

}  // namespace secest
