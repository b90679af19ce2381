#pragma once

// Line-delimited JSON logs exchanged between pipeline stages.
//
// measurements.log
//   header: {"format":"secest-measurements","version":1,"nodes":N,"master":M,
//            "attack_type":T,"scenario":"..."}
//   record: {"i":step,"t":seconds,"k":initiator,"j":responder,"kind":"d"|"r"|"R",
//            "value":v,"attack":a?,"truth":{"p":[[x,y,z],..],"o":[..],"b":[..]}?}
//
// trace-<estimator>.log
//   header: {"format":"secest-trace","version":1,"estimator":"secekf","nodes":N,
//            "master":M,"fields":["px","py","pz","o","b","ao","ad"]}
//   record: {"step":i,"t":seconds,"x":[packed state],"pos_std":[..]?,"off_std":[..]?}

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "secest/eval.hpp"
#include "secest/model.hpp"

namespace secest {

inline constexpr int kLogSchemaVersion = 1;
inline constexpr const char* kMeasurementFormat = "secest-measurements";
inline constexpr const char* kTraceFormat = "secest-trace";

class LogFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MeasurementLogHeader {
    std::size_t nodes = 0;
    NodeId master = 0;
    int attack_type = 0;
    std::string scenario;
};

struct LogRecord {
    Measurement measurement;
    std::optional<double> attack;       // value injected by the attacker
    std::optional<NetworkState> truth;  // positions, offsets, biases
};

struct MeasurementLog {
    MeasurementLogHeader header;
    std::vector<LogRecord> records;

    std::vector<Measurement> measurements() const {
        std::vector<Measurement> out;
        out.reserve(records.size());
        for (const auto& r : records) out.push_back(r.measurement);
        return out;
    }

    std::vector<TruthSnapshot> truth() const {
        std::vector<TruthSnapshot> out;
        for (const auto& r : records)
            if (r.truth) out.push_back({r.measurement.time, *r.truth});
        return out;
    }
};

namespace detail {

inline void check_header(const nlohmann::json& h, const char* format) {
    if (!h.is_object() || !h.contains("format") || h["format"] != format)
        throw LogFormatError(std::string("expected a '") + format + "' header line");
    const int v = h.value("version", -1);
    if (v != kLogSchemaVersion)
        throw LogFormatError(std::string(format) + " schema version " + std::to_string(v) + " is not supported (expected " +
                             std::to_string(kLogSchemaVersion) + ")");
}

template <class F>
void for_each_line(std::istream& in, F&& f) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw LogFormatError("line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            f(j, lineno);
        } catch (const nlohmann::json::exception& e) {
            throw LogFormatError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

}  // namespace detail

inline nlohmann::json to_json(const LogRecord& r) {
    const Measurement& m = r.measurement;
    nlohmann::json j;
    j["i"] = m.index;
    j["t"] = m.time;
    j["k"] = m.initiator;
    j["j"] = m.responder;
    j["kind"] = std::string(to_tag(m.kind));
    j["value"] = m.value;
    if (r.attack) j["attack"] = *r.attack;
    if (r.truth) {
        nlohmann::json p = nlohmann::json::array(), o = nlohmann::json::array(), b = nlohmann::json::array();
        for (const NodeState& n : r.truth->nodes) {
            p.push_back({n.position.x(), n.position.y(), n.position.z()});
            o.push_back(n.offset);
            b.push_back(n.bias);
        }
        j["truth"] = {{"p", p}, {"o", o}, {"b", b}};
    }
    return j;
}

inline void write_measurement_log(std::ostream& out, const MeasurementLog& log) {
    nlohmann::json h;
    h["format"] = kMeasurementFormat;
    h["version"] = kLogSchemaVersion;
    h["nodes"] = log.header.nodes;
    h["master"] = log.header.master;
    h["attack_type"] = log.header.attack_type;
    h["scenario"] = log.header.scenario;
    out << h.dump() << '\n';
    for (const auto& r : log.records) out << to_json(r).dump() << '\n';
}

inline MeasurementLog read_measurement_log(std::istream& in) {
    MeasurementLog log;
    bool have_header = false;
    detail::for_each_line(in, [&](const nlohmann::json& j, std::size_t) {
        if (!have_header) {
            detail::check_header(j, kMeasurementFormat);
            log.header.nodes = j.at("nodes").get<std::size_t>();
            log.header.master = j.at("master").get<NodeId>();
            log.header.attack_type = j.value("attack_type", 0);
            log.header.scenario = j.value("scenario", std::string{});
            have_header = true;
            return;
        }
        LogRecord r;
        Measurement& m = r.measurement;
        m.index = j.at("i").get<std::size_t>();
        m.time = j.at("t").get<double>();
        m.initiator = j.at("k").get<NodeId>();
        m.responder = j.at("j").get<NodeId>();
        m.kind = kind_from_tag(j.at("kind").get<std::string>());
        m.value = j.at("value").get<double>();
        validate(m, log.header.nodes);
        if (j.contains("attack")) r.attack = j["attack"].get<double>();
        if (j.contains("truth")) {
            const auto& t = j["truth"];
            NetworkState s;
            s.master = log.header.master;
            s.nodes.resize(log.header.nodes);
            for (std::size_t k = 0; k < log.header.nodes; ++k) {
                const auto& p = t.at("p").at(k);
                s.nodes[k].position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
                s.nodes[k].offset = t.at("o").at(k).get<double>();
                s.nodes[k].bias = t.at("b").at(k).get<double>();
            }
            r.truth = std::move(s);
        }
        log.records.push_back(std::move(r));
    });
    if (!have_header) throw LogFormatError("measurement log is empty");
    return log;
}

struct Trace {
    std::string estimator;
    std::size_t nodes = 0;
    NodeId master = 0;
    bool with_attacks = true;
    std::vector<TraceRecord> records;
};

inline void write_trace_header(std::ostream& out, const Trace& t) {
    nlohmann::json h;
    h["format"] = kTraceFormat;
    h["version"] = kLogSchemaVersion;
    h["estimator"] = t.estimator;
    h["nodes"] = t.nodes;
    h["master"] = t.master;
    std::vector<std::string> fields{"px", "py", "pz", "o", "b"};
    if (t.with_attacks) {
        fields.push_back("ao");
        fields.push_back("ad");
    }
    h["fields"] = fields;
    out << h.dump() << '\n';
}

inline nlohmann::json to_json(const TraceRecord& r, bool with_attacks) {
    nlohmann::json j;
    j["step"] = r.step;
    j["t"] = r.time;
    const Eigen::VectorXd x = StateLayout(r.estimate.size(), with_attacks).pack(r.estimate);
    j["x"] = std::vector<double>(x.data(), x.data() + x.size());
    if (!r.position_std.empty()) j["pos_std"] = r.position_std;
    if (!r.offset_std.empty()) j["off_std"] = r.offset_std;
    return j;
}

inline void write_trace(std::ostream& out, const Trace& t) {
    write_trace_header(out, t);
    for (const auto& r : t.records) out << to_json(r, t.with_attacks).dump() << '\n';
}

inline Trace read_trace(std::istream& in) {
    Trace t;
    bool have_header = false;
    detail::for_each_line(in, [&](const nlohmann::json& j, std::size_t) {
        if (!have_header) {
            detail::check_header(j, kTraceFormat);
            t.estimator = j.at("estimator").get<std::string>();
            t.nodes = j.at("nodes").get<std::size_t>();
            t.master = j.at("master").get<NodeId>();
            const auto fields = j.at("fields").get<std::vector<std::string>>();
            t.with_attacks = fields.size() == kFieldsPerNode;
            have_header = true;
            return;
        }
        TraceRecord r;
        r.step = j.at("step").get<std::size_t>();
        r.time = j.at("t").get<double>();
        const auto x = j.at("x").get<std::vector<double>>();
        const StateLayout layout(t.nodes, t.with_attacks);
        if (x.size() != layout.dim()) throw LogFormatError("trace state length does not match header");
        r.estimate = layout.unpack(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())),
                                   t.master);
        if (j.contains("pos_std")) r.position_std = j["pos_std"].get<std::vector<double>>();
        if (j.contains("off_std")) r.offset_std = j["off_std"].get<std::vector<double>>();
        t.records.push_back(std::move(r));
    });
    if (!have_header) throw LogFormatError("trace is empty");
    return t;
}

}  // namespace secest
