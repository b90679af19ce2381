#pragma once

// Ground-truth generator: node motion, clock evolution, link scheduling and
// noisy attack-free measurement synthesis.

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "secest/model.hpp"
#include "secest/random.hpp"

namespace secest {

struct Arena {
    Vec3 min = Vec3(0.0, 0.0, 0.0);
    Vec3 max = Vec3(10.0, 9.0, 3.0);

    bool contains(const Vec3& p, double tol = 1e-9) const {
        return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
    }
    double diagonal() const { return (max - min).norm(); }
};

struct ClockModel {
    double initial_offset = 0.0;          // [s]
    double initial_bias = 0.0;            // dimensionless
    double bias_random_walk_std = 0.0;    // per sqrt(second)
    double offset_process_noise_std = 0.0;  // [s] per step

    void validate() const {
        if (bias_random_walk_std < 0.0 || offset_process_noise_std < 0.0)
            throw ConfigError("clock noise stds must be >= 0");
    }
};

struct StaticMotion {
    Vec3 position = Vec3::Zero();
};

struct Waypoint {
    double time = 0.0;
    Vec3 position = Vec3::Zero();
};

/// Piecewise-linear path, held at the end points outside the time span.
struct WaypointMotion {
    std::vector<Waypoint> points;
};

struct ConstantVelocityMotion {
    Vec3 start = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
};

using MotionModel = std::variant<StaticMotion, WaypointMotion, ConstantVelocityMotion>;

inline Vec3 position_at(const MotionModel& motion, double t) {
    return std::visit(
        [t](const auto& m) -> Vec3 {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, StaticMotion>) {
                return m.position;
            } else if constexpr (std::is_same_v<M, ConstantVelocityMotion>) {
                return m.start + m.velocity * t;
            } else {
                const auto& p = m.points;
                if (t <= p.front().time) return p.front().position;
                if (t >= p.back().time) return p.back().position;
                auto it = std::upper_bound(p.begin(), p.end(), t,
                                           [](double v, const Waypoint& w) { return v < w.time; });
                const Waypoint& b = *it;
                const Waypoint& a = *(it - 1);
                const double s = (t - a.time) / (b.time - a.time);
                return a.position + s * (b.position - a.position);
            }
        },
        motion);
}

inline bool is_static(const MotionModel& motion) { return std::holds_alternative<StaticMotion>(motion); }

inline void validate(const MotionModel& motion, const Arena& arena) {
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, StaticMotion>) {
                if (!arena.contains(m.position)) throw ConfigError("static position outside arena");
            } else if constexpr (std::is_same_v<M, ConstantVelocityMotion>) {
                if (!arena.contains(m.start)) throw ConfigError("constant-velocity start outside arena");
            } else {
                if (m.points.empty()) throw ConfigError("waypoint path is empty");
                for (std::size_t i = 0; i < m.points.size(); ++i) {
                    if (!arena.contains(m.points[i].position)) throw ConfigError("waypoint outside arena");
                    if (i > 0 && !(m.points[i].time > m.points[i - 1].time))
                        throw ConfigError("waypoint times must be strictly increasing");
                }
            }
        },
        motion);
}

struct NoiseConfig {
    double sigma_d = 1e-8;  // counter difference [s]
    double sigma_r = 0.30;  // single-sided range [m]
    double sigma_R = 0.10;  // double-sided range [m]
    std::uint64_t seed = 1;

    double sigma(MeasurementKind kind) const {
        switch (kind) {
            case MeasurementKind::CounterDiff: return sigma_d;
            case MeasurementKind::SingleSidedTWR: return sigma_r;
            case MeasurementKind::DoubleSidedTWR: return sigma_R;
        }
        return 0.0;
    }

    void validate() const {
        if (sigma_d < 0.0 || sigma_r < 0.0 || sigma_R < 0.0) throw ConfigError("noise stds must be >= 0");
    }
};

/// Advances ground truth by dt. Offsets integrate bias, bias random-walks, positions
/// follow their motion model evaluated at t_next. The master clock stays at zero.
template <DrawSource R>
NetworkState evolve_truth(const NetworkState& truth, double t_next, double dt, std::span<const ClockModel> clocks,
                          std::span<const MotionModel> motions, R& rng, double bias_bound = kDefaultBiasBound) {
    if (!(dt > 0.0)) throw std::invalid_argument("evolve_truth: dt must be positive");
    NetworkState next = truth;
    for (NodeId k = 0; k < truth.size(); ++k) {
        NodeState& n = next.nodes[k];
        n.position = position_at(motions[k], t_next);
        if (k == truth.master) continue;
        const ClockModel& c = clocks[k];
        n.offset = truth[k].offset + truth[k].bias * dt;
        if (c.offset_process_noise_std > 0.0) n.offset += c.offset_process_noise_std * rng.normal();
        if (c.bias_random_walk_std > 0.0) {
            n.bias += c.bias_random_walk_std * std::sqrt(dt) * rng.normal();
            n.bias = std::clamp(n.bias, -0.5 * bias_bound, 0.5 * bias_bound);
        }
    }
    next.pin_master();
    return next;
}

struct LinkVisit {
    NodeId initiator = 0;
    NodeId responder = 0;
    MeasurementKind kind = MeasurementKind::CounterDiff;

    bool operator==(const LinkVisit&) const = default;
};

/// Round-robin link schedule. In round r each node k (in a seed-dependent order) visits
/// neighbor N_k[(r + k) mod |N_k|], emitting every configured kind back to back. One
/// cycle covers every directed link exactly once per kind.
class LinkSchedule {
public:
    LinkSchedule(const Topology& topology, std::vector<MeasurementKind> kinds, std::uint64_t seed = 0) {
        if (kinds.empty()) throw ConfigError("schedule needs at least one measurement kind");
        const std::size_t n = topology.size();
        std::vector<NodeId> order(n);
        for (NodeId k = 0; k < n; ++k) order[k] = k;
        if (seed != 0) {
            Rng rng(seed);
            for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next_u64() % i]);
        }
        std::size_t max_degree = 0;
        for (NodeId k = 0; k < n; ++k) max_degree = std::max(max_degree, topology.neighbors(k).size());
        for (std::size_t r = 0; r < max_degree; ++r)
            for (NodeId k : order) {
                const auto& nb = topology.neighbors(k);
                if (r >= nb.size()) continue;
                const NodeId j = nb[(r + k) % nb.size()];
                for (MeasurementKind kind : kinds) cycle_.push_back({k, j, kind});
            }
    }

    std::size_t cycle_length() const { return cycle_.size(); }
    const LinkVisit& next_pair(std::size_t step) const { return cycle_[step % cycle_.size()]; }
    const std::vector<LinkVisit>& cycle() const { return cycle_; }

private:
    std::vector<LinkVisit> cycle_;
};

/// Attack-free measurement of `kind` from k to j under `truth`, plus kind-specific noise.
template <DrawSource R>
Measurement synth_measurement(const NetworkState& truth, NodeId k, NodeId j, MeasurementKind kind,
                              const NoiseConfig& noise, R& rng, bool include_propagation = true) {
    NodeState initiator = truth.nodes.at(k);
    initiator.attack_offset = 0.0;
    initiator.attack_distance = 0.0;
    NodeState responder = truth.nodes.at(j);
    responder.attack_offset = 0.0;
    responder.attack_distance = 0.0;
    Measurement m;
    m.initiator = k;
    m.responder = j;
    m.kind = kind;
    m.value = measure_fn(kind, initiator, responder, include_propagation);
    const double s = noise.sigma(kind);
    if (s > 0.0) m.value += s * rng.normal();
    return m;
}

struct SimNode {
    MotionModel motion = StaticMotion{};
    ClockModel clock;
};

struct SimConfig {
    Arena arena;
    std::vector<SimNode> nodes;
    Topology topology;
    std::vector<MeasurementKind> kinds{kAllKinds.begin(), kAllKinds.end()};
    NoiseConfig noise;
    double period = 0.01;    // one measurement event per period [s]
    double duration = 60.0;  // [s]
    bool include_propagation = true;
    std::uint64_t schedule_seed = 0;
    NodeId master = 0;
    double bias_bound = kDefaultBiasBound;
};

/// One emitted event: the measurement and the truth it was generated from.
struct SimRecord {
    Measurement measurement;
    NetworkState truth;
};

class Simulator {
public:
    explicit Simulator(SimConfig config)
        : cfg_(std::move(config)),
          schedule_(cfg_.topology, cfg_.kinds, cfg_.schedule_seed),
          rng_(cfg_.noise.seed) {
        if (cfg_.nodes.size() != cfg_.topology.size())
            throw ConfigError("node count does not match topology size");
        if (cfg_.master >= cfg_.nodes.size()) throw ConfigError("master index out of range");
        if (!(cfg_.period > 0.0) || !(cfg_.duration > 0.0)) throw ConfigError("period and duration must be > 0");
        cfg_.noise.validate();
        truth_.master = cfg_.master;
        for (const SimNode& n : cfg_.nodes) {
            validate(n.motion, cfg_.arena);
            n.clock.validate();
            clocks_.push_back(n.clock);
            motions_.push_back(n.motion);
            NodeState s;
            s.position = position_at(n.motion, 0.0);
            s.offset = n.clock.initial_offset;
            s.bias = n.clock.initial_bias;
            truth_.nodes.push_back(s);
        }
        truth_.pin_master();
        validate(truth_, cfg_.bias_bound);
    }

    const SimConfig& config() const { return cfg_; }
    const LinkSchedule& schedule() const { return schedule_; }
    std::size_t total_events() const {
        return static_cast<std::size_t>(std::floor(cfg_.duration / cfg_.period + 1e-9));
    }
    bool done() const { return step_ >= total_events(); }

    SimRecord next() {
        const double t = static_cast<double>(step_) * cfg_.period;
        if (step_ > 0)
            truth_ = evolve_truth(truth_, t, cfg_.period, clocks_, motions_, rng_, cfg_.bias_bound);
        const LinkVisit& v = schedule_.next_pair(step_);
        Measurement m = synth_measurement(truth_, v.initiator, v.responder, v.kind, cfg_.noise, rng_,
                                          cfg_.include_propagation);
        m.index = step_;
        m.time = t;
        ++step_;
        return {m, truth_};
    }

    std::vector<SimRecord> run() {
        std::vector<SimRecord> out;
        out.reserve(total_events());
        while (!done()) out.push_back(next());
        return out;
    }

private:
    SimConfig cfg_;
    LinkSchedule schedule_;
    Rng rng_;
    std::vector<ClockModel> clocks_;
    std::vector<MotionModel> motions_;
    NetworkState truth_;
    std::size_t step_ = 0;
};

}  // namespace secest
