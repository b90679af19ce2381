#pragma once

// Additive measurement corruption. Types 1-3 hit every range reading with a
// phase-dependent random value; types 4-5 hit counter differences initiated by
// non-master nodes with per-node constants or fresh uniform draws.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "secest/model.hpp"
#include "secest/random.hpp"

namespace secest {

enum class AttackType { None, T1Uniform, T2Normal, T3Pareto, T4ConstTime, T5UniformTime };

inline bool is_distance_attack(AttackType t) {
    return t == AttackType::T1Uniform || t == AttackType::T2Normal || t == AttackType::T3Pareto;
}
inline bool is_time_attack(AttackType t) { return t == AttackType::T4ConstTime || t == AttackType::T5UniformTime; }

inline AttackType attack_type_from_int(int t) {
    if (t < 0 || t > 5) throw ConfigError("unknown attack type " + std::to_string(t));
    return static_cast<AttackType>(t);
}

struct AttackConfig {
    AttackType type = AttackType::None;
    double total_time = 60.0;          // [s], splits the session into three phases
    double magnitude_scale = 100e-6;   // [s], types 4 and 5
    std::map<NodeId, double> node_constants;  // type 4 overrides [s]
    std::vector<NodeId> attacked_nodes;       // time attacks; empty = every non-master node
    std::uint64_t seed = 2;

    void validate() const {
        if (!(total_time > 0.0)) throw ConfigError("attack total_time must be > 0");
        if (magnitude_scale < 0.0) throw ConfigError("attack magnitude_scale must be >= 0");
        for (auto [k, v] : node_constants)
            if (v < 0.0) throw ConfigError("type-4 constant for node " + std::to_string(k) + " is negative");
    }
};

/// Generator parameters of one attack phase.
struct AttackPhase {
    double shift;
    double pareto_scale;
    static constexpr double pareto_shape = 3.0;
};

inline AttackPhase attack_phase(double current_t, double total_t) {
    if (current_t < total_t / 3.0) return {2.0, 3.0};
    if (current_t < 2.0 * total_t / 3.0) return {6.0, 6.5};
    return {1.0, 2.0};
}

/// Additive range corruption [m] for types 1-3. Every call consumes fresh draws.
template <DrawSource R>
double distance_attack_value(AttackType type, double current_t, double total_t, R& rng) {
    if (current_t < 0.0 || current_t > total_t)
        throw std::invalid_argument("distance_attack_value: time outside the attack session");
    const AttackPhase ph = attack_phase(current_t, total_t);
    switch (type) {
        case AttackType::T1Uniform: return 2.0 * (rng.uniform() + ph.shift);
        case AttackType::T2Normal: return 2.0 * rng.normal() + ph.shift;
        case AttackType::T3Pareto: return pareto(rng, AttackPhase::pareto_shape, ph.pareto_scale);
        default: throw ConfigError("not a distance attack type");
    }
}

/// Largest "typical" injected range value over all phases: exact bound for type 1,
/// mean + 3 sigma for type 2, the 99.9th percentile for type 3.
inline double distance_attack_typical_max(AttackType type) {
    double m = 0.0;
    for (double t : {0.0, 0.5, 0.9}) {
        const AttackPhase ph = attack_phase(t, 1.0);
        switch (type) {
            case AttackType::T1Uniform: m = std::max(m, 2.0 * (1.0 + ph.shift)); break;
            case AttackType::T2Normal: m = std::max(m, ph.shift + 6.0); break;
            case AttackType::T3Pareto: m = std::max(m, ph.pareto_scale * std::cbrt(1000.0)); break;
            default: break;
        }
    }
    return m;
}

/// Smart-attacker plausibility check; returns human-readable warnings (empty when fine).
inline std::vector<std::string> check_attack_plausibility(const AttackConfig& cfg, double arena_diagonal) {
    std::vector<std::string> warnings;
    if (is_distance_attack(cfg.type)) {
        const double m = distance_attack_typical_max(cfg.type);
        if (m >= arena_diagonal)
            warnings.push_back("distance attack maxima (" + std::to_string(m) +
                               " m) reach the arena diagonal (" + std::to_string(arena_diagonal) +
                               " m); an outlier threshold could flag them");
    }
    return warnings;
}

class Attacker {
public:
    Attacker(AttackConfig cfg, std::size_t num_nodes, NodeId master = 0)
        : cfg_(std::move(cfg)), master_(master), rng_(cfg_.seed), constants_(num_nodes, 0.0),
          attacked_(num_nodes, false) {
        cfg_.validate();
        if (cfg_.attacked_nodes.empty()) {
            for (NodeId k = 0; k < num_nodes; ++k) attacked_[k] = (k != master);
        } else {
            for (NodeId k : cfg_.attacked_nodes) {
                if (k >= num_nodes) throw ConfigError("attacked node " + std::to_string(k) + " does not exist");
                if (k == master && is_time_attack(cfg_.type))
                    throw ConfigError("the master clock cannot be under a time attack");
                attacked_[k] = true;
            }
        }
        // Type-4 constants: N(scale, (0.1 scale)^2) clamped at zero, drawn once in node order.
        Rng table_rng(derive_seed(cfg_.seed, 4));
        for (NodeId k = 0; k < num_nodes; ++k) {
            const double draw = table_rng.normal(cfg_.magnitude_scale, 0.1 * cfg_.magnitude_scale);
            constants_[k] = std::max(0.0, draw);
        }
        for (auto [k, v] : cfg_.node_constants) {
            if (k >= num_nodes) throw ConfigError("type-4 constant for unknown node " + std::to_string(k));
            constants_[k] = v;
        }
        constants_[master_] = 0.0;
    }

    const AttackConfig& config() const { return cfg_; }
    double node_constant(NodeId k) const { return constants_.at(k); }
    bool time_attacked(NodeId k) const { return attacked_.at(k); }

    /// Additive counter-difference corruption [s] for types 4-5.
    double time_attack_value(NodeId k) {
        if (k == master_) throw ConfigError("the master clock cannot be under a time attack");
        switch (cfg_.type) {
            case AttackType::T4ConstTime: return constants_.at(k);
            case AttackType::T5UniformTime: return rng_.uniform(0.0, 2.0 * cfg_.magnitude_scale);
            default: throw ConfigError("not a time attack type");
        }
    }

    /// Value added to `m` (0 when the measurement is left alone).
    double injected_value(const Measurement& m) {
        if (cfg_.type == AttackType::None) return 0.0;
        if (is_distance_attack(cfg_.type)) {
            if (!is_range(m.kind)) return 0.0;
            const double t = std::clamp(m.time, 0.0, cfg_.total_time);
            return distance_attack_value(cfg_.type, t, cfg_.total_time, rng_);
        }
        if (m.kind != MeasurementKind::CounterDiff || m.initiator == master_ || !attacked_.at(m.initiator))
            return 0.0;
        return time_attack_value(m.initiator);
    }

    Measurement corrupt(const Measurement& m) {
        Measurement out = m;
        out.value += injected_value(m);
        return out;
    }

private:
    AttackConfig cfg_;
    NodeId master_;
    Rng rng_;
    std::vector<double> constants_;
    std::vector<bool> attacked_;
};

}  // namespace secest
