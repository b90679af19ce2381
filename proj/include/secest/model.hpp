#pragma once

// Domain types for pairwise localization / time synchronization, the packed
// state layout shared by every estimator, and the pairwise measurement model.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace secest {

using NodeId = std::size_t;
using Vec3 = Eigen::Vector3d;

/// Speed of light in vacuum [m/s].
inline constexpr double kSpeedOfLight = 299792458.0;

/// Default bound on |clock frequency bias| (100 ppm).
inline constexpr double kDefaultBiasBound = 1e-4;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when two nodes share a position and a range (or its gradient) is requested.
class DegenerateGeometry : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidState : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Node and network state
// ---------------------------------------------------------------------------

struct NodeState {
    Vec3 position = Vec3::Zero();  // [m]
    double offset = 0.0;           // clock offset w.r.t. master [s]
    double bias = 0.0;             // fractional frequency bias
    double attack_offset = 0.0;    // additive attack on counter differences [s]
    double attack_distance = 0.0;  // additive attack on ranges [m]

    bool operator==(const NodeState&) const = default;
};

inline bool is_finite(const NodeState& s) {
    return s.position.allFinite() && std::isfinite(s.offset) && std::isfinite(s.bias) &&
           std::isfinite(s.attack_offset) && std::isfinite(s.attack_distance);
}

inline void validate(const NodeState& s, double bias_bound = kDefaultBiasBound) {
    if (!is_finite(s)) throw InvalidState("node state has non-finite entries");
    if (std::abs(s.bias) >= bias_bound)
        throw InvalidState("clock bias " + std::to_string(s.bias) + " exceeds bound " +
                           std::to_string(bias_bound));
}

struct NetworkState {
    std::vector<NodeState> nodes;
    NodeId master = 0;

    std::size_t size() const { return nodes.size(); }
    NodeState& operator[](NodeId k) { return nodes[k]; }
    const NodeState& operator[](NodeId k) const { return nodes[k]; }

    /// Forces the reference clock to zero offset and zero bias.
    void pin_master() {
        if (master < nodes.size()) {
            nodes[master].offset = 0.0;
            nodes[master].bias = 0.0;
        }
    }

    bool operator==(const NetworkState&) const = default;
};

inline void validate(const NetworkState& s, double bias_bound = kDefaultBiasBound) {
    if (s.nodes.empty()) throw InvalidState("network has no nodes");
    if (s.master >= s.nodes.size()) throw InvalidState("master index out of range");
    for (const auto& n : s.nodes) validate(n, bias_bound);
    const auto& m = s.nodes[s.master];
    if (m.offset != 0.0 || m.bias != 0.0) throw InvalidState("master clock is not pinned to zero");
}

// ---------------------------------------------------------------------------
// Packed layout: per node [px, py, pz, o, b, ao, ad], nodes concatenated in id order.
// The baseline layout drops the two attack entries.
// ---------------------------------------------------------------------------

enum class Field : std::size_t { Px = 0, Py, Pz, Offset, Bias, AttackOffset, AttackDistance };

inline constexpr std::size_t kFieldsPerNode = 7;
inline constexpr std::size_t kBaselineFieldsPerNode = 5;

class StateLayout {
public:
    StateLayout(std::size_t num_nodes, bool with_attacks)
        : num_nodes_(num_nodes), stride_(with_attacks ? kFieldsPerNode : kBaselineFieldsPerNode) {}

    std::size_t num_nodes() const { return num_nodes_; }
    std::size_t stride() const { return stride_; }
    std::size_t dim() const { return num_nodes_ * stride_; }
    bool with_attacks() const { return stride_ == kFieldsPerNode; }

    bool has(Field f) const { return static_cast<std::size_t>(f) < stride_; }

    std::size_t index_of(NodeId node, Field f) const {
        if (node >= num_nodes_ || !has(f)) throw std::out_of_range("index_of: no such entry");
        return node * stride_ + static_cast<std::size_t>(f);
    }

    /// Inverse of index_of.
    std::pair<NodeId, Field> field_at(std::size_t index) const {
        if (index >= dim()) throw std::out_of_range("field_at: index out of range");
        return {index / stride_, static_cast<Field>(index % stride_)};
    }

    Eigen::VectorXd pack(const NetworkState& s) const {
        Eigen::VectorXd x(dim());
        for (NodeId k = 0; k < num_nodes_; ++k) {
            const NodeState& n = s.nodes.at(k);
            const std::size_t b = k * stride_;
            x.segment<3>(static_cast<Eigen::Index>(b)) = n.position;
            x[b + 3] = n.offset;
            x[b + 4] = n.bias;
            if (with_attacks()) {
                x[b + 5] = n.attack_offset;
                x[b + 6] = n.attack_distance;
            }
        }
        return x;
    }

    NetworkState unpack(const Eigen::Ref<const Eigen::VectorXd>& x, NodeId master = 0) const {
        if (static_cast<std::size_t>(x.size()) != dim())
            throw std::invalid_argument("unpack: vector length does not match layout");
        NetworkState s;
        s.master = master;
        s.nodes.resize(num_nodes_);
        for (NodeId k = 0; k < num_nodes_; ++k) {
            NodeState& n = s.nodes[k];
            const std::size_t b = k * stride_;
            n.position = x.segment<3>(static_cast<Eigen::Index>(b));
            n.offset = x[b + 3];
            n.bias = x[b + 4];
            if (with_attacks()) {
                n.attack_offset = x[b + 5];
                n.attack_distance = x[b + 6];
            }
        }
        return s;
    }

private:
    std::size_t num_nodes_;
    std::size_t stride_;
};

inline Eigen::VectorXd pack(const NetworkState& s) { return StateLayout(s.size(), true).pack(s); }

inline NetworkState unpack(const Eigen::Ref<const Eigen::VectorXd>& x, NodeId master = 0) {
    if (x.size() % static_cast<Eigen::Index>(kFieldsPerNode) != 0)
        throw std::invalid_argument("unpack: length is not a multiple of 7");
    return StateLayout(static_cast<std::size_t>(x.size()) / kFieldsPerNode, true).unpack(x, master);
}

inline std::size_t index_of(NodeId node, Field f) {
    return node * kFieldsPerNode + static_cast<std::size_t>(f);
}

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

enum class MeasurementKind { CounterDiff, SingleSidedTWR, DoubleSidedTWR };

inline constexpr std::array<MeasurementKind, 3> kAllKinds = {
    MeasurementKind::CounterDiff, MeasurementKind::SingleSidedTWR, MeasurementKind::DoubleSidedTWR};

inline bool is_range(MeasurementKind kind) { return kind != MeasurementKind::CounterDiff; }

/// Short log tag: "d", "r", "R".
inline std::string_view to_tag(MeasurementKind kind) {
    switch (kind) {
        case MeasurementKind::CounterDiff: return "d";
        case MeasurementKind::SingleSidedTWR: return "r";
        case MeasurementKind::DoubleSidedTWR: return "R";
    }
    return "?";
}

inline MeasurementKind kind_from_tag(std::string_view tag) {
    if (tag == "d") return MeasurementKind::CounterDiff;
    if (tag == "r") return MeasurementKind::SingleSidedTWR;
    if (tag == "R") return MeasurementKind::DoubleSidedTWR;
    throw ConfigError("unknown measurement kind '" + std::string(tag) + "'");
}

/// Seconds for CounterDiff, meters for the two range kinds.
struct Measurement {
    std::size_t index = 0;  // position in the stream
    double time = 0.0;      // master-clock emission time [s]
    NodeId initiator = 0;
    NodeId responder = 0;
    MeasurementKind kind = MeasurementKind::CounterDiff;
    double value = 0.0;

    bool operator==(const Measurement&) const = default;
};

inline void validate(const Measurement& m, std::size_t num_nodes) {
    if (m.initiator == m.responder) throw InvalidState("measurement initiator equals responder");
    if (m.initiator >= num_nodes || m.responder >= num_nodes)
        throw InvalidState("measurement references unknown node");
    if (!std::isfinite(m.value) || !std::isfinite(m.time)) throw InvalidState("non-finite measurement");
}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

class Topology {
public:
    Topology() = default;

    /// Builds from neighbor lists; requires symmetry and connectivity.
    explicit Topology(std::vector<std::vector<NodeId>> neighbors) : neighbors_(std::move(neighbors)) {
        for (auto& n : neighbors_) {
            std::sort(n.begin(), n.end());
            n.erase(std::unique(n.begin(), n.end()), n.end());
        }
        validate_structure();
    }

    static Topology full(std::size_t n) {
        std::vector<std::vector<NodeId>> nb(n);
        for (NodeId k = 0; k < n; ++k)
            for (NodeId j = 0; j < n; ++j)
                if (j != k) nb[k].push_back(j);
        return Topology(std::move(nb));
    }

    static Topology from_edges(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
        std::vector<std::vector<NodeId>> nb(n);
        for (auto [a, b] : edges) {
            if (a >= n || b >= n) throw ConfigError("edge references unknown node");
            if (a == b) throw ConfigError("self-loop edge");
            nb[a].push_back(b);
            nb[b].push_back(a);
        }
        return Topology(std::move(nb));
    }

    /// Each node links to its k nearest peers; the union is symmetrized.
    static Topology k_nearest(const std::vector<Vec3>& positions, std::size_t k) {
        const std::size_t n = positions.size();
        std::vector<std::vector<NodeId>> nb(n);
        for (NodeId a = 0; a < n; ++a) {
            std::vector<std::pair<double, NodeId>> d;
            for (NodeId b = 0; b < n; ++b)
                if (b != a) d.emplace_back((positions[a] - positions[b]).norm(), b);
            std::stable_sort(d.begin(), d.end(),
                             [](const auto& l, const auto& r) { return l.first < r.first; });
            for (std::size_t i = 0; i < std::min(k, d.size()); ++i) {
                nb[a].push_back(d[i].second);
                nb[d[i].second].push_back(a);
            }
        }
        return Topology(std::move(nb));
    }

    std::size_t size() const { return neighbors_.size(); }
    const std::vector<NodeId>& neighbors(NodeId k) const { return neighbors_.at(k); }

    bool linked(NodeId k, NodeId j) const {
        const auto& n = neighbors_.at(k);
        return std::binary_search(n.begin(), n.end(), j);
    }

    std::size_t num_directed_links() const {
        std::size_t c = 0;
        for (const auto& n : neighbors_) c += n.size();
        return c;
    }

private:
    void validate_structure() const {
        const std::size_t n = neighbors_.size();
        if (n == 0) throw ConfigError("topology has no nodes");
        for (NodeId k = 0; k < n; ++k)
            for (NodeId j : neighbors_[k]) {
                if (j >= n) throw ConfigError("topology references unknown node " + std::to_string(j));
                if (j == k) throw ConfigError("topology has a self-loop at node " + std::to_string(k));
                const auto& back = neighbors_[j];
                if (!std::binary_search(back.begin(), back.end(), k))
                    throw ConfigError("topology is not symmetric: " + std::to_string(k) + "->" +
                                      std::to_string(j));
            }
        std::vector<bool> seen(n, false);
        std::queue<NodeId> q;
        q.push(0);
        seen[0] = true;
        std::size_t count = 1;
        while (!q.empty()) {
            NodeId k = q.front();
            q.pop();
            for (NodeId j : neighbors_[k])
                if (!seen[j]) {
                    seen[j] = true;
                    ++count;
                    q.push(j);
                }
        }
        if (count != n)
            throw ConfigError("topology is disconnected: " + std::to_string(n - count) +
                              " node(s) unreachable from node 0");
    }

    std::vector<std::vector<NodeId>> neighbors_;
};

// ---------------------------------------------------------------------------
// Measurement model
// ---------------------------------------------------------------------------

/// Noise- and attack-free prediction plus the initiator's attack state.
///   d = (o_j - o_k) [+ |p_j - p_k| / c] + ao_k
///   r, R = (1 + b_k) |p_j - p_k| + ad_k
inline double measure_fn(MeasurementKind kind, const NodeState& initiator, const NodeState& responder,
                         bool include_propagation = true) {
    const double dist = (responder.position - initiator.position).norm();
    if (kind == MeasurementKind::CounterDiff) {
        double v = (responder.offset - initiator.offset) + initiator.attack_offset;
        if (include_propagation) v += dist / kSpeedOfLight;
        return v;
    }
    if (dist == 0.0) throw DegenerateGeometry("coincident node positions in range prediction");
    return (1.0 + initiator.bias) * dist + initiator.attack_distance;
}

/// Partial derivatives of measure_fn, each in packed field order [px,py,pz,o,b,ao,ad].
struct MeasurementJacobian {
    Eigen::Matrix<double, 7, 1> initiator = Eigen::Matrix<double, 7, 1>::Zero();
    Eigen::Matrix<double, 7, 1> responder = Eigen::Matrix<double, 7, 1>::Zero();
};

inline MeasurementJacobian measure_jacobian(MeasurementKind kind, const NodeState& initiator,
                                            const NodeState& responder, bool include_propagation = true) {
    MeasurementJacobian J;
    const Vec3 diff = responder.position - initiator.position;
    const double dist = diff.norm();
    if (kind == MeasurementKind::CounterDiff) {
        J.initiator[3] = -1.0;
        J.responder[3] = 1.0;
        J.initiator[5] = 1.0;
        // At coincident positions the propagation term has no gradient; leave it zero.
        if (include_propagation && dist > 0.0) {
            const Vec3 u = diff / (dist * kSpeedOfLight);
            J.responder.head<3>() = u;
            J.initiator.head<3>() = -u;
        }
        return J;
    }
    if (dist == 0.0) throw DegenerateGeometry("coincident node positions in range jacobian");
    const Vec3 u = (1.0 + initiator.bias) * diff / dist;
    J.responder.head<3>() = u;
    J.initiator.head<3>() = -u;
    J.initiator[4] = dist;
    J.initiator[6] = 1.0;
    return J;
}

}  // namespace secest
