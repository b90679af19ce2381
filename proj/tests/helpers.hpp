#pragma once

#include <vector>

#include "secest/secest.hpp"

namespace secest::testing {

inline NodeState node_at(double x, double y, double z) {
    NodeState s;
    s.position = Vec3(x, y, z);
    return s;
}

inline NetworkState network(std::vector<NodeState> nodes, NodeId master = 0) {
    NetworkState s;
    s.nodes = std::move(nodes);
    s.master = master;
    return s;
}

/// Random valid state: positions in a 10 m box, offsets ~100 us, biases ~10 ppm.
inline NetworkState random_state(Rng& rng, std::size_t n) {
    NetworkState s;
    for (std::size_t k = 0; k < n; ++k) {
        NodeState ns;
        ns.position = Vec3(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 3));
        ns.offset = rng.uniform(-1e-4, 1e-4);
        ns.bias = rng.uniform(-1e-5, 1e-5);
        ns.attack_offset = rng.uniform(0, 2e-4);
        ns.attack_distance = rng.uniform(0, 5);
        s.nodes.push_back(ns);
    }
    s.pin_master();
    return s;
}

inline Measurement meas(NodeId k, NodeId j, MeasurementKind kind, double value, double t = 0.0, std::size_t i = 0) {
    Measurement m;
    m.index = i;
    m.time = t;
    m.initiator = k;
    m.responder = j;
    m.kind = kind;
    m.value = value;
    return m;
}

/// Static network with the given positions, clean clocks, full topology, zero noise.
inline SimConfig quiet_sim(const std::vector<Vec3>& positions, double duration) {
    SimConfig c;
    c.arena = Arena{Vec3(-1, -1, -1), Vec3(11, 11, 4)};
    for (const Vec3& p : positions) c.nodes.push_back({StaticMotion{p}, ClockModel{}});
    c.topology = Topology::full(positions.size());
    c.noise.sigma_d = c.noise.sigma_r = c.noise.sigma_R = 0.0;
    c.duration = duration;
    return c;
}

inline std::vector<Vec3> square_positions() {
    return {Vec3(0, 0, 2.5), Vec3(6, 0, 1.0), Vec3(6, 5, 2.5), Vec3(0, 5, 1.0), Vec3(3, 2, 0.2)};
}

}  // namespace secest::testing

namespace secest::testing {

/// Filter settings matched to a stream without measurement or clock noise.
inline EkfConfig noiseless_ekf() {
    EkfConfig c;
    c.sigma_r = c.sigma_R = 0.01;
    c.sigma_d = 1e-9;
    c.process_noise.attack_distance = 1e-6;
    c.process_noise.attack_offset = 1e-16;
    c.process_noise.position = 0.0;
    c.process_noise.bias = 0.0;
    return c;
}

inline NetworkState truth_state(const std::vector<Vec3>& positions) {
    NetworkState s;
    for (const Vec3& p : positions) {
        NodeState n;
        n.position = p;
        s.nodes.push_back(n);
    }
    return s;
}

inline bool symmetric_psd(const Eigen::MatrixXd& P) {
    const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -1e-9 * std::max(P.trace(), 1e-300);
}

}  // namespace secest::testing
