#pragma once

// Error metrics: rigid Procrustes alignment, aligned localization error and
// synchronization error against the reference clock.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "secest/model.hpp"

namespace secest {

struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

struct Alignment {
    RigidTransform transform;
    bool degenerate = false;
    std::string diagnostic;
};

/// Rotation + translation (no scale, no reflection) minimizing
/// sum |R e_i + t - truth_i|^2 (Kabsch). Fewer than three points or a collinear
/// configuration yields the identity with `degenerate` set.
inline Alignment procrustes_align(const std::vector<Vec3>& estimated, const std::vector<Vec3>& truth) {
    Alignment out;
    if (estimated.size() != truth.size()) throw std::invalid_argument("procrustes_align: size mismatch");
    const std::size_t n = estimated.size();
    if (n < 3) {
        out.degenerate = true;
        out.diagnostic = "fewer than 3 points; alignment skipped";
        return out;
    }
    Vec3 ce = Vec3::Zero();
    Vec3 ct = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        ce += estimated[i];
        ct += truth[i];
    }
    ce /= static_cast<double>(n);
    ct /= static_cast<double>(n);

    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d spread_e = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d spread_t = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 e = estimated[i] - ce;
        const Vec3 t = truth[i] - ct;
        H += e * t.transpose();
        spread_e += e * e.transpose();
        spread_t += t * t.transpose();
    }
    auto rank2 = [](const Eigen::Matrix3d& M) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M);
        const Eigen::Vector3d ev = es.eigenvalues();  // ascending
        return ev[2] > 0.0 && ev[1] > 1e-12 * ev[2];
    };
    if (!rank2(spread_e) || !rank2(spread_t)) {
        out.degenerate = true;
        out.diagnostic = "collinear or coincident points; identity alignment applied";
        return out;
    }

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d U = svd.matrixU();
    const Eigen::Matrix3d V = svd.matrixV();
    Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
    D(2, 2) = (V * U.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    out.transform.rotation = V * D * U.transpose();
    out.transform.translation = ct - out.transform.rotation * ce;
    return out;
}

inline double alignment_residual(const RigidTransform& T, const std::vector<Vec3>& estimated,
                                 const std::vector<Vec3>& truth) {
    double s = 0.0;
    for (std::size_t i = 0; i < estimated.size(); ++i) s += (T.apply(estimated[i]) - truth[i]).squaredNorm();
    return std::sqrt(s);
}

/// One estimator output sample.
struct TraceRecord {
    std::size_t step = 0;
    double time = 0.0;
    NetworkState estimate;
    std::vector<double> position_std;  // optional
    std::vector<double> offset_std;    // optional
};

struct TruthSnapshot {
    double time = 0.0;
    NetworkState truth;
};

struct SeriesStats {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation
    std::size_t count = 0;
};

inline SeriesStats stats_of(const std::vector<double>& v) {
    SeriesStats s;
    s.count = v.size();
    if (v.empty()) return s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double acc = 0.0;
        for (double x : v) acc += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(acc / static_cast<double>(v.size() - 1));
    }
    return s;
}

struct EvalOptions {
    /// Instants before this master time are not scored [s].
    double warmup = 0.0;
    /// A trace sample with no truth snapshot closer than this is skipped [s].
    double match_tolerance = 0.05;
    /// Nodes used to fit the alignment; empty = all nodes.
    std::vector<NodeId> alignment_nodes;
    NodeId reference = 0;
};

/// Per-node error series (meters / seconds), one column per scored instant.
struct ErrorReport {
    std::vector<double> times;
    std::vector<std::vector<double>> localization;  // [node][instant]
    std::vector<std::vector<double>> sync;          // [node][instant]
    std::vector<SeriesStats> localization_per_node;
    std::vector<SeriesStats> sync_per_node;
    SeriesStats localization_aggregate;  // over per-node means
    SeriesStats sync_aggregate;          // over non-reference per-node means
    std::size_t skipped_instants = 0;
    std::size_t degenerate_alignments = 0;
};

/// Nearest truth snapshot by time (snapshots sorted by time), or nullopt beyond tolerance.
inline std::optional<std::size_t> nearest_snapshot(const std::vector<TruthSnapshot>& truth, double t,
                                                   double tolerance) {
    if (truth.empty()) return std::nullopt;
    auto it = std::lower_bound(truth.begin(), truth.end(), t,
                               [](const TruthSnapshot& s, double v) { return s.time < v; });
    std::size_t best = truth.size();
    double best_dt = std::numeric_limits<double>::infinity();
    for (auto c : {it, it == truth.begin() ? it : it - 1}) {
        if (c == truth.end()) continue;
        const double dt = std::abs(c->time - t);
        if (dt < best_dt) {
            best_dt = dt;
            best = static_cast<std::size_t>(c - truth.begin());
        }
    }
    if (best == truth.size() || best_dt > tolerance) return std::nullopt;
    return best;
}

/// Aligned position error of every node at one instant.
inline std::vector<double> localization_error_at(const NetworkState& est, const NetworkState& truth,
                                                 const std::vector<NodeId>& alignment_nodes, bool* degenerate = nullptr) {
    std::vector<NodeId> fit = alignment_nodes;
    if (fit.empty())
        for (NodeId k = 0; k < truth.size(); ++k) fit.push_back(k);
    std::vector<Vec3> e, t;
    for (NodeId k : fit) {
        e.push_back(est[k].position);
        t.push_back(truth[k].position);
    }
    const Alignment a = procrustes_align(e, t);
    if (degenerate) *degenerate = a.degenerate;
    std::vector<double> out(truth.size());
    for (NodeId k = 0; k < truth.size(); ++k)
        out[k] = (a.transform.apply(est[k].position) - truth[k].position).norm();
    return out;
}

/// |(o_hat_k - o_hat_ref) - (o_k - o_ref)| for every node.
inline std::vector<double> sync_error_at(const NetworkState& est, const NetworkState& truth, NodeId reference) {
    std::vector<double> out(truth.size());
    for (NodeId k = 0; k < truth.size(); ++k)
        out[k] = std::abs((est[k].offset - est[reference].offset) - (truth[k].offset - truth[reference].offset));
    return out;
}

inline ErrorReport evaluate(const std::vector<TraceRecord>& trace, const std::vector<TruthSnapshot>& truth,
                            const EvalOptions& opt = {}) {
    ErrorReport r;
    const std::size_t n = truth.empty() ? 0 : truth.front().truth.size();
    r.localization.assign(n, {});
    r.sync.assign(n, {});
    for (const TraceRecord& rec : trace) {
        if (rec.time < opt.warmup) continue;
        const auto idx = nearest_snapshot(truth, rec.time, opt.match_tolerance);
        if (!idx) {
            ++r.skipped_instants;
            continue;
        }
        const NetworkState& tr = truth[*idx].truth;
        bool degenerate = false;
        const auto loc = localization_error_at(rec.estimate, tr, opt.alignment_nodes, &degenerate);
        if (degenerate) ++r.degenerate_alignments;
        const auto syn = sync_error_at(rec.estimate, tr, opt.reference);
        r.times.push_back(rec.time);
        for (NodeId k = 0; k < n; ++k) {
            r.localization[k].push_back(loc[k]);
            r.sync[k].push_back(syn[k]);
        }
    }
    std::vector<double> loc_means, sync_means;
    for (NodeId k = 0; k < n; ++k) {
        r.localization_per_node.push_back(stats_of(r.localization[k]));
        r.sync_per_node.push_back(stats_of(r.sync[k]));
        loc_means.push_back(r.localization_per_node.back().mean);
        if (k != opt.reference) sync_means.push_back(r.sync_per_node.back().mean);
    }
    if (!r.times.empty()) {
        r.localization_aggregate = stats_of(loc_means);
        r.sync_aggregate = stats_of(sync_means);
    }
    return r;
}

}  // namespace secest
