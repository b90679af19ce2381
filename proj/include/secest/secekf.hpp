#pragma once

// Attack-augmented extended Kalman filter over the stacked network state.
// With attack states disabled the same code is the plain (baseline) EKF.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "secest/model.hpp"

namespace secest {

/// Per-field diagonal entries; process noise is in units^2 per second.
struct FieldVariances {
    double position = 0.0;
    double offset = 0.0;
    double bias = 0.0;
    double attack_offset = 0.0;
    double attack_distance = 0.0;

    double of(Field f) const {
        switch (f) {
            case Field::Px:
            case Field::Py:
            case Field::Pz: return position;
            case Field::Offset: return offset;
            case Field::Bias: return bias;
            case Field::AttackOffset: return attack_offset;
            case Field::AttackDistance: return attack_distance;
        }
        return 0.0;
    }
};

struct EkfConfig {
    FieldVariances process_noise{1e-6, 1e-18, 1e-18, 1e-10, 1.0};
    FieldVariances initial_variance{0.25, 1e-8, 4e-10, 1e-8, 25.0};
    /// Per-node position process noise overrides (mobile nodes).
    std::map<NodeId, double> position_process_noise;
    /// Per-node initial position variance overrides.
    std::map<NodeId, double> position_initial_variance;
    double sigma_d = 1e-8;
    double sigma_r = 0.30;
    double sigma_R = 0.10;
    bool attack_states_enabled = true;
    bool include_propagation = true;
    /// The reference clock is never under a time attack; pin its ao at zero.
    bool pin_master_attack_offset = true;
    /// Reject |innovation| > gate_sigmas * sqrt(S); 0 disables gating.
    double gate_sigmas = 0.0;

    double sigma(MeasurementKind kind) const {
        switch (kind) {
            case MeasurementKind::CounterDiff: return sigma_d;
            case MeasurementKind::SingleSidedTWR: return sigma_r;
            case MeasurementKind::DoubleSidedTWR: return sigma_R;
        }
        return 0.0;
    }

    void validate() const {
        for (const FieldVariances* v : {&process_noise, &initial_variance})
            if (v->position < 0 || v->offset < 0 || v->bias < 0 || v->attack_offset < 0 || v->attack_distance < 0)
                throw ConfigError("EKF variances must be >= 0");
        if (attack_states_enabled && (process_noise.attack_offset <= 0 || process_noise.attack_distance <= 0))
            throw ConfigError("attack process noise must be > 0 when attack states are enabled");
        if (sigma_d <= 0 || sigma_r <= 0 || sigma_R <= 0) throw ConfigError("EKF measurement stds must be > 0");
        if (gate_sigmas < 0) throw ConfigError("gate_sigmas must be >= 0");
        for (auto [k, v] : position_process_noise)
            if (v < 0) throw ConfigError("position process noise override for node " + std::to_string(k) + " < 0");
    }
};

struct FilterState {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    double master_time = 0.0;
    std::size_t step = 0;
    bool started = false;
};

enum class UpdateStatus { Applied, DegenerateGeometry, Gated, TimeWentBackward };

inline const char* to_string(UpdateStatus s) {
    switch (s) {
        case UpdateStatus::Applied: return "applied";
        case UpdateStatus::DegenerateGeometry: return "degenerate-geometry";
        case UpdateStatus::Gated: return "gated";
        case UpdateStatus::TimeWentBackward: return "time-went-backward";
    }
    return "?";
}

struct Innovation {
    double residual = 0.0;  // measured minus predicted
    double variance = 0.0;  // S
    UpdateStatus status = UpdateStatus::Applied;
};

class SecEkf {
public:
    SecEkf(EkfConfig cfg, const NetworkState& initial_guess)
        : cfg_(std::move(cfg)), layout_(initial_guess.size(), cfg_.attack_states_enabled),
          master_(initial_guess.master) {
        cfg_.validate();
        NetworkState guess = initial_guess;
        guess.pin_master();
        if (cfg_.pin_master_attack_offset) guess[master_].attack_offset = 0.0;
        fs_.mean = layout_.pack(guess);
        const auto n = static_cast<Eigen::Index>(layout_.dim());
        fs_.covariance = Eigen::MatrixXd::Zero(n, n);
        q_diag_ = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i < layout_.dim(); ++i) {
            auto [node, field] = layout_.field_at(i);
            double p0 = cfg_.initial_variance.of(field);
            double q = cfg_.process_noise.of(field);
            if (field <= Field::Pz) {
                if (auto it = cfg_.position_initial_variance.find(node); it != cfg_.position_initial_variance.end())
                    p0 = it->second;
                if (auto it = cfg_.position_process_noise.find(node); it != cfg_.position_process_noise.end())
                    q = it->second;
            }
            fs_.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = p0;
            q_diag_[static_cast<Eigen::Index>(i)] = q;
        }
        for (std::size_t i : pinned_indices()) q_diag_[static_cast<Eigen::Index>(i)] = 0.0;
        pin(fs_);
    }

    const EkfConfig& config() const { return cfg_; }
    const StateLayout& layout() const { return layout_; }
    const FilterState& state() const { return fs_; }
    FilterState& state() { return fs_; }
    NodeId master() const { return master_; }

    NetworkState estimate() const { return layout_.unpack(fs_.mean, master_); }

    double position_std(NodeId k) const {
        const auto i = static_cast<Eigen::Index>(layout_.index_of(k, Field::Px));
        return std::sqrt(std::max(0.0, fs_.covariance.block<3, 3>(i, i).trace()));
    }
    double offset_std(NodeId k) const {
        const auto i = static_cast<Eigen::Index>(layout_.index_of(k, Field::Offset));
        return std::sqrt(std::max(0.0, fs_.covariance(i, i)));
    }

    /// Time update: o += b dt; covariance F P F^T + Q dt with F = I + dt (o <- b).
    void predict(double dt) {
        if (dt < 0.0) throw std::invalid_argument("predict: dt must be >= 0");
        if (dt == 0.0) return;
        Eigen::VectorXd& x = fs_.mean;
        Eigen::MatrixXd& P = fs_.covariance;
        const std::size_t stride = layout_.stride();
        for (NodeId k = 0; k < layout_.num_nodes(); ++k) {
            const auto o = static_cast<Eigen::Index>(k * stride + 3);
            const auto b = o + 1;
            x[o] += x[b] * dt;
            P.row(o) += dt * P.row(b);
        }
        for (NodeId k = 0; k < layout_.num_nodes(); ++k) {
            const auto o = static_cast<Eigen::Index>(k * stride + 3);
            const auto b = o + 1;
            P.col(o) += dt * P.col(b);
        }
        P.diagonal() += q_diag_ * dt;
        pin(fs_);
    }

    /// Measurement update (Joseph form). The state is left untouched unless the
    /// returned status is Applied.
    Innovation update(const Measurement& m) {
        validate(m, layout_.num_nodes());
        Innovation inn;
        const NetworkState est = estimate();
        double predicted = 0.0;
        MeasurementJacobian J;
        try {
            predicted = measure_fn(m.kind, est[m.initiator], est[m.responder], cfg_.include_propagation);
            J = measure_jacobian(m.kind, est[m.initiator], est[m.responder], cfg_.include_propagation);
        } catch (const DegenerateGeometry&) {
            inn.status = UpdateStatus::DegenerateGeometry;
            ++skipped_;
            return inn;
        }

        // Sparse row h: the initiator's and responder's blocks.
        idx_.clear();
        val_.clear();
        const std::size_t stride = layout_.stride();
        for (std::size_t f = 0; f < stride; ++f) {
            if (J.initiator[static_cast<Eigen::Index>(f)] != 0.0) {
                idx_.push_back(static_cast<Eigen::Index>(m.initiator * stride + f));
                val_.push_back(J.initiator[static_cast<Eigen::Index>(f)]);
            }
            if (J.responder[static_cast<Eigen::Index>(f)] != 0.0) {
                idx_.push_back(static_cast<Eigen::Index>(m.responder * stride + f));
                val_.push_back(J.responder[static_cast<Eigen::Index>(f)]);
            }
        }

        Eigen::MatrixXd& P = fs_.covariance;
        const Eigen::Index n = P.rows();
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n);  // P h
        for (std::size_t c = 0; c < idx_.size(); ++c) v += val_[c] * P.col(idx_[c]);
        double hv = 0.0;
        for (std::size_t c = 0; c < idx_.size(); ++c) hv += val_[c] * v[idx_[c]];
        const double sigma = cfg_.sigma(m.kind);
        const double R = sigma * sigma;
        const double S = hv + R;
        inn.residual = m.value - predicted;
        inn.variance = S;
        if (cfg_.gate_sigmas > 0.0 && std::abs(inn.residual) > cfg_.gate_sigmas * std::sqrt(S)) {
            inn.status = UpdateStatus::Gated;
            ++gated_;
            return inn;
        }

        Eigen::VectorXd K = v / S;
        for (std::size_t i : pinned_indices()) K[static_cast<Eigen::Index>(i)] = 0.0;
        fs_.mean += K * inn.residual;

        // P <- (I - K h^T) P (I - K h^T)^T + K R K^T, evaluated as products.
        Eigen::VectorXd hP = Eigen::VectorXd::Zero(n);  // (h^T P)^T
        for (std::size_t c = 0; c < idx_.size(); ++c) hP += val_[c] * P.row(idx_[c]).transpose();
        P.noalias() -= K * hP.transpose();  // A P
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n);  // (A P) h
        for (std::size_t c = 0; c < idx_.size(); ++c) w += val_[c] * P.col(idx_[c]);
        P.noalias() -= w * K.transpose();
        P.noalias() += R * K * K.transpose();
        P = 0.5 * (P + P.transpose()).eval();
        pin(fs_);
        return inn;
    }

    /// Predict to the measurement's master time, then update. Backward time is rejected.
    Innovation step(const Measurement& m) {
        if (fs_.started && m.time < fs_.master_time) {
            ++rejected_;
            return {0.0, 0.0, UpdateStatus::TimeWentBackward};
        }
        const double dt = fs_.started ? m.time - fs_.master_time : 0.0;
        predict(dt);
        fs_.master_time = m.time;
        fs_.started = true;
        ++fs_.step;
        return update(m);
    }

    std::size_t skipped_degenerate() const { return skipped_; }
    std::size_t gated() const { return gated_; }
    std::size_t rejected_backward() const { return rejected_; }

private:
    std::vector<std::size_t> pinned_indices() const {
        std::vector<std::size_t> p{layout_.index_of(master_, Field::Offset), layout_.index_of(master_, Field::Bias)};
        if (layout_.with_attacks() && cfg_.pin_master_attack_offset)
            p.push_back(layout_.index_of(master_, Field::AttackOffset));
        return p;
    }

    void pin(FilterState& fs) const {
        for (std::size_t i : pinned_indices()) {
            const auto j = static_cast<Eigen::Index>(i);
            fs.mean[j] = 0.0;
            fs.covariance.row(j).setZero();
            fs.covariance.col(j).setZero();
        }
    }

    EkfConfig cfg_;
    StateLayout layout_;
    NodeId master_;
    FilterState fs_;
    Eigen::VectorXd q_diag_;
    std::vector<Eigen::Index> idx_;
    std::vector<double> val_;
    std::size_t skipped_ = 0;
    std::size_t gated_ = 0;
    std::size_t rejected_ = 0;
};

}  // namespace secest
