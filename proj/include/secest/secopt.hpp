#pragma once

// Sliding-window maximum-likelihood estimator: weighted nonlinear least squares
// over the last L measurements plus an L1 penalty on attack states, minimized by
// Levenberg-Marquardt with a smoothed absolute value.

#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>

#include "secest/eval.hpp"
#include "secest/model.hpp"

namespace secest {

struct SecOptConfig {
    double lambda = 1e-2;                 // L1 weight, raw attack units
    std::size_t window = 300;             // L
    std::size_t stride = 50;              // measurements between window solves
    int max_iterations = 50;
    double step_tolerance = 1e-6;         // scaled step norm
    double epsilon_distance = 1e-4;       // L1 smoothing for ad [m]
    double epsilon_offset = 1e-10;        // L1 smoothing for ao [s]
    bool warm_start = true;
    bool split_subproblems = false;
    bool include_propagation = true;
    bool pin_master_attack_offset = true;
    double sigma_d = 1e-8;
    double sigma_r = 0.30;
    double sigma_R = 0.10;

    double sigma(MeasurementKind kind) const {
        switch (kind) {
            case MeasurementKind::CounterDiff: return sigma_d;
            case MeasurementKind::SingleSidedTWR: return sigma_r;
            case MeasurementKind::DoubleSidedTWR: return sigma_R;
        }
        return 0.0;
    }

    void validate() const {
        if (lambda < 0.0) throw ConfigError("secopt lambda must be >= 0");
        if (window < 1) throw ConfigError("secopt window must be >= 1");
        if (stride < 1) throw ConfigError("secopt stride must be >= 1");
        if (!(epsilon_distance > 0.0) || !(epsilon_offset > 0.0)) throw ConfigError("secopt epsilon must be > 0");
        if (sigma_d <= 0 || sigma_r <= 0 || sigma_R <= 0) throw ConfigError("secopt stds must be > 0");
        if (max_iterations < 1) throw ConfigError("secopt max_iterations must be >= 1");
    }
};

/// Time-ordered measurements solved together. Clock offsets inside the window are
/// referred to `reference_time` through each node's bias.
struct MeasurementWindow {
    std::vector<Measurement> measurements;

    double start_time() const { return measurements.front().time; }
    double end_time() const { return measurements.back().time; }
    double reference_time() const { return end_time(); }
};

struct SolverReport {
    int iterations = 0;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    bool converged = false;
    int damping_increases = 0;
};

namespace detail {

/// Natural scale of each field, used for step-size tests and damping floors.
inline double field_scale(Field f) {
    switch (f) {
        case Field::Offset:
        case Field::AttackOffset: return 1e-6;
        case Field::Bias: return 1e-6;
        default: return 1.0;
    }
}

inline NodeState at_time(NodeState s, double dt) {
    s.offset += s.bias * dt;
    return s;
}

}  // namespace detail

/// Exact (unsmoothed) cost: sum of squared std-scaled residuals plus
/// lambda * (|ao| + |ad|) over non-master nodes.
inline double objective(const NetworkState& x, const MeasurementWindow& window, const SecOptConfig& cfg) {
    if (window.measurements.empty()) throw std::invalid_argument("objective: empty window");
    const double tref = window.reference_time();
    double cost = 0.0;
    for (const Measurement& m : window.measurements) {
        const double dt = m.time - tref;
        const double pred = measure_fn(m.kind, detail::at_time(x[m.initiator], dt),
                                       detail::at_time(x[m.responder], dt), cfg.include_propagation);
        const double r = (m.value - pred) / cfg.sigma(m.kind);
        cost += r * r;
    }
    for (NodeId k = 0; k < x.size(); ++k) {
        if (k == x.master) continue;
        cost += cfg.lambda * (std::abs(x[k].attack_offset) + std::abs(x[k].attack_distance));
    }
    return cost;
}

/// Levenberg-Marquardt over the non-pinned entries of the packed state.
class WindowSolver {
public:
    WindowSolver(const SecOptConfig& cfg, std::size_t num_nodes, NodeId master)
        : cfg_(cfg), layout_(num_nodes, true), master_(master) {
        for (std::size_t i = 0; i < layout_.dim(); ++i) {
            auto [node, field] = layout_.field_at(i);
            if (node == master_ && (field == Field::Offset || field == Field::Bias)) continue;
            if (node == master_ && field == Field::AttackOffset && cfg_.pin_master_attack_offset) continue;
            vars_.push_back(i);
        }
    }

    /// Smoothed cost used inside the solver: |a| -> sqrt(a^2 + eps^2) - eps.
    double smoothed_cost(const Eigen::VectorXd& x, const MeasurementWindow& w) const {
        Eigen::VectorXd r;
        residuals(x, w, r, nullptr, {});
        return r.squaredNorm() + penalty(x, nullptr, nullptr);
    }

    NetworkState solve(const MeasurementWindow& w, const NetworkState& x_init, SolverReport& report) const {
        Eigen::VectorXd x = layout_.pack(x_init);
        pin(x);
        const double exact_init = objective(layout_.unpack(x, master_), w, cfg_);
        if (cfg_.split_subproblems) {
            // Time variables from counter differences, then geometry from ranges.
            std::vector<bool> timing(layout_.dim(), false), geometry(layout_.dim(), false);
            for (std::size_t i = 0; i < layout_.dim(); ++i) {
                const Field f = layout_.field_at(i).second;
                timing[i] = f == Field::Offset || f == Field::Bias || f == Field::AttackOffset;
                geometry[i] = f <= Field::Pz || f == Field::AttackDistance;
            }
            SolverReport a, b;
            run_lm(x, w, timing, true, a);
            run_lm(x, w, geometry, false, b);
            report.iterations = a.iterations + b.iterations;
            report.damping_increases = a.damping_increases + b.damping_increases;
            report.converged = a.converged && b.converged;
        } else {
            std::vector<bool> all(layout_.dim(), true);
            run_lm(x, w, all, std::nullopt, report);
        }
        NetworkState out = layout_.unpack(x, master_);
        report.initial_cost = exact_init;
        report.final_cost = objective(out, w, cfg_);
        if (report.final_cost > exact_init) {
            // Smoothing can trade a tiny exact-cost increase for a smoothed decrease.
            out = x_init;
            out.pin_master();
            if (cfg_.pin_master_attack_offset) out[master_].attack_offset = 0.0;
            report.final_cost = exact_init;
        }
        return out;
    }

private:
    double penalty(const Eigen::VectorXd& x, Eigen::VectorXd* grad, Eigen::VectorXd* hess_diag) const {
        double p = 0.0;
        if (cfg_.lambda == 0.0) return 0.0;
        for (NodeId k = 0; k < layout_.num_nodes(); ++k) {
            if (k == master_) continue;
            for (auto [f, eps] : {std::pair{Field::AttackOffset, cfg_.epsilon_offset},
                                  std::pair{Field::AttackDistance, cfg_.epsilon_distance}}) {
                const auto i = static_cast<Eigen::Index>(layout_.index_of(k, f));
                const double a = x[i];
                const double s = std::sqrt(a * a + eps * eps);
                p += cfg_.lambda * (s - eps);
                if (grad) (*grad)[i] += cfg_.lambda * a / s;
                if (hess_diag) (*hess_diag)[i] += cfg_.lambda * eps * eps / (s * s * s);
            }
        }
        return p;
    }

    /// Scaled residuals; with `J`, also the dense jacobian over the full packed state.
    /// `only` restricts to one measurement kind family (true: CounterDiff, false: ranges).
    void residuals(const Eigen::VectorXd& x, const MeasurementWindow& w, Eigen::VectorXd& r, Eigen::MatrixXd* J,
                   std::optional<bool> only_timing) const {
        const NetworkState s = layout_.unpack(x, master_);
        const double tref = w.reference_time();
        std::vector<const Measurement*> used;
        for (const Measurement& m : w.measurements)
            if (!only_timing || (m.kind == MeasurementKind::CounterDiff) == *only_timing) used.push_back(&m);
        r.resize(static_cast<Eigen::Index>(used.size()));
        if (J) J->setZero(static_cast<Eigen::Index>(used.size()), static_cast<Eigen::Index>(layout_.dim()));
        for (std::size_t row = 0; row < used.size(); ++row) {
            const Measurement& m = *used[row];
            const double dt = m.time - tref;
            const NodeState a = detail::at_time(s[m.initiator], dt);
            const NodeState b = detail::at_time(s[m.responder], dt);
            const double inv_sigma = 1.0 / cfg_.sigma(m.kind);
            const auto ri = static_cast<Eigen::Index>(row);
            r[ri] = (m.value - measure_fn(m.kind, a, b, cfg_.include_propagation)) * inv_sigma;
            if (!J) continue;
            const MeasurementJacobian mj = measure_jacobian(m.kind, a, b, cfg_.include_propagation);
            for (auto [node, grad] : {std::pair{m.initiator, mj.initiator}, std::pair{m.responder, mj.responder}}) {
                const auto base = static_cast<Eigen::Index>(node * kFieldsPerNode);
                Eigen::Matrix<double, 7, 1> g = grad;
                g[4] += g[3] * dt;  // offset at t depends on bias through dt
                J->block(ri, base, 1, 7) += -inv_sigma * g.transpose();
            }
        }
    }

    void pin(Eigen::VectorXd& x) const {
        x[static_cast<Eigen::Index>(layout_.index_of(master_, Field::Offset))] = 0.0;
        x[static_cast<Eigen::Index>(layout_.index_of(master_, Field::Bias))] = 0.0;
        if (cfg_.pin_master_attack_offset)
            x[static_cast<Eigen::Index>(layout_.index_of(master_, Field::AttackOffset))] = 0.0;
    }

    double total_cost(const Eigen::VectorXd& x, const MeasurementWindow& w, std::optional<bool> only) const {
        Eigen::VectorXd r;
        residuals(x, w, r, nullptr, only);
        return r.squaredNorm() + penalty(x, nullptr, nullptr);
    }

    void run_lm(Eigen::VectorXd& x, const MeasurementWindow& w, const std::vector<bool>& mask,
                std::optional<bool> only_timing, SolverReport& rep) const {
        std::vector<Eigen::Index> active;
        for (std::size_t i : vars_)
            if (mask[i]) active.push_back(static_cast<Eigen::Index>(i));
        const auto nv = static_cast<Eigen::Index>(active.size());
        std::vector<double> scale(active.size());
        for (std::size_t c = 0; c < active.size(); ++c)
            scale[c] = detail::field_scale(layout_.field_at(static_cast<std::size_t>(active[c])).second);

        Eigen::VectorXd r;
        Eigen::MatrixXd J;
        double cost = 0.0;
        double mu = -1.0;
        bool relinearize = true;
        Eigen::MatrixXd H(nv, nv);
        Eigen::VectorXd g(nv);
        for (rep.iterations = 0; rep.iterations < cfg_.max_iterations; ++rep.iterations) {
            if (relinearize) {
                residuals(x, w, r, &J, only_timing);
                Eigen::VectorXd pg = Eigen::VectorXd::Zero(x.size()), ph = Eigen::VectorXd::Zero(x.size());
                cost = r.squaredNorm() + penalty(x, &pg, &ph);
                Eigen::MatrixXd Ja(J.rows(), nv);
                for (Eigen::Index c = 0; c < nv; ++c) Ja.col(c) = J.col(active[static_cast<std::size_t>(c)]);
                H.noalias() = 2.0 * Ja.transpose() * Ja;
                g.noalias() = 2.0 * Ja.transpose() * r;
                for (Eigen::Index c = 0; c < nv; ++c) {
                    const Eigen::Index i = active[static_cast<std::size_t>(c)];
                    g[c] += pg[i];
                    H(c, c) += ph[i];
                }
                if (mu < 0.0) mu = 1e-4;
                relinearize = false;
            }
            if (g.size() == 0) {
                rep.converged = true;
                break;
            }
            Eigen::MatrixXd A = H;
            for (Eigen::Index c = 0; c < nv; ++c) {
                const double floor = 1.0 / (scale[static_cast<std::size_t>(c)] * scale[static_cast<std::size_t>(c)]);
                A(c, c) += mu * std::max(H(c, c), floor);
            }
            const Eigen::VectorXd delta = A.ldlt().solve(-g);
            Eigen::VectorXd xn = x;
            double step_norm = 0.0;
            for (Eigen::Index c = 0; c < nv; ++c) {
                xn[active[static_cast<std::size_t>(c)]] += delta[c];
                step_norm = std::max(step_norm, std::abs(delta[c]) / scale[static_cast<std::size_t>(c)]);
            }
            if (!delta.allFinite()) {
                mu *= 10.0;
                ++rep.damping_increases;
                continue;
            }
            const double new_cost = total_cost(xn, w, only_timing);
            if (new_cost <= cost) {
                x = std::move(xn);
                mu = std::max(mu / 3.0, 1e-12);
                relinearize = true;
                if (step_norm < cfg_.step_tolerance || cost - new_cost <= 1e-15 * std::max(1.0, cost)) {
                    rep.converged = true;
                    ++rep.iterations;
                    break;
                }
            } else {
                mu *= 4.0;
                ++rep.damping_increases;
                if (step_norm < cfg_.step_tolerance) {
                    rep.converged = true;
                    break;
                }
                if (mu > 1e16) break;
            }
        }
    }

    SecOptConfig cfg_;
    StateLayout layout_;
    NodeId master_;
    std::vector<std::size_t> vars_;
};

inline NetworkState solve(const MeasurementWindow& window, const NetworkState& x_init, const SecOptConfig& cfg,
                          SolverReport* report = nullptr) {
    if (window.measurements.empty()) throw std::invalid_argument("solve: empty window");
    cfg.validate();
    SolverReport local;
    WindowSolver solver(cfg, x_init.size(), x_init.master);
    NetworkState out = solver.solve(window, x_init, report ? *report : local);
    return out;
}

struct WindowResult {
    TraceRecord record;
    SolverReport report;
    double wall_seconds = 0.0;
};

/// Slides a window of L measurements over the stream, solving every `stride`
/// arrivals once the window is full, warm-started from the previous solution.
class SecOptStream {
public:
    SecOptStream(SecOptConfig cfg, NetworkState initial_guess)
        : cfg_(std::move(cfg)), init_(std::move(initial_guess)), current_(init_),
          solver_(cfg_, init_.size(), init_.master) {
        cfg_.validate();
        current_.pin_master();
    }

    /// Returns a result whenever a window solve happened on this arrival.
    std::optional<WindowResult> push(const Measurement& m) {
        buffer_.push_back(m);
        if (buffer_.size() > cfg_.window) buffer_.pop_front();
        ++arrivals_;
        if (buffer_.size() < cfg_.window) return std::nullopt;
        if ((arrivals_ - cfg_.window) % cfg_.stride != 0) return std::nullopt;

        MeasurementWindow w{{buffer_.begin(), buffer_.end()}};
        WindowResult res;
        const auto t0 = std::chrono::steady_clock::now();
        const NetworkState& start = cfg_.warm_start ? current_ : init_;
        current_ = solver_.solve(w, start, res.report);
        res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.record.step = m.index;
        res.record.time = w.end_time();
        res.record.estimate = current_;
        return res;
    }

    const NetworkState& current() const { return current_; }

private:
    SecOptConfig cfg_;
    NetworkState init_;
    NetworkState current_;
    WindowSolver solver_;
    std::deque<Measurement> buffer_;
    std::size_t arrivals_ = 0;
};

inline std::vector<WindowResult> run_stream(std::span<const Measurement> stream, const NetworkState& initial_guess,
                                            const SecOptConfig& cfg) {
    std::vector<WindowResult> out;
    if (stream.empty()) return out;
    SecOptStream s(cfg, initial_guess);
    for (const Measurement& m : stream)
        if (auto r = s.push(m)) out.push_back(std::move(*r));
    return out;
}

}  // namespace secest
