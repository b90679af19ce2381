#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"

using namespace secest;
using namespace secest::testing;

namespace {

NetworkState two_nodes() { return network({node_at(0, 0, 0), node_at(3, 4, 0)}); }

EkfConfig zero_q() {
    EkfConfig c;
    c.process_noise = FieldVariances{0, 0, 0, 1e-300, 1e-300};
    return c;
}

}  // namespace

TEST(Predict, ZeroDtIsIdentity) {
    SecEkf f(EkfConfig{}, two_nodes());
    const FilterState before = f.state();
    f.predict(0.0);
    EXPECT_EQ(f.state().mean, before.mean);
    EXPECT_EQ(f.state().covariance, before.covariance);
}

TEST(Predict, OffsetGainsBiasTimesDt) {
    NetworkState g = two_nodes();
    g[1].offset = 1e-6;
    g[1].bias = 2e-6;
    g[1].attack_distance = 0.7;
    SecEkf f(zero_q(), g);
    const Eigen::VectorXd before = f.state().mean;
    f.predict(1.0);
    const auto o = static_cast<Eigen::Index>(index_of(1, Field::Offset));
    EXPECT_NEAR(f.state().mean[o], 3e-6, 1e-18);
    for (Eigen::Index i = 0; i < before.size(); ++i)
        if (i != o) EXPECT_EQ(f.state().mean[i], before[i]);
}

TEST(Predict, TraceGrowsWithProcessNoise) {
    SecEkf f(EkfConfig{}, two_nodes());
    const double t0 = f.state().covariance.trace();
    f.predict(0.1);
    EXPECT_GT(f.state().covariance.trace(), t0);
    EXPECT_THROW(f.predict(-1.0), std::invalid_argument);
}

TEST(Predict, CovarianceMatchesDenseFormula) {
    Rng rng(8);
    SecEkf f(EkfConfig{}, random_state(rng, 3));
    // Fill P with a random SPD matrix first.
    const auto n = static_cast<Eigen::Index>(f.layout().dim());
    Eigen::MatrixXd A = Eigen::MatrixXd::Random(n, n);
    f.state().covariance = A * A.transpose();
    f.predict(0.0);
    const Eigen::MatrixXd P0 = f.state().covariance;
    const double dt = 0.37;
    Eigen::MatrixXd F = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    for (NodeId k = 0; k < 3; ++k) F(index_of(k, Field::Offset), index_of(k, Field::Bias)) = dt;
    for (std::size_t i = 0; i < f.layout().dim(); ++i)
        Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = f.config().process_noise.of(f.layout().field_at(i).second) * dt;
    Eigen::MatrixXd expect = F * P0 * F.transpose() + Q;
    for (auto i : {index_of(0, Field::Offset), index_of(0, Field::Bias), index_of(0, Field::AttackOffset)}) {
        expect.row(static_cast<Eigen::Index>(i)).setZero();
        expect.col(static_cast<Eigen::Index>(i)).setZero();
    }
    f.predict(dt);
    EXPECT_LT((f.state().covariance - expect).cwiseAbs().maxCoeff(), 1e-12 * expect.cwiseAbs().maxCoeff());
}

TEST(Update, ZeroInnovationKeepsMeanAndShrinksAlongMeasurement) {
    SecEkf f(EkfConfig{}, two_nodes());
    const Eigen::VectorXd m0 = f.state().mean;
    const Eigen::MatrixXd P0 = f.state().covariance;
    const auto inn = f.update(meas(0, 1, MeasurementKind::DoubleSidedTWR, 5.0));
    EXPECT_EQ(inn.status, UpdateStatus::Applied);
    EXPECT_EQ(inn.residual, 0.0);
    EXPECT_EQ(f.state().mean, m0);
    const auto J = measure_jacobian(MeasurementKind::DoubleSidedTWR, f.estimate()[0], f.estimate()[1]);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(14);
    h.head<7>() = J.initiator;
    h.tail<7>() = J.responder;
    EXPECT_LT(h.dot(f.state().covariance * h), h.dot(P0 * h));
    EXPECT_LE(f.state().covariance.trace(), P0.trace());
}

TEST(Update, MatchesTextbookKalmanGain) {
    Rng rng(21);
    NetworkState g = random_state(rng, 3);
    SecEkf f(EkfConfig{}, g);
    const Eigen::VectorXd x0 = f.state().mean;
    const Eigen::MatrixXd P0 = f.state().covariance;
    const Measurement m = meas(2, 1, MeasurementKind::SingleSidedTWR, 6.0);
    const auto J = measure_jacobian(m.kind, f.estimate()[2], f.estimate()[1]);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(21);
    h.segment<7>(14) = J.initiator;
    h.segment<7>(7) = J.responder;
    const double R = 0.09;
    const double S = h.dot(P0 * h) + R;
    const Eigen::VectorXd K = P0 * h / S;
    const double nu = m.value - measure_fn(m.kind, f.estimate()[2], f.estimate()[1]);
    f.update(m);
    EXPECT_TRUE(f.state().mean.isApprox(x0 + K * nu, 1e-12));
    const Eigen::MatrixXd P1 = P0 - K * h.transpose() * P0;
    EXPECT_LT((f.state().covariance - P1).cwiseAbs().maxCoeff(), 1e-10 * P0.cwiseAbs().maxCoeff());
}

TEST(Update, DegenerateGeometryIsSkipped) {
    SecEkf f(EkfConfig{}, network({node_at(1, 1, 1), node_at(1, 1, 1)}));
    const FilterState before = f.state();
    const auto inn = f.update(meas(0, 1, MeasurementKind::DoubleSidedTWR, 5.0));
    EXPECT_EQ(inn.status, UpdateStatus::DegenerateGeometry);
    EXPECT_EQ(f.state().mean, before.mean);
    EXPECT_EQ(f.state().covariance, before.covariance);
    EXPECT_EQ(f.skipped_degenerate(), 1u);
}

TEST(Update, GatingRejectsOutliers) {
    EkfConfig c;
    c.gate_sigmas = 6.0;
    SecEkf f(c, two_nodes());
    const Eigen::VectorXd x0 = f.state().mean;
    EXPECT_EQ(f.update(meas(0, 1, MeasurementKind::DoubleSidedTWR, 500.0)).status, UpdateStatus::Gated);
    EXPECT_EQ(f.state().mean, x0);
    EXPECT_EQ(f.update(meas(0, 1, MeasurementKind::DoubleSidedTWR, 5.2)).status, UpdateStatus::Applied);
    EXPECT_EQ(f.gated(), 1u);
}

TEST(Update, MasterStaysPinned) {
    Rng rng(2);
    SecEkf f(EkfConfig{}, random_state(rng, 4));
    for (int i = 0; i < 200; ++i) {
        const NodeId k = i % 4, j = (i + 1 + i / 4) % 4;
        if (k == j) continue;
        f.step(meas(k, j, kAllKinds[i % 3], i % 3 == 0 ? 1e-5 : 4.0, 0.01 * i));
        for (auto field : {Field::Offset, Field::Bias, Field::AttackOffset}) {
            const auto idx = static_cast<Eigen::Index>(index_of(0, field));
            ASSERT_EQ(f.state().mean[idx], 0.0);
            ASSERT_TRUE(f.state().covariance.row(idx).isZero(0.0));
            ASSERT_TRUE(f.state().covariance.col(idx).isZero(0.0));
        }
    }
}

TEST(Step, SameTimeMeansZeroDtAndBackwardIsRejected) {
    SecEkf f(EkfConfig{}, two_nodes());
    f.step(meas(0, 1, MeasurementKind::DoubleSidedTWR, 5.0, 1.0));
    const Eigen::MatrixXd P = f.state().covariance;
    SecEkf g = f;
    g.update(meas(0, 1, MeasurementKind::DoubleSidedTWR, 5.0, 1.0));
    f.step(meas(0, 1, MeasurementKind::DoubleSidedTWR, 5.0, 1.0));
    EXPECT_TRUE(f.state().covariance.isApprox(g.state().covariance, 1e-14));
    const FilterState before = f.state();
    EXPECT_EQ(f.step(meas(0, 1, MeasurementKind::DoubleSidedTWR, 5.0, 0.5)).status, UpdateStatus::TimeWentBackward);
    EXPECT_EQ(f.state().mean, before.mean);
    EXPECT_EQ(f.rejected_backward(), 1u);
}

TEST(Convergence, TwoNodeOffsetFromCounterDifferences) {
    SimConfig c = quiet_sim({Vec3(0, 0, 1), Vec3(3, 4, 1)}, 0.5);
    c.kinds = {MeasurementKind::CounterDiff};
    c.nodes[1].clock.initial_offset = 10e-6;
    auto recs = Simulator(c).run();
    NetworkState guess = truth_state({Vec3(0, 0, 1), Vec3(3, 4, 1)});
    SecEkf f(noiseless_ekf(), guess);
    for (std::size_t i = 0; i < 50; ++i) f.step(recs[i].measurement);
    EXPECT_LT(std::abs(f.estimate()[1].offset - 10e-6), 1e-9);
}

TEST(Convergence, ConstantDistanceAttackRecovered) {
    const auto pos = square_positions();
    SimConfig c = quiet_sim(pos, 10.0);
    auto recs = Simulator(c).run();
    SecEkf f(noiseless_ekf(), truth_state(pos));
    std::size_t updates = 0;
    for (auto& r : recs) {
        Measurement m = r.measurement;
        if (is_range(m.kind) && m.initiator == 1) m.value += 4.0;
        f.step(m);
        if (++updates == 200) break;
    }
    EXPECT_LT(std::abs(f.estimate()[1].attack_distance - 4.0), 0.05);
}

TEST(Properties, CovarianceStaysSymmetricPsd) {
    ScenarioConfig cfg = make_preset("static8-type2");
    cfg.duration = 20.0;
    const auto log = attack(simulate(cfg), cfg);
    SecEkf f(cfg.secekf, initial_guess(cfg));
    for (const auto& r : log.records) {
        f.step(r.measurement);
        ASSERT_TRUE(symmetric_psd(f.state().covariance)) << "step " << r.measurement.index;
    }
}

TEST(Properties, SecAndOrigAgreeWithoutAttacks) {
    ScenarioConfig cfg = make_preset("static8-type1");
    cfg.attack.type = AttackType::None;
    cfg.duration = 30.0;
    const auto log = simulate(cfg);
    SecEkf sec(cfg.secekf, initial_guess(cfg)), orig(cfg.origekf, initial_guess(cfg));
    for (const auto& r : log.records) {
        sec.step(r.measurement);
        orig.step(r.measurement);
    }
    for (NodeId k = 0; k < cfg.nodes.size(); ++k) {
        const double d = (sec.estimate()[k].position - orig.estimate()[k].position).norm();
        EXPECT_LT(d, 3.0 * sec.position_std(k)) << "node " << k;
    }
}

TEST(Properties, NodeOrderInvariance) {
    ScenarioConfig cfg = make_preset("static8-type1");
    cfg.duration = 5.0;
    const auto log = attack(simulate(cfg), cfg);
    const NetworkState guess = initial_guess(cfg);
    // Reverse every node except the master.
    const std::size_t n = guess.size();
    auto perm = [&](NodeId k) { return k == 0 ? NodeId{0} : static_cast<NodeId>(n - k); };
    NetworkState pguess = guess;
    for (NodeId k = 0; k < n; ++k) pguess[perm(k)] = guess[k];
    SecEkf a(cfg.secekf, guess), b(cfg.secekf, pguess);
    for (const auto& r : log.records) {
        a.step(r.measurement);
        Measurement m = r.measurement;
        m.initiator = perm(m.initiator);
        m.responder = perm(m.responder);
        b.step(m);
    }
    for (NodeId k = 0; k < n; ++k) {
        EXPECT_LT((a.estimate()[k].position - b.estimate()[perm(k)].position).norm(), 1e-6);
        EXPECT_NEAR(a.estimate()[k].offset, b.estimate()[perm(k)].offset, 1e-12);
    }
}

TEST(Config, Rejects) {
    EkfConfig c;
    c.process_noise.attack_distance = 0.0;
    EXPECT_THROW(SecEkf(c, two_nodes()), ConfigError);
    c = EkfConfig{};
    c.sigma_r = 0.0;
    EXPECT_THROW(SecEkf(c, two_nodes()), ConfigError);
    c = EkfConfig{};
    c.attack_states_enabled = false;
    c.process_noise.attack_distance = 0.0;
    EXPECT_NO_THROW(SecEkf(c, two_nodes()));
    EXPECT_EQ(SecEkf(c, two_nodes()).layout().dim(), 10u);
}
