#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace secest;
using namespace secest::testing;

namespace {

std::vector<Vec3> random_points(Rng& rng, int n) {
    std::vector<Vec3> p;
    for (int i = 0; i < n; ++i) p.emplace_back(rng.uniform(0, 10), rng.uniform(0, 9), rng.uniform(0, 3));
    return p;
}

Eigen::Matrix3d random_rotation(Rng& rng) {
    const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    return Eigen::AngleAxisd(rng.uniform(-3.14, 3.14), axis).toRotationMatrix();
}

}  // namespace

TEST(Procrustes, IdentityOnEqualSets) {
    Rng rng(1);
    const auto p = random_points(rng, 8);
    const Alignment a = procrustes_align(p, p);
    EXPECT_FALSE(a.degenerate);
    EXPECT_TRUE(a.transform.rotation.isApprox(Eigen::Matrix3d::Identity(), 1e-12));
    EXPECT_LT(a.transform.translation.norm(), 1e-12);
    EXPECT_LT(alignment_residual(a.transform, p, p), 1e-12);
}

TEST(Procrustes, InvertsRotationAboutYAndShift) {
    Rng rng(2);
    const auto truth = random_points(rng, 8);
    const Eigen::Matrix3d R = Eigen::AngleAxisd(std::acos(-1.0) / 2, Vec3::UnitY()).toRotationMatrix();
    std::vector<Vec3> est;
    for (const Vec3& p : truth) est.push_back(R * p + Vec3(1, 0, 2));
    const Alignment a = procrustes_align(est, truth);
    EXPECT_LT(alignment_residual(a.transform, est, truth), 1e-9);
    EXPECT_TRUE((a.transform.rotation * R).isApprox(Eigen::Matrix3d::Identity(), 1e-12));
}

TEST(Procrustes, MatchesRotationGridOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 3; ++trial) {
        const auto truth = random_points(rng, 8);
        const Eigen::Matrix3d R = random_rotation(rng);
        std::vector<Vec3> est;
        for (const Vec3& p : truth) est.push_back(R * p + Vec3(rng.normal(), 0, 1) + 0.3 * Vec3(rng.normal(), rng.normal(), rng.normal()));
        const Alignment a = procrustes_align(est, truth);
        const double kabsch = alignment_residual(a.transform, est, truth);
        const double grid = procrustes_grid_residual(est, truth);
        EXPECT_NEAR(kabsch, grid, 1e-3);
        EXPECT_LE(kabsch, grid + 1e-12);
    }
}

TEST(Procrustes, ResidualInvariantUnderRigidPreTransform) {
    Rng rng(4);
    const auto truth = random_points(rng, 8);
    std::vector<Vec3> est;
    for (const Vec3& p : truth) est.push_back(p + 0.5 * Vec3(rng.normal(), rng.normal(), rng.normal()));
    const double base = alignment_residual(procrustes_align(est, truth).transform, est, truth);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Matrix3d R = random_rotation(rng);
        const Vec3 t(rng.normal(), rng.normal(), rng.normal());
        std::vector<Vec3> moved;
        for (const Vec3& p : est) moved.push_back(R * p + t);
        const Alignment a = procrustes_align(moved, truth);
        EXPECT_NEAR(alignment_residual(a.transform, moved, truth), base, 1e-9);
        EXPECT_NEAR(a.transform.rotation.determinant(), 1.0, 1e-9);
        EXPECT_TRUE((a.transform.rotation * a.transform.rotation.transpose()).isApprox(Eigen::Matrix3d::Identity(), 1e-9));
    }
}

TEST(Procrustes, NoReflection) {
    Rng rng(5);
    const auto truth = random_points(rng, 8);
    std::vector<Vec3> mirrored;
    for (const Vec3& p : truth) mirrored.emplace_back(-p.x(), p.y(), p.z());
    const Alignment a = procrustes_align(mirrored, truth);
    EXPECT_NEAR(a.transform.rotation.determinant(), 1.0, 1e-9);
    EXPECT_GT(alignment_residual(a.transform, mirrored, truth), 1e-3);
}

TEST(Procrustes, Degenerate) {
    EXPECT_TRUE(procrustes_align({Vec3(0, 0, 0), Vec3(1, 0, 0)}, {Vec3(0, 0, 0), Vec3(1, 0, 0)}).degenerate);
    const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};
    const Alignment a = procrustes_align(line, line);
    EXPECT_TRUE(a.degenerate);
    EXPECT_TRUE(a.transform.rotation.isIdentity());
    EXPECT_THROW(procrustes_align(line, {Vec3::Zero()}), std::invalid_argument);
}

TEST(Errors, LocalizationExamples) {
    Rng rng(6);
    NetworkState truth = truth_state(random_points(rng, 8));
    for (double e : localization_error_at(truth, truth, {})) EXPECT_LT(e, 1e-12);
    // One node displaced, alignment fitted on the others: its error is the displacement.
    NetworkState est = truth;
    est[3].position += Vec3(0.3, 0, 0);
    const auto err = localization_error_at(est, truth, {0, 1, 2, 4, 5, 6, 7});
    EXPECT_NEAR(err[3], 0.3, 1e-9);
    EXPECT_LT(err[0], 1e-9);
}

TEST(Errors, SyncExamples) {
    NetworkState truth = network({NodeState{}, NodeState{}, NodeState{}, NodeState{}});
    truth[3].offset = 7e-6;
    for (double e : sync_error_at(truth, truth, 0)) EXPECT_EQ(e, 0.0);
    NetworkState est = truth;
    est[3].offset += 2e-7;
    const auto s = sync_error_at(est, truth, 0);
    EXPECT_NEAR(s[3], 0.2e-6, 1e-15);
    EXPECT_EQ(s[0], 0.0);
}

TEST(Evaluate, AggregatesAndSkips) {
    NetworkState truth = truth_state({Vec3(0, 0, 0), Vec3(4, 0, 0), Vec3(0, 3, 0), Vec3(0, 0, 2)});
    std::vector<TruthSnapshot> snaps{{0.0, truth}, {1.0, truth}, {2.0, truth}};
    std::vector<TraceRecord> trace;
    for (double t : {0.5, 1.01, 2.0, 7.0}) {
        TraceRecord r;
        r.time = t;
        r.estimate = truth;
        r.estimate[2].offset = 1e-6 * t;
        trace.push_back(r);
    }
    EvalOptions opt;
    opt.warmup = 0.75;
    const ErrorReport rep = evaluate(trace, snaps, opt);
    ASSERT_EQ(rep.times.size(), 2u);
    EXPECT_EQ(rep.skipped_instants, 1u);
    EXPECT_NEAR(rep.sync_per_node[2].mean, 1e-6 * (1.01 + 2.0) / 2, 1e-15);
    EXPECT_NEAR(rep.sync_aggregate.mean, rep.sync_per_node[2].mean / 3.0, 1e-15);
    EXPECT_LT(rep.localization_aggregate.mean, 1e-12);
    for (const auto& series : rep.sync) EXPECT_EQ(series.size(), rep.times.size());
}

TEST(Evaluate, MatchesRecomputationFromRawTrace) {
    ScenarioConfig cfg = make_preset("static8-type1");
    cfg.duration = 20.0;
    const auto log = attack(simulate(cfg), cfg);
    const EstimatorRun run = run_ekf(cfg, log.measurements(), true);
    const ErrorReport rep = evaluate(run.trace.records, log.truth(), eval_options(cfg));
    // Independent recomputation: index truth by step, align each instant, average per node.
    std::vector<double> per_node(cfg.nodes.size(), 0.0);
    std::size_t count = 0;
    for (const auto& r : run.trace.records) {
        if (r.time < cfg.evaluation.warmup) continue;
        const NetworkState& tr = *log.records[r.step].truth;
        std::vector<Vec3> e, t;
        for (NodeId k = 0; k < tr.size(); ++k) {
            e.push_back(r.estimate[k].position);
            t.push_back(tr[k].position);
        }
        const auto a = procrustes_align(e, t);
        for (NodeId k = 0; k < tr.size(); ++k) per_node[k] += (a.transform.apply(e[k]) - t[k]).norm();
        ++count;
    }
    double mean = 0.0;
    for (double& v : per_node) mean += v / static_cast<double>(count);
    mean /= static_cast<double>(per_node.size());
    EXPECT_EQ(rep.times.size(), count);
    EXPECT_NEAR(rep.localization_aggregate.mean, mean, 1e-12);
}

TEST(Stats, SampleStd) {
    const SeriesStats s = stats_of({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_EQ(stats_of({}).count, 0u);
}
