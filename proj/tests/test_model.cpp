#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace secest;
using namespace secest::testing;

TEST(Pack, SingleZeroNode) {
    NetworkState s = network({NodeState{}});
    const Eigen::VectorXd x = pack(s);
    ASSERT_EQ(x.size(), 7);
    EXPECT_TRUE(x.isZero(0.0));
}

TEST(Pack, SecondNodePositionAtSevenToNine) {
    NetworkState s = network({NodeState{}, node_at(1, 2, 3)});
    const Eigen::VectorXd x = pack(s);
    EXPECT_EQ(x[7], 1.0);
    EXPECT_EQ(x[8], 2.0);
    EXPECT_EQ(x[9], 3.0);
    EXPECT_EQ(index_of(1, Field::Px), 7u);
    EXPECT_EQ(index_of(1, Field::AttackDistance), 13u);
}

TEST(Pack, RoundTripIsExact) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        NetworkState s = random_state(rng, 1 + trial % 9);
        EXPECT_EQ(unpack(pack(s), s.master), s);
    }
}

TEST(Pack, IndexOfInvertsFieldAt) {
    StateLayout full(4, true), base(4, false);
    EXPECT_EQ(full.dim(), 28u);
    EXPECT_EQ(base.dim(), 20u);
    for (std::size_t i = 0; i < full.dim(); ++i) {
        auto [k, f] = full.field_at(i);
        EXPECT_EQ(full.index_of(k, f), i);
    }
    for (std::size_t i = 0; i < base.dim(); ++i) {
        auto [k, f] = base.field_at(i);
        EXPECT_EQ(base.index_of(k, f), i);
    }
    EXPECT_THROW(base.index_of(0, Field::AttackOffset), std::out_of_range);
}

TEST(Pack, BaselineDropsAttackStates) {
    Rng rng(5);
    NetworkState s = random_state(rng, 3);
    StateLayout base(3, false);
    NetworkState back = base.unpack(base.pack(s));
    for (NodeId k = 0; k < 3; ++k) {
        EXPECT_EQ(back[k].position, s[k].position);
        EXPECT_EQ(back[k].bias, s[k].bias);
        EXPECT_EQ(back[k].attack_distance, 0.0);
    }
}

TEST(StateValidation, RejectsNonFiniteAndLargeBias) {
    NetworkState s = network({NodeState{}, node_at(1, 0, 0)});
    EXPECT_NO_THROW(validate(s));
    s[1].bias = 2e-4;
    EXPECT_THROW(validate(s), InvalidState);
    s[1].bias = 0.0;
    s[1].offset = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(validate(s), InvalidState);
    s[1].offset = 0.0;
    s[0].offset = 1e-6;
    EXPECT_THROW(validate(s), InvalidState);
}

TEST(MeasureFn, CounterDiffExample) {
    NodeState k, j;
    j.offset = 5e-6;
    k.offset = 2e-6;
    k.attack_offset = 1e-6;
    EXPECT_NEAR(measure_fn(MeasurementKind::CounterDiff, k, j, false), 4e-6, 1e-18);
}

TEST(MeasureFn, DoubleSidedExample) {
    NodeState k = node_at(0, 0, 0), j = node_at(3, 4, 0);
    EXPECT_DOUBLE_EQ(measure_fn(MeasurementKind::DoubleSidedTWR, k, j), 5.0);
}

TEST(MeasureFn, SingleSidedExample) {
    NodeState k = node_at(0, 0, 0), j = node_at(3, 4, 0);
    k.bias = 1e-6;
    k.attack_distance = 0.5;
    EXPECT_NEAR(measure_fn(MeasurementKind::SingleSidedTWR, k, j), 5.500005, 1e-12);
}

TEST(MeasureFn, PropagationTerm) {
    NodeState k = node_at(0, 0, 0), j = node_at(kSpeedOfLight * 1e-6, 0, 0);
    EXPECT_NEAR(measure_fn(MeasurementKind::CounterDiff, k, j, true), 1e-6, 1e-15);
    EXPECT_EQ(measure_fn(MeasurementKind::CounterDiff, k, j, false), 0.0);
}

TEST(MeasureFn, CoincidentRangeIsDegenerate) {
    NodeState k = node_at(1, 1, 1), j = node_at(1, 1, 1);
    EXPECT_THROW(measure_fn(MeasurementKind::SingleSidedTWR, k, j), DegenerateGeometry);
    EXPECT_THROW(measure_jacobian(MeasurementKind::DoubleSidedTWR, k, j), DegenerateGeometry);
    EXPECT_NO_THROW(measure_fn(MeasurementKind::CounterDiff, k, j));
}

TEST(MeasureFn, TranslationAndRotationInvariance) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        NetworkState s = random_state(rng, 2);
        const Vec3 shift(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Matrix3d R =
            Eigen::AngleAxisd(rng.uniform(0, 6.28), Vec3(rng.normal(), rng.normal(), rng.normal()).normalized())
                .toRotationMatrix();
        NetworkState moved = s, rotated = s;
        for (NodeId k = 0; k < 2; ++k) {
            moved[k].position += shift;
            rotated[k].position = R * s[k].position;
        }
        for (MeasurementKind kind : {MeasurementKind::SingleSidedTWR, MeasurementKind::DoubleSidedTWR}) {
            const double v = measure_fn(kind, s[0], s[1]);
            EXPECT_NEAR(measure_fn(kind, moved[0], moved[1]), v, 1e-12);
            EXPECT_NEAR(measure_fn(kind, rotated[0], rotated[1]), v, 1e-12);
        }
        NetworkState scrambled = s;
        scrambled[1].position = Vec3(rng.normal(), rng.normal(), rng.normal());
        EXPECT_EQ(measure_fn(MeasurementKind::CounterDiff, scrambled[0], scrambled[1], false),
                  measure_fn(MeasurementKind::CounterDiff, s[0], s[1], false));
    }
}

TEST(Jacobian, CounterDiffExample) {
    NodeState k = node_at(0, 0, 0), j = node_at(3, 4, 0);
    const auto J = measure_jacobian(MeasurementKind::CounterDiff, k, j, false);
    EXPECT_EQ(J.responder[3], 1.0);
    EXPECT_EQ(J.initiator[3], -1.0);
    EXPECT_EQ(J.initiator[5], 1.0);
    EXPECT_TRUE(J.initiator.head<3>().isZero(0.0));
    EXPECT_TRUE(J.responder.head<3>().isZero(0.0));
}

TEST(Jacobian, RangeExample) {
    NodeState k = node_at(0, 0, 0), j = node_at(3, 4, 0);
    const auto J = measure_jacobian(MeasurementKind::DoubleSidedTWR, k, j);
    EXPECT_DOUBLE_EQ(J.responder[0], 3.0 / 5.0);
    EXPECT_DOUBLE_EQ(J.responder[1], 4.0 / 5.0);
    EXPECT_DOUBLE_EQ(J.initiator[0], -3.0 / 5.0);
    EXPECT_DOUBLE_EQ(J.initiator[1], -4.0 / 5.0);
    EXPECT_DOUBLE_EQ(J.initiator[6], 1.0);
    EXPECT_DOUBLE_EQ(J.initiator[4], 5.0);
}

TEST(Jacobian, RangeAntiSymmetry) {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        NetworkState s = random_state(rng, 2);
        const auto J = measure_jacobian(MeasurementKind::SingleSidedTWR, s[0], s[1]);
        EXPECT_TRUE(J.initiator.head<3>().isApprox(-J.responder.head<3>(), 1e-15));
    }
}

TEST(Topology, SymmetricAndConnected) {
    EXPECT_EQ(Topology::full(8).num_directed_links(), 56u);
    EXPECT_THROW(Topology::from_edges(4, {{0, 1}, {2, 3}}), ConfigError);
    EXPECT_THROW(Topology(std::vector<std::vector<NodeId>>{{1}, {}}), ConfigError);
    EXPECT_NO_THROW(Topology::from_edges(3, {{0, 1}, {1, 2}}));
}

TEST(MeasurementValidation, Rejects) {
    EXPECT_THROW(validate(meas(1, 1, MeasurementKind::CounterDiff, 0), 3), InvalidState);
    EXPECT_THROW(validate(meas(0, 3, MeasurementKind::CounterDiff, 0), 3), InvalidState);
    EXPECT_THROW(kind_from_tag("x"), ConfigError);
    EXPECT_EQ(kind_from_tag("R"), MeasurementKind::DoubleSidedTWR);
}

TEST(Jacobian, MatchesFiniteDifferences) { EXPECT_LE(jacobian_fd_max_rel_error(11, 25), 1e-6); }
