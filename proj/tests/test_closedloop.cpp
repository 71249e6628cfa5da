#include "rpb/closedloop.hpp"

#include <gtest/gtest.h>

using namespace rpb;

namespace {

struct Fixture {
  PlantLayout pl;
  Layout layout = make_layout("corridor");
  Plant plant{pl, RobotParams::defaults(pl)};
  BoostConfig config;

  struct Sample {
    Signal w, x_ref;
  };

  Sample draw(std::mt19937_64& rng, Index T, double noise = 0.0) const {
    DisturbanceSpec spec;
    spec.noise_std = noise;
    spec.noise_until = noise > 0.0 ? T / 5 : 0;
    return {sample_disturbance(pl, layout.start, spec, T, rng),
            reference_signal(pl, sample_reference(layout, rng), T)};
  }
};

RolloutResult base_rollout(const Plant& plant, const Signal& w, const Signal& x_ref) {
  ZeroPolicy zero(plant.layout().input_dim());
  return rollout_policy(plant, plant, zero, w, x_ref);
}

}  // namespace

TEST(Rollout, ZeroOperatorReproducesBaseLoop) {
  Fixture f;
  std::mt19937_64 rng(1);
  const auto s = f.draw(rng, 100, 0.05);
  const RolloutResult r = rollout(f.plant, f.plant, BoostOperator(f.config), s.w, s.x_ref);
  const RolloutResult base = base_rollout(f.plant, s.w, s.x_ref);
  EXPECT_EQ(r.eta.values(), base.eta.values());
  EXPECT_EQ(r.u.values(), Mat::Zero(4, 101));
}

TEST(Rollout, ExactModelRecoversDisturbance) {
  Fixture f;
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) {
    const auto s = f.draw(rng, 200, 0.05);
    const BoostOperator m = BoostOperator::random(f.config, 0.1, rng);
    const RolloutResult r = rollout(f.plant, f.plant, m, s.w, s.x_ref);
    EXPECT_LE((r.w_hat.values() - s.w.values()).cwiseAbs().maxCoeff(), 1e-10);
    for (Index t = 0; t <= 200; t += 37) {
      EXPECT_LE((reconstruct_disturbance(f.plant, r.eta, r.u, s.x_ref, t) - s.w.at(t)).cwiseAbs().maxCoeff(),
                1e-10);
    }
  }
}

TEST(Rollout, MismatchAppearsInReconstruction) {
  Fixture f;
  MismatchSpec ms;
  ms.kind = MismatchKind::kBoundedOperator;
  ms.gain = 0.2;
  const Plant truth = apply_mismatch(ms, f.plant);
  std::mt19937_64 rng(3);
  const auto s = f.draw(rng, 50);
  const BoostOperator m = BoostOperator::random(f.config, 0.1, rng);
  const RolloutResult r = rollout(truth, f.plant, m, s.w, s.x_ref);
  for (Index t = 1; t <= 50; ++t) {
    const Vec expected = s.w.at(t) + (Vec(12) << truth.mismatch_term(r.eta.at(t - 1), r.u.at(t - 1), s.x_ref.at(t - 1)),
                                      Vec::Zero(4)).finished();
    EXPECT_LE((r.w_hat.at(t) - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Rollout, OpenLoopEquivalence) {
  Fixture f;
  std::mt19937_64 rng(4);
  for (int k = 0; k < 10; ++k) {
    const auto s = f.draw(rng, 150, 0.05);
    const BoostOperator m = BoostOperator::random(f.config, 0.1, rng);
    const RolloutResult r = rollout(f.plant, f.plant, m, s.w, s.x_ref);
    const Signal u_open = m.apply(s.w, s.x_ref);
    EXPECT_LE((r.u.values() - u_open.values()).cwiseAbs().maxCoeff(), 1e-10);
    Vec eta = s.w.at(0);
    double err = 0.0;
    for (Index t = 1; t <= 150; ++t) {
      eta = f.plant.transition(eta, u_open.at(t - 1), s.x_ref.at(t - 1)) + s.w.at(t);
      err = std::max(err, (eta - r.eta.at(t)).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(err, 1e-10);
  }
}

TEST(Rollout, TrackingPreserved) {
  Fixture f;
  f.config.reference_relative_input = true;
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    const Index T = 600;
    const auto s = f.draw(rng, T, 0.05);
    const BoostOperator m = BoostOperator::random(f.config, 0.5, rng);
    const RolloutResult r = rollout(f.plant, f.plant, m, s.w, s.x_ref);
    EXPECT_LT(tail_energy(r.e, 4 * T / 5), 1e-2 * lp_norm(r.e));
    EXPECT_LT(tail_energy(r.u, 4 * T / 5), 1e-2 * std::max(lp_norm(r.u), 1e-12) + 1e-12);
  }
}

TEST(Rollout, LossTraceMatchesTrajectoryLoss) {
  Fixture f;
  const Loss loss(LossSpec{}, f.layout.field, f.pl);
  std::mt19937_64 rng(6);
  const auto s = f.draw(rng, 80);
  const BoostOperator m = BoostOperator::random(f.config, 0.1, rng);
  const RolloutResult r = rollout(f.plant, f.plant, m, s.w, s.x_ref, &loss);
  EXPECT_NEAR(r.total_loss(), evaluate_loss(r, loss, s.x_ref), 1e-9 * r.total_loss());
}

TEST(Rollout, RejectsMalformedInitialDisturbance) {
  Fixture f;
  std::mt19937_64 rng(7);
  auto s = f.draw(rng, 10);
  s.w.at(0)(10) = 1.0;
  EXPECT_THROW(rollout(f.plant, f.plant, BoostOperator(f.config), s.w, s.x_ref), InvalidSignal);
  const Signal short_ref(8, 5);
  EXPECT_THROW(rollout(f.plant, f.plant, BoostOperator(f.config), f.draw(rng, 10).w, short_ref),
               DimensionMismatch);
}

TEST(Completeness, ReferencePoliciesAreReproduced) {
  Fixture f;
  std::mt19937_64 rng(8);
  const std::vector<PolicyFactory> factories = {
      [&] { return std::make_unique<ZeroPolicy>(4); },
      [&] { return std::make_unique<StaticFeedbackPolicy>(f.pl, 0.3); },
      [&] { return std::make_unique<DelayedImpulsePolicy>(f.pl, 10, 0.5); },
  };
  for (const auto& factory : factories) {
    for (int k = 0; k < 3; ++k) {
      const auto s = f.draw(rng, 150, 0.05);
      const CompletenessReport rep = completeness_check(f.plant, factory, s.w, s.x_ref, 1e-9);
      EXPECT_TRUE(rep.reproduced) << "first mismatch at " << rep.first_mismatch;
      EXPECT_LE(rep.max_state_error, 1e-9);
      EXPECT_LE(rep.max_input_error, 1e-9);
    }
  }
}

TEST(Completeness, DelayedImpulseFiresOnce) {
  Fixture f;
  DelayedImpulsePolicy c(f.pl, 3, 2.0);
  const Vec x_ref = Vec::Zero(8);
  Vec eta = Vec::Zero(12);
  eta(0) = 1.0;
  c.reset();
  for (int t = 0; t < 6; ++t) {
    const Vec u = c.act(eta, x_ref);
    if (t == 3) {
      EXPECT_EQ(u(0), -2.0);
    } else {
      EXPECT_EQ(u, Vec::Zero(4));
    }
  }
}

TEST(ReferenceGovernor, OffsetShiftsEquilibriumTarget) {
  Fixture f;
  // A constant offset delta makes the base loop settle at p_bar + delta.
  struct ConstantOffset : Policy {
    Vec d;
    void reset() override {}
    Vec act(const Vec&, const Vec&) override { return d; }
  } c;
  c.d = (Vec(4) << 0.3, -0.2, 0.1, 0.4).finished();
  std::mt19937_64 rng(9);
  const auto s = f.draw(rng, 600);
  const RolloutResult r = rollout_policy(f.plant, f.plant, c, s.w, s.x_ref);
  for (Index i = 0; i < 2; ++i) {
    const Vec p = r.eta.at(600).segment(f.pl.position_index(i), 2);
    const Vec target = s.x_ref.at(600).segment(f.pl.position_index(i), 2) + c.d.segment(2 * i, 2);
    EXPECT_LT((p - target).norm(), 1e-3);
  }
}
