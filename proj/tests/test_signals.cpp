#include "rpb/signals.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace rpb;

namespace {

Signal geometric(Index horizon) {
  Signal s(1, horizon);
  for (Index t = 0; t <= horizon; ++t) s.at(t)(0) = std::pow(2.0, -static_cast<double>(t));
  return s;
}

class Squaring : public StepOperator {
 public:
  Index input_dim() const override { return 2; }
  Index output_dim() const override { return 2; }
  void reset() override {}
  Vec step(const Vec& in) override { return in.cwiseAbs2(); }
};

// Emits the next input: reads the whole sequence, so it cannot be written as a step map.
class Lookahead : public SequenceOperator {
 public:
  Index input_dim() const override { return 1; }
  Index output_dim() const override { return 1; }
  void reset() override {}
  Signal apply(const Signal& in) override {
    Signal out(1, in.horizon());
    for (Index t = 0; t < in.horizon(); ++t) out.at(t) = in.at(t + 1);
    return out;
  }
};

class RunningSum : public StepOperator {
 public:
  Index input_dim() const override { return 1; }
  Index output_dim() const override { return 1; }
  void reset() override { acc_ = 0.0; }
  Vec step(const Vec& in) override {
    acc_ += in(0);
    return Vec::Constant(1, acc_);
  }

 private:
  double acc_ = 0.0;
};

}  // namespace

TEST(LpNorm, ZeroSignal) { EXPECT_EQ(lp_norm(Signal(3, 10)), 0.0); }

TEST(LpNorm, SingleStepPythagorean) {
  Signal s(2, 0);
  s.at(0) << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(lp_norm(s), 5.0);
}

TEST(LpNorm, GeometricSequenceMatchesDirectSum) {
  double sum = 0.0;
  for (int t = 0; t <= 20; ++t) sum += std::pow(4.0, -t);
  const double oracle = std::sqrt(sum);
  EXPECT_NEAR(lp_norm(geometric(20)), oracle, 1e-14);
  EXPECT_NEAR(lp_norm(geometric(20)), 1.154700, 1e-6);
}

TEST(LpNorm, InfinityNormIsSupOfMaxEntry) {
  Signal s(2, 2);
  s.values() << 1, -7, 2, 0.5, 3, -1;
  EXPECT_EQ(lp_norm(s, kInfNorm), 7.0);
}

TEST(LpNorm, OneNormSumsAbsoluteEntries) {
  Signal s(2, 1);
  s.values() << 1, -2, 3, 4;
  EXPECT_DOUBLE_EQ(lp_norm(s, 1.0), 10.0);
}

TEST(LpNorm, RejectsNonFinite) {
  Signal s(1, 2);
  s.at(1)(0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(lp_norm(s), InvalidSignal);
}

TEST(LpNorm, AbsolutelyHomogeneous) {
  std::mt19937_64 rng(1);
  for (double p : {1.0, 2.0, 3.0, kInfNorm}) {
    const Signal s = gaussian_signal(3, 30, 1.0, rng);
    for (double c : {-3.5, 0.25, 7.0}) {
      const double lhs = lp_norm(s * c, p);
      const double rhs = std::abs(c) * lp_norm(s, p);
      EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);
    }
  }
}

TEST(LpNorm, TriangleInequality) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const Signal a = gaussian_signal(4, 25, 1.0, rng);
    const Signal b = gaussian_signal(4, 25, 2.0, rng);
    for (double p : {1.0, 2.0, 4.0, kInfNorm}) {
      EXPECT_LE(lp_norm(a + b, p), lp_norm(a, p) + lp_norm(b, p) + 1e-12);
    }
  }
}

TEST(TailEnergy, ZeroSignal) { EXPECT_EQ(tail_energy(Signal(2, 9), 4), 0.0); }

TEST(TailEnergy, ZeroSuffix) {
  Signal s(1, 3);
  s.values() << 1, 1, 0, 0;
  EXPECT_EQ(tail_energy(s, 2), 0.0);
}

TEST(TailEnergy, GeometricSuffixMatchesDirectSum) {
  double sum = 0.0;
  for (int t = 10; t <= 20; ++t) sum += std::pow(4.0, -t);
  EXPECT_NEAR(tail_energy(geometric(20), 10), std::sqrt(sum), 1e-18);
  EXPECT_NEAR(tail_energy(geometric(20), 10), 1.1276e-3, 1e-7);
}

TEST(TailEnergy, OutOfRange) {
  EXPECT_THROW(tail_energy(Signal(1, 5), 6), std::out_of_range);
  EXPECT_THROW(tail_energy(Signal(1, 5), -1), std::out_of_range);
}

TEST(SignalOps, DimensionMismatchThrows) {
  EXPECT_THROW(Signal(2, 3) + Signal(3, 3), DimensionMismatch);
  EXPECT_THROW(Signal(2, 3) - Signal(2, 4), DimensionMismatch);
}

TEST(SignalOps, SliceCopiesInclusiveRange) {
  std::mt19937_64 rng(3);
  const Signal s = gaussian_signal(2, 10, 1.0, rng);
  const Signal sl = s.slice(3, 5);
  EXPECT_EQ(sl.horizon(), 2);
  EXPECT_EQ(sl.at(0), s.at(3));
  EXPECT_EQ(sl.at(2), s.at(5));
}

TEST(Csv, RoundTripKeepsValuesAndNames) {
  std::mt19937_64 rng(4);
  const Signal s = gaussian_signal(3, 7, 1.0, rng);
  std::stringstream ss;
  write_csv(ss, s, {"a", "b", "c"});
  std::vector<std::string> names;
  const Signal back = read_csv(ss, &names);
  ASSERT_EQ(names, (std::vector<std::string>{"a", "b", "c"}));
  ASSERT_EQ(back.dim(), 3);
  ASSERT_EQ(back.horizon(), 7);
  EXPECT_EQ(back.values(), s.values());
}

TEST(Csv, DefaultHeader) {
  std::stringstream ss;
  write_csv(ss, Signal(2, 1));
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "t,c0,c1");
}

TEST(Causality, MemorylessSquaringIsCausal) {
  Squaring op;
  EXPECT_TRUE(check_causality(op, 20, 5));
}

TEST(Causality, LookaheadIsNotCausal) {
  Lookahead op;
  EXPECT_FALSE(check_causality(op, 20, 5));
}

TEST(Causality, StatefulOperatorIsCausalAndResets) {
  RunningSum op;
  EXPECT_TRUE(check_causality(op, 20, 6));
  Signal in(1, 3);
  in.values() << 1, 2, 3, 4;
  const Signal a = op.apply(in);
  const Signal b = op.apply(in);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a.at(3)(0), 10.0);
}
