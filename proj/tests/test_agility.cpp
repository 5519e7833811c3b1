#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "viosched/agility.hpp"

using namespace viosched;

namespace {

ImuSample sample_at(Nanos ts, double omega_mag, double accel_above_gravity,
                    double gravity = 9.81) {
  ImuSample s;
  s.timestamp = ts;
  s.angular_velocity = {0.0, 0.0, omega_mag};
  s.linear_acceleration = {0.0, 0.0, gravity + accel_above_gravity};
  return s;
}

// Independent oracle: mean of the last min(n, l) norms computed directly
// from the raw sample list.
std::pair<double, double> brute_force_means(const std::vector<ImuSample>& all,
                                            std::size_t l, bool compensate,
                                            double gravity) {
  std::size_t take = std::min(all.size(), l);
  double ws = 0.0, as = 0.0;
  for (std::size_t i = all.size() - take; i < all.size(); ++i) {
    ws += norm3(all[i].angular_velocity);
    double am = norm3(all[i].linear_acceleration);
    if (compensate) am = std::max(0.0, am - gravity);
    as += am;
  }
  return {ws / take, as / take};
}

AgilityConfig config_with(int l_alpha, double omega_T = 0.3, double accel_T = 0.5) {
  AgilityConfig cfg;
  cfg.l_alpha = l_alpha;
  cfg.omega_threshold_init = omega_T;
  cfg.accel_threshold_init = accel_T;
  return cfg;
}

// Warm estimator whose averages sit exactly at (omega, accel).
AgilityEstimator warm_estimator(const AgilityConfig& cfg, double omega, double accel) {
  AgilityEstimator est(cfg);
  for (int i = 0; i < cfg.l_alpha; ++i)
    est.push(sample_at((i + 1) * 5'000'000, omega, accel, cfg.gravity));
  return est;
}

}  // namespace

TEST(Agility, ConstantWindowMeansEqualTheConstant) {
  auto est = warm_estimator(config_with(40), 0.2, 0.1);
  auto s = est.snapshot();
  EXPECT_NEAR(s.omega_avg, 0.2, 1e-12);
  EXPECT_NEAR(s.accel_avg, 0.1, 1e-12);
}

TEST(Agility, SingleZeroMotionSample) {
  AgilityConfig cfg = config_with(40);
  cfg.gravity_compensation = false;
  AgilityEstimator raw(cfg);
  raw.push(sample_at(1, 0.0, 0.0));
  auto s = raw.snapshot();
  EXPECT_DOUBLE_EQ(s.omega_avg, 0.0);
  EXPECT_DOUBLE_EQ(s.accel_avg, 9.81);  // gravity-inclusive norm

  cfg.gravity_compensation = true;
  AgilityEstimator compensated(cfg);
  compensated.push(sample_at(1, 0.0, 0.0));
  EXPECT_DOUBLE_EQ(compensated.snapshot().accel_avg, 0.0);
}

TEST(Agility, OracleEquivalenceRandomStream) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> mag(0.0, 3.0);
  AgilityConfig cfg = config_with(50);
  AgilityEstimator est(cfg);
  std::vector<ImuSample> all;
  for (int i = 0; i < 200; ++i) {
    ImuSample s;
    s.timestamp = (i + 1) * 5'000'000;
    s.angular_velocity = {mag(rng), mag(rng), mag(rng)};
    s.linear_acceleration = {mag(rng), mag(rng), 9.0 + mag(rng)};
    all.push_back(s);
    est.push(s);
    auto [wo, ao] = brute_force_means(all, 50, cfg.gravity_compensation, cfg.gravity);
    auto snap = est.snapshot();
    ASSERT_NEAR(snap.omega_avg, wo, 1e-9 * std::max(1.0, std::abs(wo)));
    ASSERT_NEAR(snap.accel_avg, ao, 1e-9 * std::max(1.0, std::abs(ao)));
  }
}

TEST(Agility, LowAgilityConjunction) {
  // Averages (0.1, 0.3) vs thresholds (0.3, 0.5): both strictly below.
  auto both_low = warm_estimator(config_with(40, 0.3, 0.5), 0.1, 0.3);
  EXPECT_TRUE(both_low.is_low_agility());

  // (0.1, 0.6): accel side fails the conjunction.
  auto accel_high = warm_estimator(config_with(40, 0.3, 0.5), 0.1, 0.6);
  EXPECT_FALSE(accel_high.is_low_agility());
}

TEST(Agility, ExactThresholdIsNotLow) {
  // Exactly representable magnitudes so the means equal the thresholds.
  auto est = warm_estimator(config_with(32, 0.25, 0.5), 0.25, 0.5);
  auto s = est.snapshot();
  ASSERT_DOUBLE_EQ(s.omega_avg, 0.25);
  ASSERT_DOUBLE_EQ(s.accel_avg, 0.5);
  EXPECT_FALSE(est.is_low_agility());  // strict inequality
}

TEST(Agility, ColdWindowRefusesGating) {
  AgilityConfig cfg = config_with(40);
  AgilityEstimator est(cfg);
  for (int i = 0; i < 19; ++i)  // below l_alpha / 2
    est.push(sample_at((i + 1) * 5'000'000, 0.0, 0.0));
  EXPECT_THROW(est.is_low_agility(), InsufficientWindowError);
  EXPECT_FALSE(est.low_agility_if_warm().has_value());
  est.push(sample_at(20 * 5'000'000, 0.0, 0.0));
  EXPECT_TRUE(est.low_agility_if_warm().has_value());
}

TEST(Agility, ThresholdAdjustmentStepAndClamp) {
  AgilityConfig cfg = config_with(4, 0.30, 0.50);
  AgilityEstimator est(cfg);
  est.adjust_thresholds(ThresholdDirection::Raise);
  auto s = est.snapshot();
  EXPECT_NEAR(s.omega_threshold, 0.315, 1e-12);
  EXPECT_NEAR(s.accel_threshold, 0.525, 1e-12);

  // Lower at the floor: clamped, unchanged.
  AgilityConfig floor_cfg = config_with(4, 0.05, 0.1);
  AgilityEstimator floor_est(floor_cfg);
  floor_est.adjust_thresholds(ThresholdDirection::Lower);
  auto f = floor_est.snapshot();
  EXPECT_DOUBLE_EQ(f.omega_threshold, floor_cfg.omega_threshold_min);
  EXPECT_DOUBLE_EQ(f.accel_threshold, floor_cfg.accel_threshold_min);
}

TEST(Agility, RepeatedRaisesStayWithinClamp) {
  AgilityConfig cfg = config_with(4, 0.05, 0.1);
  AgilityEstimator est(cfg);
  for (int i = 0; i < 20; ++i) est.adjust_thresholds(ThresholdDirection::Raise);
  auto s = est.snapshot();
  EXPECT_LE(s.omega_threshold, cfg.omega_threshold_max);
  EXPECT_LE(s.accel_threshold, cfg.accel_threshold_max);
}

TEST(Agility, ThresholdsBoundedUnderRandomAdjustments) {
  AgilityConfig cfg = config_with(4);
  AgilityEstimator est(cfg);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    est.adjust_thresholds(rng() % 2 ? ThresholdDirection::Raise
                                    : ThresholdDirection::Lower);
    auto s = est.snapshot();
    ASSERT_GE(s.omega_threshold, cfg.omega_threshold_min);
    ASSERT_LE(s.omega_threshold, cfg.omega_threshold_max);
    ASSERT_GE(s.accel_threshold, cfg.accel_threshold_min);
    ASSERT_LE(s.accel_threshold, cfg.accel_threshold_max);
    ASSERT_GT(s.omega_threshold, 0.0);
    ASSERT_GT(s.accel_threshold, 0.0);
  }
}

TEST(Agility, RaisingThresholdsNeverFlipsLowToHigh) {
  auto est = warm_estimator(config_with(40), 0.1, 0.2);
  ASSERT_TRUE(est.is_low_agility());
  for (int i = 0; i < 10; ++i) {
    est.adjust_thresholds(ThresholdDirection::Raise);
    ASSERT_TRUE(est.is_low_agility());
  }
}

TEST(Agility, RejectsNonMonotonicTimestamps) {
  AgilityEstimator est(config_with(10));
  est.push(sample_at(100, 0.1, 0.1));
  EXPECT_THROW(est.push(sample_at(100, 0.1, 0.1)), NonMonotonicTimestampError);
  EXPECT_THROW(est.push(sample_at(50, 0.1, 0.1)), NonMonotonicTimestampError);
  est.push(sample_at(101, 0.1, 0.1));
  EXPECT_EQ(est.window_size(), 2u);
}

TEST(Agility, WindowEvictsOldest) {
  AgilityConfig cfg = config_with(3);
  cfg.gravity_compensation = false;
  AgilityEstimator est(cfg);
  // Window [1, 2, 3] then [2, 3, 4] after the fourth push.
  for (int i = 1; i <= 4; ++i)
    est.push(sample_at(i, static_cast<double>(i), 0.0, 0.0));
  EXPECT_NEAR(est.snapshot().omega_avg, 3.0, 1e-12);
  EXPECT_EQ(est.window_size(), 3u);
}

TEST(Agility, DeterministicAcrossIdenticalStreams) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mag(0.0, 2.0);
  std::vector<ImuSample> stream;
  for (int i = 0; i < 300; ++i) {
    ImuSample s;
    s.timestamp = (i + 1) * 1000;
    s.angular_velocity = {mag(rng), mag(rng), mag(rng)};
    s.linear_acceleration = {mag(rng), mag(rng), 9.81 + mag(rng)};
    stream.push_back(s);
  }
  AgilityEstimator a(config_with(40)), b(config_with(40));
  for (const auto& s : stream) {
    a.push(s);
    b.push(s);
  }
  auto sa = a.snapshot(), sb = b.snapshot();
  EXPECT_EQ(sa.omega_avg, sb.omega_avg);  // bit-identical
  EXPECT_EQ(sa.accel_avg, sb.accel_avg);
}
