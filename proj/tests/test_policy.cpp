#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "viosched/policy.hpp"
#include "viosched/profiles.hpp"

using namespace viosched;

namespace {

constexpr Nanos kPeriodNs = 1'000'000'000;  // 1 Hz sampler

PolicyConfig quick_config() {
  PolicyConfig cfg;
  cfg.init_frames = 0;  // unit tests drive the gate directly
  return cfg;
}

MethodProfile smsckf_profile(int phi_nominal = 100, int lambda_nominal = 4) {
  MethodProfile p = method_profile(Method::SMsckf);
  p.bounds.phi_min = 40;
  p.bounds.phi_nominal = phi_nominal;
  p.bounds.lambda_min = 1;
  p.bounds.lambda_nominal = lambda_nominal;
  p.bounds.step_phi = 10;
  p.bounds.step_lambda = 1;
  return p;
}

ParamSet nominal_params(const MethodProfile& p) {
  ParamSet params;
  params.phi = p.bounds.phi_nominal;
  params.lambda = p.bounds.lambda_nominal;
  return params;
}

AgilityConfig agility_config() {
  AgilityConfig cfg;
  cfg.l_alpha = 4;
  return cfg;
}

void make_warm(AgilityEstimator& est, double omega, double accel, Nanos& ts) {
  for (int i = 0; i < est.config().l_alpha; ++i) {
    ImuSample s;
    s.timestamp = ++ts;
    s.angular_velocity = {0.0, 0.0, omega};
    s.linear_acceleration = {0.0, 0.0, est.config().gravity + accel};
    est.push(s);
  }
}

UsageSample usage(double chi, Nanos ts = 0) { return UsageSample{ts, -1, chi}; }

// Runs n frames through the policy at fixed chi; returns decisions.
std::vector<Decision> run_frames(AdaptationPolicy& policy, AgilityEstimator& est,
                                 double chi, int n, Nanos start = 0) {
  std::vector<Decision> out;
  for (int i = 0; i < n; ++i) {
    Nanos t = start + static_cast<Nanos>(i) * 50'000'000;
    out.push_back(policy.on_frame(est, usage(chi, t), t));
  }
  return out;
}

}  // namespace

TEST(ComputeDelta, Arithmetic) {
  PolicyConfig cfg;
  cfg.chi_T = 60.0;
  EXPECT_DOUBLE_EQ(AdaptationPolicy::compute_delta(80.0, cfg), 20.0);
  EXPECT_DOUBLE_EQ(AdaptationPolicy::compute_delta(60.0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(AdaptationPolicy::compute_delta(40.0, cfg), -20.0);
}

TEST(PolicyConfig, ValidationGuards) {
  PolicyConfig cfg;
  cfg.chi_T = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidSpecError);
  cfg = PolicyConfig{};
  cfg.delta_1 = 30.0;  // above delta_0
  EXPECT_THROW(cfg.validate(), InvalidSpecError);
  cfg = PolicyConfig{};
  cfg.c_low = 35;  // above c_high
  EXPECT_THROW(cfg.validate(), InvalidSpecError);
  cfg = PolicyConfig{};
  cfg.c_high = 50;  // above l_I
  EXPECT_THROW(cfg.validate(), InvalidSpecError);
  EXPECT_NO_THROW(PolicyConfig{}.validate());
}

TEST(UpdateLaws, IterationTierFollowsDelta) {
  PolicyConfig cfg;
  cfg.step_lambda = 2;
  MethodProfile profile = smsckf_profile(100, 10);
  profile.bounds.lambda_min = 4;
  ParamSet params = nominal_params(profile);
  params.lambda = 10;

  // Delta just above delta_1: one step down.
  EXPECT_TRUE(AdaptationPolicy::update_iterations(cfg.delta_1 + 1, params, profile, cfg));
  EXPECT_EQ(params.lambda, 8);

  // Dead band (0, delta_1]: hold.
  EXPECT_FALSE(AdaptationPolicy::update_iterations(cfg.delta_1, params, profile, cfg));
  EXPECT_EQ(params.lambda, 8);

  // Recovery at or below target.
  EXPECT_TRUE(AdaptationPolicy::update_iterations(0.0, params, profile, cfg));
  EXPECT_EQ(params.lambda, 10);
  EXPECT_FALSE(AdaptationPolicy::update_iterations(-5.0, params, profile, cfg));
  EXPECT_EQ(params.lambda, 10);  // clamped at nominal

  // Clamped at the floor.
  params.lambda = profile.bounds.lambda_min;
  EXPECT_FALSE(AdaptationPolicy::update_iterations(cfg.delta_1 + 1, params, profile, cfg));
  EXPECT_EQ(params.lambda, profile.bounds.lambda_min);
}

TEST(UpdateLaws, LambdaFrozenForVinsAndOkvis) {
  PolicyConfig cfg;
  for (Method m : {Method::VinsMono, Method::Okvis}) {
    MethodProfile profile = method_profile(m);
    ParamSet params;
    params.lambda = 4;
    params.phi = 100;
    for (double delta : {-30.0, 0.0, 15.0, 50.0}) {
      EXPECT_FALSE(AdaptationPolicy::update_iterations(delta, params, profile, cfg));
      EXPECT_EQ(params.lambda, 4);
    }
  }
}

TEST(UpdateLaws, FeatureTierFollowsDelta) {
  PolicyConfig cfg;
  MethodProfile profile = smsckf_profile(150, 4);
  ParamSet params = nominal_params(profile);
  params.phi = 150;

  EXPECT_TRUE(AdaptationPolicy::update_features(cfg.delta_2 + 1, params, profile, cfg));
  EXPECT_EQ(params.phi, 140);

  // OKVIS never moves phi.
  MethodProfile okvis = method_profile(Method::Okvis);
  ParamSet okvis_params;
  okvis_params.phi = 109;
  EXPECT_FALSE(AdaptationPolicy::update_features(50.0, okvis_params, okvis, cfg));
  EXPECT_EQ(okvis_params.phi, 109);

  // Recovery clamped at nominal.
  params.phi = profile.bounds.phi_nominal;
  EXPECT_FALSE(AdaptationPolicy::update_features(-5.0, params, profile, cfg));
  EXPECT_EQ(params.phi, profile.bounds.phi_nominal);
}

TEST(OnFrame, AgilityDropAfterHysteresisWindow) {
  PolicyConfig cfg = quick_config();
  MethodProfile profile = smsckf_profile();
  AgilityEstimator est(agility_config());
  Nanos ts = 0;
  make_warm(est, 0.05, 0.05, ts);  // calm
  AdaptationPolicy policy(cfg, profile, nominal_params(profile), kPeriodNs);

  // kappa_f must exceed kappa_0f before a drop is allowed.
  auto head = run_frames(policy, est, 50.0, cfg.kappa_0f + 1);
  for (const auto& d : head) EXPECT_EQ(d.action, Action::Process);

  Decision d = policy.on_frame(est, usage(50.0), 1'000'000'000);
  EXPECT_EQ(d.action, Action::Drop);
  EXPECT_EQ(d.reason, DecisionReason::Agility);
  EXPECT_EQ(d.kappa_f_after, 0);
  EXPECT_EQ(policy.gate().queue.back(), 0);
}

TEST(OnFrame, ResourceDropNeedsDeltaAboveTierZero) {
  PolicyConfig cfg = quick_config();
  MethodProfile profile = smsckf_profile();
  AgilityEstimator est(agility_config());
  Nanos ts = 0;
  make_warm(est, 1.5, 2.0, ts);  // agile: no agility drops
  AdaptationPolicy policy(cfg, profile, nominal_params(profile), kPeriodNs);

  run_frames(policy, est, cfg.chi_T, cfg.kappa_0f + 1);
  Decision d = policy.on_frame(est, usage(cfg.chi_T + cfg.delta_0 + 5.0), 0);
  EXPECT_EQ(d.action, Action::Drop);
  EXPECT_EQ(d.reason, DecisionReason::Resource);
  EXPECT_GT(d.delta, cfg.delta_0);
}

TEST(OnFrame, NoDropsDuringInitialization) {
  PolicyConfig cfg;
  cfg.init_frames = 50;
  MethodProfile profile = smsckf_profile();
  AgilityEstimator est(agility_config());
  Nanos ts = 0;
  make_warm(est, 0.01, 0.01, ts);  // calm enough to drop
  AdaptationPolicy policy(cfg, profile, nominal_params(profile), kPeriodNs);

  auto decisions = run_frames(policy, est, 99.0, 50);  // huge delta too
  for (const auto& d : decisions) EXPECT_EQ(d.action, Action::Process);
  // First frame past init is immediately drop-eligible (kappa_f is large).
  Decision d = policy.on_frame(est, usage(99.0), 0);
  EXPECT_EQ(d.action, Action::Drop);
}

TEST(OnFrame, KappaExactlyAtLimitForcesProcess) {
  PolicyConfig cfg = quick_config();
  MethodProfile profile = smsckf_profile();
  AgilityEstimator est(agility_config());
  Nanos ts = 0;
  make_warm(est, 0.01, 0.01, ts);
  AdaptationPolicy policy(cfg, profile, nominal_params(profile), kPeriodNs);

  run_frames(policy, est, 50.0, cfg.kappa_0f + 1);
  ASSERT_EQ(policy.on_frame(est, usage(50.0), 0).action, Action::Drop);

  // After the drop, exactly kappa_0f processed frames: still not enough.
  auto mid = run_frames(policy, est, 50.0, cfg.kappa_0f);
  for (const auto& d : mid) EXPECT_EQ(d.action, Action::Process);
  EXPECT_EQ(policy.gate().kappa_f, cfg.kappa_0f);
  Decision at_limit = policy.on_frame(est, usage(50.0), 0);
  EXPECT_EQ(at_limit.action, Action::Process);  // kappa_f == kappa_0f, not >
  Decision past_limit = policy.on_frame(est, usage(50.0), 0);
  EXPECT_EQ(past_limit.action, Action::Drop);
}

TEST(OnFrame, SteadyLowAgilityDropCadence) {
  // With always-low agility the gate settles into one drop per
  // kappa_0f + 2 frames: kappa_0f + 1 processed frames, then a drop.
  PolicyConfig cfg = quick_config();
  MethodProfile profile = smsckf_profile();
  AgilityEstimator est(agility_config());
  Nanos ts = 0;
  make_warm(est, 0.01, 0.01, ts);
  AdaptationPolicy policy(cfg, profile, nominal_params(profile), kPeriodNs);

  auto decisions = run_frames(policy, est, 50.0, 120);
  std::vector<int> drop_indices;
  for (int i = 0; i < static_cast<int>(decisions.size()); ++i)
    if (decisions[i].action == Action::Drop) drop_indices.push_back(i);
  ASSERT_GE(drop_indices.size(), 2u);
  for (std::size_t k = 1; k < drop_indices.size(); ++k)
    EXPECT_EQ(drop_indices[k] - drop_indices[k - 1], cfg.kappa_0f + 2);
}

TEST(OnFrame, ParameterChangeSpacing) {
  PolicyConfig cfg = quick_config();
  MethodProfile profile = smsckf_profile();
  AgilityEstimator est(agility_config());
  Nanos ts = 0;
  make_warm(est, 1.5, 2.0, ts);
  AdaptationPolicy policy(cfg, profile, nominal_params(profile), kPeriodNs);

  // Sustained pressure in the parameter band (no drops: delta < delta_0).
  auto decisions = run_frames(policy, est, cfg.chi_T + cfg.delta_1 + 2, 100);
  std::vector<int> change_indices;
  for (int i = 0; i < static_cast<int>(decisions.size()); ++i)
    if (decisions[i].params_changed) change_indices.push_back(i);
  ASSERT_GE(change_indices.size(), 2u);
  for (std::size_t k = 1; k < change_indices.size(); ++k)
    EXPECT_GT(change_indices[k] - change_indices[k - 1], cfg.kappa_0p);
}

TEST(OnFrame, StaleUsageFlaggedButDecided) {
  PolicyConfig cfg = quick_config();
  MethodProfile profile = smsckf_profile();
  AgilityEstimator est(agility_config());
  Nanos ts = 0;
  make_warm(est, 1.5, 2.0, ts);
  AdaptationPolicy policy(cfg, profile, nominal_params(profile), kPeriodNs);

  Decision fresh = policy.on_frame(est, usage(50.0, 2 * kPeriodNs), 3 * kPeriodNs);
  EXPECT_FALSE(fresh.stale_usage);
  Decision stale = policy.on_frame(est, usage(50.0, 0), 4 * kPeriodNs);
  EXPECT_TRUE(stale.stale_usage);
  EXPECT_EQ(stale.action, Action::Process);  // still decided
}

TEST(OnFrame, ThresholdFeedbackDirection) {
  PolicyConfig cfg = quick_config();
  MethodProfile profile = smsckf_profile();
  AgilityEstimator est(agility_config());
  Nanos ts = 0;
  make_warm(est, 0.2, 0.3, ts);
  AdaptationPolicy policy(cfg, profile, nominal_params(profile), kPeriodNs);

  std::mt19937_64 rng(99);
  for (int i = 0; i < 3000; ++i) {
    double chi = (rng() % 2) ? 95.0 : 30.0;
    auto before = est.snapshot();
    Decision d = policy.on_frame(est, usage(chi), static_cast<Nanos>(i) * 50'000'000);
    auto after = est.snapshot();
    int sum = policy.gate().queue_sum;
    if (after.omega_threshold > before.omega_threshold)
      ASSERT_GT(sum, cfg.c_high) << "raise without queue excess at frame " << i;
    if (after.omega_threshold < before.omega_threshold)
      ASSERT_LT(sum, cfg.c_low) << "lower without queue deficit at frame " << i;
    if (d.action == Action::Drop)
      ASSERT_EQ(after.omega_threshold, before.omega_threshold)
          << "threshold moved on a dropped frame";
    ASSERT_LE(policy.gate().queue.size(), static_cast<std::size_t>(cfg.l_I));
  }
}

TEST(OnFrame, RandomizedInvariantSweep) {
  // Mini version of the acceptance hysteresis suite: random usage and
  // motion, every decision audited inline.
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> chi_dist(0.0, 100.0);
    std::uniform_real_distribution<double> motion(0.0, 1.0);

    PolicyConfig cfg;
    cfg.init_frames = 20;
    MethodProfile profile = smsckf_profile();
    AgilityEstimator est(agility_config());
    AdaptationPolicy policy(cfg, profile, nominal_params(profile), kPeriodNs);

    Nanos ts = 0;
    int last_drop = -1000, last_change = -1000;
    int processed_since_drop = 1000;
    for (int i = 0; i < 5000; ++i) {
      ImuSample s;
      s.timestamp = ++ts;
      s.angular_velocity = {0.0, 0.0, motion(rng)};
      s.linear_acceleration = {0.0, 0.0, 9.81 + motion(rng)};
      est.push(s);

      Decision d = policy.on_frame(est, usage(chi_dist(rng)), ts);
      if (d.action == Action::Drop) {
        ASSERT_GE(i, cfg.init_frames);
        if (last_drop >= 0) ASSERT_GT(processed_since_drop, cfg.kappa_0f);
        last_drop = i;
        processed_since_drop = 0;
      } else {
        ++processed_since_drop;
      }
      if (d.params_changed) {
        ASSERT_EQ(d.action, Action::Process);
        if (last_change >= 0) ASSERT_GT(i - last_change, cfg.kappa_0p);
        last_change = i;
      }
      ASSERT_GE(d.params_after.phi, profile.bounds.phi_min);
      ASSERT_LE(d.params_after.phi, profile.bounds.phi_nominal);
      ASSERT_GE(d.params_after.lambda, profile.bounds.lambda_min);
      ASSERT_LE(d.params_after.lambda, profile.bounds.lambda_nominal);
      ASSERT_LE(policy.gate().queue.size(), static_cast<std::size_t>(cfg.l_I));
      ASSERT_GE(policy.gate().queue_sum, 0);
      ASSERT_LE(policy.gate().queue_sum, cfg.l_I);
    }
  }
}

TEST(OnFrame, DeterministicDecisionSequence) {
  auto run_once = [] {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> chi_dist(0.0, 100.0);
    std::uniform_real_distribution<double> motion(0.0, 1.0);
    PolicyConfig cfg = quick_config();
    MethodProfile profile = smsckf_profile();
    AgilityEstimator est(agility_config());
    AdaptationPolicy policy(cfg, profile, nominal_params(profile), kPeriodNs);
    std::vector<std::pair<int, int>> trail;  // (action, phi)
    Nanos ts = 0;
    for (int i = 0; i < 2000; ++i) {
      ImuSample s;
      s.timestamp = ++ts;
      s.angular_velocity = {0.0, 0.0, motion(rng)};
      s.linear_acceleration = {0.0, 0.0, 9.81 + motion(rng)};
      est.push(s);
      Decision d = policy.on_frame(est, usage(chi_dist(rng)), ts);
      trail.emplace_back(static_cast<int>(d.action), d.params_after.phi);
    }
    return trail;
  };
  EXPECT_EQ(run_once(), run_once());
}
