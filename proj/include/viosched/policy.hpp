#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <string>

#include "viosched/agility.hpp"
#include "viosched/config.hpp"
#include "viosched/errors.hpp"
#include "viosched/profiles.hpp"
#include "viosched/types.hpp"

namespace viosched {

// Per-frame adaptation driven by Delta = chi - chi_T, the gap between the
// monitored core usage and its target. Three tiers of response, each with
// its own threshold because each buys a different amount of relief:
//
//   Delta > delta_0  drop the frame outright (largest saving)
//   Delta > delta_1  shrink the iteration budget Lambda
//   Delta > delta_2  shrink the feature budget Phi
//   Delta <= 0       grow Lambda/Phi back toward their nominal values
//
// Independently of usage, frames are dropped while the platform's motion is
// calm (both agility averages under their thresholds) since those frames add
// the least information. Two hysteresis counters keep the loop stable:
// kappa_f forces more than kappa_0f processed frames between consecutive
// drops, kappa_p forces more than kappa_0p processed frames between
// parameter changes. A bounded queue of processed/dropped bits feeds back
// into the agility thresholds so the drop rate stays inside
// [l_I - c_high, l_I - c_low] per window: too few drops raises the
// thresholds, too many lowers them. No frame is dropped during the
// initialization period.
struct PolicyConfig {
  double chi_T = 70.0;
  double delta_0 = 20.0;
  double delta_1 = 10.0;
  double delta_2 = 5.0;
  int kappa_0f = 4;
  int kappa_0p = 10;
  int l_I = 40;
  int c_high = 32;
  int c_low = 20;
  int init_frames = 100;
  std::optional<int> step_phi;     // overrides the method profile when set
  std::optional<int> step_lambda;

  static PolicyConfig from_config(const Config& cfg) {
    PolicyConfig p;
    p.chi_T = cfg.get_double("policy.chi_T", p.chi_T);
    p.delta_0 = cfg.get_double("policy.delta_0", p.delta_0);
    p.delta_1 = cfg.get_double("policy.delta_1", p.delta_1);
    p.delta_2 = cfg.get_double("policy.delta_2", p.delta_2);
    p.kappa_0f = static_cast<int>(cfg.get_int("policy.kappa_0f", p.kappa_0f));
    p.kappa_0p = static_cast<int>(cfg.get_int("policy.kappa_0p", p.kappa_0p));
    p.l_I = static_cast<int>(cfg.get_int("policy.l_I", p.l_I));
    p.c_high = static_cast<int>(cfg.get_int("policy.c_high", p.c_high));
    p.c_low = static_cast<int>(cfg.get_int("policy.c_low", p.c_low));
    p.init_frames = static_cast<int>(cfg.get_int("policy.init_frames", p.init_frames));
    if (cfg.has("policy.step_phi"))
      p.step_phi = static_cast<int>(cfg.get_int("policy.step_phi", 0));
    if (cfg.has("policy.step_lambda"))
      p.step_lambda = static_cast<int>(cfg.get_int("policy.step_lambda", 0));
    p.validate();
    return p;
  }

  void validate() const {
    if (!(chi_T > 0.0 && chi_T <= 100.0))
      throw InvalidSpecError("policy.chi_T must be in (0, 100]");
    if (!(delta_0 >= delta_1 && delta_1 >= delta_2 && delta_2 >= 0.0))
      throw InvalidSpecError("policy deltas must satisfy delta_0 >= delta_1 >= delta_2 >= 0");
    if (kappa_0f < 1 || kappa_0p < 1)
      throw InvalidSpecError("policy.kappa_0f and kappa_0p must be >= 1");
    if (l_I < 1) throw InvalidSpecError("policy.l_I must be >= 1");
    if (!(0 <= c_low && c_low < c_high && c_high <= l_I))
      throw InvalidSpecError("policy needs 0 <= c_low < c_high <= l_I");
    if (init_frames < 0) throw InvalidSpecError("policy.init_frames must be >= 0");
    if (step_phi && *step_phi < 1)
      throw InvalidSpecError("policy.step_phi must be >= 1");
    if (step_lambda && *step_lambda < 1)
      throw InvalidSpecError("policy.step_lambda must be >= 1");
  }
};

// Processed/dropped bookkeeping. queue holds one bit per decided frame
// (1 = processed), capacity l_I. kappa_f counts processed frames since the
// last drop, kappa_p processed frames since the last parameter change; both
// advance only on processed frames, matching the control flow where drops
// return before the increment step.
struct GateState {
  std::deque<unsigned char> queue;
  int queue_sum = 0;
  long kappa_f = 0;
  long kappa_p = 0;
  long frames_seen = 0;
};

enum class Action { Process, Drop };

// Drops carry their trigger; processed frames all log ForcedProcess.
enum class DecisionReason { Agility, Resource, ForcedProcess };

inline std::string to_string(Action a) {
  return a == Action::Process ? "process" : "drop";
}

inline std::string to_string(DecisionReason r) {
  switch (r) {
    case DecisionReason::Agility: return "agility";
    case DecisionReason::Resource: return "resource";
    case DecisionReason::ForcedProcess: return "forced_process";
  }
  return "?";
}

inline Action action_from_string(const std::string& s) {
  if (s == "process") return Action::Process;
  if (s == "drop") return Action::Drop;
  throw SchemaMismatchError("unknown action '" + s + "'", "action");
}

inline DecisionReason reason_from_string(const std::string& s) {
  if (s == "agility") return DecisionReason::Agility;
  if (s == "resource") return DecisionReason::Resource;
  if (s == "forced_process") return DecisionReason::ForcedProcess;
  throw SchemaMismatchError("unknown reason '" + s + "'", "reason");
}

struct Decision {
  Action action = Action::Process;
  DecisionReason reason = DecisionReason::ForcedProcess;
  double chi = 0.0;
  double delta = 0.0;
  bool stale_usage = false;
  bool params_changed = false;
  ParamSet params_after;
  AgilitySnapshot agility;  // decision-time snapshot, pre-adjustment
  long kappa_f_after = 0;
  long kappa_p_after = 0;
};

inline bool low_agility(const AgilitySnapshot& s) {
  return s.warm && s.omega_avg < s.omega_threshold &&
         s.accel_avg < s.accel_threshold;
}

class AdaptationPolicy {
 public:
  AdaptationPolicy(PolicyConfig cfg, MethodProfile profile, ParamSet initial,
                   Nanos sampling_period_ns)
      : cfg_(cfg),
        profile_(std::move(profile)),
        params_(initial),
        sampling_period_ns_(sampling_period_ns) {
    cfg_.validate();
  }

  static double compute_delta(double chi, const PolicyConfig& cfg) {
    return chi - cfg.chi_T;
  }

  // Lambda tier. No-op unless the profile adapts Lambda online.
  static bool update_iterations(double delta, ParamSet& params,
                                const MethodProfile& profile,
                                const PolicyConfig& cfg) {
    if (!profile.lambda_online) return false;
    const int step = cfg.step_lambda.value_or(profile.bounds.step_lambda);
    const int before = params.lambda;
    if (delta > cfg.delta_1)
      params.lambda = std::max(params.lambda - step, profile.bounds.lambda_min);
    else if (delta <= 0.0)
      params.lambda = std::min(params.lambda + step, profile.bounds.lambda_nominal);
    return params.lambda != before;
  }

  // Phi tier. No-op unless the profile adapts Phi online.
  static bool update_features(double delta, ParamSet& params,
                              const MethodProfile& profile,
                              const PolicyConfig& cfg) {
    if (!profile.phi_online) return false;
    const int step = cfg.step_phi.value_or(profile.bounds.step_phi);
    const int before = params.phi;
    if (delta > cfg.delta_2)
      params.phi = std::max(params.phi - step, profile.bounds.phi_min);
    else if (delta <= 0.0)
      params.phi = std::min(params.phi + step, profile.bounds.phi_nominal);
    return params.phi != before;
  }

  // One frame through the gate. Mutates the policy's gate/params and, on the
  // processed path, possibly the agility thresholds. `now` is the frame
  // timestamp; `latest` is the most recent usage sample (the sampler runs
  // slower than the frame rate, so reuse is expected and only flagged as
  // stale past 3 sampling periods).
  Decision on_frame(AgilityEstimator& agility, const UsageSample& latest,
                    Nanos now) {
    Decision d;
    d.chi = latest.usage_pct;
    d.delta = compute_delta(latest.usage_pct, cfg_);
    d.stale_usage = (now - latest.timestamp) > 3 * sampling_period_ns_;
    d.agility = agility.snapshot();

    const bool past_init = gate_.frames_seen >= cfg_.init_frames;
    const bool drop_allowed = gate_.kappa_f > cfg_.kappa_0f && past_init;

    if (low_agility(d.agility) && drop_allowed)
      return finish_drop(d, DecisionReason::Agility);
    if (d.delta > cfg_.delta_0 && drop_allowed)
      return finish_drop(d, DecisionReason::Resource);

    if (gate_.kappa_p > cfg_.kappa_0p) {
      bool changed = update_iterations(d.delta, params_, profile_, cfg_);
      changed = update_features(d.delta, params_, profile_, cfg_) || changed;
      d.params_changed = changed;
      gate_.kappa_p = 0;
    }

    push_bit(1);
    if (gate_.queue_sum > cfg_.c_high)
      agility.adjust_thresholds(ThresholdDirection::Raise);
    else if (gate_.queue_sum < cfg_.c_low)
      agility.adjust_thresholds(ThresholdDirection::Lower);

    ++gate_.kappa_f;
    ++gate_.kappa_p;
    ++gate_.frames_seen;

    d.action = Action::Process;
    d.reason = DecisionReason::ForcedProcess;
    d.params_after = params_;
    d.kappa_f_after = gate_.kappa_f;
    d.kappa_p_after = gate_.kappa_p;
    return d;
  }

  const PolicyConfig& config() const { return cfg_; }
  const MethodProfile& profile() const { return profile_; }
  const ParamSet& params() const { return params_; }
  const GateState& gate() const { return gate_; }

 private:
  Decision finish_drop(Decision& d, DecisionReason reason) {
    push_bit(0);
    gate_.kappa_f = 0;
    ++gate_.frames_seen;
    d.action = Action::Drop;
    d.reason = reason;
    d.params_after = params_;
    d.kappa_f_after = gate_.kappa_f;
    d.kappa_p_after = gate_.kappa_p;
    return d;
  }

  // Push keeps the queue within capacity on both paths; a drop push on a
  // full queue must evict too or the l_I bound breaks.
  void push_bit(unsigned char bit) {
    gate_.queue.push_back(bit);
    gate_.queue_sum += bit;
    while (gate_.queue.size() > static_cast<std::size_t>(cfg_.l_I)) {
      gate_.queue_sum -= gate_.queue.front();
      gate_.queue.pop_front();
    }
  }

  PolicyConfig cfg_;
  MethodProfile profile_;
  ParamSet params_;
  GateState gate_;
  Nanos sampling_period_ns_;
};

}  // namespace viosched
