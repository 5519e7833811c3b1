#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "viosched/agility.hpp"
#include "viosched/cost_model.hpp"
#include "viosched/cpu_monitor.hpp"
#include "viosched/policy.hpp"
#include "viosched/profiles.hpp"
#include "viosched/stress.hpp"
#include "viosched/trace_io.hpp"
#include "viosched/types.hpp"

namespace viosched {

struct SimOptions {
  Method method = Method::SMsckf;
  CpuSpec cpu{4, 0.6, 1.5};  // Cortex-A72-class default host
  PolicyConfig policy;
  AgilityConfig agility;
  CostModel cost;
  StressSchedule stress;
  bool adaptive = true;
  std::uint64_t seed = 0;
  double monitor_rate_hz = 1.0;
  ProfileTable profiles = ProfileTable::builtin();
  std::map<std::string, std::string> extra_header;
};

struct UsagePoint {
  double t_s = 0.0;        // relative to trace start
  double chi = 0.0;        // what the policy saw
  double busy_pct = 0.0;   // workload share
  double background_pct = 0.0;

  bool operator==(const UsagePoint&) const = default;
};

struct SimReport {
  RunLog run_log;
  std::vector<UsagePoint> usage_series;
  double usage_mean = 0.0;
  std::optional<double> convergence_time_s;
  bool not_converged = false;
  ParamSet initial_params;
  MethodProfile profile;
};

namespace detail {

inline int window_column(Method m, const ParamSet& p) {
  switch (m) {
    case Method::VinsMono: return p.window.value_or(0);
    case Method::Okvis: return p.window_temporal.value_or(0);
    case Method::SMsckf: return 0;
  }
  return 0;
}

inline std::string render_stress(const StressSchedule& s) {
  std::string out;
  for (const auto& iv : s.intervals()) {
    if (!out.empty()) out += ';';
    out += format_double(iv.start_s) + ":" + format_double(iv.end_s) + ":" +
           format_double(iv.load_pct);
  }
  return out.empty() ? "none" : out;
}

}  // namespace detail

// Closed-loop run over a sensor trace. Time advances by trace timestamps:
// processed frames deposit cost-model milliseconds into the current sampling
// period, each completed period publishes chi = min(100, busy% + scheduled
// background), and the policy consumes those samples exactly as it would
// live ones. Everything downstream of (trace, options, seed) is
// deterministic.
inline SimReport simulate(const Trace& trace, const SimOptions& opt) {
  if (trace.frames.empty())
    throw InvalidTraceError("trace has no camera frames");
  opt.cpu.validate();
  opt.policy.validate();
  opt.cost.validate();
  if (opt.monitor_rate_hz <= 0.0)
    throw InvalidSpecError("monitor rate must be > 0");

  auto [initial_params, profile] =
      compute_initial_parameters(opt.cpu, opt.method, opt.profiles);

  AgilityEstimator agility(opt.agility);
  AdaptationPolicy policy(opt.policy, profile, initial_params,
                          from_seconds(1.0 / opt.monitor_rate_hz));
  std::mt19937_64 noise_rng(opt.seed);

  const Nanos t0 = trace.imu.empty()
                       ? trace.frames.front().timestamp
                       : std::min(trace.imu.front().timestamp,
                                  trace.frames.front().timestamp);
  const double period_s = 1.0 / opt.monitor_rate_hz;
  const Nanos period_ns = from_seconds(period_s);

  SimReport report;
  report.initial_params = initial_params;
  report.profile = profile;
  report.run_log.records.reserve(trace.frames.size());

  UsageSample latest{t0, -1, 0.0};
  long published_periods = 0;
  std::map<long, double> busy_ms;  // period index -> accumulated cost

  auto publish_through = [&](Nanos t) {
    while ((published_periods + 1) * period_ns + t0 <= t) {
      long k = published_periods;  // period k covers [k*p, (k+1)*p)
      double p0 = k * period_s;
      double p1 = p0 + period_s;
      double background = opt.stress.average_load(p0, p1);
      double busy = 0.0;
      if (auto it = busy_ms.find(k); it != busy_ms.end()) {
        busy = it->second;
        busy_ms.erase(it);
      }
      double chi = SimUsageSampler::sim_usage_pct(busy, period_s, background);
      latest = UsageSample{t0 + from_seconds(p1), -1, chi};
      report.usage_series.push_back(
          UsagePoint{p1, chi, 100.0 * busy / (period_s * 1000.0), background});
      ++published_periods;
    }
  };

  ParamSet baseline_params = initial_params;
  std::size_t imu_idx = 0;
  long param_changes = 0;
  long stale_decisions = 0;
  long drops = 0;
  int prev_phi = -1, prev_lambda = -1, prev_w = -1;

  for (const FrameEvent& frame : trace.frames) {
    while (imu_idx < trace.imu.size() &&
           trace.imu[imu_idx].timestamp <= frame.timestamp) {
      publish_through(trace.imu[imu_idx].timestamp);
      agility.push(trace.imu[imu_idx]);
      ++imu_idx;
    }
    publish_through(frame.timestamp);

    RunRecord rec;
    rec.t_ns = frame.timestamp;
    rec.frame_id = frame.frame_id;
    rec.chi = latest.usage_pct;
    rec.delta = AdaptationPolicy::compute_delta(latest.usage_pct, opt.policy);

    const ParamSet* effective = nullptr;
    if (opt.adaptive) {
      Decision d = policy.on_frame(agility, latest, frame.timestamp);
      rec.action = d.action;
      rec.reason = d.reason;
      rec.omega_avg = d.agility.omega_avg;
      rec.accel_avg = d.agility.accel_avg;
      rec.omega_T = d.agility.omega_threshold;
      rec.accel_T = d.agility.accel_threshold;
      rec.kappa_f = d.kappa_f_after;
      rec.kappa_p = d.kappa_p_after;
      if (d.stale_usage) ++stale_decisions;
      effective = &policy.params();
    } else {
      AgilitySnapshot snap = agility.snapshot();
      rec.action = Action::Process;
      rec.reason = DecisionReason::ForcedProcess;
      rec.omega_avg = snap.omega_avg;
      rec.accel_avg = snap.accel_avg;
      rec.omega_T = snap.omega_threshold;
      rec.accel_T = snap.accel_threshold;
      effective = &baseline_params;
    }

    rec.phi = effective->phi;
    rec.lambda = effective->lambda;
    rec.w = detail::window_column(opt.method, *effective);

    if (rec.action == Action::Process) {
      long k = (frame.timestamp - t0) / period_ns;
      busy_ms[k] += frame_cost(opt.cost, *effective, noise_rng);
    } else {
      ++drops;
    }

    if (prev_phi >= 0 &&
        (rec.phi != prev_phi || rec.lambda != prev_lambda || rec.w != prev_w))
      ++param_changes;
    prev_phi = rec.phi;
    prev_lambda = rec.lambda;
    prev_w = rec.w;

    report.run_log.records.push_back(rec);
  }
  publish_through(trace.frames.back().timestamp);

  // Summary and convergence.
  RunSummary& summary = report.run_log.summary;
  double chi_sum = 0.0;
  for (const auto& p : report.usage_series) chi_sum += p.chi;
  report.usage_mean =
      report.usage_series.empty() ? 0.0 : chi_sum / report.usage_series.size();
  summary.mean_chi = report.usage_mean;
  summary.drop_rate =
      static_cast<double>(drops) / static_cast<double>(report.run_log.records.size());
  summary.param_changes = param_changes;
  summary.stale_decisions = stale_decisions;
  if (!opt.stress.empty()) {
    double onset = opt.stress.intervals().front().start_s;
    bool found = false;
    for (const auto& p : report.usage_series) {
      if (p.t_s >= onset && p.chi <= opt.policy.chi_T) {
        summary.convergence_time_s = p.t_s - onset;
        found = true;
        break;
      }
    }
    summary.not_converged = !found;
    report.convergence_time_s = summary.convergence_time_s;
    report.not_converged = summary.not_converged;
  }

  // Header: everything needed to reproduce or compare the run.
  auto& h = report.run_log.header;
  h["schema.version"] = "1";
  h["run.adaptive"] = opt.adaptive ? "true" : "false";
  h["run.method"] = to_string(opt.method);
  h["run.seed"] = std::to_string(opt.seed);
  h["cpu.mu"] = std::to_string(opt.cpu.core_count);
  h["cpu.nu_min"] = detail::format_double(opt.cpu.clock_min_ghz);
  h["cpu.nu_max"] = detail::format_double(opt.cpu.clock_max_ghz);
  h["cpu.region"] = to_string(classify_region(opt.cpu));
  h["policy.chi_T"] = detail::format_double(opt.policy.chi_T);
  h["policy.delta_0"] = detail::format_double(opt.policy.delta_0);
  h["policy.delta_1"] = detail::format_double(opt.policy.delta_1);
  h["policy.delta_2"] = detail::format_double(opt.policy.delta_2);
  h["policy.kappa_0f"] = std::to_string(opt.policy.kappa_0f);
  h["policy.kappa_0p"] = std::to_string(opt.policy.kappa_0p);
  h["policy.l_I"] = std::to_string(opt.policy.l_I);
  h["policy.c_high"] = std::to_string(opt.policy.c_high);
  h["policy.c_low"] = std::to_string(opt.policy.c_low);
  h["policy.init_frames"] = std::to_string(opt.policy.init_frames);
  h["policy.step_phi"] =
      std::to_string(opt.policy.step_phi.value_or(profile.bounds.step_phi));
  h["policy.step_lambda"] =
      std::to_string(opt.policy.step_lambda.value_or(profile.bounds.step_lambda));
  h["agility.l_alpha"] = std::to_string(opt.agility.l_alpha);
  h["agility.omega_threshold_init"] =
      detail::format_double(opt.agility.omega_threshold_init);
  h["agility.accel_threshold_init"] =
      detail::format_double(opt.agility.accel_threshold_init);
  h["agility.threshold_step"] = detail::format_double(opt.agility.threshold_step);
  h["agility.gravity_compensation"] =
      opt.agility.gravity_compensation ? "true" : "false";
  h["sim.base_ms"] = detail::format_double(opt.cost.base_ms);
  h["sim.phi_coeff"] = detail::format_double(opt.cost.phi_coeff);
  h["sim.lambda_coeff"] = detail::format_double(opt.cost.lambda_coeff);
  h["sim.window_coeff"] = detail::format_double(opt.cost.window_coeff);
  h["sim.resolution_coeff"] = detail::format_double(opt.cost.resolution_coeff);
  h["sim.noise_std"] = detail::format_double(opt.cost.noise_std);
  h["monitor.rate_hz"] = detail::format_double(opt.monitor_rate_hz);
  h["stress.intervals"] = detail::render_stress(opt.stress);
  h["profiles.hash"] = to_hex(opt.profiles.hash());
  h["profiles.source"] = opt.profiles.source();
  h["trace.hash"] = to_hex(trace_hash(trace));
  h["trace.frames"] = std::to_string(trace.frames.size());
  h["trace.imu_samples"] = std::to_string(trace.imu.size());
  h["bounds.phi_min"] = std::to_string(profile.bounds.phi_min);
  h["bounds.lambda_min"] = std::to_string(profile.bounds.lambda_min);
  h["params.phi"] = std::to_string(initial_params.phi);
  h["params.lambda"] = std::to_string(initial_params.lambda);
  h["params.window"] = std::to_string(initial_params.window.value_or(0));
  h["params.window_temporal"] =
      std::to_string(initial_params.window_temporal.value_or(0));
  h["params.window_keyframe"] =
      std::to_string(initial_params.window_keyframe.value_or(0));
  h["params.grid_rows"] = std::to_string(initial_params.grid_rows.value_or(0));
  h["params.grid_cols"] = std::to_string(initial_params.grid_cols.value_or(0));
  h["params.resolution"] = std::to_string(initial_params.resolution.width) + "x" +
                           std::to_string(initial_params.resolution.height);
  for (const auto& [k, v] : opt.extra_header) h[k] = v;
  return report;
}

}  // namespace viosched
