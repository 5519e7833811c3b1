#pragma once

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "viosched/policy.hpp"
#include "viosched/profiles.hpp"
#include "viosched/trace_io.hpp"

namespace viosched {

struct AuditIssue {
  long row = -1;  // record index, -1 for log-level problems
  std::string what;
};

// Everything the audits need, reconstructed from a log's own header so a
// written file can be checked with no side channel.
struct LogAuditContext {
  PolicyConfig policy;
  ProfileBounds bounds;
  Method method = Method::SMsckf;
  bool adaptive = true;

  static LogAuditContext from_header(const RunLog& log) {
    auto get = [&](const std::string& key) -> std::string {
      auto it = log.header.find(key);
      if (it == log.header.end())
        throw SchemaMismatchError("run log header missing '" + key + "'", key);
      return it->second;
    };
    LogAuditContext ctx;
    ctx.policy.chi_T = std::strtod(get("policy.chi_T").c_str(), nullptr);
    ctx.policy.delta_0 = std::strtod(get("policy.delta_0").c_str(), nullptr);
    ctx.policy.delta_1 = std::strtod(get("policy.delta_1").c_str(), nullptr);
    ctx.policy.delta_2 = std::strtod(get("policy.delta_2").c_str(), nullptr);
    ctx.policy.kappa_0f = std::atoi(get("policy.kappa_0f").c_str());
    ctx.policy.kappa_0p = std::atoi(get("policy.kappa_0p").c_str());
    ctx.policy.l_I = std::atoi(get("policy.l_I").c_str());
    ctx.policy.c_high = std::atoi(get("policy.c_high").c_str());
    ctx.policy.c_low = std::atoi(get("policy.c_low").c_str());
    ctx.policy.init_frames = std::atoi(get("policy.init_frames").c_str());
    ctx.bounds.phi_min = std::atoi(get("bounds.phi_min").c_str());
    ctx.bounds.phi_nominal = std::atoi(get("params.phi").c_str());
    ctx.bounds.lambda_min = std::atoi(get("bounds.lambda_min").c_str());
    ctx.bounds.lambda_nominal = std::atoi(get("params.lambda").c_str());
    ctx.method = method_from_string(get("run.method"));
    ctx.adaptive = get("run.adaptive") == "true";
    return ctx;
  }
};

// Post-hoc verification of the policy's externally visible guarantees using
// only what the log records. Returns one issue per violation; empty means
// the run honored its contract.
inline std::vector<AuditIssue> audit_run_log(const RunLog& log,
                                             const LogAuditContext& ctx) {
  std::vector<AuditIssue> issues;
  auto flag = [&](long row, std::string what) {
    issues.push_back(AuditIssue{row, std::move(what)});
  };

  const auto& recs = log.records;
  long last_drop = -1;
  long processed_since_drop = 0;
  long last_change = -1;

  for (long i = 0; i < static_cast<long>(recs.size()); ++i) {
    const RunRecord& r = recs[i];

    if (r.action == Action::Drop) {
      if (!ctx.adaptive) flag(i, "baseline run contains a drop");
      if (i < ctx.policy.init_frames)
        flag(i, "drop during initialization period");
      if (last_drop >= 0 && processed_since_drop <= ctx.policy.kappa_0f)
        flag(i, "only " + std::to_string(processed_since_drop) +
                    " processed frames since previous drop, need > " +
                    std::to_string(ctx.policy.kappa_0f));
      if (r.reason == DecisionReason::Resource && !(r.delta > ctx.policy.delta_0))
        flag(i, "resource drop with delta " + std::to_string(r.delta) +
                    " <= delta_0 " + std::to_string(ctx.policy.delta_0));
      if (r.reason == DecisionReason::ForcedProcess)
        flag(i, "drop row with process reason");
      last_drop = i;
      processed_since_drop = 0;
    } else {
      ++processed_since_drop;
    }

    if (r.phi < ctx.bounds.phi_min || r.phi > ctx.bounds.phi_nominal)
      flag(i, "phi " + std::to_string(r.phi) + " outside [" +
                  std::to_string(ctx.bounds.phi_min) + ", " +
                  std::to_string(ctx.bounds.phi_nominal) + "]");
    if (r.lambda < ctx.bounds.lambda_min || r.lambda > ctx.bounds.lambda_nominal)
      flag(i, "lambda " + std::to_string(r.lambda) + " outside [" +
                  std::to_string(ctx.bounds.lambda_min) + ", " +
                  std::to_string(ctx.bounds.lambda_nominal) + "]");

    if (i > 0) {
      const RunRecord& p = recs[i - 1];
      const bool params_changed =
          r.phi != p.phi || r.lambda != p.lambda || r.w != p.w;

      if (params_changed) {
        if (!ctx.adaptive) flag(i, "baseline run mutated parameters");
        if (r.action == Action::Drop)
          flag(i, "parameters changed on a dropped frame");
        if (last_change >= 0 && i - last_change <= ctx.policy.kappa_0p)
          flag(i, "parameter change only " + std::to_string(i - last_change) +
                      " frames after previous, need > " +
                      std::to_string(ctx.policy.kappa_0p));
        last_change = i;
      }
      if (r.lambda < p.lambda && !(r.delta > ctx.policy.delta_1))
        flag(i, "lambda decrease with delta " + std::to_string(r.delta) +
                    " <= delta_1 " + std::to_string(ctx.policy.delta_1));
      if (r.phi < p.phi && !(r.delta > ctx.policy.delta_2))
        flag(i, "phi decrease with delta " + std::to_string(r.delta) +
                    " <= delta_2 " + std::to_string(ctx.policy.delta_2));
      if (r.lambda > p.lambda && !(r.delta <= 0.0))
        flag(i, "lambda recovery with positive delta");
      if (r.phi > p.phi && !(r.delta <= 0.0))
        flag(i, "phi recovery with positive delta");

      // Method profile conformance: knobs the profile pins must not move.
      if (r.w != p.w) flag(i, "window changed mid-run");
      if (ctx.method == Method::Okvis && r.phi != p.phi)
        flag(i, "okvis run mutated phi");
      if (ctx.method != Method::SMsckf && r.lambda != p.lambda)
        flag(i, to_string(ctx.method) + " run mutated lambda");
    }
  }

  // Summary consistency.
  if (!recs.empty()) {
    long drops = 0;
    for (const auto& r : recs)
      if (r.action == Action::Drop) ++drops;
    double drop_rate = static_cast<double>(drops) / recs.size();
    if (std::abs(drop_rate - log.summary.drop_rate) > 1e-12)
      flag(-1, "summary drop_rate disagrees with records");
  }
  return issues;
}

inline std::vector<AuditIssue> audit_run_log(const RunLog& log) {
  return audit_run_log(log, LogAuditContext::from_header(log));
}

}  // namespace viosched
