// Command-line front end: probe the host and preview initial parameters,
// run closed-loop simulations or live replays over sensor traces, drive the
// stress injector, and compare run logs. Exit codes: 0 success, 1 policy
// invariant violated during a run, 2 configuration or parse error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "viosched/viosched.hpp"

namespace fs = std::filesystem;
using namespace viosched;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string profiles_path;
  std::string cpu_override;
  std::string method = "smsckf";
  std::string out_dir;
  std::string trace_dir;
  std::string synthetic;
  std::string stress = "none";
  bool adaptive = true;
  std::uint64_t seed = 0;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "config file (key = value, dotted keys)");
  cmd->add_option("--profiles", args.profiles_path, "parameter-initialization table file");
  cmd->add_option("--cpu-override", args.cpu_override,
                  "mu=<cores>,nu_min=<GHz>,nu_max=<GHz>");
  cmd->add_option("--method", args.method, "vins|smsckf|okvis")
      ->default_str("smsckf");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "simulation seed");
}

Config load_config(const CommonArgs& args) {
  Config cfg;
  if (!args.config_path.empty()) cfg = Config::from_file(args.config_path);
  if (!args.cpu_override.empty()) {
    std::istringstream ss(args.cpu_override);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos)
        throw ConfigError("--cpu-override expects k=v pairs, got '" + item + "'");
      cfg.set("cpu.override." + Config::trim(item.substr(0, eq)),
              Config::trim(item.substr(eq + 1)));
    }
  }
  return cfg;
}

ProfileTable load_profiles(const CommonArgs& args, const Config& cfg) {
  std::string path = args.profiles_path.empty()
                         ? cfg.get_str("profiles.path", "")
                         : args.profiles_path;
  if (path.empty()) return ProfileTable::builtin();
  return ProfileTable::load(path);
}

CpuSpec resolve_cpu(const Config& cfg, bool quiet = false) {
  if (cfg.has("cpu.override.mu") || cfg.has("cpu.override.nu_min") ||
      cfg.has("cpu.override.nu_max"))
    return probe_cpu_spec(cfg);
  try {
    return probe_cpu_spec();
  } catch (const UnreadableSystemInfoError& e) {
    if (!quiet)
      std::cerr << "warning: live CPU probe failed (" << e.what()
                << "); using 4-core 1.5 GHz default\n";
    return CpuSpec{4, 0.6, 1.5};
  }
}

StressSchedule resolve_stress(const std::string& spec, double duration_s) {
  if (spec.empty() || spec == "none") return StressSchedule{};
  if (spec == "default")
    return StressSchedule::periodic(duration_s, 10.0, 20.0, 40.0);
  return StressSchedule::parse_csv(spec);
}

Trace resolve_trace(const CommonArgs& args) {
  if (!args.trace_dir.empty() && !args.synthetic.empty())
    throw ConfigError("--trace and --synthetic are mutually exclusive");
  if (!args.trace_dir.empty()) return load_euroc_trace(args.trace_dir);
  if (!args.synthetic.empty()) {
    SyntheticSpec spec = parse_synthetic_spec(args.synthetic);
    if (spec.seed == 0) spec.seed = args.seed;
    return generate_synthetic_trace(spec);
  }
  throw ConfigError("need one of --trace <euroc-dir> or --synthetic <spec>");
}

double trace_duration_s(const Trace& t) {
  if (t.frames.empty()) return 0.0;
  Nanos t0 = t.imu.empty() ? t.frames.front().timestamp
                           : std::min(t.imu.front().timestamp,
                                      t.frames.front().timestamp);
  return to_seconds(t.frames.back().timestamp - t0);
}

SimOptions build_sim_options(const CommonArgs& args, const Config& cfg,
                             const Trace& trace) {
  SimOptions opt;
  opt.method = method_from_string(args.method);
  opt.cpu = resolve_cpu(cfg);
  opt.policy = PolicyConfig::from_config(cfg);
  opt.agility = AgilityConfig::from_config(cfg);
  opt.cost = CostModel::from_config(cfg);
  opt.adaptive = args.adaptive;
  opt.seed = args.seed ? args.seed : static_cast<std::uint64_t>(
                                         cfg.get_int("run.seed", 0));
  opt.monitor_rate_hz = cfg.get_double("monitor.rate_hz", 1.0);
  opt.profiles = load_profiles(args, cfg);
  std::string stress = args.stress.empty() ? cfg.get_str("stress.schedule", "none")
                                           : args.stress;
  opt.stress = resolve_stress(stress, trace_duration_s(trace));
  if (!args.trace_dir.empty())
    opt.extra_header["trace.name"] = fs::path(args.trace_dir).filename().string();
  else
    opt.extra_header["trace.name"] = "synthetic";
  return opt;
}

void write_usage_csv(const fs::path& path, const std::vector<UsagePoint>& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "t_s,chi,busy_pct,background_pct\n";
  for (const auto& p : series)
    out << detail::format_double(p.t_s) << ',' << detail::format_double(p.chi)
        << ',' << detail::format_double(p.busy_pct) << ','
        << detail::format_double(p.background_pct) << "\n";
}

void write_summary_csv(const fs::path& path, const SimReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const RunSummary& s = report.run_log.summary;
  out << "metric,value\n";
  out << "mean_chi," << detail::format_double(s.mean_chi) << "\n";
  out << "drop_rate," << detail::format_double(s.drop_rate) << "\n";
  out << "param_changes," << s.param_changes << "\n";
  out << "stale_decisions," << s.stale_decisions << "\n";
  out << "frames," << report.run_log.records.size() << "\n";
  if (s.convergence_time_s)
    out << "convergence_time_s," << detail::format_double(*s.convergence_time_s)
        << "\n";
  if (s.not_converged) out << "not_converged,true\n";
}

void write_stress_csv(const fs::path& path, const StressSchedule& stress) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "start_s,end_s,load_pct\n";
  for (const auto& iv : stress.intervals())
    out << detail::format_double(iv.start_s) << ','
        << detail::format_double(iv.end_s) << ','
        << detail::format_double(iv.load_pct) << "\n";
}

fs::path ensure_out_dir(const CommonArgs& args) {
  fs::path dir = args.out_dir.empty() ? fs::path("viosched_out") : fs::path(args.out_dir);
  fs::create_directories(dir);
  return dir;
}

int report_audit(const std::vector<AuditIssue>& issues) {
  if (issues.empty()) return 0;
  std::cerr << "policy invariant violations detected:\n";
  for (const auto& issue : issues)
    std::cerr << "  row " << issue.row << ": " << issue.what << "\n";
  return 1;
}

void print_params(std::ostream& os, Method m, const ParamSet& p) {
  os << "  " << to_string(m) << ": phi=" << p.phi << " lambda=" << p.lambda;
  if (p.window) os << " W=" << *p.window;
  if (p.window_temporal) os << " W_t=" << *p.window_temporal;
  if (p.window_keyframe) os << " W_kf=" << *p.window_keyframe;
  if (p.grid_rows) os << " grid=" << *p.grid_rows << "x" << p.grid_cols.value_or(0);
  os << " r=" << p.resolution.width << "x" << p.resolution.height << "\n";
}

int cmd_probe(const CommonArgs& args, const std::string& format) {
  Config cfg = load_config(args);
  ProfileTable table = load_profiles(args, cfg);
  CpuSpec spec = probe_cpu_spec(cfg);  // live probe errors propagate here
  RegionClassification rc = classify_region_ex(spec);

  std::ostringstream csv;
  csv << "method,region,mu,nu_min_ghz,nu_max_ghz,phi,lambda,w,w_t,w_kf,"
         "grid_rows,grid_cols,res_w,res_h\n";
  for (Method m : {Method::VinsMono, Method::SMsckf, Method::Okvis}) {
    auto [p, profile] = compute_initial_parameters(spec, m, table);
    csv << to_string(m) << ',' << to_string(rc.region) << ',' << spec.core_count
        << ',' << detail::format_double(spec.clock_min_ghz) << ','
        << detail::format_double(spec.clock_max_ghz) << ',' << p.phi << ','
        << p.lambda << ',' << p.window.value_or(0) << ','
        << p.window_temporal.value_or(0) << ',' << p.window_keyframe.value_or(0)
        << ',' << p.grid_rows.value_or(0) << ',' << p.grid_cols.value_or(0)
        << ',' << p.resolution.width << ',' << p.resolution.height << "\n";
  }

  if (format == "csv") {
    std::cout << csv.str();
  } else {
    std::cout << "cpu: mu=" << spec.core_count << " nu=["
              << spec.clock_min_ghz << ", " << spec.clock_max_ghz
              << "] GHz -> region " << to_string(rc.region)
              << (rc.out_of_table ? " (outside tabulated regions, using R1 law)"
                                  : "")
              << "\n";
    std::cout << "initial parameters:\n";
    for (Method m : {Method::VinsMono, Method::SMsckf, Method::Okvis}) {
      auto [p, profile] = compute_initial_parameters(spec, m, table);
      print_params(std::cout, m, p);
    }
  }
  if (!args.out_dir.empty()) {
    fs::path dir = ensure_out_dir(const_cast<CommonArgs&>(args));
    std::ofstream out(dir / "probe.csv", std::ios::binary);
    out << csv.str();
  }
  return 0;
}

int cmd_simulate(const CommonArgs& args) {
  Config cfg = load_config(args);
  Trace trace = resolve_trace(args);
  SimOptions opt = build_sim_options(args, cfg, trace);
  SimReport report = simulate(trace, opt);

  fs::path dir = ensure_out_dir(args);
  write_run_log(dir / "run_log.csv", report.run_log);
  write_usage_csv(dir / "usage.csv", report.usage_series);
  write_summary_csv(dir / "summary.csv", report);
  write_stress_csv(dir / "stress.csv", opt.stress);

  const RunSummary& s = report.run_log.summary;
  std::cout << "frames=" << report.run_log.records.size()
            << " mean_chi=" << s.mean_chi << " drop_rate=" << s.drop_rate
            << " param_changes=" << s.param_changes << "\n";
  std::cout << "outputs in " << dir.string() << "\n";

  return report_audit(audit_run_log(report.run_log));
}

// Live-monitor replay: frames pace by wall clock, chi comes from the host's
// real counters, and the decisions get logged exactly like a simulation.
int cmd_replay(const CommonArgs& args, double speed) {
  Config cfg = load_config(args);
  Trace trace = resolve_trace(args);
  if (trace.frames.empty()) throw InvalidTraceError("trace has no frames");
  if (speed <= 0.0) throw ConfigError("--speed must be > 0");

  CpuSpec spec = resolve_cpu(cfg);
  MonitorConfig mon = MonitorConfig::from_config(cfg);
  ProfileTable table = load_profiles(args, cfg);
  Method method = method_from_string(args.method);
  auto [params, profile] = compute_initial_parameters(spec, method, table);
  PolicyConfig pol = PolicyConfig::from_config(cfg);
  AgilityConfig agi = AgilityConfig::from_config(cfg);

  int pin_core = static_cast<int>(cfg.get_int("monitor.pin_core", -1));
  if (pin_core >= 0) {
    try {
      pin_process_to_core(pin_core, spec);
    } catch (const AffinityUnsupportedError& e) {
      std::cerr << "warning: " << e.what() << "\n";
    }
  }

  UsageSampler sampler(mon, spec);
  sampler.start();

  AgilityEstimator agility(agi);
  AdaptationPolicy policy(pol, profile, params, mon.period_ns());
  RunLog log;

  const Nanos t0 = trace.imu.empty()
                       ? trace.frames.front().timestamp
                       : std::min(trace.imu.front().timestamp,
                                  trace.frames.front().timestamp);
  auto wall_start = std::chrono::steady_clock::now();
  auto wall_at = [&](Nanos trace_ts) {
    return wall_start + std::chrono::nanoseconds(
                            static_cast<Nanos>((trace_ts - t0) / speed));
  };

  std::size_t imu_idx = 0;
  for (const FrameEvent& frame : trace.frames) {
    while (imu_idx < trace.imu.size() &&
           trace.imu[imu_idx].timestamp <= frame.timestamp) {
      std::this_thread::sleep_until(wall_at(trace.imu[imu_idx].timestamp));
      agility.push(trace.imu[imu_idx]);
      ++imu_idx;
    }
    std::this_thread::sleep_until(wall_at(frame.timestamp));
    UsageSample latest = sampler.latest().value_or(UsageSample{frame.timestamp, -1, 0.0});
    latest.timestamp = frame.timestamp;  // policy staleness runs on trace time
    Decision d = policy.on_frame(agility, latest, frame.timestamp);

    RunRecord rec;
    rec.t_ns = frame.timestamp;
    rec.frame_id = frame.frame_id;
    rec.action = d.action;
    rec.reason = d.reason;
    rec.chi = d.chi;
    rec.delta = d.delta;
    rec.phi = d.params_after.phi;
    rec.lambda = d.params_after.lambda;
    rec.w = d.params_after.window.value_or(d.params_after.window_temporal.value_or(0));
    rec.omega_avg = d.agility.omega_avg;
    rec.accel_avg = d.agility.accel_avg;
    rec.omega_T = d.agility.omega_threshold;
    rec.accel_T = d.agility.accel_threshold;
    rec.kappa_f = d.kappa_f_after;
    rec.kappa_p = d.kappa_p_after;
    log.records.push_back(rec);
  }
  sampler.stop();

  long drops = 0;
  for (const auto& r : log.records)
    if (r.action == Action::Drop) ++drops;
  log.summary.drop_rate =
      log.records.empty() ? 0.0 : static_cast<double>(drops) / log.records.size();
  double chi_sum = 0.0;
  auto history = sampler.history();
  long agg = 0;
  for (const auto& s : history)
    if (s.core_id == -1) {
      chi_sum += s.usage_pct;
      ++agg;
    }
  log.summary.mean_chi = agg ? chi_sum / agg : 0.0;

  log.header["schema.version"] = "1";
  log.header["run.adaptive"] = "true";
  log.header["run.method"] = to_string(method);
  log.header["run.mode"] = "live-replay";
  log.header["run.seed"] = std::to_string(args.seed);
  log.header["cpu.mu"] = std::to_string(spec.core_count);
  log.header["cpu.nu_min"] = detail::format_double(spec.clock_min_ghz);
  log.header["cpu.nu_max"] = detail::format_double(spec.clock_max_ghz);
  log.header["policy.chi_T"] = detail::format_double(pol.chi_T);
  log.header["policy.delta_0"] = detail::format_double(pol.delta_0);
  log.header["policy.delta_1"] = detail::format_double(pol.delta_1);
  log.header["policy.delta_2"] = detail::format_double(pol.delta_2);
  log.header["policy.kappa_0f"] = std::to_string(pol.kappa_0f);
  log.header["policy.kappa_0p"] = std::to_string(pol.kappa_0p);
  log.header["policy.l_I"] = std::to_string(pol.l_I);
  log.header["policy.c_high"] = std::to_string(pol.c_high);
  log.header["policy.c_low"] = std::to_string(pol.c_low);
  log.header["policy.init_frames"] = std::to_string(pol.init_frames);
  log.header["bounds.phi_min"] = std::to_string(profile.bounds.phi_min);
  log.header["bounds.lambda_min"] = std::to_string(profile.bounds.lambda_min);
  log.header["params.phi"] = std::to_string(params.phi);
  log.header["params.lambda"] = std::to_string(params.lambda);
  log.header["trace.hash"] = to_hex(trace_hash(trace));
  if (pin_core >= 0) log.header["monitor.pin_core"] = std::to_string(pin_core);

  fs::path dir = ensure_out_dir(args);
  write_run_log(dir / "run_log.csv", log);
  std::ofstream proc(dir / "process_usage.csv", std::ios::binary);
  proc << "t_ns,process_pct\n";
  for (const auto& [ts, pct] : sampler.process_usage())
    proc << ts << ',' << detail::format_double(pct) << "\n";

  std::cout << "replayed " << log.records.size() << " frames, mean_chi="
            << log.summary.mean_chi << " drop_rate=" << log.summary.drop_rate
            << "\n";
  return report_audit(audit_run_log(log));
}

int cmd_stress_test(const CommonArgs& args, double duration_s) {
  Config cfg = load_config(args);
  CpuSpec spec = resolve_cpu(cfg);
  MonitorConfig mon = MonitorConfig::from_config(cfg);
  StressSchedule schedule = resolve_stress(
      args.stress.empty() ? "default" : args.stress, duration_s);

  UsageSampler sampler(mon, spec);
  LiveStressInjector injector;
  sampler.start();
  injector.start(schedule, mon.cores);
  injector.run_to_completion();
  // One extra period so the sampler sees the tail.
  std::this_thread::sleep_for(std::chrono::duration<double>(1.0 / mon.rate_hz));
  sampler.stop();

  fs::path dir = ensure_out_dir(args);
  std::ofstream out(dir / "usage.csv", std::ios::binary);
  out << "t_ns,core_id,usage_pct\n";
  double peak = 0.0, sum = 0.0;
  long count = 0;
  for (const auto& s : sampler.history()) {
    out << s.timestamp << ',' << s.core_id << ','
        << detail::format_double(s.usage_pct) << "\n";
    if (s.core_id == -1) {
      peak = std::max(peak, s.usage_pct);
      sum += s.usage_pct;
      ++count;
    }
  }
  std::cout << "samples=" << count << " mean_chi=" << (count ? sum / count : 0.0)
            << " peak_chi=" << peak << "\n";
  return 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const std::string& out_dir) {
  RunLog a = read_run_log(path_a);
  RunLog b = read_run_log(path_b);
  auto hash_of = [](const RunLog& log, const std::string& name) {
    auto it = log.header.find("trace.hash");
    if (it == log.header.end())
      throw SchemaMismatchError(name + ": missing trace.hash header", "trace.hash");
    return it->second;
  };
  if (hash_of(a, path_a) != hash_of(b, path_b))
    throw TraceMismatchError("logs were produced from different traces");

  auto param_stats = [](const RunLog& log) {
    double phi_sum = 0, lambda_sum = 0;
    int phi_min = std::numeric_limits<int>::max();
    int lambda_min = std::numeric_limits<int>::max();
    for (const auto& r : log.records) {
      phi_sum += r.phi;
      lambda_sum += r.lambda;
      phi_min = std::min(phi_min, r.phi);
      lambda_min = std::min(lambda_min, r.lambda);
    }
    double n = log.records.empty() ? 1.0 : static_cast<double>(log.records.size());
    return std::array<double, 4>{phi_sum / n, lambda_sum / n,
                                 static_cast<double>(phi_min),
                                 static_cast<double>(lambda_min)};
  };
  auto sa = param_stats(a);
  auto sb = param_stats(b);

  std::ostringstream csv;
  csv << "metric,log_a,log_b,delta\n";
  auto row = [&](const std::string& name, double va, double vb) {
    csv << name << ',' << detail::format_double(va) << ','
        << detail::format_double(vb) << ',' << detail::format_double(va - vb)
        << "\n";
  };
  row("mean_chi", a.summary.mean_chi, b.summary.mean_chi);
  row("drop_rate", a.summary.drop_rate, b.summary.drop_rate);
  row("param_changes", static_cast<double>(a.summary.param_changes),
      static_cast<double>(b.summary.param_changes));
  row("mean_phi", sa[0], sb[0]);
  row("mean_lambda", sa[1], sb[1]);
  row("min_phi", sa[2], sb[2]);
  row("min_lambda", sa[3], sb[3]);

  std::cout << csv.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "compare.csv", std::ios::binary);
    out << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resource-aware VIO parameter-adaptation scheduler"};
  app.require_subcommand(1);

  CommonArgs probe_args, sim_args, replay_args, stress_args;
  std::string probe_format = "text";
  double replay_speed = 1.0;
  double stress_duration = 30.0;
  std::string compare_a, compare_b, compare_out;

  CLI::App* probe = app.add_subcommand("probe", "classify the host and print initial parameters");
  add_common_flags(probe, probe_args);
  probe->add_option("--format", probe_format, "text|csv");

  CLI::App* sim = app.add_subcommand("simulate", "closed-loop simulated run over a trace");
  add_common_flags(sim, sim_args);
  sim->add_option("--trace", sim_args.trace_dir, "EuRoC sequence directory");
  sim->add_option("--synthetic", sim_args.synthetic, "synthetic trace spec (k=v,...)");
  sim->add_option("--stress", sim_args.stress, "none|default|<schedule.csv>");
  sim->add_option("--adaptive", sim_args.adaptive, "run the policy (false = baseline)");

  CLI::App* replay = app.add_subcommand("replay", "replay a trace against live host usage");
  add_common_flags(replay, replay_args);
  replay->add_option("--trace", replay_args.trace_dir, "EuRoC sequence directory");
  replay->add_option("--synthetic", replay_args.synthetic, "synthetic trace spec");
  replay->add_option("--speed", replay_speed, "wall-clock speedup factor");

  CLI::App* stress = app.add_subcommand("stress-test", "live stress injection + monitoring only");
  add_common_flags(stress, stress_args);
  stress->add_option("--stress", stress_args.stress, "default|<schedule.csv>");
  stress->add_option("--duration", stress_duration, "seconds (for the default schedule)");

  CLI::App* compare = app.add_subcommand("compare", "diff two run logs from the same trace");
  compare->add_option("log_a", compare_a)->required();
  compare->add_option("log_b", compare_b)->required();
  compare->add_option("--out", compare_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (probe->parsed()) return cmd_probe(probe_args, probe_format);
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (replay->parsed()) return cmd_replay(replay_args, replay_speed);
    if (stress->parsed()) return cmd_stress_test(stress_args, stress_duration);
    if (compare->parsed()) return cmd_compare(compare_a, compare_b, compare_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
