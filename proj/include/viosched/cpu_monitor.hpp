#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "viosched/config.hpp"
#include "viosched/errors.hpp"
#include "viosched/stress.hpp"
#include "viosched/types.hpp"

#ifdef __linux__
#include <sched.h>
#include <unistd.h>
#endif

namespace viosched {

enum class UsageAggregate { Mean, Max, Sum };

inline UsageAggregate aggregate_from_string(const std::string& s) {
  if (s == "mean") return UsageAggregate::Mean;
  if (s == "max") return UsageAggregate::Max;
  if (s == "sum") return UsageAggregate::Sum;
  throw ConfigError("monitor.aggregate must be mean|max|sum, got '" + s + "'");
}

inline double aggregate_usage(UsageAggregate mode, const std::vector<double>& per_core) {
  if (per_core.empty()) return 0.0;
  double acc = 0.0;
  switch (mode) {
    case UsageAggregate::Mean:
      for (double v : per_core) acc += v;
      return acc / static_cast<double>(per_core.size());
    case UsageAggregate::Max:
      for (double v : per_core) acc = std::max(acc, v);
      return acc;
    case UsageAggregate::Sum:
      for (double v : per_core) acc += v;
      return acc;
  }
  return 0.0;
}

// Wait-free publication slot for the most recent sample. The sampler never
// blocks on readers; readers retry on the rare overlap with a publish.
class LatestUsageSlot {
 public:
  void publish(const UsageSample& s) {
    std::uint32_t n = seq_.load(std::memory_order_relaxed);
    buf_[(n + 1) & 1] = s;
    seq_.store(n + 1, std::memory_order_release);
  }

  std::optional<UsageSample> latest() const {
    for (;;) {
      std::uint32_t n = seq_.load(std::memory_order_acquire);
      if (n == 0) return std::nullopt;
      UsageSample s = buf_[n & 1];
      std::atomic_thread_fence(std::memory_order_acquire);
      if (seq_.load(std::memory_order_relaxed) == n) return s;
    }
  }

 private:
  std::atomic<std::uint32_t> seq_{0};
  UsageSample buf_[2];
};

namespace detail {

struct CoreTimes {
  std::uint64_t busy = 0;
  std::uint64_t total = 0;
};

// Parses `cpuN user nice system idle iowait irq softirq steal ...` rows.
// Index in the returned vector is the core id.
inline std::vector<CoreTimes> read_proc_stat(const std::string& path = "/proc/stat") {
  std::ifstream in(path);
  if (!in) throw UnreadableSystemInfoError("cannot read " + path);
  std::vector<CoreTimes> cores;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("cpu", 0) != 0 || line.size() < 4 || !std::isdigit(line[3]))
      continue;
    std::istringstream ss(line);
    std::string label;
    ss >> label;
    std::uint64_t v = 0, total = 0, idle_all = 0;
    int field = 0;
    while (ss >> v) {
      total += v;
      if (field == 3 || field == 4) idle_all += v;  // idle + iowait
      ++field;
    }
    int core_id = std::stoi(label.substr(3));
    if (core_id >= static_cast<int>(cores.size())) cores.resize(core_id + 1);
    cores[core_id] = CoreTimes{total - idle_all, total};
  }
  if (cores.empty())
    throw UnreadableSystemInfoError("no per-core rows in " + path);
  return cores;
}

inline std::optional<double> read_sysfs_khz(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  double khz = 0.0;
  in >> khz;
  if (!in || khz <= 0.0) return std::nullopt;
  return khz;
}

// utime + stime of this process, in clock ticks.
inline std::optional<std::uint64_t> read_self_ticks() {
  std::ifstream in("/proc/self/stat");
  if (!in) return std::nullopt;
  std::string content;
  std::getline(in, content);
  // comm can contain spaces; fields start after the closing paren.
  auto paren = content.rfind(')');
  if (paren == std::string::npos) return std::nullopt;
  std::istringstream ss(content.substr(paren + 1));
  std::string f;
  std::uint64_t utime = 0, stime = 0;
  for (int i = 1; i <= 12 && ss >> f; ++i) {
    if (i == 11) utime = std::stoull(f);
    if (i == 12) stime = std::stoull(f);
  }
  return utime + stime;
}

}  // namespace detail

// CPU description, from the config override when given (reproducible runs)
// or probed from the host. Clock probing prefers cpufreq limits and falls
// back to the nominal frequency in /proc/cpuinfo with min = max.
inline CpuSpec probe_cpu_spec(const Config& cfg = Config{}) {
  const bool has_mu = cfg.has("cpu.override.mu");
  const bool has_min = cfg.has("cpu.override.nu_min");
  const bool has_max = cfg.has("cpu.override.nu_max");
  if (has_mu || has_min || has_max) {
    if (!(has_mu && has_min && has_max))
      throw InvalidSpecError(
          "cpu.override requires all of mu, nu_min, nu_max");
    CpuSpec spec;
    spec.core_count = static_cast<int>(cfg.get_int("cpu.override.mu", 0));
    spec.clock_min_ghz = cfg.get_double("cpu.override.nu_min", 0.0);
    spec.clock_max_ghz = cfg.get_double("cpu.override.nu_max", 0.0);
    spec.validate();
    return spec;
  }

#ifdef __linux__
  CpuSpec spec;
  try {
    spec.core_count = static_cast<int>(detail::read_proc_stat().size());
  } catch (const UnreadableSystemInfoError&) {
    unsigned hc = std::thread::hardware_concurrency();
    if (hc == 0) throw;
    spec.core_count = static_cast<int>(hc);
  }

  auto max_khz =
      detail::read_sysfs_khz("/sys/devices/system/cpu/cpu0/cpufreq/cpuinfo_max_freq");
  auto min_khz =
      detail::read_sysfs_khz("/sys/devices/system/cpu/cpu0/cpufreq/cpuinfo_min_freq");
  if (max_khz) {
    spec.clock_max_ghz = *max_khz / 1e6;
    spec.clock_min_ghz = min_khz ? *min_khz / 1e6 : spec.clock_max_ghz;
    spec.validate();
    return spec;
  }

  // No cpufreq (common in VMs): take the nominal frequency.
  std::ifstream in("/proc/cpuinfo");
  if (in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("cpu MHz", 0) == 0) {
        auto colon = line.find(':');
        if (colon != std::string::npos) {
          double mhz = std::strtod(line.c_str() + colon + 1, nullptr);
          if (mhz > 0.0) {
            spec.clock_max_ghz = spec.clock_min_ghz = mhz / 1000.0;
            spec.validate();
            return spec;
          }
        }
      }
    }
  }
  throw UnreadableSystemInfoError(
      "cannot determine clock speed (no cpufreq, no cpu MHz) and no cpu.override");
#else
  throw UnreadableSystemInfoError("live CPU probing unsupported on this platform");
#endif
}

// Pins the whole process. In simulation mode this only records intent (the
// return value); live failures other than a bad core id are reported as
// AffinityUnsupported and are non-fatal by contract.
inline bool pin_process_to_core(int core_id, const CpuSpec& spec,
                                bool simulation = false) {
  if (core_id < 0 || core_id >= spec.core_count)
    throw InvalidCoreIdError("core " + std::to_string(core_id) +
                             " out of range, have " +
                             std::to_string(spec.core_count));
  if (simulation) return true;
#ifdef __linux__
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(core_id, &set);
  if (sched_setaffinity(0, sizeof(set), &set) != 0)
    throw AffinityUnsupportedError("sched_setaffinity failed for core " +
                                   std::to_string(core_id));
  return true;
#else
  throw AffinityUnsupportedError("affinity control unsupported on this platform");
#endif
}

struct MonitorConfig {
  std::vector<int> cores{0};
  double rate_hz = 1.0;
  UsageAggregate aggregate = UsageAggregate::Mean;

  static MonitorConfig from_config(const Config& cfg) {
    MonitorConfig m;
    m.cores = cfg.get_int_list("monitor.cores", m.cores);
    m.rate_hz = cfg.get_double("monitor.rate_hz", m.rate_hz);
    m.aggregate = aggregate_from_string(cfg.get_str("monitor.aggregate", "mean"));
    if (m.rate_hz <= 0.0) throw InvalidSpecError("monitor.rate_hz must be > 0");
    if (m.cores.empty()) throw InvalidSpecError("monitor.cores must not be empty");
    return m;
  }

  Nanos period_ns() const { return from_seconds(1.0 / rate_hz); }
};

// Per-core usage sampler over /proc/stat. One sample per monitored core per
// period from differenced counters, plus an aggregate sample (core_id = -1)
// published to the wait-free slot for the decision path. Process usage is
// recorded alongside for the logs; the policy never reads it.
class UsageSampler {
 public:
  UsageSampler(MonitorConfig cfg, const CpuSpec& spec)
      : cfg_(std::move(cfg)), spec_(spec) {
    for (int c : cfg_.cores)
      if (c < 0 || c >= spec_.core_count)
        throw InvalidCoreIdError("monitor core " + std::to_string(c) +
                                 " out of range, have " +
                                 std::to_string(spec_.core_count));
  }

  ~UsageSampler() { stop(); }

  UsageSampler(const UsageSampler&) = delete;
  UsageSampler& operator=(const UsageSampler&) = delete;

  void start() {
    if (running_.exchange(true))
      throw SamplerAlreadyRunningError("usage sampler already running");
    stop_flag_.store(false, std::memory_order_relaxed);
    worker_ = std::thread([this] { loop(); });
  }

  void stop() {
    if (!running_.load()) return;
    stop_flag_.store(true, std::memory_order_relaxed);
    if (worker_.joinable()) worker_.join();
    running_.store(false);
  }

  // Non-blocking: the aggregate over monitored cores, newest first.
  std::optional<UsageSample> latest() const { return slot_.latest(); }

  std::vector<UsageSample> history() const {
    std::lock_guard<std::mutex> lock(mu_);
    return history_;
  }

  std::vector<std::pair<Nanos, double>> process_usage() const {
    std::lock_guard<std::mutex> lock(mu_);
    return process_usage_;
  }

  const MonitorConfig& config() const { return cfg_; }

 private:
  void loop() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(1.0 / cfg_.rate_hz));
    auto prev = detail::read_proc_stat();
    auto prev_ticks = detail::read_self_ticks();
    auto next_tick = clock::now() + period;
    const double tick_hz = static_cast<double>(sysconf(_SC_CLK_TCK));

    while (!stop_flag_.load(std::memory_order_relaxed)) {
      std::this_thread::sleep_until(next_tick);
      next_tick += period;
      auto cur = detail::read_proc_stat();
      Nanos now = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();

      std::vector<double> per_core;
      std::vector<UsageSample> batch;
      for (int c : cfg_.cores) {
        if (c >= static_cast<int>(cur.size()) || c >= static_cast<int>(prev.size()))
          continue;
        double dt = static_cast<double>(cur[c].total - prev[c].total);
        double db = static_cast<double>(cur[c].busy - prev[c].busy);
        double pct = dt > 0.0 ? std::clamp(100.0 * db / dt, 0.0, 100.0)
                              : last_pct_.count(c) ? last_pct_[c] : 0.0;
        last_pct_[c] = pct;
        per_core.push_back(pct);
        batch.push_back(UsageSample{now, c, pct});
      }
      prev = std::move(cur);

      UsageSample agg{now, -1, aggregate_usage(cfg_.aggregate, per_core)};
      slot_.publish(agg);

      auto cur_ticks = detail::read_self_ticks();
      std::optional<double> proc_pct;
      if (prev_ticks && cur_ticks && tick_hz > 0) {
        double busy_s = static_cast<double>(*cur_ticks - *prev_ticks) / tick_hz;
        proc_pct = 100.0 * busy_s * cfg_.rate_hz;
        prev_ticks = cur_ticks;
      }

      {
        std::lock_guard<std::mutex> lock(mu_);
        for (const auto& s : batch) history_.push_back(s);
        history_.push_back(agg);
        if (proc_pct) process_usage_.emplace_back(now, *proc_pct);
      }
    }
  }

  MonitorConfig cfg_;
  CpuSpec spec_;
  std::thread worker_;
  std::atomic<bool> running_{false};
  std::atomic<bool> stop_flag_{false};
  LatestUsageSlot slot_;
  mutable std::mutex mu_;
  std::vector<UsageSample> history_;
  std::vector<std::pair<Nanos, double>> process_usage_;
  std::map<int, double> last_pct_;
};

// Deterministic analogue of the live sampler: usage over each period is the
// scheduled background load (plus whatever busy time the caller injects).
// Used by monitor-only runs in simulation mode; the closed-loop simulator
// does its own accounting with the same formula.
class SimUsageSampler {
 public:
  SimUsageSampler(MonitorConfig cfg, StressSchedule schedule)
      : cfg_(std::move(cfg)), schedule_(std::move(schedule)) {}

  // Samples for t in (0, duration_s], one per period per monitored core,
  // plus the aggregate (core_id = -1).
  std::vector<UsageSample> generate(double duration_s,
                                    double busy_ms_per_period = 0.0) const {
    std::vector<UsageSample> out;
    const double period_s = 1.0 / cfg_.rate_hz;
    const long n = std::lround(duration_s * cfg_.rate_hz);
    for (long k = 1; k <= n; ++k) {
      double t1 = k * period_s;
      double t0 = t1 - period_s;
      double pct = sim_usage_pct(busy_ms_per_period, period_s,
                                 schedule_.average_load(t0, t1));
      Nanos ts = from_seconds(t1);
      std::vector<double> per_core(cfg_.cores.size(), pct);
      for (std::size_t i = 0; i < cfg_.cores.size(); ++i)
        out.push_back(UsageSample{ts, cfg_.cores[i], pct});
      out.push_back(UsageSample{ts, -1, aggregate_usage(cfg_.aggregate, per_core)});
    }
    return out;
  }

  static double sim_usage_pct(double busy_ms, double period_s, double background_pct) {
    double busy_pct = 100.0 * busy_ms / (period_s * 1000.0);
    return std::min(100.0, busy_pct + background_pct);
  }

 private:
  MonitorConfig cfg_;
  StressSchedule schedule_;
};

}  // namespace viosched
