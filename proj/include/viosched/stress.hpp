#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "viosched/errors.hpp"
#include "viosched/trace_io.hpp"
#include "viosched/types.hpp"

namespace viosched {

struct StressInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  double load_pct = 0.0;  // added per-core load
};

// Ordered, non-overlapping intervals of artificial background load. Time is
// relative to the start of the run (trace start in simulation, injector
// start in live mode).
class StressSchedule {
 public:
  StressSchedule() = default;

  explicit StressSchedule(std::vector<StressInterval> intervals)
      : intervals_(std::move(intervals)) {
    validate();
  }

  // CSV rows `start_s,end_s,load_pct`, optional `#` comments.
  static StressSchedule parse_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFoundError("stress schedule not found: " + path.string());
    std::vector<StressInterval> intervals;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = detail::strip_cr(line);
      if (line.empty() || line.front() == '#') continue;
      auto fields = detail::split_csv(line);
      if (fields.size() != 3)
        throw MalformedRowError("expected 3 fields, got " +
                                    std::to_string(fields.size()),
                                line_no);
      StressInterval iv;
      iv.start_s = detail::parse_double_field(fields[0], line_no);
      iv.end_s = detail::parse_double_field(fields[1], line_no);
      iv.load_pct = detail::parse_double_field(fields[2], line_no);
      intervals.push_back(iv);
    }
    return StressSchedule(std::move(intervals));
  }

  // Periodic pattern: `load` percent for `on_s`, idle for `off_s`, repeated
  // over [0, total_s).
  static StressSchedule periodic(double total_s, double on_s, double off_s,
                                 double load) {
    std::vector<StressInterval> intervals;
    for (double t = off_s; t + 1e-9 < total_s; t += on_s + off_s)
      intervals.push_back({t, std::min(t + on_s, total_s), load});
    return StressSchedule(std::move(intervals));
  }

  double load_at(double t) const {
    for (const auto& iv : intervals_)
      if (t >= iv.start_s && t < iv.end_s) return iv.load_pct;
    return 0.0;
  }

  // Time-weighted mean load over [t0, t1); what a usage sampler integrating
  // over a period would see.
  double average_load(double t0, double t1) const {
    if (!(t1 > t0)) return 0.0;
    double acc = 0.0;
    for (const auto& iv : intervals_) {
      double lo = std::max(t0, iv.start_s);
      double hi = std::min(t1, iv.end_s);
      if (hi > lo) acc += (hi - lo) * iv.load_pct;
    }
    return acc / (t1 - t0);
  }

  bool empty() const { return intervals_.empty(); }
  const std::vector<StressInterval>& intervals() const { return intervals_; }

 private:
  void validate() const {
    double prev_end = -1.0;
    for (const auto& iv : intervals_) {
      if (!(iv.end_s > iv.start_s))
        throw InvalidSpecError("stress interval must have end > start");
      if (iv.load_pct < 0.0 || iv.load_pct > 100.0)
        throw InvalidSpecError("stress load must be in [0, 100]");
      if (iv.start_s < prev_end)
        throw InvalidSpecError("stress intervals must be ordered and non-overlapping");
      prev_end = iv.end_s;
    }
  }

  std::vector<StressInterval> intervals_;
};

// Busy-spin load generator for live experiments. One thread per core runs a
// 10 ms duty cycle: spin for load% of the slot, sleep the rest. Pinning is
// best effort; the generator still loads the machine without it.
class LiveStressInjector {
 public:
  LiveStressInjector() = default;
  ~LiveStressInjector() { stop(); }

  LiveStressInjector(const LiveStressInjector&) = delete;
  LiveStressInjector& operator=(const LiveStressInjector&) = delete;

  void start(StressSchedule schedule, const std::vector<int>& cores) {
    if (running_) throw SamplerAlreadyRunningError("stress injector already running");
    schedule_ = std::move(schedule);
    stop_flag_.store(false, std::memory_order_relaxed);
    running_ = true;
    start_time_ = std::chrono::steady_clock::now();
    for (int core : cores)
      workers_.emplace_back([this, core] { worker(core); });
  }

  void stop() {
    if (!running_) return;
    stop_flag_.store(true, std::memory_order_relaxed);
    for (auto& w : workers_) w.join();
    workers_.clear();
    running_ = false;
  }

  // Blocks until the schedule has played out, then stops.
  void run_to_completion() {
    if (!running_) return;
    double end_s = 0.0;
    for (const auto& iv : schedule_.intervals()) end_s = std::max(end_s, iv.end_s);
    auto deadline = start_time_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(end_s));
    while (!stop_flag_.load(std::memory_order_relaxed) &&
           std::chrono::steady_clock::now() < deadline)
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    stop();
  }

  bool running() const { return running_; }

 private:
  void worker(int core) {
    pin_self(core);
    using clock = std::chrono::steady_clock;
    const auto slot = std::chrono::milliseconds(10);
    while (!stop_flag_.load(std::memory_order_relaxed)) {
      double t = std::chrono::duration<double>(clock::now() - start_time_).count();
      double duty = schedule_.load_at(t) / 100.0;
      auto slot_start = clock::now();
      auto busy_until = slot_start + std::chrono::duration_cast<clock::duration>(
                                         duty * slot);
      while (clock::now() < busy_until) {
        volatile unsigned long sink = 0;
        for (int i = 0; i < 1000; ++i) sink += i;
      }
      std::this_thread::sleep_until(slot_start + slot);
    }
  }

  static void pin_self(int core);

  StressSchedule schedule_;
  std::vector<std::thread> workers_;
  std::atomic<bool> stop_flag_{false};
  bool running_ = false;
  std::chrono::steady_clock::time_point start_time_;
};

}  // namespace viosched

#ifdef __linux__
#include <pthread.h>
#include <sched.h>

inline void viosched::LiveStressInjector::pin_self(int core) {
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(core, &set);
  pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
}
#else
inline void viosched::LiveStressInjector::pin_self(int) {}
#endif
