#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <mutex>
#include <optional>

#include "viosched/config.hpp"
#include "viosched/errors.hpp"
#include "viosched/types.hpp"

namespace viosched {

struct AgilityConfig {
  int l_alpha = 40;  // window length; 0.2 s at a 200 Hz IMU
  double omega_threshold_init = 0.3;  // rad/s
  double accel_threshold_init = 0.5;  // m/s^2
  double threshold_step = 0.05;       // multiplicative step fraction
  double omega_threshold_min = 0.05;
  double omega_threshold_max = 2.0;
  double accel_threshold_min = 0.1;
  double accel_threshold_max = 3.0;
  bool gravity_compensation = true;
  double gravity = 9.81;

  static AgilityConfig from_config(const Config& cfg) {
    AgilityConfig a;
    a.l_alpha = static_cast<int>(cfg.get_int("agility.l_alpha", a.l_alpha));
    a.omega_threshold_init =
        cfg.get_double("agility.omega_threshold_init", a.omega_threshold_init);
    a.accel_threshold_init =
        cfg.get_double("agility.accel_threshold_init", a.accel_threshold_init);
    a.threshold_step = cfg.get_double("agility.threshold_step", a.threshold_step);
    a.omega_threshold_min =
        cfg.get_double("agility.omega_threshold_min", a.omega_threshold_min);
    a.omega_threshold_max =
        cfg.get_double("agility.omega_threshold_max", a.omega_threshold_max);
    a.accel_threshold_min =
        cfg.get_double("agility.accel_threshold_min", a.accel_threshold_min);
    a.accel_threshold_max =
        cfg.get_double("agility.accel_threshold_max", a.accel_threshold_max);
    a.gravity_compensation =
        cfg.get_bool("agility.gravity_compensation", a.gravity_compensation);
    a.gravity = cfg.get_double("agility.gravity", a.gravity);
    a.validate();
    return a;
  }

  void validate() const {
    if (l_alpha < 1) throw InvalidSpecError("agility.l_alpha must be >= 1");
    if (!(threshold_step > 0.0 && threshold_step < 1.0))
      throw InvalidSpecError("agility.threshold_step must be in (0, 1)");
    if (!(omega_threshold_min > 0.0) || omega_threshold_min > omega_threshold_max)
      throw InvalidSpecError("agility omega threshold clamps invalid");
    if (!(accel_threshold_min > 0.0) || accel_threshold_min > accel_threshold_max)
      throw InvalidSpecError("agility accel threshold clamps invalid");
  }
};

// Consistent view of the estimator at one point in time.
struct AgilitySnapshot {
  double omega_avg = 0.0;
  double accel_avg = 0.0;
  double omega_threshold = 0.0;
  double accel_threshold = 0.0;
  std::size_t window_size = 0;
  bool warm = false;
};

enum class ThresholdDirection { Raise, Lower };

// Sliding-window means of IMU motion magnitudes plus the adaptive thresholds
// the frame gate compares them against. One writer per stream; readers take
// snapshots under the same lock, so an (avg, threshold) pair is always from
// a single point in time.
//
// The averages are recomputed by summing the stored window in arrival order
// on every push. At the window lengths involved this is cheap, and it keeps
// the streaming value bit-identical to a brute-force mean over the same
// samples instead of accumulating incremental float error.
class AgilityEstimator {
 public:
  explicit AgilityEstimator(AgilityConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    omega_threshold_ = clamp_omega(cfg_.omega_threshold_init);
    accel_threshold_ = clamp_accel(cfg_.accel_threshold_init);
  }

  const AgilityConfig& config() const { return cfg_; }

  void push(const ImuSample& sample) {
    std::lock_guard<std::mutex> lock(mu_);
    if (sample.timestamp <= last_timestamp_)
      throw NonMonotonicTimestampError(
          "IMU timestamp " + std::to_string(sample.timestamp) +
          " not after " + std::to_string(last_timestamp_));
    last_timestamp_ = sample.timestamp;

    double omega_mag = norm3(sample.angular_velocity);
    double accel_mag = norm3(sample.linear_acceleration);
    if (cfg_.gravity_compensation)
      accel_mag = std::max(0.0, accel_mag - cfg_.gravity);

    window_.emplace_back(omega_mag, accel_mag);
    while (window_.size() > static_cast<std::size_t>(cfg_.l_alpha))
      window_.pop_front();

    double omega_sum = 0.0, accel_sum = 0.0;
    for (const auto& [w, a] : window_) {
      omega_sum += w;
      accel_sum += a;
    }
    omega_avg_ = omega_sum / static_cast<double>(window_.size());
    accel_avg_ = accel_sum / static_cast<double>(window_.size());
  }

  AgilitySnapshot snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return snapshot_locked();
  }

  // True iff both averages are strictly below their thresholds. Requires a
  // half-full window; callers that must not block on warm-up use
  // low_agility_if_warm().
  bool is_low_agility() const {
    std::lock_guard<std::mutex> lock(mu_);
    if (!warm_locked())
      throw InsufficientWindowError(
          "agility window holds " + std::to_string(window_.size()) +
          " samples, need at least l_alpha/2 = " + std::to_string(cfg_.l_alpha) + "/2");
    return omega_avg_ < omega_threshold_ && accel_avg_ < accel_threshold_;
  }

  std::optional<bool> low_agility_if_warm() const {
    std::lock_guard<std::mutex> lock(mu_);
    if (!warm_locked()) return std::nullopt;
    return omega_avg_ < omega_threshold_ && accel_avg_ < accel_threshold_;
  }

  // Multiplicative step on both channels, clamped to the configured range.
  void adjust_thresholds(ThresholdDirection dir) {
    std::lock_guard<std::mutex> lock(mu_);
    double factor = dir == ThresholdDirection::Raise ? 1.0 + cfg_.threshold_step
                                                     : 1.0 - cfg_.threshold_step;
    omega_threshold_ = clamp_omega(omega_threshold_ * factor);
    accel_threshold_ = clamp_accel(accel_threshold_ * factor);
  }

  std::size_t window_size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return window_.size();
  }

 private:
  AgilitySnapshot snapshot_locked() const {
    AgilitySnapshot s;
    s.omega_avg = omega_avg_;
    s.accel_avg = accel_avg_;
    s.omega_threshold = omega_threshold_;
    s.accel_threshold = accel_threshold_;
    s.window_size = window_.size();
    s.warm = warm_locked();
    return s;
  }

  bool warm_locked() const {
    return 2 * window_.size() >= static_cast<std::size_t>(cfg_.l_alpha);
  }

  double clamp_omega(double v) const {
    return std::clamp(v, cfg_.omega_threshold_min, cfg_.omega_threshold_max);
  }
  double clamp_accel(double v) const {
    return std::clamp(v, cfg_.accel_threshold_min, cfg_.accel_threshold_max);
  }

  AgilityConfig cfg_;
  mutable std::mutex mu_;
  std::deque<std::pair<double, double>> window_;  // (omega_mag, accel_mag)
  Nanos last_timestamp_ = std::numeric_limits<Nanos>::min();
  double omega_avg_ = 0.0;
  double accel_avg_ = 0.0;
  double omega_threshold_ = 0.0;
  double accel_threshold_ = 0.0;
};

}  // namespace viosched
