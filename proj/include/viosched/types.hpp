#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "viosched/errors.hpp"

namespace viosched {

// Timestamps are nanosecond integers end to end; float time would drift
// against the dataset clocks.
using Nanos = std::int64_t;

inline constexpr double kNanosPerSecond = 1e9;

inline double to_seconds(Nanos t) { return static_cast<double>(t) / kNanosPerSecond; }
inline Nanos from_seconds(double s) {
  return static_cast<Nanos>(std::llround(s * kNanosPerSecond));
}

// Static description of the processor: core count and clock range.
// Immutable after construction, freely shareable.
struct CpuSpec {
  int core_count = 0;
  double clock_min_ghz = 0.0;
  double clock_max_ghz = 0.0;

  void validate() const {
    if (core_count < 1)
      throw InvalidSpecError("CpuSpec: core_count must be >= 1, got " +
                             std::to_string(core_count));
    if (!(clock_min_ghz > 0.0) || !(clock_min_ghz <= clock_max_ghz))
      throw InvalidSpecError("CpuSpec: need 0 < clock_min <= clock_max, got [" +
                             std::to_string(clock_min_ghz) + ", " +
                             std::to_string(clock_max_ghz) + "]");
  }
};

// One core-usage reading. core_id -1 marks the aggregate over the
// monitored set.
struct UsageSample {
  Nanos timestamp = 0;
  int core_id = 0;
  double usage_pct = 0.0;  // [0, 100] per core
};

struct ImuSample {
  Nanos timestamp = 0;
  std::array<double, 3> angular_velocity{};    // rad/s
  std::array<double, 3> linear_acceleration{}; // m/s^2, gravity included
};

struct FrameEvent {
  Nanos timestamp = 0;
  std::int64_t frame_id = 0;
};

inline double norm3(const std::array<double, 3>& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

enum class Method { VinsMono, SMsckf, Okvis };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::VinsMono: return "vins_mono";
    case Method::SMsckf: return "smsckf";
    case Method::Okvis: return "okvis";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& name) {
  if (name == "vins_mono" || name == "vins" || name == "vinsmono")
    return Method::VinsMono;
  if (name == "smsckf" || name == "s-msckf" || name == "msckf")
    return Method::SMsckf;
  if (name == "okvis") return Method::Okvis;
  throw UnknownMethodError("unknown method '" + name + "'");
}

}  // namespace viosched
