#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "viosched/errors.hpp"
#include "viosched/hash.hpp"
#include "viosched/policy.hpp"
#include "viosched/types.hpp"

namespace viosched {

struct Trace {
  std::vector<ImuSample> imu;
  std::vector<FrameEvent> frames;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double_field(const std::string& s, long line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw MalformedRowError("expected finite number, got '" + s + "'", line_no);
  return v;
}

inline Nanos parse_timestamp_field(const std::string& s, long line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  long long v = std::strtoll(begin, &end, 10);
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == begin || *end != '\0')
    throw MalformedRowError("expected integer timestamp, got '" + s + "'", line_no);
  return static_cast<Nanos>(v);
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

// Shortest decimal that round-trips the exact double; keeps logs both
// lossless and byte-stable.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// ASL IMU stream: one header line, then
// `timestamp_ns,w_x,w_y,w_z,a_x,a_y,a_z`. Line numbers in errors are
// physical (1-based, header included).
inline std::vector<ImuSample> parse_imu_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError("IMU csv not found: " + path.string());
  std::vector<ImuSample> out;
  std::string line;
  long line_no = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (seen_data)
        throw MalformedRowError("comment after data section", line_no);
      continue;  // header / leading comments
    }
    seen_data = true;
    auto fields = detail::split_csv(line);
    if (fields.size() != 7)
      throw MalformedRowError("expected 7 fields, got " +
                                  std::to_string(fields.size()),
                              line_no);
    ImuSample s;
    s.timestamp = detail::parse_timestamp_field(fields[0], line_no);
    for (int i = 0; i < 3; ++i)
      s.angular_velocity[i] = detail::parse_double_field(fields[1 + i], line_no);
    for (int i = 0; i < 3; ++i)
      s.linear_acceleration[i] = detail::parse_double_field(fields[4 + i], line_no);
    if (!out.empty() && s.timestamp <= out.back().timestamp)
      throw NonMonotonicTimestampError(
          path.string() + ": timestamps not strictly increasing at line " +
          std::to_string(line_no));
    out.push_back(s);
  }
  return out;
}

// ASL camera stream: header line, then `timestamp_ns,filename`. Filenames
// are discarded; only the timing reaches the policy.
inline std::vector<FrameEvent> parse_cam_timestamps(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError("camera csv not found: " + path.string());
  std::vector<FrameEvent> out;
  std::string line;
  long line_no = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (seen_data)
        throw MalformedRowError("comment after data section", line_no);
      continue;
    }
    seen_data = true;
    auto fields = detail::split_csv(line);
    if (fields.size() != 2)
      throw MalformedRowError("expected 2 fields, got " +
                                  std::to_string(fields.size()),
                              line_no);
    FrameEvent e;
    e.timestamp = detail::parse_timestamp_field(fields[0], line_no);
    e.frame_id = static_cast<std::int64_t>(out.size());
    if (!out.empty() && e.timestamp <= out.back().timestamp)
      throw NonMonotonicTimestampError(
          path.string() + ": timestamps not strictly increasing at line " +
          std::to_string(line_no));
    out.push_back(e);
  }
  return out;
}

// Loads `<seq>/mav0/imu0/data.csv` and `<seq>/mav0/cam0/data.csv`.
inline Trace load_euroc_trace(const std::filesystem::path& sequence_dir) {
  Trace t;
  t.imu = parse_imu_csv(sequence_dir / "mav0" / "imu0" / "data.csv");
  t.frames = parse_cam_timestamps(sequence_dir / "mav0" / "cam0" / "data.csv");
  return t;
}

enum class MotionKind { Constant, Sinusoid, Piecewise };

// Scalar motion-magnitude program for synthetic traces. Angular velocity is
// emitted about +z and the acceleration offset along +z on top of gravity,
// so the gravity-compensated norms equal the programmed magnitudes exactly.
struct MotionProfile {
  MotionKind kind = MotionKind::Constant;
  double omega_low = 0.1;   // rad/s
  double accel_low = 0.2;   // m/s^2
  double omega_high = 1.0;
  double accel_high = 1.5;
  double period_s = 8.0;    // sinusoid period / piecewise segment length

  double omega_at(double t) const { return value_at(t, omega_low, omega_high); }
  double accel_at(double t) const { return value_at(t, accel_low, accel_high); }

 private:
  double value_at(double t, double low, double high) const {
    switch (kind) {
      case MotionKind::Constant:
        return low;
      case MotionKind::Sinusoid: {
        double mid = 0.5 * (low + high);
        double amp = 0.5 * (high - low);
        return mid + amp * std::sin(2.0 * M_PI * t / period_s);
      }
      case MotionKind::Piecewise: {
        long seg = static_cast<long>(std::floor(t / period_s));
        return (seg % 2 == 0) ? low : high;
      }
    }
    return low;
  }
};

struct SyntheticSpec {
  double duration_s = 10.0;
  double imu_rate_hz = 200.0;
  double frame_rate_hz = 20.0;
  MotionProfile motion;
  double magnitude_noise_std = 0.0;
  double gravity = 9.81;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(duration_s > 0.0) || !(imu_rate_hz > 0.0) || !(frame_rate_hz > 0.0))
      throw InvalidSpecError("synthetic trace rates and duration must be > 0");
    if (magnitude_noise_std < 0.0)
      throw InvalidSpecError("synthetic magnitude_noise_std must be >= 0");
  }
};

inline Trace generate_synthetic_trace(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto jitter = [&]() {
    return spec.magnitude_noise_std > 0.0 ? spec.magnitude_noise_std * noise(rng)
                                          : 0.0;
  };

  Trace t;
  const Nanos imu_period = from_seconds(1.0 / spec.imu_rate_hz);
  const Nanos frame_period = from_seconds(1.0 / spec.frame_rate_hz);
  const long n_imu = std::lround(spec.duration_s * spec.imu_rate_hz);
  const long n_frames = std::lround(spec.duration_s * spec.frame_rate_hz);

  t.imu.reserve(n_imu);
  for (long i = 0; i < n_imu; ++i) {
    ImuSample s;
    s.timestamp = i * imu_period;
    double ts = to_seconds(s.timestamp);
    double w = std::max(0.0, spec.motion.omega_at(ts) + jitter());
    double a = std::max(0.0, spec.motion.accel_at(ts) + jitter());
    s.angular_velocity = {0.0, 0.0, w};
    s.linear_acceleration = {0.0, 0.0, spec.gravity + a};
    t.imu.push_back(s);
  }
  t.frames.reserve(n_frames);
  for (long j = 0; j < n_frames; ++j)
    t.frames.push_back(FrameEvent{j * frame_period, j});
  return t;
}

// CLI shorthand, e.g.
// "duration=30,profile=sinusoid,period=8,imu_rate=200,frame_rate=20,seed=7".
inline SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw InvalidSpecError("synthetic spec: expected key=value, got '" + item + "'");
    std::string key = item.substr(0, eq);
    std::string value = item.substr(eq + 1);
    auto num = [&]() {
      char* end = nullptr;
      double v = std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0')
        throw InvalidSpecError("synthetic spec: bad number for '" + key + "'");
      return v;
    };
    if (key == "duration") spec.duration_s = num();
    else if (key == "imu_rate") spec.imu_rate_hz = num();
    else if (key == "frame_rate") spec.frame_rate_hz = num();
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(num());
    else if (key == "noise") spec.magnitude_noise_std = num();
    else if (key == "period") spec.motion.period_s = num();
    else if (key == "omega_low") spec.motion.omega_low = num();
    else if (key == "omega_high") spec.motion.omega_high = num();
    else if (key == "accel_low") spec.motion.accel_low = num();
    else if (key == "accel_high") spec.motion.accel_high = num();
    else if (key == "profile") {
      if (value == "constant-low") {
        spec.motion.kind = MotionKind::Constant;
      } else if (value == "constant-high") {
        spec.motion.kind = MotionKind::Constant;
        spec.motion.omega_low = spec.motion.omega_high;
        spec.motion.accel_low = spec.motion.accel_high;
      } else if (value == "sinusoid") {
        spec.motion.kind = MotionKind::Sinusoid;
      } else if (value == "piecewise") {
        spec.motion.kind = MotionKind::Piecewise;
      } else {
        throw InvalidSpecError("synthetic spec: unknown profile '" + value + "'");
      }
    } else {
      throw InvalidSpecError("synthetic spec: unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

// Identity of the sensor data alone (timestamps and values, no config), so
// two runs over the same trace can be compared regardless of policy settings.
inline std::uint64_t trace_hash(const Trace& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : t.imu) {
    h = fnv1a64_append(h, static_cast<std::uint64_t>(s.timestamp));
    for (double v : s.angular_velocity) h = fnv1a64_append(h, std::bit_cast<std::uint64_t>(v));
    for (double v : s.linear_acceleration) h = fnv1a64_append(h, std::bit_cast<std::uint64_t>(v));
  }
  for (const auto& f : t.frames) {
    h = fnv1a64_append(h, static_cast<std::uint64_t>(f.timestamp));
    h = fnv1a64_append(h, static_cast<std::uint64_t>(f.frame_id));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Run logs

struct RunRecord {
  Nanos t_ns = 0;
  std::int64_t frame_id = 0;
  Action action = Action::Process;
  DecisionReason reason = DecisionReason::ForcedProcess;
  double chi = 0.0;
  double delta = 0.0;
  int phi = 0;
  int lambda = 0;
  int w = 0;  // method-relevant window; 0 when not applicable
  double omega_avg = 0.0;
  double accel_avg = 0.0;
  double omega_T = 0.0;
  double accel_T = 0.0;
  long kappa_f = 0;
  long kappa_p = 0;

  bool operator==(const RunRecord&) const = default;
};

struct RunSummary {
  double mean_chi = 0.0;
  double drop_rate = 0.0;
  long param_changes = 0;
  long stale_decisions = 0;
  std::optional<double> convergence_time_s;  // set when stress was scheduled
  bool not_converged = false;

  bool operator==(const RunSummary&) const = default;
};

struct RunLog {
  std::map<std::string, std::string> header;
  std::vector<RunRecord> records;
  RunSummary summary;
};

inline const char* run_log_columns() {
  return "t_ns,frame_id,action,reason,chi,delta,phi,lambda,w,omega_avg,"
         "accel_avg,omega_T,accel_T,kappa_f,kappa_p";
}

inline void write_run_log(const std::filesystem::path& path, const RunLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& [k, v] : log.header) out << "# " << k << " = " << v << "\n";
  out << run_log_columns() << "\n";
  for (const auto& r : log.records) {
    out << r.t_ns << ',' << r.frame_id << ',' << to_string(r.action) << ','
        << to_string(r.reason) << ',' << detail::format_double(r.chi) << ','
        << detail::format_double(r.delta) << ',' << r.phi << ',' << r.lambda
        << ',' << r.w << ',' << detail::format_double(r.omega_avg) << ','
        << detail::format_double(r.accel_avg) << ','
        << detail::format_double(r.omega_T) << ','
        << detail::format_double(r.accel_T) << ',' << r.kappa_f << ','
        << r.kappa_p << "\n";
  }
  const RunSummary& s = log.summary;
  out << "# summary.mean_chi = " << detail::format_double(s.mean_chi) << "\n";
  out << "# summary.drop_rate = " << detail::format_double(s.drop_rate) << "\n";
  out << "# summary.param_changes = " << s.param_changes << "\n";
  out << "# summary.stale_decisions = " << s.stale_decisions << "\n";
  if (s.convergence_time_s)
    out << "# summary.convergence_time_s = "
        << detail::format_double(*s.convergence_time_s) << "\n";
  if (s.not_converged) out << "# summary.not_converged = true\n";
  if (!out) throw IoError("write failed: " + path.string());
}

inline RunLog read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFoundError("run log not found: " + path.string());
  RunLog log;
  std::string line;
  long line_no = 0;
  bool saw_columns = false;

  auto parse_header_line = [&](const std::string& body) {
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw MalformedRowError("header line without '='", line_no);
    std::string key = Config::trim(body.substr(0, eq));
    std::string value = Config::trim(body.substr(eq + 1));
    if (key.rfind("summary.", 0) == 0) {
      std::string field = key.substr(8);
      if (field == "mean_chi")
        log.summary.mean_chi = detail::parse_double_field(value, line_no);
      else if (field == "drop_rate")
        log.summary.drop_rate = detail::parse_double_field(value, line_no);
      else if (field == "param_changes")
        log.summary.param_changes =
            static_cast<long>(detail::parse_timestamp_field(value, line_no));
      else if (field == "stale_decisions")
        log.summary.stale_decisions =
            static_cast<long>(detail::parse_timestamp_field(value, line_no));
      else if (field == "convergence_time_s")
        log.summary.convergence_time_s =
            detail::parse_double_field(value, line_no);
      else if (field == "not_converged")
        log.summary.not_converged = (value == "true");
      else
        throw SchemaMismatchError(
            path.string() + ": unknown summary field '" + field + "'", field);
    } else {
      log.header[key] = value;
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      parse_header_line(line.substr(1));
      continue;
    }
    if (!saw_columns) {
      if (line != run_log_columns()) {
        // Name the first column that disagrees.
        auto expected = detail::split_csv(run_log_columns());
        auto got = detail::split_csv(line);
        for (std::size_t i = 0; i < expected.size(); ++i) {
          if (i >= got.size() || got[i] != expected[i])
            throw SchemaMismatchError(
                path.string() + ": column '" + expected[i] + "' missing or misplaced",
                expected[i]);
        }
        throw SchemaMismatchError(path.string() + ": unexpected extra columns",
                                  "");
      }
      saw_columns = true;
      continue;
    }
    auto fields = detail::split_csv(line);
    if (fields.size() != 15)
      throw MalformedRowError("expected 15 fields, got " +
                                  std::to_string(fields.size()),
                              line_no);
    RunRecord r;
    r.t_ns = detail::parse_timestamp_field(fields[0], line_no);
    r.frame_id = detail::parse_timestamp_field(fields[1], line_no);
    r.action = action_from_string(fields[2]);
    r.reason = reason_from_string(fields[3]);
    r.chi = detail::parse_double_field(fields[4], line_no);
    r.delta = detail::parse_double_field(fields[5], line_no);
    r.phi = static_cast<int>(detail::parse_timestamp_field(fields[6], line_no));
    r.lambda = static_cast<int>(detail::parse_timestamp_field(fields[7], line_no));
    r.w = static_cast<int>(detail::parse_timestamp_field(fields[8], line_no));
    r.omega_avg = detail::parse_double_field(fields[9], line_no);
    r.accel_avg = detail::parse_double_field(fields[10], line_no);
    r.omega_T = detail::parse_double_field(fields[11], line_no);
    r.accel_T = detail::parse_double_field(fields[12], line_no);
    r.kappa_f = static_cast<long>(detail::parse_timestamp_field(fields[13], line_no));
    r.kappa_p = static_cast<long>(detail::parse_timestamp_field(fields[14], line_no));
    log.records.push_back(r);
  }
  if (!saw_columns)
    throw SchemaMismatchError(path.string() + ": no column header found", "");
  return log;
}

}  // namespace viosched
