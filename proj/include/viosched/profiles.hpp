#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "viosched/config.hpp"
#include "viosched/errors.hpp"
#include "viosched/hash.hpp"
#include "viosched/types.hpp"

namespace viosched {

// Hardware class selecting the initial parameter law. R1: weak single-core
// parts below 1.2 GHz. R2: multi-core, 1.2-2.1 GHz. R3: multi-core above
// 2.1 GHz. Hosts outside the three boxes (single-core >= 1.2 GHz,
// multi-core < 1.2 GHz) fall back to R1 so the mapping is total; callers can
// inspect the out_of_table flag to warn.
enum class Region { R1, R2, R3 };

inline std::string to_string(Region r) {
  switch (r) {
    case Region::R1: return "R1";
    case Region::R2: return "R2";
    case Region::R3: return "R3";
  }
  return "?";
}

struct RegionClassification {
  Region region = Region::R1;
  bool out_of_table = false;
};

inline RegionClassification classify_region_ex(const CpuSpec& spec) {
  spec.validate();
  const double v = spec.clock_max_ghz;
  if (spec.core_count == 1)
    return {Region::R1, v >= 1.2};
  if (v < 1.2) return {Region::R1, true};
  if (v <= 2.1) return {Region::R2, false};
  return {Region::R3, false};
}

inline Region classify_region(const CpuSpec& spec) {
  return classify_region_ex(spec).region;
}

struct Resolution {
  int width = 752;
  int height = 480;
  double megapixels() const { return width * height / 1e6; }
  bool operator==(const Resolution&) const = default;
};

// The adaptable knobs. Fields a method does not have stay disengaged and are
// never mutated by any update law.
struct ParamSet {
  int phi = 0;     // feature budget per processed frame
  int lambda = 0;  // solver / linearization iteration budget
  std::optional<int> window;           // sliding-window poses (VINS-Mono)
  std::optional<int> window_temporal;  // W_t (OKVIS)
  std::optional<int> window_keyframe;  // W_kf (OKVIS)
  std::optional<int> grid_rows;        // feature grid (S-MSCKF)
  std::optional<int> grid_cols;
  Resolution resolution;

  bool operator==(const ParamSet&) const = default;

  // Sum of whatever windows the method keeps; what the cost model charges.
  int total_window() const {
    return window.value_or(0) + window_temporal.value_or(0) +
           window_keyframe.value_or(0);
  }
};

struct ProfileBounds {
  int phi_min = 1;
  int phi_nominal = 1;
  int lambda_min = 1;
  int lambda_nominal = 1;
  int step_phi = 10;
  int step_lambda = 1;
};

// Which knobs a method allows the policy to move online, which are pinned at
// initialization, and the bounds the update laws clamp against.
struct MethodProfile {
  Method method = Method::VinsMono;
  bool phi_online = false;
  bool lambda_online = false;
  std::vector<std::string> fixed_at_compile;
  std::vector<std::string> fixed_at_init;
  ProfileBounds bounds;
};

// Coefficients for one (method, region) cell. Laws are evaluated in MHz of
// nu_max; outputs are rounded half-up and clamped.
struct RegionCoefficients {
  std::array<double, 2> phi_affine{0.0, 0.0};     // a0 + a1 * MHz
  std::array<double, 2> lambda_affine{0.0, 0.0};  // b0 + b1 * MHz
  std::optional<std::array<double, 3>> window_poly;  // p0 + p1*MHz + p2*MHz^2
  std::optional<std::array<double, 2>> grid_rows_affine;
  std::optional<std::array<double, 2>> grid_cols_affine;
  std::optional<int> window_temporal;
  std::optional<int> window_keyframe;
  int phi_min = 1;
  int phi_cap = 10000;
  int lambda_min = 1;
  int lambda_cap = 10000;
  int step_phi = 10;
  int step_lambda = 1;
  int resolution_downscale = 1;
};

inline int round_half_up(double x) {
  return static_cast<int>(std::floor(x + 0.5));
}

// Per-(method, region) coefficient table. The built-in values are repo
// calibration data: they follow the published functional shapes (quadratic /
// affine / stepped per region) with operating points chosen so mid-range
// hosts land at sensible budgets. A file in the same key-value format
// replaces them wholesale via load().
class ProfileTable {
 public:
  static const ProfileTable& builtin() {
    static const ProfileTable table = make_builtin();
    return table;
  }

  static ProfileTable load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
      throw FileNotFoundError("profiles file not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ProfileTable t = from_config_text(ss.str(), path.string());
    t.source_ = path.string();
    return t;
  }

  static ProfileTable from_config_text(const std::string& text,
                                       const std::string& origin = "<string>") {
    Config cfg = Config::from_string(text);
    ProfileTable t;
    t.hash_ = fnv1a64(text);
    t.source_ = origin;
    for (Method m : {Method::VinsMono, Method::SMsckf, Method::Okvis}) {
      for (Region r : {Region::R1, Region::R2, Region::R3}) {
        t.cells_[key(m, r)] = parse_cell(cfg, m, r, origin);
      }
    }
    return t;
  }

  const RegionCoefficients& at(Method m, Region r) const {
    return cells_.at(key(m, r));
  }

  std::uint64_t hash() const { return hash_; }
  const std::string& source() const { return source_; }

 private:
  static std::pair<int, int> key(Method m, Region r) {
    return {static_cast<int>(m), static_cast<int>(r)};
  }

  static RegionCoefficients parse_cell(const Config& cfg, Method m, Region r,
                                       const std::string& origin) {
    const std::string prefix = to_string(m) + "." + to_string(r) + ".";
    auto need = [&](const std::string& k) -> double {
      auto v = cfg.find(prefix + k);
      if (!v)
        throw SchemaMismatchError(origin + ": missing key '" + prefix + k + "'",
                                  prefix + k);
      return cfg.get_double(prefix + k, 0.0);
    };
    auto opt = [&](const std::string& k) -> std::optional<double> {
      if (!cfg.has(prefix + k)) return std::nullopt;
      return cfg.get_double(prefix + k, 0.0);
    };

    RegionCoefficients c;
    c.phi_affine = {need("phi.a0"), need("phi.a1")};
    if (cfg.has(prefix + "lambda.step")) {
      // Stepped law: lambda = step * region ordinal (R1=1, R2=2, R3=3).
      double step = cfg.get_double(prefix + "lambda.step", 0.0);
      c.lambda_affine = {step * (static_cast<int>(r) + 1), 0.0};
    } else {
      c.lambda_affine = {need("lambda.b0"), need("lambda.b1")};
    }
    if (auto p0 = opt("w.p0"))
      c.window_poly = {{*p0, opt("w.p1").value_or(0.0), opt("w.p2").value_or(0.0)}};
    if (auto p0 = opt("grid_rows.p0"))
      c.grid_rows_affine = {{*p0, opt("grid_rows.p1").value_or(0.0)}};
    if (auto p0 = opt("grid_cols.p0"))
      c.grid_cols_affine = {{*p0, opt("grid_cols.p1").value_or(0.0)}};
    if (auto wt = opt("wt")) c.window_temporal = round_half_up(*wt);
    if (auto wkf = opt("wkf")) c.window_keyframe = round_half_up(*wkf);
    if (c.window_temporal && c.window_keyframe &&
        !(*c.window_temporal < *c.window_keyframe))
      throw InvalidSpecError(origin + ": " + prefix + "wt must be < wkf");
    c.phi_min = static_cast<int>(cfg.get_int(prefix + "phi_min", c.phi_min));
    c.phi_cap = static_cast<int>(cfg.get_int(prefix + "phi_cap", c.phi_cap));
    c.lambda_min = static_cast<int>(cfg.get_int(prefix + "lambda_min", c.lambda_min));
    c.lambda_cap = static_cast<int>(cfg.get_int(prefix + "lambda_cap", c.lambda_cap));
    c.step_phi = static_cast<int>(cfg.get_int(prefix + "step_phi", c.step_phi));
    c.step_lambda =
        static_cast<int>(cfg.get_int(prefix + "step_lambda", c.step_lambda));
    c.resolution_downscale = static_cast<int>(
        cfg.get_int(prefix + "resolution_downscale", c.resolution_downscale));
    if (c.phi_min < 1 || c.phi_cap < c.phi_min)
      throw InvalidSpecError(origin + ": " + prefix + "phi bounds invalid");
    if (c.lambda_min < 1 || c.lambda_cap < c.lambda_min)
      throw InvalidSpecError(origin + ": " + prefix + "lambda bounds invalid");
    if (c.step_phi < 1 || c.step_lambda < 1)
      throw InvalidSpecError(origin + ": " + prefix + "steps must be >= 1");
    if (c.resolution_downscale != 1 && c.resolution_downscale != 2)
      throw InvalidSpecError(origin + ": " + prefix +
                             "resolution_downscale must be 1 or 2");
    return c;
  }

  static ProfileTable make_builtin();

  std::map<std::pair<int, int>, RegionCoefficients> cells_;
  std::uint64_t hash_ = 0;
  std::string source_ = "<builtin>";
};

// Built-in coefficient data. VINS-Mono: W quadratic in R2 (fixed R1/R3),
// Lambda stepped by two across regions, Phi affine everywhere. S-MSCKF: grid
// affine in R2 (fixed R1/R3), Phi affine R1/R2 (fixed R3), Lambda fixed R1,
// affine R2/R3. OKVIS: windows fixed per region, Phi/Lambda affine in R2/R3.
inline const char* builtin_profiles_text() {
  return R"(# viosched built-in parameter-initialization table
# Laws take nu_max in MHz. Outputs round half-up, then clamp to [min, cap].

[vins_mono.R1]
w.p0 = 6
phi.a0 = -40
phi.a1 = 0.1
lambda.step = 2
phi_min = 20
phi_cap = 200
lambda_min = 2
lambda_cap = 8
step_phi = 10
step_lambda = 1
resolution_downscale = 2

[vins_mono.R2]
w.p0 = 17.4
w.p1 = -0.0153
w.p2 = 5.952e-6
phi.a0 = 10
phi.a1 = 0.066667
lambda.step = 2
phi_min = 40
phi_cap = 200
lambda_min = 2
lambda_cap = 8
step_phi = 10
step_lambda = 1

[vins_mono.R3]
w.p0 = 10
phi.a0 = 170
phi.a1 = 0
lambda.step = 2
phi_min = 40
phi_cap = 250
lambda_min = 2
lambda_cap = 8
step_phi = 10
step_lambda = 1

[smsckf.R1]
grid_rows.p0 = 3
grid_cols.p0 = 4
phi.a0 = -20
phi.a1 = 0.08
lambda.b0 = 1
lambda.b1 = 0
phi_min = 40
phi_cap = 200
lambda_min = 1
lambda_cap = 10
step_phi = 10
step_lambda = 1
resolution_downscale = 2

[smsckf.R2]
grid_rows.p0 = 1.2
grid_rows.p1 = 0.0015
grid_cols.p0 = 2.2
grid_cols.p1 = 0.0015
phi.a0 = 0
phi.a1 = 0.066667
lambda.b0 = -4.3
lambda.b1 = 0.0045
phi_min = 40
phi_cap = 200
lambda_min = 1
lambda_cap = 10
step_phi = 10
step_lambda = 1

[smsckf.R3]
grid_rows.p0 = 5
grid_cols.p0 = 6
phi.a0 = 150
phi.a1 = 0
lambda.b0 = -2.3
lambda.b1 = 0.0035
phi_min = 40
phi_cap = 250
lambda_min = 1
lambda_cap = 16
step_phi = 10
step_lambda = 1

[okvis.R1]
wt = 2
wkf = 3
phi.a0 = 70
phi.a1 = 0
lambda.b0 = 3
lambda.b1 = 0
phi_min = 40
phi_cap = 200
lambda_min = 1
lambda_cap = 10
step_phi = 10
step_lambda = 1
resolution_downscale = 2

[okvis.R2]
wt = 3
wkf = 5
phi.a0 = -23.33
phi.a1 = 0.078
lambda.b0 = -3.3
lambda.b1 = 0.0045
phi_min = 40
phi_cap = 200
lambda_min = 1
lambda_cap = 10
step_phi = 10
step_lambda = 1

[okvis.R3]
wt = 4
wkf = 7
phi.a0 = 200
phi.a1 = 0
lambda.b0 = -4.5
lambda.b1 = 0.0045
phi_min = 40
phi_cap = 250
lambda_min = 1
lambda_cap = 16
step_phi = 10
step_lambda = 1
)";
}

inline ProfileTable ProfileTable::make_builtin() {
  return from_config_text(builtin_profiles_text(), "<builtin>");
}

namespace detail {

inline MethodProfile base_profile(Method m) {
  MethodProfile p;
  p.method = m;
  switch (m) {
    case Method::VinsMono:
      p.phi_online = true;
      p.lambda_online = false;
      p.fixed_at_init = {"window", "lambda", "resolution"};
      break;
    case Method::SMsckf:
      p.phi_online = true;
      p.lambda_online = true;
      p.fixed_at_init = {"grid_rows", "grid_cols", "resolution"};
      break;
    case Method::Okvis:
      p.phi_online = false;
      p.lambda_online = false;
      p.fixed_at_init = {"phi", "lambda", "window_temporal", "window_keyframe",
                         "resolution"};
      break;
  }
  return p;
}

}  // namespace detail

// Flags and bounds table for a method, independent of any host. Nominal
// bounds default to the caps of the given region's cell; a host-specialized
// profile comes out of compute_initial_parameters.
inline MethodProfile method_profile(Method m,
                                    const ProfileTable& table = ProfileTable::builtin(),
                                    Region region = Region::R2) {
  MethodProfile p = detail::base_profile(m);
  const RegionCoefficients& c = table.at(m, region);
  p.bounds.phi_min = c.phi_min;
  p.bounds.phi_nominal = c.phi_cap;
  p.bounds.lambda_min = c.lambda_min;
  p.bounds.lambda_nominal = c.lambda_cap;
  p.bounds.step_phi = c.step_phi;
  p.bounds.step_lambda = c.step_lambda;
  return p;
}

// Region-law initialization. Evaluates the cell's laws at nu_max, rounds,
// clamps, and specializes the profile's nominal bounds to the computed
// operating point: "nominal" is what the update laws recover toward after
// load subsides, and that is this host's initial estimate.
inline std::pair<ParamSet, MethodProfile> compute_initial_parameters(
    const CpuSpec& spec, Method method,
    const ProfileTable& table = ProfileTable::builtin()) {
  spec.validate();
  const Region region = classify_region(spec);
  const RegionCoefficients& c = table.at(method, region);
  const double mhz = spec.clock_max_ghz * 1000.0;

  auto affine = [mhz](const std::array<double, 2>& ab) {
    return ab[0] + ab[1] * mhz;
  };

  ParamSet params;
  params.phi = std::clamp(round_half_up(affine(c.phi_affine)), c.phi_min, c.phi_cap);
  params.lambda =
      std::clamp(round_half_up(affine(c.lambda_affine)), c.lambda_min, c.lambda_cap);
  if (c.window_poly) {
    const auto& p = *c.window_poly;
    params.window = std::max(1, round_half_up(p[0] + p[1] * mhz + p[2] * mhz * mhz));
  }
  if (c.grid_rows_affine)
    params.grid_rows = std::max(1, round_half_up(affine(*c.grid_rows_affine)));
  if (c.grid_cols_affine)
    params.grid_cols = std::max(1, round_half_up(affine(*c.grid_cols_affine)));
  params.window_temporal = c.window_temporal;
  params.window_keyframe = c.window_keyframe;
  params.resolution = Resolution{752 / c.resolution_downscale,
                                 480 / c.resolution_downscale};

  MethodProfile profile = detail::base_profile(method);
  profile.bounds.phi_min = c.phi_min;
  profile.bounds.phi_nominal = params.phi;
  profile.bounds.lambda_min = c.lambda_min;
  profile.bounds.lambda_nominal = params.lambda;
  profile.bounds.step_phi = c.step_phi;
  profile.bounds.step_lambda = c.step_lambda;
  return {params, profile};
}

}  // namespace viosched
