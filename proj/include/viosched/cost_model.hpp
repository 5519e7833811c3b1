#pragma once

#include <algorithm>
#include <random>

#include "viosched/config.hpp"
#include "viosched/profiles.hpp"

namespace viosched {

// Stand-in for a VIO pipeline's per-frame CPU cost: affine in each knob, so
// usage responds monotonically to every parameter the policy moves, with the
// full frame cost recovered when a frame is dropped. Coefficients are
// calibration data, not measurements.
struct CostModel {
  double base_ms = 8.0;
  double phi_coeff = 0.12;    // ms per feature
  double lambda_coeff = 0.8;  // ms per iteration
  double window_coeff = 0.5;  // ms per window pose
  double resolution_coeff = 8.0;  // ms per megapixel
  double noise_std = 0.0;     // zero-mean, seeded by the simulator

  static CostModel from_config(const Config& cfg) {
    CostModel m;
    m.base_ms = cfg.get_double("sim.base_ms", m.base_ms);
    m.phi_coeff = cfg.get_double("sim.phi_coeff", m.phi_coeff);
    m.lambda_coeff = cfg.get_double("sim.lambda_coeff", m.lambda_coeff);
    m.window_coeff = cfg.get_double("sim.window_coeff", m.window_coeff);
    m.resolution_coeff = cfg.get_double("sim.resolution_coeff", m.resolution_coeff);
    m.noise_std = cfg.get_double("sim.noise_std", m.noise_std);
    m.validate();
    return m;
  }

  void validate() const {
    if (base_ms < 0 || phi_coeff < 0 || lambda_coeff < 0 || window_coeff < 0 ||
        resolution_coeff < 0 || noise_std < 0)
      throw InvalidSpecError("cost model coefficients must be >= 0");
  }
};

inline constexpr double kMinFrameCostMs = 0.1;

// Deterministic part of the per-frame cost.
inline double frame_cost(const CostModel& m, const ParamSet& p) {
  double ms = m.base_ms + m.phi_coeff * p.phi + m.lambda_coeff * p.lambda +
              m.window_coeff * p.total_window() +
              m.resolution_coeff * p.resolution.megapixels();
  return std::max(ms, kMinFrameCostMs);
}

// With the simulator's seeded noise stream.
inline double frame_cost(const CostModel& m, const ParamSet& p,
                         std::mt19937_64& rng) {
  double ms = frame_cost(m, p);
  if (m.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, m.noise_std);
    ms += noise(rng);
  }
  return std::max(ms, kMinFrameCostMs);
}

}  // namespace viosched
