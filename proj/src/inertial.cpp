#include "sitetrack/inertial.hpp"

#include <algorithm>
#include <cmath>

#include "sitetrack/errors.hpp"

namespace sitetrack::inertial {

double universal_step_length(double height, double frequency, const UniversalStepParams& params) {
  return height * (params.a * frequency + params.b) + params.c;
}

PersonalStepModel fit_personal_step_model(const std::vector<StepCalibrationPoint>& calibration) {
  const std::size_t n = calibration.size();
  if (n < 5)
    throw DegenerateCalibration("need at least 5 calibration points, got " + std::to_string(n));
  double fm = 0.0, sm = 0.0;
  for (const auto& p : calibration) {
    fm += p.frequency;
    sm += p.visual_step_length;
  }
  fm /= static_cast<double>(n);
  sm /= static_cast<double>(n);
  double sff = 0.0, sfs = 0.0, sst = 0.0;
  for (const auto& p : calibration) {
    sff += (p.frequency - fm) * (p.frequency - fm);
    sfs += (p.frequency - fm) * (p.visual_step_length - sm);
    sst += (p.visual_step_length - sm) * (p.visual_step_length - sm);
  }
  if (sff < 1e-12) throw DegenerateCalibration("constant step frequency");
  PersonalStepModel model;
  model.slope = sfs / sff;
  model.intercept = sm - model.slope * fm;
  if (sst < 1e-15) {
    model.r_squared = 0.0;  // nothing to explain
    return model;
  }
  double ssr = 0.0;
  for (const auto& p : calibration) {
    const double e = p.visual_step_length - (model.slope * p.frequency + model.intercept);
    ssr += e * e;
  }
  model.r_squared = 1.0 - ssr / sst;
  if (model.r_squared < 0.0) {
    model.r_squared = 0.0;
    model.r2_clamped = true;
  }
  return model;
}

double active_step_length(const StepModelState& state, double frequency) {
  const double raw = state.personal_active()
                         ? state.personal->slope * frequency + state.personal->intercept
                         : universal_step_length(state.height, frequency, state.universal);
  return std::clamp(raw, state.clamp_lo, state.clamp_hi);
}

}  // namespace sitetrack::inertial
