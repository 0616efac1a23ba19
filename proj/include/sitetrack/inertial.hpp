#pragma once

#include <optional>
#include <vector>

namespace sitetrack::inertial {

struct StepObservation {
  int device_id = 0;
  bool step_indicator = false;
  double step_length = 0.0;    // m
  double heading = 0.0;        // rad, world frame, CCW from +x, in (-pi, pi]
  double step_frequency = 0.0; // Hz
  double timestamp = 0.0;      // s
};

struct UniversalStepParams {
  double a = 0.1244;
  double b = 0.066;
  double c = 0.2000;
};

struct PersonalStepModel {
  double slope = 0.0;      // m per Hz
  double intercept = 0.0;  // m
  double r_squared = 0.0;
  bool r2_clamped = false; // negative R^2 clamped to 0
};

struct StepCalibrationPoint {
  double visual_step_length = 0.0;  // m, camera-derived
  double frequency = 0.0;           // Hz
};

// Per-device model selection state; updated only between scans.
struct StepModelState {
  UniversalStepParams universal;
  double height = 1.78;  // m
  std::optional<PersonalStepModel> personal;
  double r2_threshold = 0.8;
  double clamp_lo = 0.1;  // m
  double clamp_hi = 1.5;  // m

  bool personal_active() const {
    return personal.has_value() && personal->r_squared >= r2_threshold;
  }
};

double universal_step_length(double height, double frequency, const UniversalStepParams& params);

// OLS of visual step length on frequency; needs >= 5 points with spread frequencies.
PersonalStepModel fit_personal_step_model(const std::vector<StepCalibrationPoint>& calibration);

// Personal prediction once its fit is good enough, universal otherwise; clamped.
double active_step_length(const StepModelState& state, double frequency);

}  // namespace sitetrack::inertial
