#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sitetrack/measurements.hpp"
#include "sitetrack/radio.hpp"

namespace sitetrack::sim {

struct Rect {
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= min_x && p.x() <= max_x && p.y() >= min_y && p.y() <= max_y;
  }
  double area() const { return (max_x - min_x) * (max_y - min_y); }
};

enum class MotionPolicy { Waypoints, Stationary, RandomWalk };

// Ground-truth step geometry: length = slope * frequency + intercept, or the
// universal height-based model when use_universal is set.
struct TruthStepModel {
  bool use_universal = true;
  double slope = 0.0;
  double intercept = 0.0;
};

struct AgentConfig {
  int id = 0;
  int device_id = -1;  // -1: carries no device
  double height = 1.78;
  MotionPolicy policy = MotionPolicy::Waypoints;
  std::vector<Eigen::Vector2d> waypoints;
  bool loop = true;                 // cycle waypoints vs stop at the last one
  double f_lo = 1.4, f_hi = 2.2;    // step frequency range (Hz)
  TruthStepModel step;
  int dwell_scans = 0;              // pause this long at each waypoint
  double waypoint_tolerance = 0.3;  // metres
  double heading_noise = 0.05;      // radians, truth-level wobble
};

struct TimedRect {
  Rect rect;
  int from_scan = 0;
  int to_scan = -1;  // -1: open-ended
  bool active(int t) const { return t >= from_scan && (to_scan < 0 || t <= to_scan); }
};

struct CameraConfig {
  double pd = 0.9;
  double clutter_rate = 1.0;  // Poisson mean per scan
  double sigma = 0.2;         // metres
  std::vector<TimedRect> occlusions;
  int phantoms = 0;                // visual-noise objects replaying future truth
  int phantom_offset_scans = 200;  // lead applied per phantom
};

struct ApConfig {
  radio::AccessPoint ap;
  int rate_divisor = 0;  // 0: use the radio-wide divisor
};

// A scheduled change to one access point's true propagation parameters.
struct RadioEvent {
  int scan = 0;
  int ap_id = 0;
  double ref_power = -40.0;
  double exponent = 2.5;
};

struct RadioSimConfig {
  std::vector<ApConfig> aps;
  double sigma = 3.2;     // dB
  int rate_divisor = 2;   // radio reports every this many scans
  std::vector<RadioEvent> events;
};

struct ImuConfig {
  double step_error_rate = 0.084;   // indicator flip probability
  double heading_bias_lo = 0.0;     // radians; bias resampled per scan
  double heading_bias_hi = 0.0;
  double heading_jitter = 0.035;    // radians
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  Rect area{0.0, 0.0, 11.0, 9.0};
  int scans = 1800;
  double dt = 0.5;
  std::vector<AgentConfig> agents;
  std::vector<Rect> walls;
  CameraConfig camera;
  RadioSimConfig radio;
  ImuConfig imu;
};

struct StepEvent {
  int scan = 0;
  double length = 0.0;
  double heading = 0.0;
  double frequency = 0.0;
};

struct AgentTruth {
  int agent_id = 0;
  int device_id = -1;
  std::vector<Eigen::Vector2d> positions;  // one per scan (post-step)
  std::vector<StepEvent> steps;
};

struct GroundTruth {
  std::vector<AgentTruth> agents;
  const AgentTruth* by_device(int device_id) const;
};

struct Scenario {
  ScenarioConfig config;
  GroundTruth truth;
  std::vector<ScanMeasurements> scans;
  // True radio model as of the final scan (after all scheduled events).
  radio::RadioModel final_radio_model;
};

radio::RadioModel initial_radio_model(const ScenarioConfig& cfg);

Scenario generate_scenario(const ScenarioConfig& cfg);

// Per-scan object pixel positions for the rendered-frame pipeline: world
// positions of camera-visible agents and phantoms mapped through `world_to_px`
// (a row-major 3x3 homography applied as p' = H [x y 1]^T).
std::vector<std::vector<Eigen::Vector2d>> visible_world_positions(const Scenario& sc);

// Text round-trip: one line per record, "<scan> KIND fields...".
std::string serialize_scenario(const Scenario& sc);
struct ParsedLog {
  GroundTruth truth;
  std::vector<ScanMeasurements> scans;
};
ParsedLog parse_scenario_log(const std::string& text, int ap_count);

}  // namespace sitetrack::sim
