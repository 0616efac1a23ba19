#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sitetrack/baseline.hpp"
#include "sitetrack/inertial.hpp"
#include "sitetrack/sim.hpp"
#include "sitetrack/socialforce.hpp"
#include "sitetrack/tracker.hpp"
#include "sitetrack/vision.hpp"

namespace sitetrack::config {

struct StepSection {
  inertial::UniversalStepParams universal;
  double r2_threshold = 0.8;
  double default_height_m = 1.78;
  double clamp_lo = 0.1;
  double clamp_hi = 1.5;

  inertial::StepModelState make_state() const;
};

struct LearningSection {
  double q_threshold = 300.0;
  double occlusion_cell = 0.5;  // m
  double occlusion_threshold = 0.05;
  int occlusion_window_scans = 1200;  // 10 simulated minutes at the default scan rate
  std::vector<double> alpha_grid = {0.0005, 0.001, 0.002, 0.0032, 0.005, 0.01, 0.02};
  double radio_refit_interval_s = 60.0;
  double radio_window_s = 300.0;
};

struct ExperimentSection {
  std::string kind = "single";
  std::string name = "experiment";
  std::vector<std::uint64_t> seeds = {1};
  std::vector<double> occlusion_fractions = {0.0, 0.1, 0.2, 0.3};
  std::vector<double> heading_biases_deg = {0.0, 10.0, 20.0, 30.0, 50.0};
  std::vector<int> phantom_counts = {0, 2, 4, 8};
  double radio_power_shift_db = 8.0;
  double radio_exponent_shift = 0.8;
};

struct AppConfig {
  sim::ScenarioConfig scenario;
  tracker::TrackerConfig tracker;
  socialforce::SfmParams sfm;
  StepSection step;
  LearningSection learning;
  vision::VisionConfig vision;
  baseline::BaselineConfig baseline;
  ExperimentSection experiment;
};

// Fully-populated defaults: the 11x9 m hall with a perimeter of 12 access
// points and five looping walkers.
AppConfig default_config();

// Strict parse over the defaults: sections and keys may be omitted, unknown
// keys anywhere raise InvalidConfig naming the offending path.
AppConfig parse_config(const std::string& json_text);
AppConfig load_config_file(const std::string& path);

void apply_seed(AppConfig& cfg, std::uint64_t seed);

}  // namespace sitetrack::config
