#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sitetrack/rng.hpp"

namespace sitetrack::baseline {

// Camera-only multi-target tracker over anonymous constant-velocity tracks.
// Same particle-filter skeleton as the joint tracker, but detections carry no
// identity, so tracks are born from unexplained detections and die silently.
struct BaselineConfig {
  int particles = 50;
  double pd = 0.9;
  double clutter_prior = 0.25;
  double clutter_density = 1e-4;  // per m^2
  double birth_prior = 0.05;
  double camera_sigma = 0.2;  // m
  double accel_sigma = 0.6;   // m/s^2
  double dt = 0.5;
  int death_timeout = 20;  // scans
  double resample_fraction = 0.5;
  std::uint64_t seed = 1;
  Eigen::Vector2d area_min{0.0, 0.0};
  Eigen::Vector2d area_max{11.0, 9.0};
};

struct CvTrack {
  int id = 0;  // birth sequence number within the particle
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();  // x y vx vy
  Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();
  int last_update = 0;
  int birth_scan = 0;
};

struct BaselineParticle {
  double weight = 0.0;
  std::vector<CvTrack> tracks;
  int next_id = 0;
};

class BaselineFilter {
 public:
  explicit BaselineFilter(BaselineConfig cfg);

  void process_scan(int t, const std::vector<Eigen::Vector2d>& detections);

  // Live track positions from the heaviest particle.
  std::vector<Eigen::Vector2d> estimate_positions() const;
  const std::vector<BaselineParticle>& particles() const { return particles_; }

 private:
  BaselineConfig cfg_;
  std::vector<BaselineParticle> particles_;
  Rng master_;
};

}  // namespace sitetrack::baseline
