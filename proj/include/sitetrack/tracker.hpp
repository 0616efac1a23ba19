#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sitetrack/inertial.hpp"
#include "sitetrack/measurements.hpp"
#include "sitetrack/radio.hpp"
#include "sitetrack/rng.hpp"
#include "sitetrack/socialforce.hpp"
#include "sitetrack/ukf.hpp"

namespace sitetrack::tracker {

// One camera detection paired with one device's RSS vector; the stacked vector
// is [cx, cy, rss...] over the access points that actually reported.
struct JointMeasurement {
  int camera_index = -1;
  int device_id = -1;
  Eigen::VectorXd stacked;
  std::vector<int> present_aps;
};

struct AssociationEvent {
  bool clutter = true;
  int device_id = -1;  // valid when !clutter
};

struct TargetState {
  int device_id = -1;
  ukf::GaussianState gaussian;
  int last_camera_scan = 0;
  int birth_scan = 0;
  double quality = 0.0;  // running track-quality log score
};

struct Particle {
  double weight = 0.0;
  std::vector<TargetState> targets;  // ascending device_id, unique ids

  TargetState* find(int device_id);
  const TargetState* find(int device_id) const;
};

enum class EstimateMode { MaxWeight, Mixture };
enum class PredictionStyle { Unscented, Linearized };
enum class Execution { Serial, Parallel };

struct TrackerConfig {
  int particles = 100;
  double pd = 0.9;
  double clutter_prior = 0.3;     // event prior for the clutter hypothesis
  double clutter_density = 1e-4;  // per m^2 of ground plane
  int death_timeout = 60;         // scans without a camera update; 0 disables
  bool sfm_enabled = false;
  EstimateMode estimate_mode = EstimateMode::MaxWeight;
  PredictionStyle prediction = PredictionStyle::Unscented;
  Execution execution = Execution::Parallel;
  double camera_sigma = 0.2;  // m
  double rss_sigma = 3.2;     // dB
  double process_sigma = 0.3; // m, per axis
  double dt = 0.5;            // s
  double birth_gate_db = 10.0;  // RMS residual allowed when seeding a track
  double rss_span_db = 60.0;    // uninformative RSS density span (no live track)
  bool allow_shared_detection = false;  // relax one-detection-per-scan exclusivity
  double resample_fraction = 0.5;       // resample when ESS < fraction * N
  std::uint64_t seed = 1;
  bool record_associations = false;
  ukf::UtParams ut;
};

struct Models {
  radio::RadioModel radio_model;
  std::map<int, inertial::StepModelState> steps;  // per device; default when absent
  socialforce::SfmParams sfm;
  std::vector<socialforce::Entity> obstacles;
};

std::vector<JointMeasurement> build_joint_measurements(const ScanMeasurements& scan);

// Unnormalized prior for one association event given the events already fixed
// for earlier measurements of the same scan. Zero encodes a violated
// restriction; Target events for devices the particle has no track for throw.
double association_prior(const Particle& particle, const std::vector<JointMeasurement>& jms,
                         std::size_t index, const AssociationEvent& event,
                         const std::vector<AssociationEvent>& so_far, const TrackerConfig& cfg);

struct DeviceScanInfo {
  bool had_radio = false;
  bool has_track = false;
  bool updated = false;  // camera-associated this scan
  double quality_increment = 0.0;
  Eigen::Vector2d position{0.0, 0.0};  // post-scan mean in the source particle
};

struct ScanSummary {
  int t = 0;
  bool weights_reset = false;  // all-zero weight recovery fired
  bool resampled = false;
  double ess = 0.0;
  int best_particle = 0;
  std::map<int, DeviceScanInfo> devices;          // from the best-weight particle
  std::map<int, Eigen::Vector2d> estimates;       // per configured estimate mode
  std::vector<std::string> association_log;       // "scan,particle,measurement,event"
};

void spawn_targets(std::vector<Particle>& particles, const ScanMeasurements& scan,
                   const radio::RadioModel& model, const TrackerConfig& cfg);
void kill_stale_targets(std::vector<Particle>& particles, int t_now, int timeout);
void resample_systematic(std::vector<Particle>& particles, Rng rng);
double effective_sample_size(const std::vector<Particle>& particles);
std::map<int, Eigen::Vector2d> estimate_positions(const std::vector<Particle>& particles,
                                                  EstimateMode mode);

class Filter {
 public:
  Filter(TrackerConfig cfg, Models models);

  // Swap in replacement models (learned radio parameters, personal step
  // models, obstacles) between scans.
  void set_models(Models models);
  const Models& models() const { return models_; }
  const TrackerConfig& config() const { return cfg_; }
  const std::vector<Particle>& particles() const { return particles_; }

  ScanSummary process_scan(const ScanMeasurements& scan);
  std::map<int, Eigen::Vector2d> estimate_positions() const;

 private:
  TrackerConfig cfg_;
  Models models_;
  std::vector<Particle> particles_;
  Rng master_;
};

}  // namespace sitetrack::tracker
