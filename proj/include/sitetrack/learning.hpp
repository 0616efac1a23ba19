#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sitetrack/geometry.hpp"
#include "sitetrack/inertial.hpp"
#include "sitetrack/measurements.hpp"
#include "sitetrack/radio.hpp"
#include "sitetrack/socialforce.hpp"
#include "sitetrack/tracker.hpp"
#include "sitetrack/vision.hpp"

namespace sitetrack::learning {

// Per-scan log-quality increment: either a joint measurement updated the track
// (likelihood present) or the detection was missed.
double quality_increment(std::optional<double> likelihood, double clutter_likelihood, double pd);

// One device-scan of tracker output, self-contained enough to re-fit models.
struct TrackRow {
  int scan = 0;
  Eigen::Vector2d position{0.0, 0.0};
  bool camera_updated = false;  // joint measurement claimed this scan
  bool had_radio = false;
  double quality_increment = 0.0;
  std::vector<double> rss;  // model-order, NaN for silent access points
  bool step_taken = false;
  double step_frequency = 0.0;
};

struct TrackHistory {
  int device_id = -1;
  std::vector<TrackRow> rows;  // ascending scan
  double quality() const;
};

std::map<int, TrackHistory> collect_track_histories(
    const std::vector<tracker::ScanSummary>& summaries,
    const std::vector<ScanMeasurements>& scans);

struct TrackQuality {
  int device_id = -1;
  int scans = 0;
  double q = 0.0;
  bool qualified = false;
};

TrackQuality qualify_track(const TrackHistory& track, double q_threshold);

std::string quality_report_csv(const std::vector<TrackQuality>& tracks);

// Least-squares re-fit of every access point from type-(a) states of qualified
// tracks; an access point whose data is unusable keeps its prior parameters.
radio::RadioModel learn_radio_model(const std::vector<TrackHistory>& tracks,
                                    const radio::RadioModel& current, double q_threshold);

struct OcclusionMap {
  Eigen::Vector2d origin{0.0, 0.0};
  double cell = 0.5;
  int cols = 0;
  int rows = 0;
  std::vector<int> counts;           // row-major, x fastest
  std::vector<std::uint8_t> occluded;

  int cell_index(const Eigen::Vector2d& p) const;  // -1 outside the grid
  bool is_occluded(const Eigen::Vector2d& p) const;
};

OcclusionMap learn_occlusion_map(const std::vector<Eigen::Vector2d>& detections,
                                 const Eigen::Vector2d& origin, double cell, int cols, int rows,
                                 double threshold);

// Every occluded cell becomes a static obstacle entity for the force model.
std::vector<socialforce::Entity> occlusion_obstacles(const OcclusionMap& map, double radius);

std::string serialize_occlusion(const OcclusionMap& map);
OcclusionMap parse_occlusion(const std::string& text);

// Camera-measured step lengths: consecutive camera-updated scans bracketing a
// step give (Sv, f) pairs for the personal step-model fit.
std::vector<inertial::StepCalibrationPoint> extract_step_calibration(const TrackHistory& track);

// Deterministic replay bundle for learning-rate selection: frames are rendered
// once; each candidate rate re-runs detection and tracking from scratch.
struct ReplayWindow {
  std::vector<vision::Frame> frames;
  std::vector<ScanMeasurements> scans;  // camera lists are replaced per replay
  geometry::Homography px_to_world;
  vision::VisionConfig vision_cfg;
  tracker::TrackerConfig tracker_cfg;
  tracker::Models models;
  double q_threshold = 300.0;
};

struct ReplayResult {
  double cqs = 0.0;
  std::map<int, std::map<int, Eigen::Vector2d>> estimates;  // device -> scan -> position
};

// One full detection + tracking pass at a candidate learning rate.
ReplayResult replay_run(const ReplayWindow& window, double alpha);

// Cumulative quality score over qualified tracks for one learning rate.
double replay_cqs(const ReplayWindow& window, double alpha);

double optimize_detector_learning_rate(const ReplayWindow& window, const std::vector<double>& grid,
                                       std::vector<std::pair<double, double>>* scores = nullptr);

}  // namespace sitetrack::learning
