#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sitetrack/config.hpp"
#include "sitetrack/geometry.hpp"
#include "sitetrack/metrics.hpp"
#include "sitetrack/tracker.hpp"

namespace sitetrack::experiment {

struct RunResult {
  std::vector<tracker::ScanSummary> summaries;
  metrics::EstimateTable estimates;  // device -> scan -> position
};

RunResult run_tracking(const sim::Scenario& sc, const tracker::TrackerConfig& tcfg,
                       const tracker::Models& models);

// Tracker-side model bundle for a scenario: the given radio model, one default
// step state per carried device, force parameters; obstacles start empty.
tracker::Models models_from_config(const config::AppConfig& cfg, radio::RadioModel radio);

// World->pixel map centring the scenario area in the configured frame with a
// small border so blobs never clip.
geometry::Homography world_to_px_map(const sim::Rect& area, const vision::VisionConfig& vcfg);

// Square-root-area occlusion rectangle placed by the seed's dedicated stream.
sim::TimedRect seeded_occlusion(const sim::Rect& area, double fraction, std::uint64_t seed);

struct RunRecord {
  std::string label;    // sweep point ("stage=mis", "frac=0.30", ...)
  std::string variant;  // paired-run discriminator ("sfm_on", "baseline", ...)
  std::uint64_t seed = 0;
  double rmse = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double coverage = 0.0;  // mean matched fraction across devices
  int id_swaps = 0;
  double cqs = 0.0;   // learning-rate sweeps only
  std::string error;  // nonempty: the run failed and this row records why
};

struct ExperimentResult {
  std::string kind;
  std::string name;
  std::vector<RunRecord> runs;
  std::map<std::string, double> aggregates;
  std::map<std::string, std::vector<double>> pooled;  // label -> pooled per-scan errors
};

// Dispatches on cfg.experiment.kind: single | ablation | occlusion | heading |
// sfm | visual_noise | learning_rate. Writes runs.csv, aggregates.csv,
// kind-specific CSVs, and summary.json under out_dir (created if missing);
// per-run failures are recorded in their rows, not fatal to the sweep.
ExperimentResult run_experiment(const config::AppConfig& cfg, const std::string& out_dir);

}  // namespace sitetrack::experiment
