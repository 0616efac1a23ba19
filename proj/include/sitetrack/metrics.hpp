#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "sitetrack/sim.hpp"

namespace sitetrack::metrics {

// Scan-indexed position series; estimates and truth are matched by scan key.
using Series = std::map<int, Eigen::Vector2d>;
// device id -> scan -> estimate
using EstimateTable = std::map<int, Series>;

double compute_rmse(const Series& truth, const Series& estimates);

struct ErrorCdf {
  std::vector<double> sorted;
  double percentile(double p) const;  // p in [0,1], linear interpolation
};

ErrorCdf error_cdf(std::vector<double> errors);

// Scans where a device's estimate sits within `radius` of a different agent's
// truth while more than `radius` from its own.
int count_id_swaps(const sim::GroundTruth& truth, const EstimateTable& estimates, double radius);

struct TrackingErrors {
  std::map<int, double> rmse_by_device;
  std::map<int, double> coverage_by_device;  // matched scans / truth scans
  std::vector<double> pooled;                // every matched per-scan error
  double pooled_rmse() const;
};

TrackingErrors evaluate(const sim::GroundTruth& truth, const EstimateTable& estimates);

// Anonymous-track variant: per agent per scan, the error is the distance to
// the nearest estimate present that scan (identity-free baseline trackers).
TrackingErrors evaluate_anonymous(const sim::GroundTruth& truth,
                                  const std::vector<std::vector<Eigen::Vector2d>>& per_scan);

}  // namespace sitetrack::metrics
