#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "sitetrack/inertial.hpp"

namespace sitetrack {

// Everything the sensors produced for one scan. Radio vectors hold one entry
// per access point in model order; NaN marks an access point that did not
// report this scan. Devices with no radio activity at all are absent from the
// map, as are devices with no step report.
struct ScanMeasurements {
  int t = 0;
  std::vector<Eigen::Vector2d> camera;
  std::map<int, std::vector<double>> radio;
  std::map<int, inertial::StepObservation> steps;
};

}  // namespace sitetrack
