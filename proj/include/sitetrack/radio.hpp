#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sitetrack::radio {

struct AccessPoint {
  int id = 0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double ref_power = -40.0;          // dBm at 1 m
  double path_loss_exponent = 2.5;
};

// Ordered AP list; the index is the position in every RSS vector.
struct RadioModel {
  std::vector<AccessPoint> access_points;
  int index_of(int ap_id) const;  // -1 if unknown
};

struct RssSample {
  Eigen::Vector2d location;
  double rss = 0.0;  // dBm
};

struct PathLossFit {
  double ref_power = 0.0;
  double exponent = 0.0;
  double rms_residual = 0.0;  // dB
};

inline constexpr double kMinRadioDistance = 0.1;  // m, log-singularity clamp
inline constexpr double kExponentLo = 0.5;
inline constexpr double kExponentHi = 8.0;

double expected_rss(const AccessPoint& ap, const Eigen::Vector2d& x);

// Linear regression of rss on -10*log10(distance); samples inside the clamp
// radius are dropped before fitting.
PathLossFit fit_path_loss(const std::vector<RssSample>& samples, const Eigen::Vector2d& ap_position);

struct Grid {
  Eigen::Vector2d min;
  Eigen::Vector2d max;
  double cell = 0.5;
};

// Grid maximum-likelihood position; NaN entries in the vector are skipped.
// Ties resolve to the earliest cell in row-major (x fastest) order.
Eigen::Vector2d radio_only_locate(const RadioModel& model, const std::vector<double>& rss_vector,
                                  const Grid& grid, double sigma_db = 3.2);

std::string serialize(const RadioModel& model);
RadioModel parse_radio_model(const std::vector<std::string>& lines);
void save_radio_model(const RadioModel& model, const std::string& path);
RadioModel load_radio_model(const std::string& path);

}  // namespace sitetrack::radio
