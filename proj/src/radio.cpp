#include "sitetrack/radio.hpp"

#include <cmath>
#include <set>

#include "sitetrack/errors.hpp"
#include "sitetrack/textio.hpp"

namespace sitetrack::radio {

int RadioModel::index_of(int ap_id) const {
  for (std::size_t i = 0; i < access_points.size(); ++i)
    if (access_points[i].id == ap_id) return static_cast<int>(i);
  return -1;
}

double expected_rss(const AccessPoint& ap, const Eigen::Vector2d& x) {
  const double d = std::max((ap.position - x).norm(), kMinRadioDistance);
  return ap.ref_power - 10.0 * ap.path_loss_exponent * std::log10(d);
}

PathLossFit fit_path_loss(const std::vector<RssSample>& samples,
                          const Eigen::Vector2d& ap_position) {
  // regress rss = P + n*u with u = -10*log10(d)
  std::vector<double> u, r;
  for (const auto& s : samples) {
    const double d = (ap_position - s.location).norm();
    if (d < kMinRadioDistance) continue;
    u.push_back(-10.0 * std::log10(d));
    r.push_back(s.rss);
  }
  const std::size_t n = u.size();
  if (n < 2) throw DegenerateGeometry("need at least 2 usable samples");
  double um = 0.0, rm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    um += u[i];
    rm += r[i];
  }
  um /= static_cast<double>(n);
  rm /= static_cast<double>(n);
  double suu = 0.0, sur = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    suu += (u[i] - um) * (u[i] - um);
    sur += (u[i] - um) * (r[i] - rm);
  }
  if (suu < 1e-12) throw DegenerateGeometry("all samples equidistant from access point");
  PathLossFit fit;
  fit.exponent = sur / suu;
  fit.ref_power = rm - fit.exponent * um;
  if (fit.exponent <= kExponentLo || fit.exponent >= kExponentHi)
    throw OutOfBand("fitted path-loss exponent " + std::to_string(fit.exponent) +
                    " outside plausible band");
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = r[i] - (fit.ref_power + fit.exponent * u[i]);
    ss += e * e;
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(n));
  return fit;
}

Eigen::Vector2d radio_only_locate(const RadioModel& model, const std::vector<double>& rss_vector,
                                  const Grid& grid, double sigma_db) {
  if (rss_vector.size() != model.access_points.size())
    throw DimensionMismatch("rss vector length does not match access-point count");
  const int nx = static_cast<int>(std::floor((grid.max.x() - grid.min.x()) / grid.cell + 1e-9));
  const int ny = static_cast<int>(std::floor((grid.max.y() - grid.min.y()) / grid.cell + 1e-9));
  if (nx <= 0 || ny <= 0) throw EmptyGrid("grid has no cells");
  const double inv_two_var = 1.0 / (2.0 * sigma_db * sigma_db);
  double best = -std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_pt = Eigen::Vector2d::Zero();
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const Eigen::Vector2d pt(grid.min.x() + (ix + 0.5) * grid.cell,
                               grid.min.y() + (iy + 0.5) * grid.cell);
      double ll = 0.0;
      for (std::size_t i = 0; i < rss_vector.size(); ++i) {
        if (std::isnan(rss_vector[i])) continue;
        const double e = rss_vector[i] - expected_rss(model.access_points[i], pt);
        ll -= e * e * inv_two_var;
      }
      if (ll > best) {
        best = ll;
        best_pt = pt;
      }
    }
  return best_pt;
}

std::string serialize(const RadioModel& model) {
  std::string out = "# id x y ref_power exponent\n";
  for (const auto& ap : model.access_points) {
    out += std::to_string(ap.id) + " " + format_fixed(ap.position.x()) + " " +
           format_fixed(ap.position.y()) + " " + format_fixed(ap.ref_power) + " " +
           format_fixed(ap.path_loss_exponent) + "\n";
  }
  return out;
}

RadioModel parse_radio_model(const std::vector<std::string>& lines) {
  RadioModel model;
  std::set<int> seen;
  for (const auto& line : lines) {
    if (line.empty() || line[0] == '#') continue;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 5) throw IoError("expected `id x y P n`: " + line);
    AccessPoint ap;
    ap.id = static_cast<int>(parse_double(tok[0]));
    ap.position = {parse_double(tok[1]), parse_double(tok[2])};
    ap.ref_power = parse_double(tok[3]);
    ap.path_loss_exponent = parse_double(tok[4]);
    if (!seen.insert(ap.id).second)
      throw InvalidConfig("duplicate access-point id " + std::to_string(ap.id));
    model.access_points.push_back(ap);
  }
  return model;
}

void save_radio_model(const RadioModel& model, const std::string& path) {
  write_text(path, serialize(model));
}

RadioModel load_radio_model(const std::string& path) {
  return parse_radio_model(read_lines(path));
}

}  // namespace sitetrack::radio
