#include "sitetrack/geometry.hpp"

#include <cmath>

#include "sitetrack/errors.hpp"
#include "sitetrack/textio.hpp"

namespace sitetrack::geometry {
namespace {

constexpr double kCollinearTol = 1e-9;   // on twice triangle area
constexpr double kInfinityTol = 1e-12;   // homogeneous w

// Hartley conditioning: centroid to origin, mean distance to sqrt(2).
Eigen::Matrix3d conditioning_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 1e-15 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

void check_not_collinear(const std::vector<Eigen::Vector2d>& pts) {
  const std::size_t n = pts.size();
  // any non-degenerate triple certifies the set; fail only if none exists
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        const Eigen::Vector2d u = pts[j] - pts[i];
        const Eigen::Vector2d v = pts[k] - pts[i];
        if (std::abs(u.x() * v.y() - u.y() * v.x()) > kCollinearTol) return;
      }
  throw DegenerateConfiguration("source points collinear or duplicated");
}

Eigen::Matrix3d solve_dlt(const std::vector<Correspondence>& cs) {
  const std::size_t n = cs.size();
  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = cs[i].image_point.x(), y = cs[i].image_point.y();
    const double u = cs[i].world_point.x(), v = cs[i].world_point.y();
    a.row(2 * i) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    a.row(2 * i + 1) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return m;
}

// Gauss-Newton on the 8 free entries (h22 pinned to 1); residual is the
// geometric transfer error in the world plane.
Eigen::Matrix3d refine(Eigen::Matrix3d h, const std::vector<Correspondence>& cs) {
  if (std::abs(h(2, 2)) < kInfinityTol) return h;
  h /= h(2, 2);
  const std::size_t n = cs.size();
  Eigen::Matrix<double, 8, 1> theta;
  theta << h(0, 0), h(0, 1), h(0, 2), h(1, 0), h(1, 1), h(1, 2), h(2, 0), h(2, 1);
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::MatrixXd jac(2 * n, 8);
    Eigen::VectorXd r(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = cs[i].image_point.x(), y = cs[i].image_point.y();
      const double w = theta(6) * x + theta(7) * y + 1.0;
      if (std::abs(w) < kInfinityTol) return h;  // give up, keep algebraic fit
      const double nu = theta(0) * x + theta(1) * y + theta(2);
      const double nv = theta(3) * x + theta(4) * y + theta(5);
      const double pu = nu / w, pv = nv / w;
      r(2 * i) = cs[i].world_point.x() - pu;
      r(2 * i + 1) = cs[i].world_point.y() - pv;
      jac.row(2 * i) << x / w, y / w, 1.0 / w, 0, 0, 0, -pu * x / w, -pu * y / w;
      jac.row(2 * i + 1) << 0, 0, 0, x / w, y / w, 1.0 / w, -pv * x / w, -pv * y / w;
    }
    const Eigen::Matrix<double, 8, 8> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 8, 1> step = jtj.ldlt().solve(jac.transpose() * r);
    if (!step.allFinite()) break;
    theta += step;
    if (step.norm() < 1e-10) break;
  }
  Eigen::Matrix3d out;
  out << theta(0), theta(1), theta(2), theta(3), theta(4), theta(5), theta(6), theta(7), 1.0;
  return out;
}

}  // namespace

Homography make_homography(const Eigen::Matrix3d& m) {
  Eigen::Matrix3d h = m;
  if (std::abs(h(2, 2)) > kInfinityTol) h /= h(2, 2);
  return Homography{h};
}

Homography dlt_homography(const std::vector<Correspondence>& correspondences) {
  if (correspondences.size() < 4)
    throw TooFewPoints("need at least 4 correspondences, got " +
                       std::to_string(correspondences.size()));
  std::vector<Eigen::Vector2d> src, dst;
  src.reserve(correspondences.size());
  dst.reserve(correspondences.size());
  for (const auto& c : correspondences) {
    if (!c.image_point.allFinite() || !c.world_point.allFinite())
      throw DegenerateConfiguration("non-finite correspondence");
    src.push_back(c.image_point);
    dst.push_back(c.world_point);
  }
  check_not_collinear(src);

  const Eigen::Matrix3d ts = conditioning_transform(src);
  const Eigen::Matrix3d td = conditioning_transform(dst);
  std::vector<Correspondence> conditioned(correspondences.size());
  for (std::size_t i = 0; i < correspondences.size(); ++i) {
    conditioned[i].image_point = (ts * src[i].homogeneous()).hnormalized();
    conditioned[i].world_point = (td * dst[i].homogeneous()).hnormalized();
  }
  Eigen::Matrix3d h = td.inverse() * solve_dlt(conditioned) * ts;
  if (correspondences.size() > 4) h = refine(h, correspondences);
  Homography out = make_homography(h);
  if (std::abs(out.h.determinant()) <= 1e-12)
    throw DegenerateConfiguration("estimated homography is singular");
  return out;
}

Eigen::Vector2d project_point(const Homography& h, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = h.h * p.homogeneous();
  if (std::abs(q.z()) <= kInfinityTol)
    throw PointAtInfinity("projected point at infinity");
  return q.hnormalized();
}

double reprojection_error(const Homography& h, const std::vector<Correspondence>& correspondences) {
  double total = 0.0;
  for (const auto& c : correspondences)
    total += (c.world_point - project_point(h, c.image_point)).squaredNorm();
  return total;
}

Homography inverse(const Homography& h) {
  if (std::abs(h.h.determinant()) <= 1e-12)
    throw DegenerateConfiguration("homography not invertible");
  return make_homography(h.h.inverse());
}

std::vector<Correspondence> load_correspondences(const std::string& path) {
  std::vector<Correspondence> out;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 4) throw IoError("expected `ix iy wx wy` in " + path + ": " + line);
    out.push_back({{parse_double(tok[0]), parse_double(tok[1])},
                   {parse_double(tok[2]), parse_double(tok[3])}});
  }
  return out;
}

}  // namespace sitetrack::geometry
