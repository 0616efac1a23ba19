#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sitetrack::geometry {

struct Correspondence {
  Eigen::Vector2d image_point;
  Eigen::Vector2d world_point;
};

// 3x3 projective map, scaled so h(2,2) == 1 whenever that entry is nonzero.
struct Homography {
  Eigen::Matrix3d h;
};

Homography make_homography(const Eigen::Matrix3d& m);

// Normalized DLT; with more than 4 points the algebraic solution is refined by
// Gauss-Newton on the geometric transfer error.
Homography dlt_homography(const std::vector<Correspondence>& correspondences);

Eigen::Vector2d project_point(const Homography& h, const Eigen::Vector2d& p);

// Sum of squared Euclidean distances between world points and projected image points.
double reprojection_error(const Homography& h, const std::vector<Correspondence>& correspondences);

Homography inverse(const Homography& h);

// Lines of `ix iy wx wy`; blank lines and '#' comments skipped.
std::vector<Correspondence> load_correspondences(const std::string& path);

}  // namespace sitetrack::geometry
