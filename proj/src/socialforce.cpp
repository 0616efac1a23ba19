#include "sitetrack/socialforce.hpp"

#include <cmath>

#include "sitetrack/errors.hpp"

namespace sitetrack::socialforce {
namespace {

constexpr double kMinSeparation = 1e-9;

struct Pairing {
  double d;
  double r_sum;
  Eigen::Vector2d n;  // unit, other -> self
};

Pairing pair_geometry(const Entity& self, const Entity& other) {
  const Eigen::Vector2d delta = self.center - other.center;
  const double d = delta.norm();
  if (d <= kMinSeparation) throw CoincidentCenters("entities share a center");
  return {d, self.radius + other.radius, delta / d};
}

bool beyond_cutoff(const Pairing& g, const SfmParams& p) {
  return p.cutoff_factor > 0.0 && g.d - g.r_sum > p.cutoff_factor * p.b;
}

}  // namespace

double anisotropy(double lambda_aniso, double phi) {
  return lambda_aniso + (1.0 - lambda_aniso) * (1.0 + std::cos(phi)) / 2.0;
}

Eigen::Vector2d social_force(const Entity& self, const Entity& other,
                             const Eigen::Vector2d& desired_dir, const SfmParams& params) {
  const Pairing g = pair_geometry(self, other);
  const double cos_phi = std::clamp(-g.n.dot(desired_dir), -1.0, 1.0);
  const double gamma =
      params.lambda_aniso + (1.0 - params.lambda_aniso) * (1.0 + cos_phi) / 2.0;
  return params.a * std::exp((g.r_sum - g.d) / params.b) * gamma * g.n;
}

Eigen::Vector2d physical_force(const Entity& self, const Entity& obstacle,
                               const SfmParams& params) {
  const Pairing g = pair_geometry(self, obstacle);
  const double overlap = g.r_sum - g.d;
  if (overlap <= 0.0) return Eigen::Vector2d::Zero();
  return params.c * overlap * g.n;
}

Eigen::Vector2d total_force(const Entity& self, const std::vector<Entity>& people,
                            const std::vector<Entity>& obstacles,
                            const Eigen::Vector2d& desired_dir, const SfmParams& params) {
  Eigen::Vector2d f = Eigen::Vector2d::Zero();
  for (const auto& person : people) {
    const Pairing g = pair_geometry(self, person);
    if (beyond_cutoff(g, params)) continue;
    f += social_force(self, person, desired_dir, params);
  }
  for (const auto& obstacle : obstacles) {
    const Pairing g = pair_geometry(self, obstacle);
    if (beyond_cutoff(g, params)) continue;
    f += social_force(self, obstacle, desired_dir, params);
    f += physical_force(self, obstacle, params);
  }
  return f;
}

Eigen::Vector2d predict_with_forces(const Eigen::Vector2d& x_prev, const Step& step,
                                    const std::vector<Entity>& people,
                                    const std::vector<Entity>& obstacles, const SfmParams& params,
                                    double dt) {
  const Eigen::Vector2d dir(std::cos(step.heading), std::sin(step.heading));
  Eigen::Vector2d x = x_prev;
  if (step.taken) x += step.length * dir;
  const Entity self{x_prev, params.person_radius, EntityKind::Person};
  const Eigen::Vector2d f = total_force(self, people, obstacles, dir, params);
  return x + 0.5 * (f / params.mass) * dt * dt;
}

Eigen::Matrix2d force_jacobian(const Eigen::Vector2d& x_prev, const Step& step,
                               const std::vector<Entity>& people,
                               const std::vector<Entity>& obstacles, const SfmParams& params,
                               double dt) {
  constexpr double h = 1e-5;
  Eigen::Matrix2d jac;
  for (int k = 0; k < 2; ++k) {
    Eigen::Vector2d hi = x_prev, lo = x_prev;
    hi(k) += h;
    lo(k) -= h;
    jac.col(k) = (predict_with_forces(hi, step, people, obstacles, params, dt) -
                  predict_with_forces(lo, step, people, obstacles, params, dt)) /
                 (2.0 * h);
  }
  return jac;
}

}  // namespace sitetrack::socialforce
