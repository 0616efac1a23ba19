#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sitetrack::socialforce {

struct SfmParams {
  double a = 50.0;             // N, social magnitude
  double b = 0.5;              // m, social range
  double c = 250.0;            // N/m, physical magnitude
  double lambda_aniso = 0.5;
  double mass = 70.0;          // kg
  double person_radius = 0.2;  // m
  double obstacle_radius = 0.5 / 1.4142135623730951;  // m, cell/sqrt(2) for 0.5 m cells
  // entities with d > r_sum + cutoff_factor*b are skipped (<=0 disables)
  double cutoff_factor = 10.0;
};

enum class EntityKind { Person, Obstacle };

struct Entity {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.2;
  EntityKind kind = EntityKind::Person;
};

struct Step {
  bool taken = false;
  double length = 0.0;   // m
  double heading = 0.0;  // rad
};

double anisotropy(double lambda_aniso, double phi);

// Repulsion along the unit vector from other to self, attenuated behind the
// desired direction of motion.
Eigen::Vector2d social_force(const Entity& self, const Entity& other,
                             const Eigen::Vector2d& desired_dir, const SfmParams& params);

// Contact-only restoring force; zero without overlap.
Eigen::Vector2d physical_force(const Entity& self, const Entity& obstacle, const SfmParams& params);

Eigen::Vector2d total_force(const Entity& self, const std::vector<Entity>& people,
                            const std::vector<Entity>& obstacles,
                            const Eigen::Vector2d& desired_dir, const SfmParams& params);

// Mean of the force-augmented motion model (noise is the filter's business).
Eigen::Vector2d predict_with_forces(const Eigen::Vector2d& x_prev, const Step& step,
                                    const std::vector<Entity>& people,
                                    const std::vector<Entity>& obstacles, const SfmParams& params,
                                    double dt);

// Central finite differences of predict_with_forces, step 1e-5 m per axis.
Eigen::Matrix2d force_jacobian(const Eigen::Vector2d& x_prev, const Step& step,
                               const std::vector<Entity>& people,
                               const std::vector<Entity>& obstacles, const SfmParams& params,
                               double dt);

}  // namespace sitetrack::socialforce
