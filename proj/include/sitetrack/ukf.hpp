#pragma once

#include <Eigen/Dense>
#include <functional>

namespace sitetrack::ukf {

struct GaussianState {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

struct UtParams {
  double alpha = 1.0;
  double beta = 2.0;
  double kappa = 0.0;
};

using MotionFn = std::function<Eigen::Vector2d(const Eigen::Vector2d&)>;
using MeasurementFn = std::function<Eigen::VectorXd(const Eigen::Vector2d&)>;

struct UtResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cross_cov;  // state-dim x output-dim
};

// Symmetric sigma set (2L+1 points) with the standard scaled weights.
UtResult unscented_transform(const GaussianState& state, const MeasurementFn& f,
                             const UtParams& params = {});

GaussianState ukf_predict(const GaussianState& state, const MotionFn& motion_fn,
                          const Eigen::Matrix2d& process_noise, const UtParams& params = {});

// Predicted measurement statistics, reusable across several candidate vectors.
struct PredictedMeasurement {
  Eigen::VectorXd mean;            // y_hat
  Eigen::MatrixXd innovation_cov;  // V = cov(y_hat) + R
  Eigen::MatrixXd cross_cov;
  Eigen::LLT<Eigen::MatrixXd> llt;  // factorization of V
  double log_norm = 0.0;            // -(d*log(2pi) + logdet V)/2
};

PredictedMeasurement predict_measurement(const GaussianState& state, const MeasurementFn& meas_fn,
                                         const Eigen::MatrixXd& meas_noise,
                                         const UtParams& params = {});

// Assembles the cached factorization and normalizer from explicit moments;
// used for marginal blocks of an already-predicted measurement.
PredictedMeasurement make_predicted(Eigen::VectorXd mean, Eigen::MatrixXd innovation_cov,
                                    Eigen::MatrixXd cross_cov);

double log_density(const PredictedMeasurement& pm, const Eigen::VectorXd& y);

GaussianState apply_update(const GaussianState& state, const PredictedMeasurement& pm,
                           const Eigen::VectorXd& y);

struct UpdateResult {
  GaussianState state;
  double likelihood = 0.0;      // may underflow to 0 for far outliers
  double log_likelihood = 0.0;
  Eigen::MatrixXd innovation_cov;
};

UpdateResult ukf_update(const GaussianState& state, const Eigen::VectorXd& y,
                        const MeasurementFn& meas_fn, const Eigen::MatrixXd& meas_noise,
                        const UtParams& params = {});

// Density floor used when likelihoods enter ratio comparisons.
inline constexpr double kDensityFloor = 1e-300;
double floored_log(double log_lik);

}  // namespace sitetrack::ukf
