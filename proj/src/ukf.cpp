#include "sitetrack/ukf.hpp"

#include <cmath>

#include "sitetrack/errors.hpp"

namespace sitetrack::ukf {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Cholesky with escalating jitter; the covariances here are tiny and jitter
// beyond 1e-3 means something upstream is already broken.
Eigen::Matrix2d robust_chol(Eigen::Matrix2d sigma) {
  double jitter = 0.0;
  for (;;) {
    Eigen::LLT<Eigen::Matrix2d> llt(sigma);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter = jitter == 0.0 ? 1e-9 : jitter * 2.0;
    if (jitter > 1e-3) throw NonPsdCovariance("covariance not repairable by jitter");
    sigma += jitter * Eigen::Matrix2d::Identity();
  }
}

struct SigmaSet {
  Eigen::Matrix<double, 2, 5> points;
  double w0m, w0c, wi;
};

SigmaSet sigma_points(const GaussianState& state, const UtParams& p) {
  constexpr int L = 2;
  const double lambda = p.alpha * p.alpha * (L + p.kappa) - L;
  const double denom = L + lambda;
  if (!(denom > 1e-12)) throw InvalidConfig("unscented-transform spread parameters degenerate");
  SigmaSet s;
  s.w0m = lambda / denom;
  s.w0c = s.w0m + (1.0 - p.alpha * p.alpha + p.beta);
  s.wi = 0.5 / denom;
  const Eigen::Matrix2d root = std::sqrt(denom) * robust_chol(state.cov);
  s.points.col(0) = state.mean;
  for (int i = 0; i < L; ++i) {
    s.points.col(1 + i) = state.mean + root.col(i);
    s.points.col(1 + L + i) = state.mean - root.col(i);
  }
  return s;
}

}  // namespace

UtResult unscented_transform(const GaussianState& state, const MeasurementFn& f,
                             const UtParams& params) {
  const SigmaSet s = sigma_points(state, params);
  Eigen::VectorXd y0 = f(s.points.col(0));
  const Eigen::Index d = y0.size();
  Eigen::Matrix<double, Eigen::Dynamic, 5> ys(d, 5);
  ys.col(0) = y0;
  for (int i = 1; i < 5; ++i) ys.col(i) = f(s.points.col(i));

  UtResult out;
  out.mean = s.w0m * ys.col(0);
  for (int i = 1; i < 5; ++i) out.mean += s.wi * ys.col(i);

  out.cov = Eigen::MatrixXd::Zero(d, d);
  out.cross_cov = Eigen::MatrixXd::Zero(2, d);
  for (int i = 0; i < 5; ++i) {
    const double w = i == 0 ? s.w0c : s.wi;
    const Eigen::VectorXd dy = ys.col(i) - out.mean;
    const Eigen::Vector2d dx = s.points.col(i) - state.mean;
    out.cov.noalias() += w * dy * dy.transpose();
    out.cross_cov.noalias() += w * dx * dy.transpose();
  }
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

GaussianState ukf_predict(const GaussianState& state, const MotionFn& motion_fn,
                          const Eigen::Matrix2d& process_noise, const UtParams& params) {
  const UtResult r = unscented_transform(
      state, [&](const Eigen::Vector2d& x) -> Eigen::VectorXd { return motion_fn(x); }, params);
  GaussianState out;
  out.mean = r.mean;
  out.cov = r.cov + process_noise;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

PredictedMeasurement make_predicted(Eigen::VectorXd mean, Eigen::MatrixXd innovation_cov,
                                    Eigen::MatrixXd cross_cov) {
  PredictedMeasurement pm;
  pm.mean = std::move(mean);
  pm.innovation_cov = std::move(innovation_cov);
  pm.innovation_cov = 0.5 * (pm.innovation_cov + pm.innovation_cov.transpose()).eval();
  pm.cross_cov = std::move(cross_cov);
  pm.llt.compute(pm.innovation_cov);
  if (pm.llt.info() != Eigen::Success)
    throw SingularInnovation("innovation covariance not positive definite");
  double logdet = 0.0;
  const auto& l = pm.llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
  pm.log_norm = -0.5 * (static_cast<double>(pm.mean.size()) * kLog2Pi + logdet);
  return pm;
}

PredictedMeasurement predict_measurement(const GaussianState& state, const MeasurementFn& meas_fn,
                                         const Eigen::MatrixXd& meas_noise,
                                         const UtParams& params) {
  UtResult r = unscented_transform(state, meas_fn, params);
  if (meas_noise.rows() != r.mean.size() || meas_noise.cols() != r.mean.size())
    throw DimensionMismatch("measurement-noise dimension mismatch");
  return make_predicted(std::move(r.mean), r.cov + meas_noise, std::move(r.cross_cov));
}

double log_density(const PredictedMeasurement& pm, const Eigen::VectorXd& y) {
  if (y.size() != pm.mean.size()) throw DimensionMismatch("measurement dimension mismatch");
  const Eigen::VectorXd innov = y - pm.mean;
  const double q = innov.dot(pm.llt.solve(innov));
  return pm.log_norm - 0.5 * q;
}

GaussianState apply_update(const GaussianState& state, const PredictedMeasurement& pm,
                           const Eigen::VectorXd& y) {
  // K = C V^-1, computed through the cached factorization
  const Eigen::MatrixXd gain = pm.llt.solve(pm.cross_cov.transpose()).transpose();
  GaussianState out;
  out.mean = state.mean + gain * (y - pm.mean);
  out.cov = state.cov - gain * pm.innovation_cov * gain.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

UpdateResult ukf_update(const GaussianState& state, const Eigen::VectorXd& y,
                        const MeasurementFn& meas_fn, const Eigen::MatrixXd& meas_noise,
                        const UtParams& params) {
  const PredictedMeasurement pm = predict_measurement(state, meas_fn, meas_noise, params);
  UpdateResult out;
  out.log_likelihood = log_density(pm, y);
  out.likelihood = std::exp(out.log_likelihood);
  out.state = apply_update(state, pm, y);
  out.innovation_cov = pm.innovation_cov;
  return out;
}

double floored_log(double log_lik) {
  constexpr double kLogFloor = -690.77552789821368;  // log(1e-300)
  return std::isfinite(log_lik) ? std::max(log_lik, kLogFloor) : kLogFloor;
}

}  // namespace sitetrack::ukf
