#include "sitetrack/baseline.hpp"

#include <cmath>
#include <limits>

#include "sitetrack/errors.hpp"

namespace sitetrack::baseline {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct Candidate {
  enum Kind { Clutter, Birth, Track } kind = Clutter;
  int track_index = -1;
  double log_pi = 0.0;
};

void kernel(BaselineParticle& p, int t, const std::vector<Eigen::Vector2d>& dets,
            const BaselineConfig& cfg, Rng rng, double& log_inc) {
  const double dt = cfg.dt;
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = f(1, 3) = dt;
  const double q = cfg.accel_sigma * cfg.accel_sigma;
  Eigen::Matrix4d qm = Eigen::Matrix4d::Zero();
  qm(0, 0) = qm(1, 1) = q * dt * dt * dt * dt / 4.0;
  qm(0, 2) = qm(2, 0) = qm(1, 3) = qm(3, 1) = q * dt * dt * dt / 2.0;
  qm(2, 2) = qm(3, 3) = q * dt * dt;
  for (auto& tr : p.tracks) {
    if (tr.birth_scan == t) continue;
    tr.mean = f * tr.mean;
    tr.cov = f * tr.cov * f.transpose() + qm;
  }

  const double r = cfg.camera_sigma * cfg.camera_sigma;
  const double area = (cfg.area_max - cfg.area_min).prod();
  const double log_birth_lik = -std::log(area);
  const double log_clutter_lik = std::log(cfg.clutter_density);
  const double track_prior_mass = 1.0 - cfg.clutter_prior - cfg.birth_prior;

  std::vector<char> updated(p.tracks.size(), 0);
  log_inc = 0.0;
  for (const auto& d : dets) {
    std::vector<Candidate> cands;
    cands.push_back({Candidate::Clutter, -1, std::log(cfg.clutter_prior) + log_clutter_lik});
    cands.push_back({Candidate::Birth, -1, std::log(cfg.birth_prior) + log_birth_lik});
    int eligible = 0;
    for (std::size_t k = 0; k < p.tracks.size(); ++k) {
      if (!updated[k]) ++eligible;
    }
    for (std::size_t k = 0; k < p.tracks.size(); ++k) {
      if (updated[k]) continue;
      const auto& tr = p.tracks[k];
      const Eigen::Vector2d innov = d - tr.mean.head<2>();
      Eigen::Matrix2d s = tr.cov.topLeftCorner<2, 2>();
      s(0, 0) += r;
      s(1, 1) += r;
      const double det = s.determinant();
      if (det <= 0.0) continue;
      const double qform = innov.dot(s.inverse() * innov);
      const double log_lik = -0.5 * (2.0 * kLog2Pi + std::log(det) + qform);
      cands.push_back({Candidate::Track, static_cast<int>(k),
                       std::log(track_prior_mass * cfg.pd / eligible) +
                           std::max(log_lik, -690.77552789821368)});
    }

    double m = -std::numeric_limits<double>::infinity();
    for (const auto& c : cands) m = std::max(m, c.log_pi);
    double z = 0.0;
    for (const auto& c : cands) z += std::exp(c.log_pi - m);
    const double u = rng.uniform() * z;
    log_inc += m + std::log(z);
    double cum = 0.0;
    const Candidate* pick = &cands.back();
    for (const auto& c : cands) {
      cum += std::exp(c.log_pi - m);
      if (u < cum) {
        pick = &c;
        break;
      }
    }

    if (pick->kind == Candidate::Birth) {
      CvTrack tr;
      tr.id = p.next_id++;
      tr.mean.head<2>() = d;
      tr.cov = Eigen::Vector4d(0.25, 0.25, 0.25, 0.25).asDiagonal();
      tr.last_update = t;
      tr.birth_scan = t;
      p.tracks.push_back(tr);
      updated.push_back(1);
    } else if (pick->kind == Candidate::Track) {
      auto& tr = p.tracks[pick->track_index];
      const Eigen::Vector2d innov = d - tr.mean.head<2>();
      Eigen::Matrix2d s = tr.cov.topLeftCorner<2, 2>();
      s(0, 0) += r;
      s(1, 1) += r;
      const Eigen::Matrix<double, 4, 2> gain = tr.cov.leftCols<2>() * s.inverse();
      tr.mean += gain * innov;
      tr.cov -= gain * s * gain.transpose();
      tr.cov = 0.5 * (tr.cov + tr.cov.transpose()).eval();
      tr.last_update = t;
      updated[pick->track_index] = 1;
    }
  }

  if (cfg.death_timeout > 0) {
    std::erase_if(p.tracks,
                  [&](const CvTrack& tr) { return t - tr.last_update > cfg.death_timeout; });
  }
}

}  // namespace

BaselineFilter::BaselineFilter(BaselineConfig cfg) : cfg_(cfg), master_(cfg.seed) {
  if (cfg_.particles < 1) throw InvalidConfig("particle count must be positive");
  if (!(cfg_.clutter_prior + cfg_.birth_prior < 1.0)) {
    throw InvalidConfig("event priors leave no mass for track association");
  }
  particles_.resize(cfg_.particles);
  for (auto& p : particles_) p.weight = 1.0 / cfg_.particles;
}

void BaselineFilter::process_scan(int t, const std::vector<Eigen::Vector2d>& detections) {
  const int n = cfg_.particles;
  std::vector<double> inc(n, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    kernel(particles_[i], t, detections, cfg_, master_.derive(stream::kParticle, i, t), inc[i]);
  }
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> logw(n);
  for (int i = 0; i < n; ++i) {
    logw[i] = (particles_[i].weight > 0.0 ? std::log(particles_[i].weight)
                                          : -std::numeric_limits<double>::infinity()) +
              inc[i];
    if (std::isfinite(logw[i]) && logw[i] > mx) mx = logw[i];
  }
  if (!std::isfinite(mx)) {
    for (auto& p : particles_) p.weight = 1.0 / n;
  } else {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = logw[i] - mx;
      particles_[i].weight = std::isfinite(v) ? std::exp(v) : 0.0;
      sum += particles_[i].weight;
    }
    for (auto& p : particles_) p.weight /= sum;
  }
  double ss = 0.0;
  for (const auto& p : particles_) ss += p.weight * p.weight;
  const double ess = ss > 0.0 ? 1.0 / ss : 0.0;
  if (ess < cfg_.resample_fraction * n) {
    Rng rng = master_.derive(stream::kResample, 0, t);
    const double u0 = rng.uniform() / n;
    std::vector<BaselineParticle> next;
    next.reserve(n);
    std::size_t j = 0;
    double cum = particles_[0].weight;
    for (int i = 0; i < n; ++i) {
      const double u = u0 + static_cast<double>(i) / n;
      while (u > cum && j + 1 < particles_.size()) {
        ++j;
        cum += particles_[j].weight;
      }
      next.push_back(particles_[j]);
      next.back().weight = 1.0 / n;
    }
    particles_ = std::move(next);
  }
}

std::vector<Eigen::Vector2d> BaselineFilter::estimate_positions() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < particles_.size(); ++i) {
    if (particles_[i].weight > particles_[best].weight) best = i;
  }
  std::vector<Eigen::Vector2d> out;
  for (const auto& tr : particles_[best].tracks) out.push_back(tr.mean.head<2>());
  return out;
}

}  // namespace sitetrack::baseline
