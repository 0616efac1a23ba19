#include "sitetrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "sitetrack/errors.hpp"

namespace sitetrack::tracker {

namespace {

const inertial::StepModelState kDefaultStepModel{};

const inertial::StepModelState& step_state_for(const Models& models, int device_id) {
  const auto it = models.steps.find(device_id);
  return it == models.steps.end() ? kDefaultStepModel : it->second;
}

struct DevCache {
  bool live = false;
  ukf::PredictedMeasurement pm;  // full stacked prediction (valid when live)
  double clutter_loglik = 0.0;   // log p(y_mj | clutter), camera part uniform
};

struct KernelResult {
  double log_inc = 0.0;
  std::vector<AssociationEvent> events;
  std::map<int, DeviceScanInfo> devices;
};

void predict_targets(Particle& p, const ScanMeasurements& scan, const Models& models,
                     const TrackerConfig& cfg) {
  const Eigen::Matrix2d lambda =
      cfg.process_sigma * cfg.process_sigma * Eigen::Matrix2d::Identity();
  // Neighbor positions frozen before any prediction so the force field does
  // not depend on the order targets are advanced in.
  std::vector<std::pair<int, Eigen::Vector2d>> prev;
  if (cfg.sfm_enabled) {
    prev.reserve(p.targets.size());
    for (const auto& tg : p.targets) prev.emplace_back(tg.device_id, tg.gaussian.mean);
  }
  for (auto& tg : p.targets) {
    if (tg.birth_scan == scan.t) continue;  // born from this scan's data
    socialforce::Step step;
    const auto it = scan.steps.find(tg.device_id);
    if (it != scan.steps.end() && it->second.step_indicator) {
      step.taken = true;
      step.length =
          inertial::active_step_length(step_state_for(models, tg.device_id),
                                       it->second.step_frequency);
      step.heading = it->second.heading;
    }
    if (!cfg.sfm_enabled) {
      // Plain shift: linear with identity Jacobian, so both prediction styles
      // coincide and the moments are exact.
      if (step.taken) {
        tg.gaussian.mean +=
            step.length * Eigen::Vector2d(std::cos(step.heading), std::sin(step.heading));
      }
      tg.gaussian.cov += lambda;
      continue;
    }
    std::vector<socialforce::Entity> others;
    others.reserve(prev.size());
    for (const auto& [id, mean] : prev) {
      if (id != tg.device_id) {
        others.push_back({mean, models.sfm.person_radius, socialforce::EntityKind::Person});
      }
    }
    if (cfg.prediction == PredictionStyle::Unscented) {
      tg.gaussian = ukf::ukf_predict(
          tg.gaussian,
          [&](const Eigen::Vector2d& x) {
            return socialforce::predict_with_forces(x, step, others, models.obstacles, models.sfm,
                                                    cfg.dt);
          },
          lambda, cfg.ut);
    } else {
      const Eigen::Vector2d mean = socialforce::predict_with_forces(
          tg.gaussian.mean, step, others, models.obstacles, models.sfm, cfg.dt);
      const Eigen::Matrix2d j = socialforce::force_jacobian(
          tg.gaussian.mean, step, others, models.obstacles, models.sfm, cfg.dt);
      tg.gaussian.cov = j * tg.gaussian.cov * j.transpose() + lambda;
      tg.gaussian.cov = 0.5 * (tg.gaussian.cov + tg.gaussian.cov.transpose()).eval();
      tg.gaussian.mean = mean;
    }
  }
}

std::map<int, DevCache> build_measurement_cache(const Particle& p, const ScanMeasurements& scan,
                                                const Models& models, const TrackerConfig& cfg) {
  std::map<int, DevCache> cache;
  for (const auto& [dev, rss] : scan.radio) {
    std::vector<int> present;
    for (std::size_t i = 0; i < rss.size(); ++i) {
      if (!std::isnan(rss[i])) present.push_back(static_cast<int>(i));
    }
    if (present.empty()) continue;
    const int n = static_cast<int>(present.size());
    DevCache c;
    if (const TargetState* tg = p.find(dev)) {
      c.live = true;
      const auto h = [&](const Eigen::Vector2d& x) {
        Eigen::VectorXd y(2 + n);
        y.head<2>() = x;
        for (int i = 0; i < n; ++i) {
          y(2 + i) = radio::expected_rss(models.radio_model.access_points[present[i]], x);
        }
        return y;
      };
      Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2 + n, 2 + n);
      r(0, 0) = r(1, 1) = cfg.camera_sigma * cfg.camera_sigma;
      for (int i = 0; i < n; ++i) r(2 + i, 2 + i) = cfg.rss_sigma * cfg.rss_sigma;
      c.pm = ukf::predict_measurement(tg->gaussian, h, r, cfg.ut);
      // RSS-block marginal: the clutter hypothesis still has to explain the
      // device's radio vector, just without tying it to this detection.
      ukf::PredictedMeasurement marg = ukf::make_predicted(
          c.pm.mean.tail(n), c.pm.innovation_cov.bottomRightCorner(n, n),
          c.pm.cross_cov.rightCols(n));
      Eigen::VectorXd rv(n);
      for (int i = 0; i < n; ++i) rv(i) = rss[present[i]];
      c.clutter_loglik =
          std::log(cfg.clutter_density) + ukf::floored_log(ukf::log_density(marg, rv));
    } else {
      // No track to condition on: uninformative RSS density over the span.
      c.clutter_loglik =
          std::log(cfg.clutter_density) - n * std::log(cfg.rss_span_db);
    }
    cache.emplace(dev, std::move(c));
  }
  return cache;
}

KernelResult run_particle_scan(Particle& p, const ScanMeasurements& scan,
                               const std::vector<JointMeasurement>& jms, const Models& models,
                               const TrackerConfig& cfg, Rng rng) {
  KernelResult out;
  predict_targets(p, scan, models, cfg);
  std::map<int, DevCache> cache = build_measurement_cache(p, scan, models, cfg);

  out.events.reserve(jms.size());
  for (std::size_t k = 0; k < jms.size(); ++k) {
    const JointMeasurement& jm = jms[k];
    const DevCache& c = cache.at(jm.device_id);
    const AssociationEvent ev_clutter{true, -1};
    const AssociationEvent ev_target{false, jm.device_id};

    const double log_pi_c =
        std::log(association_prior(p, jms, k, ev_clutter, out.events, cfg)) + c.clutter_loglik;
    bool have_target = false;
    double log_pi_t = 0.0, loglik_t = 0.0;
    if (c.live) {
      const double pr = association_prior(p, jms, k, ev_target, out.events, cfg);
      if (pr > 0.0) {
        loglik_t = ukf::floored_log(ukf::log_density(c.pm, jm.stacked));
        log_pi_t = std::log(pr) + loglik_t;
        have_target = true;
      }
    }

    const double m = have_target ? std::max(log_pi_c, log_pi_t) : log_pi_c;
    const double wc = std::exp(log_pi_c - m);
    const double wt = have_target ? std::exp(log_pi_t - m) : 0.0;
    const double z = wc + wt;
    // One uniform per measurement regardless of the candidate set, so draw
    // positions stay aligned across particles.
    const double u = rng.uniform() * z;
    out.log_inc += m + std::log(z);

    if (have_target && u >= wc) {
      TargetState* tg = p.find(jm.device_id);
      tg->gaussian = ukf::apply_update(tg->gaussian, c.pm, jm.stacked);
      tg->last_camera_scan = scan.t;
      const double q = loglik_t + std::log(cfg.pd) - c.clutter_loglik;
      tg->quality += q;
      DeviceScanInfo& di = out.devices[jm.device_id];
      di.updated = true;
      di.quality_increment = q;
      out.events.push_back(ev_target);
    } else {
      out.events.push_back(ev_clutter);
    }
  }

  // Missed-detection decrement: the device reported radio, the track is live,
  // but no joint measurement claimed it this scan.
  for (const auto& [dev, c] : cache) {
    DeviceScanInfo& di = out.devices[dev];
    di.had_radio = true;
    if (c.live && !di.updated) {
      const double q = ukf::floored_log(std::log(1.0 - cfg.pd));
      p.find(dev)->quality += q;
      di.quality_increment = q;
    }
  }
  for (const auto& tg : p.targets) {
    DeviceScanInfo& di = out.devices[tg.device_id];
    di.has_track = true;
    di.position = tg.gaussian.mean;
  }
  return out;
}

}  // namespace

TargetState* Particle::find(int device_id) {
  for (auto& t : targets) {
    if (t.device_id == device_id) return &t;
  }
  return nullptr;
}

const TargetState* Particle::find(int device_id) const {
  for (const auto& t : targets) {
    if (t.device_id == device_id) return &t;
  }
  return nullptr;
}

std::vector<JointMeasurement> build_joint_measurements(const ScanMeasurements& scan) {
  std::vector<JointMeasurement> out;
  for (int m = 0; m < static_cast<int>(scan.camera.size()); ++m) {
    for (const auto& [dev, rss] : scan.radio) {
      std::vector<int> present;
      for (std::size_t i = 0; i < rss.size(); ++i) {
        if (!std::isnan(rss[i])) present.push_back(static_cast<int>(i));
      }
      if (present.empty()) continue;
      JointMeasurement jm;
      jm.camera_index = m;
      jm.device_id = dev;
      jm.present_aps = present;
      jm.stacked.resize(2 + present.size());
      jm.stacked.head<2>() = scan.camera[m];
      for (std::size_t i = 0; i < present.size(); ++i) jm.stacked(2 + i) = rss[present[i]];
      out.push_back(std::move(jm));
    }
  }
  return out;
}

double association_prior(const Particle& particle, const std::vector<JointMeasurement>& jms,
                         std::size_t index, const AssociationEvent& event,
                         const std::vector<AssociationEvent>& so_far, const TrackerConfig& cfg) {
  if (index >= jms.size() || so_far.size() != index) {
    throw DimensionMismatch("association context does not match measurement index");
  }
  if (event.clutter) return cfg.clutter_prior;

  const TargetState* tg = particle.find(event.device_id);
  if (tg == nullptr) throw UnknownTarget("no live track for device");
  if (jms[index].device_id != event.device_id) return 0.0;  // identity carried by the RSS half
  for (std::size_t k = 0; k < so_far.size(); ++k) {
    if (so_far[k].clutter) continue;
    if (so_far[k].device_id == event.device_id) return 0.0;  // one update per scan
    if (!cfg.allow_shared_detection &&
        jms[k].camera_index == jms[index].camera_index) {
      return 0.0;  // detection already consumed
    }
  }
  // Identity restriction leaves a single eligible target; counted anyway so
  // the formula reads as stated.
  int eligible = 0;
  for (const auto& t : particle.targets) {
    if (t.device_id == jms[index].device_id) ++eligible;
  }
  return (1.0 - cfg.clutter_prior) * cfg.pd / eligible;
}

void spawn_targets(std::vector<Particle>& particles, const ScanMeasurements& scan,
                   const radio::RadioModel& model, const TrackerConfig& cfg) {
  if (scan.camera.empty()) return;
  for (const auto& [dev, rss] : scan.radio) {
    std::vector<int> present;
    for (std::size_t i = 0; i < rss.size(); ++i) {
      if (!std::isnan(rss[i])) present.push_back(static_cast<int>(i));
    }
    if (present.empty()) continue;
    int best = -1;
    double best_rms = std::numeric_limits<double>::infinity();
    for (int m = 0; m < static_cast<int>(scan.camera.size()); ++m) {
      double ss = 0.0;
      for (const int i : present) {
        const double r = rss[i] - radio::expected_rss(model.access_points[i], scan.camera[m]);
        ss += r * r;
      }
      const double rms = std::sqrt(ss / present.size());
      if (rms < best_rms) {
        best_rms = rms;
        best = m;
      }
    }
    if (best < 0 || best_rms > cfg.birth_gate_db) continue;
    TargetState nt;
    nt.device_id = dev;
    nt.gaussian.mean = scan.camera[best];
    nt.gaussian.cov = Eigen::Matrix2d::Identity();
    nt.last_camera_scan = scan.t;
    nt.birth_scan = scan.t;
    for (auto& p : particles) {
      if (p.find(dev) != nullptr) continue;
      const auto pos = std::lower_bound(
          p.targets.begin(), p.targets.end(), dev,
          [](const TargetState& t, int id) { return t.device_id < id; });
      p.targets.insert(pos, nt);
    }
  }
}

void kill_stale_targets(std::vector<Particle>& particles, int t_now, int timeout) {
  if (timeout <= 0) return;
  for (auto& p : particles) {
    std::erase_if(p.targets, [&](const TargetState& t) {
      return t_now - t.last_camera_scan > timeout;
    });
  }
}

void resample_systematic(std::vector<Particle>& particles, Rng rng) {
  const std::size_t n = particles.size();
  if (n == 0) return;
  const double u0 = rng.uniform() / static_cast<double>(n);
  std::vector<Particle> next;
  next.reserve(n);
  std::size_t j = 0;
  double cum = particles[0].weight;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = u0 + static_cast<double>(i) / static_cast<double>(n);
    while (u > cum && j + 1 < n) {
      ++j;
      cum += particles[j].weight;
    }
    next.push_back(particles[j]);
    next.back().weight = 1.0 / static_cast<double>(n);
  }
  particles = std::move(next);
}

double effective_sample_size(const std::vector<Particle>& particles) {
  double ss = 0.0;
  for (const auto& p : particles) ss += p.weight * p.weight;
  return ss > 0.0 ? 1.0 / ss : 0.0;
}

std::map<int, Eigen::Vector2d> estimate_positions(const std::vector<Particle>& particles,
                                                  EstimateMode mode) {
  std::map<int, Eigen::Vector2d> out;
  if (particles.empty()) return out;
  if (mode == EstimateMode::MaxWeight) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < particles.size(); ++i) {
      if (particles[i].weight > particles[best].weight) best = i;
    }
    for (const auto& t : particles[best].targets) out.emplace(t.device_id, t.gaussian.mean);
    return out;
  }
  std::map<int, std::pair<Eigen::Vector2d, double>> acc;
  for (const auto& p : particles) {
    for (const auto& t : p.targets) {
      auto& [num, den] = acc[t.device_id];
      num += p.weight * t.gaussian.mean;
      den += p.weight;
    }
  }
  for (const auto& [dev, nd] : acc) {
    if (nd.second > 0.0) out.emplace(dev, nd.first / nd.second);
  }
  return out;
}

Filter::Filter(TrackerConfig cfg, Models models)
    : cfg_(std::move(cfg)), models_(std::move(models)), master_(cfg_.seed) {
  if (cfg_.particles < 1) throw InvalidConfig("particle count must be positive");
  if (!(cfg_.pd > 0.0 && cfg_.pd <= 1.0)) throw InvalidConfig("detection probability outside (0,1]");
  if (!(cfg_.clutter_prior > 0.0 && cfg_.clutter_prior < 1.0)) {
    throw InvalidConfig("clutter prior outside (0,1)");
  }
  if (!(cfg_.clutter_density > 0.0)) throw InvalidConfig("clutter density must be positive");
  if (!(cfg_.camera_sigma > 0.0) || !(cfg_.rss_sigma > 0.0)) {
    throw InvalidConfig("measurement noise must be positive");
  }
  if (!(cfg_.rss_span_db > 1.0)) throw InvalidConfig("rss span must exceed 1 dB");
  if (!(cfg_.resample_fraction >= 0.0 && cfg_.resample_fraction <= 1.0)) {
    throw InvalidConfig("resample fraction outside [0,1]");
  }
  particles_.resize(cfg_.particles);
  for (auto& p : particles_) p.weight = 1.0 / cfg_.particles;
}

void Filter::set_models(Models models) { models_ = std::move(models); }

ScanSummary Filter::process_scan(const ScanMeasurements& scan) {
  const int t = scan.t;
  spawn_targets(particles_, scan, models_.radio_model, cfg_);
  const std::vector<JointMeasurement> jms = build_joint_measurements(scan);
  const int n = cfg_.particles;
  std::vector<KernelResult> results(n);

  if (cfg_.execution == Execution::Parallel) {
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      try {
        results[i] = run_particle_scan(particles_[i], scan, jms, models_, cfg_,
                                       master_.derive(stream::kParticle, i, t));
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (int i = 0; i < n; ++i) {
      results[i] = run_particle_scan(particles_[i], scan, jms, models_, cfg_,
                                     master_.derive(stream::kParticle, i, t));
    }
  }

  ScanSummary s;
  s.t = t;
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> logw(n);
  for (int i = 0; i < n; ++i) {
    logw[i] = (particles_[i].weight > 0.0 ? std::log(particles_[i].weight)
                                          : -std::numeric_limits<double>::infinity()) +
              results[i].log_inc;
    if (std::isfinite(logw[i]) && logw[i] > mx) mx = logw[i];
  }
  if (!std::isfinite(mx)) {
    // Total weight collapse: recover with a uniform reset and flag it.
    for (auto& p : particles_) p.weight = 1.0 / n;
    s.weights_reset = true;
  } else {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = logw[i] - mx;
      particles_[i].weight = std::isfinite(v) ? std::exp(v) : 0.0;
      sum += particles_[i].weight;
    }
    for (auto& p : particles_) p.weight /= sum;
  }

  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (particles_[i].weight > particles_[best].weight) best = i;
  }
  s.best_particle = best;
  s.devices = std::move(results[best].devices);

  kill_stale_targets(particles_, t, cfg_.death_timeout);
  s.estimates = tracker::estimate_positions(particles_, cfg_.estimate_mode);

  if (cfg_.record_associations) {
    s.association_log.reserve(static_cast<std::size_t>(n) * jms.size());
    for (int i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < results[i].events.size(); ++k) {
        const auto& ev = results[i].events[k];
        s.association_log.push_back(
            std::to_string(t) + "," + std::to_string(i) + "," + std::to_string(k) + "," +
            (ev.clutter ? std::string("clutter")
                        : "target:" + std::to_string(ev.device_id)));
      }
    }
  }

  s.ess = effective_sample_size(particles_);
  if (s.ess < cfg_.resample_fraction * n) {
    resample_systematic(particles_, master_.derive(stream::kResample, 0, t));
    s.resampled = true;
  }
  return s;
}

std::map<int, Eigen::Vector2d> Filter::estimate_positions() const {
  return tracker::estimate_positions(particles_, cfg_.estimate_mode);
}

}  // namespace sitetrack::tracker
