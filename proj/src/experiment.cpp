#include "sitetrack/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sitetrack/baseline.hpp"
#include "sitetrack/errors.hpp"
#include "sitetrack/learning.hpp"
#include "sitetrack/rng.hpp"
#include "sitetrack/textio.hpp"

namespace sitetrack::experiment {
namespace {

constexpr double kSwapRadius = 1.0;  // m
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

config::AppConfig seeded(const config::AppConfig& base, std::uint64_t seed) {
  config::AppConfig c = base;
  config::apply_seed(c, seed);
  return c;
}

RunRecord make_record(std::string label, std::string variant, std::uint64_t seed,
                      const metrics::TrackingErrors& te, int swaps, double cqs = 0.0) {
  RunRecord r;
  r.label = std::move(label);
  r.variant = std::move(variant);
  r.seed = seed;
  r.id_swaps = swaps;
  r.cqs = cqs;
  if (te.pooled.empty()) {
    r.error = "no matched scans";
    return r;
  }
  r.rmse = te.pooled_rmse();
  const metrics::ErrorCdf cdf = metrics::error_cdf(te.pooled);
  r.p50 = cdf.percentile(0.5);
  r.p90 = cdf.percentile(0.9);
  double cov = 0.0;
  for (const auto& [dev, c] : te.coverage_by_device) cov += c;
  r.coverage = te.coverage_by_device.empty() ? 0.0 : cov / te.coverage_by_device.size();
  return r;
}

RunRecord failed_record(std::string label, std::string variant, std::uint64_t seed,
                        std::string why) {
  RunRecord r;
  r.label = std::move(label);
  r.variant = std::move(variant);
  r.seed = seed;
  r.error = std::move(why);
  return r;
}

void append_pooled(ExperimentResult& res, const std::string& label,
                   const metrics::TrackingErrors& te) {
  auto& dst = res.pooled[label];
  dst.insert(dst.end(), te.pooled.begin(), te.pooled.end());
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const double x : v) s += x;
  return s / v.size();
}

// Mean rmse over successful runs matching (label, variant).
double mean_rmse(const ExperimentResult& res, const std::string& label,
                 const std::string& variant) {
  std::vector<double> v;
  for (const auto& r : res.runs) {
    if (r.label == label && r.variant == variant && r.error.empty()) v.push_back(r.rmse);
  }
  return mean_of(v);
}

// Wraps one run so a failure becomes a recorded row instead of aborting the sweep.
void attempt(ExperimentResult& res, const std::string& label, const std::string& variant,
             std::uint64_t seed, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    res.runs.push_back(failed_record(label, variant, seed, e.what()));
  }
}

// ---------------------------------------------------------------------------
// kinds

void run_single(const config::AppConfig& cfg, ExperimentResult& res) {
  for (const std::uint64_t seed : cfg.experiment.seeds) {
    attempt(res, "all", "", seed, [&] {
      const config::AppConfig c = seeded(cfg, seed);
      const sim::Scenario sc = sim::generate_scenario(c.scenario);
      const tracker::Models models = models_from_config(c, sim::initial_radio_model(c.scenario));
      const RunResult rr = run_tracking(sc, c.tracker, models);
      const metrics::TrackingErrors te = metrics::evaluate(sc.truth, rr.estimates);
      const int swaps = metrics::count_id_swaps(sc.truth, rr.estimates, kSwapRadius);
      res.runs.push_back(make_record("all", "", seed, te, swaps));
      append_pooled(res, "all", te);
    });
  }
  if (const auto it = res.pooled.find("all"); it != res.pooled.end() && !it->second.empty()) {
    const metrics::ErrorCdf cdf = metrics::error_cdf(it->second);
    res.aggregates["pooled_p50"] = cdf.percentile(0.5);
    res.aggregates["pooled_p90"] = cdf.percentile(0.9);
  }
  res.aggregates["mean_rmse"] = mean_rmse(res, "all", "");
}

void run_ablation(const config::AppConfig& cfg, ExperimentResult& res) {
  for (const std::uint64_t seed : cfg.experiment.seeds) {
    config::AppConfig c = seeded(cfg, seed);
    sim::Scenario sc;
    radio::RadioModel true_model;
    try {
      sc = sim::generate_scenario(c.scenario);
      true_model = sim::initial_radio_model(c.scenario);
    } catch (const std::exception& e) {
      for (const char* st : {"true", "mis", "learned", "learned_step"})
        res.runs.push_back(failed_record(std::string("stage=") + st, "", seed, e.what()));
      continue;
    }

    radio::RadioModel mis = true_model;
    for (auto& ap : mis.access_points) {
      ap.ref_power += cfg.experiment.radio_power_shift_db;
      ap.path_loss_exponent += cfg.experiment.radio_exponent_shift;
    }

    attempt(res, "stage=true", "", seed, [&] {
      const RunResult rr = run_tracking(sc, c.tracker, models_from_config(c, true_model));
      const metrics::TrackingErrors te = metrics::evaluate(sc.truth, rr.estimates);
      res.runs.push_back(make_record("stage=true", "", seed, te,
                                     metrics::count_id_swaps(sc.truth, rr.estimates, kSwapRadius)));
      append_pooled(res, "stage=true", te);
    });

    RunResult mis_run;
    bool have_mis = false;
    attempt(res, "stage=mis", "", seed, [&] {
      mis_run = run_tracking(sc, c.tracker, models_from_config(c, mis));
      have_mis = true;
      const metrics::TrackingErrors te = metrics::evaluate(sc.truth, mis_run.estimates);
      res.runs.push_back(make_record("stage=mis", "", seed, te,
                                     metrics::count_id_swaps(sc.truth, mis_run.estimates,
                                                             kSwapRadius)));
      append_pooled(res, "stage=mis", te);
    });

    radio::RadioModel learned = mis;
    if (have_mis) {
      const auto histories = learning::collect_track_histories(mis_run.summaries, sc.scans);
      std::vector<learning::TrackHistory> hv;
      hv.reserve(histories.size());
      for (const auto& [dev, th] : histories) hv.push_back(th);
      learned = learning::learn_radio_model(hv, mis, cfg.learning.q_threshold);
    }

    RunResult learned_run;
    bool have_learned = false;
    tracker::Models m_learned = models_from_config(c, learned);
    attempt(res, "stage=learned", "", seed, [&] {
      learned_run = run_tracking(sc, c.tracker, m_learned);
      have_learned = true;
      const metrics::TrackingErrors te = metrics::evaluate(sc.truth, learned_run.estimates);
      res.runs.push_back(make_record("stage=learned", "", seed, te,
                                     metrics::count_id_swaps(sc.truth, learned_run.estimates,
                                                             kSwapRadius)));
      append_pooled(res, "stage=learned", te);
    });

    attempt(res, "stage=learned_step", "", seed, [&] {
      tracker::Models m_step = m_learned;
      if (have_learned) {
        const auto histories = learning::collect_track_histories(learned_run.summaries, sc.scans);
        for (const auto& [dev, th] : histories) {
          const auto cal = learning::extract_step_calibration(th);
          try {
            const inertial::PersonalStepModel pm = inertial::fit_personal_step_model(cal);
            auto [it, inserted] = m_step.steps.try_emplace(dev, cfg.step.make_state());
            it->second.personal = pm;
          } catch (const Error&) {
            // not enough calibration; the universal model stays active
          }
        }
      }
      const RunResult rr = run_tracking(sc, c.tracker, m_step);
      const metrics::TrackingErrors te = metrics::evaluate(sc.truth, rr.estimates);
      res.runs.push_back(make_record("stage=learned_step", "", seed, te,
                                     metrics::count_id_swaps(sc.truth, rr.estimates, kSwapRadius)));
      append_pooled(res, "stage=learned_step", te);
    });
  }

  for (const char* st : {"true", "mis", "learned", "learned_step"}) {
    const std::string label = std::string("stage=") + st;
    if (const auto it = res.pooled.find(label); it != res.pooled.end() && !it->second.empty()) {
      const metrics::ErrorCdf cdf = metrics::error_cdf(it->second);
      res.aggregates["p50_" + std::string(st)] = cdf.percentile(0.5);
      res.aggregates["p90_" + std::string(st)] = cdf.percentile(0.9);
    }
    res.aggregates["rmse_" + std::string(st)] = mean_rmse(res, label, "");
  }
}

void run_occlusion(const config::AppConfig& cfg, ExperimentResult& res) {
  for (const double frac : cfg.experiment.occlusion_fractions) {
    const std::string label = "frac=" + format_fixed(frac, 2);
    for (const std::uint64_t seed : cfg.experiment.seeds) {
      config::AppConfig c = seeded(cfg, seed);
      c.scenario.camera.occlusions.clear();
      if (frac > 0.0)
        c.scenario.camera.occlusions.push_back(seeded_occlusion(c.scenario.area, frac, seed));
      sim::Scenario sc;
      try {
        sc = sim::generate_scenario(c.scenario);
      } catch (const std::exception& e) {
        res.runs.push_back(failed_record(label, "multimodal", seed, e.what()));
        res.runs.push_back(failed_record(label, "baseline", seed, e.what()));
        continue;
      }

      attempt(res, label, "multimodal", seed, [&] {
        const tracker::Models models = models_from_config(c, sim::initial_radio_model(c.scenario));
        const RunResult rr = run_tracking(sc, c.tracker, models);
        const metrics::TrackingErrors te = metrics::evaluate(sc.truth, rr.estimates);
        res.runs.push_back(
            make_record(label, "multimodal", seed, te,
                        metrics::count_id_swaps(sc.truth, rr.estimates, kSwapRadius)));
        append_pooled(res, label + ",multimodal", te);
      });

      attempt(res, label, "baseline", seed, [&] {
        baseline::BaselineFilter bf(c.baseline);
        std::vector<std::vector<Eigen::Vector2d>> per_scan;
        per_scan.reserve(sc.scans.size());
        for (const auto& scan : sc.scans) {
          bf.process_scan(scan.t, scan.camera);
          per_scan.push_back(bf.estimate_positions());
        }
        const metrics::TrackingErrors te = metrics::evaluate_anonymous(sc.truth, per_scan);
        res.runs.push_back(make_record(label, "baseline", seed, te, 0));
        append_pooled(res, label + ",baseline", te);
      });
    }

    res.aggregates["rmse_multimodal_" + label] = mean_rmse(res, label, "multimodal");
    res.aggregates["rmse_baseline_" + label] = mean_rmse(res, label, "baseline");
    int wins = 0;
    for (const std::uint64_t seed : cfg.experiment.seeds) {
      double mm = std::numeric_limits<double>::quiet_NaN();
      double bl = std::numeric_limits<double>::quiet_NaN();
      for (const auto& r : res.runs) {
        if (r.label != label || r.seed != seed || !r.error.empty()) continue;
        if (r.variant == "multimodal") mm = r.rmse;
        if (r.variant == "baseline") bl = r.rmse;
      }
      if (mm == mm && bl == bl && mm < bl) ++wins;
    }
    res.aggregates["wins_multimodal_" + label] = wins;
  }
}

void run_heading(const config::AppConfig& cfg, ExperimentResult& res) {
  for (const double bias_deg : cfg.experiment.heading_biases_deg) {
    const std::string label = "bias=" + format_fixed(bias_deg, 1);
    for (const std::uint64_t seed : cfg.experiment.seeds) {
      attempt(res, label, "", seed, [&] {
        config::AppConfig c = seeded(cfg, seed);
        c.scenario.imu.heading_bias_lo = bias_deg * kDegToRad;
        c.scenario.imu.heading_bias_hi = bias_deg * kDegToRad;
        const sim::Scenario sc = sim::generate_scenario(c.scenario);
        const tracker::Models models = models_from_config(c, sim::initial_radio_model(c.scenario));
        const RunResult rr = run_tracking(sc, c.tracker, models);
        const metrics::TrackingErrors te = metrics::evaluate(sc.truth, rr.estimates);
        res.runs.push_back(make_record(label, "", seed, te,
                                       metrics::count_id_swaps(sc.truth, rr.estimates,
                                                               kSwapRadius)));
        append_pooled(res, label, te);
      });
    }
    res.aggregates["rmse_" + label] = mean_rmse(res, label, "");
  }
}

void run_sfm(const config::AppConfig& cfg, ExperimentResult& res) {
  for (const std::uint64_t seed : cfg.experiment.seeds) {
    config::AppConfig c = seeded(cfg, seed);
    sim::Scenario sc;
    tracker::Models models;
    try {
      sc = sim::generate_scenario(c.scenario);
      models = models_from_config(c, sim::initial_radio_model(c.scenario));
      // Learn static obstacles from where detections never land.
      std::vector<Eigen::Vector2d> dets;
      const int window =
          std::min<int>(cfg.learning.occlusion_window_scans, static_cast<int>(sc.scans.size()));
      for (int t = 0; t < window; ++t)
        dets.insert(dets.end(), sc.scans[t].camera.begin(), sc.scans[t].camera.end());
      const sim::Rect& a = c.scenario.area;
      const double cell = cfg.learning.occlusion_cell;
      const int cols = static_cast<int>(std::ceil((a.max_x - a.min_x) / cell));
      const int rows = static_cast<int>(std::ceil((a.max_y - a.min_y) / cell));
      const learning::OcclusionMap omap = learning::learn_occlusion_map(
          dets, {a.min_x, a.min_y}, cell, cols, rows, cfg.learning.occlusion_threshold);
      models.obstacles = learning::occlusion_obstacles(omap, cfg.sfm.obstacle_radius);
    } catch (const std::exception& e) {
      res.runs.push_back(failed_record("sfm", "off", seed, e.what()));
      res.runs.push_back(failed_record("sfm", "on", seed, e.what()));
      continue;
    }

    for (const bool enabled : {false, true}) {
      const std::string variant = enabled ? "on" : "off";
      attempt(res, "sfm", variant, seed, [&] {
        tracker::TrackerConfig tcfg = c.tracker;
        tcfg.sfm_enabled = enabled;
        const RunResult rr = run_tracking(sc, tcfg, models);
        const metrics::TrackingErrors te = metrics::evaluate(sc.truth, rr.estimates);
        res.runs.push_back(make_record("sfm", variant, seed, te,
                                       metrics::count_id_swaps(sc.truth, rr.estimates,
                                                               kSwapRadius)));
        append_pooled(res, "sfm," + variant, te);
      });
    }
  }
  const double on = mean_rmse(res, "sfm", "on");
  const double off = mean_rmse(res, "sfm", "off");
  res.aggregates["rmse_sfm_on"] = on;
  res.aggregates["rmse_sfm_off"] = off;
  res.aggregates["rmse_ratio"] = off > 0.0 ? on / off : std::numeric_limits<double>::quiet_NaN();
}

void run_visual_noise(const config::AppConfig& cfg, ExperimentResult& res) {
  for (const int phantoms : cfg.experiment.phantom_counts) {
    const std::string label = "phantoms=" + std::to_string(phantoms);
    for (const std::uint64_t seed : cfg.experiment.seeds) {
      attempt(res, label, "", seed, [&] {
        config::AppConfig c = seeded(cfg, seed);
        c.scenario.camera.phantoms = phantoms;
        const sim::Scenario sc = sim::generate_scenario(c.scenario);
        const tracker::Models models = models_from_config(c, sim::initial_radio_model(c.scenario));
        const RunResult rr = run_tracking(sc, c.tracker, models);
        const metrics::TrackingErrors te = metrics::evaluate(sc.truth, rr.estimates);
        const int swaps = metrics::count_id_swaps(sc.truth, rr.estimates, kSwapRadius);
        res.runs.push_back(make_record(label, "", seed, te, swaps));
        append_pooled(res, label, te);
      });
    }
    res.aggregates["rmse_" + label] = mean_rmse(res, label, "");
    std::vector<double> swaps;
    for (const auto& r : res.runs)
      if (r.label == label && r.error.empty()) swaps.push_back(r.id_swaps);
    res.aggregates["swaps_" + label] = mean_of(swaps);
  }
}

void run_learning_rate(const config::AppConfig& cfg, ExperimentResult& res) {
  for (const std::uint64_t seed : cfg.experiment.seeds) {
    config::AppConfig c = seeded(cfg, seed);
    learning::ReplayWindow window;
    sim::Scenario sc;
    try {
      sc = sim::generate_scenario(c.scenario);
      const geometry::Homography world_to_px = world_to_px_map(c.scenario.area, c.vision);
      const auto visible = sim::visible_world_positions(sc);
      window.frames.reserve(visible.size());
      const Rng frame_rng(c.scenario.seed);
      for (std::size_t t = 0; t < visible.size(); ++t) {
        std::vector<Eigen::Vector2d> px;
        px.reserve(visible[t].size());
        for (const auto& w : visible[t]) px.push_back(geometry::project_point(world_to_px, w));
        window.frames.push_back(vision::render_frame(px, static_cast<int>(t), c.vision,
                                                     frame_rng.derive(stream::kPixelNoise, t)));
      }
      window.scans = sc.scans;
      window.px_to_world = geometry::inverse(world_to_px);
      window.vision_cfg = c.vision;
      window.tracker_cfg = c.tracker;
      window.models = models_from_config(c, sim::initial_radio_model(c.scenario));
      window.q_threshold = cfg.learning.q_threshold;
    } catch (const std::exception& e) {
      for (const double alpha : cfg.learning.alpha_grid)
        res.runs.push_back(
            failed_record("alpha=" + format_fixed(alpha, 6), "", seed, e.what()));
      continue;
    }

    for (const double alpha : cfg.learning.alpha_grid) {
      const std::string label = "alpha=" + format_fixed(alpha, 6);
      attempt(res, label, "", seed, [&] {
        const learning::ReplayResult rr = learning::replay_run(window, alpha);
        const metrics::TrackingErrors te = metrics::evaluate(sc.truth, rr.estimates);
        res.runs.push_back(make_record(label, "", seed, te,
                                       metrics::count_id_swaps(sc.truth, rr.estimates,
                                                               kSwapRadius),
                                       rr.cqs));
        append_pooled(res, label, te);
      });
    }
  }

  double best_cqs = -std::numeric_limits<double>::infinity();
  double best_cqs_alpha = std::numeric_limits<double>::quiet_NaN();
  double best_rmse = std::numeric_limits<double>::infinity();
  double best_rmse_alpha = std::numeric_limits<double>::quiet_NaN();
  for (const double alpha : cfg.learning.alpha_grid) {
    const std::string label = "alpha=" + format_fixed(alpha, 6);
    std::vector<double> cqs;
    for (const auto& r : res.runs)
      if (r.label == label && r.error.empty()) cqs.push_back(r.cqs);
    const double mc = mean_of(cqs);
    const double mr = mean_rmse(res, label, "");
    res.aggregates["cqs_" + label] = mc;
    res.aggregates["rmse_" + label] = mr;
    if (mc == mc && mc > best_cqs) {
      best_cqs = mc;
      best_cqs_alpha = alpha;
    }
    if (mr == mr && mr < best_rmse) {
      best_rmse = mr;
      best_rmse_alpha = alpha;
    }
  }
  res.aggregates["best_alpha_cqs"] = best_cqs_alpha;
  res.aggregates["best_alpha_rmse"] = best_rmse_alpha;
}

// ---------------------------------------------------------------------------
// output files

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void write_outputs(const ExperimentResult& res, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::ostringstream runs;
  runs << "label,variant,seed,rmse,p50,p90,coverage,id_swaps,cqs,error\n";
  for (const auto& r : res.runs) {
    runs << csv_safe(r.label) << ',' << csv_safe(r.variant) << ',' << r.seed << ','
         << format_fixed(r.rmse, 6) << ',' << format_fixed(r.p50, 6) << ','
         << format_fixed(r.p90, 6) << ',' << format_fixed(r.coverage, 6) << ',' << r.id_swaps
         << ',' << format_fixed(r.cqs, 6) << ',' << csv_safe(r.error) << '\n';
  }
  write_text(out_dir + "/runs.csv", runs.str());

  std::ostringstream agg;
  agg << "key,value\n";
  for (const auto& [k, v] : res.aggregates) agg << csv_safe(k) << ',' << format_fixed(v, 6) << '\n';
  write_text(out_dir + "/aggregates.csv", agg.str());

  if (res.kind == "ablation") {
    for (const auto& [label, errors] : res.pooled) {
      std::vector<double> sorted = errors;
      std::sort(sorted.begin(), sorted.end());
      std::ostringstream cdf;
      cdf << "error\n";
      for (const double e : sorted) cdf << format_fixed(e, 6) << '\n';
      // "stage=mis" -> cdf_mis.csv
      const std::string stem = label.substr(label.find('=') + 1);
      write_text(out_dir + "/cdf_" + stem + ".csv", cdf.str());
    }
  }

  nlohmann::ordered_json j;
  j["kind"] = res.kind;
  j["name"] = res.name;
  j["runs"] = res.runs.size();
  nlohmann::ordered_json ja = nlohmann::ordered_json::object();
  for (const auto& [k, v] : res.aggregates) ja[k] = v;
  j["aggregates"] = ja;
  write_text(out_dir + "/summary.json", j.dump(2) + "\n");
}

}  // namespace

RunResult run_tracking(const sim::Scenario& sc, const tracker::TrackerConfig& tcfg,
                       const tracker::Models& models) {
  tracker::Filter filter(tcfg, models);
  RunResult out;
  out.summaries.reserve(sc.scans.size());
  for (const auto& scan : sc.scans) {
    const tracker::ScanSummary s = filter.process_scan(scan);
    for (const auto& [dev, pos] : s.estimates) out.estimates[dev][s.t] = pos;
    out.summaries.push_back(s);
  }
  return out;
}

tracker::Models models_from_config(const config::AppConfig& cfg, radio::RadioModel radio) {
  tracker::Models m;
  m.radio_model = std::move(radio);
  m.sfm = cfg.sfm;
  for (const auto& a : cfg.scenario.agents) {
    if (a.device_id >= 0) m.steps[a.device_id] = cfg.step.make_state();
  }
  return m;
}

geometry::Homography world_to_px_map(const sim::Rect& area, const vision::VisionConfig& vcfg) {
  const double margin = 6.0;  // px, keeps whole blobs inside the frame
  const double w = area.max_x - area.min_x;
  const double h = area.max_y - area.min_y;
  const double sx = (vcfg.frame_width - 2.0 * margin) / w;
  const double sy = (vcfg.frame_height - 2.0 * margin) / h;
  const double s = std::min(sx, sy);
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = s;
  m(1, 1) = s;
  m(0, 2) = 0.5 * (vcfg.frame_width - s * (area.min_x + area.max_x));
  m(1, 2) = 0.5 * (vcfg.frame_height - s * (area.min_y + area.max_y));
  return geometry::make_homography(m);
}

sim::TimedRect seeded_occlusion(const sim::Rect& area, double fraction, std::uint64_t seed) {
  const double w = (area.max_x - area.min_x) * std::sqrt(fraction);
  const double h = (area.max_y - area.min_y) * std::sqrt(fraction);
  Rng rng = Rng(seed).derive(stream::kOcclusion);
  const double x = rng.uniform(area.min_x, area.max_x - w);
  const double y = rng.uniform(area.min_y, area.max_y - h);
  sim::TimedRect tr;
  tr.rect = {x, y, x + w, y + h};
  return tr;
}

ExperimentResult run_experiment(const config::AppConfig& cfg, const std::string& out_dir) {
  ExperimentResult res;
  res.kind = cfg.experiment.kind;
  res.name = cfg.experiment.name;

  if (res.kind == "single") {
    run_single(cfg, res);
  } else if (res.kind == "ablation") {
    run_ablation(cfg, res);
  } else if (res.kind == "occlusion") {
    run_occlusion(cfg, res);
  } else if (res.kind == "heading") {
    run_heading(cfg, res);
  } else if (res.kind == "sfm") {
    run_sfm(cfg, res);
  } else if (res.kind == "visual_noise") {
    run_visual_noise(cfg, res);
  } else if (res.kind == "learning_rate") {
    run_learning_rate(cfg, res);
  } else {
    throw InvalidConfig("unknown experiment kind: " + res.kind);
  }

  write_outputs(res, out_dir);
  return res;
}

}  // namespace sitetrack::experiment
