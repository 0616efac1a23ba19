#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "sitetrack/config.hpp"
#include "sitetrack/errors.hpp"
#include "sitetrack/experiment.hpp"
#include "sitetrack/learning.hpp"
#include "sitetrack/metrics.hpp"
#include "sitetrack/sim.hpp"
#include "sitetrack/textio.hpp"
#include "sitetrack/tracker.hpp"

namespace {

using namespace sitetrack;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

void apply_threads(int requested) {
#ifdef _OPENMP
  int n = requested;
  if (const char* env = std::getenv("SITETRACKER_THREADS"); env != nullptr && *env != '\0') {
    n = std::atoi(env);
  }
  if (n > 0) omp_set_num_threads(n);
#else
  (void)requested;
#endif
}

config::AppConfig load_or_default(const GlobalArgs& g) {
  config::AppConfig cfg =
      g.config_path.empty() ? config::default_config() : config::load_config_file(g.config_path);
  if (g.seed) config::apply_seed(cfg, *g.seed);
  return cfg;
}

void ensure_out(const std::string& dir) { std::filesystem::create_directories(dir); }

int cmd_simulate(const GlobalArgs& g) {
  const config::AppConfig cfg = load_or_default(g);
  const sim::Scenario sc = sim::generate_scenario(cfg.scenario);
  ensure_out(g.out_dir);
  write_text(g.out_dir + "/scenario.log", sim::serialize_scenario(sc));
  radio::save_radio_model(sim::initial_radio_model(cfg.scenario), g.out_dir + "/radio_model.txt");
  radio::save_radio_model(sc.final_radio_model, g.out_dir + "/radio_final.txt");
  std::cout << "wrote " << sc.scans.size() << " scans, " << sc.truth.agents.size()
            << " agents to " << g.out_dir << "\n";
  return 0;
}

struct TrackedLog {
  sim::ParsedLog log;
  radio::RadioModel radio_model;
};

TrackedLog load_tracked_inputs(const std::string& log_path, const std::string& model_path) {
  TrackedLog t;
  t.radio_model = radio::load_radio_model(model_path);
  std::ostringstream ss;
  for (const auto& line : read_lines(log_path)) ss << line << '\n';
  t.log = sim::parse_scenario_log(ss.str(), static_cast<int>(t.radio_model.access_points.size()));
  return t;
}

tracker::Models models_for(const config::AppConfig& cfg, radio::RadioModel model) {
  return experiment::models_from_config(cfg, std::move(model));
}

// Shared tracking loop for `track` and `learn`. Optionally refits the radio
// model from the trailing window at a fixed cadence. Partial outputs stay
// valid if a scan throws; the caller flushes what accumulated.
struct TrackingRun {
  std::vector<tracker::ScanSummary> summaries;
  radio::RadioModel final_model;
  std::string error;  // nonempty: stopped early
};

TrackingRun run_filter(const config::AppConfig& cfg, const TrackedLog& in, bool learn_radio) {
  TrackingRun out;
  tracker::Filter filter(cfg.tracker, models_for(cfg, in.radio_model));
  const double dt = cfg.tracker.dt > 0 ? cfg.tracker.dt : 0.5;
  const int interval =
      std::max(1, static_cast<int>(cfg.learning.radio_refit_interval_s / dt + 0.5));
  const int window = std::max(1, static_cast<int>(cfg.learning.radio_window_s / dt + 0.5));
  try {
    for (std::size_t i = 0; i < in.log.scans.size(); ++i) {
      out.summaries.push_back(filter.process_scan(in.log.scans[i]));
      if (learn_radio && (i + 1) % static_cast<std::size_t>(interval) == 0) {
        const std::size_t lo = out.summaries.size() > static_cast<std::size_t>(window)
                                   ? out.summaries.size() - window
                                   : 0;
        const std::vector<tracker::ScanSummary> slice(out.summaries.begin() + lo,
                                                      out.summaries.end());
        const auto histories = learning::collect_track_histories(slice, in.log.scans);
        std::vector<learning::TrackHistory> hv;
        hv.reserve(histories.size());
        for (const auto& [dev, th] : histories) hv.push_back(th);
        tracker::Models m = filter.models();
        m.radio_model =
            learning::learn_radio_model(hv, m.radio_model, cfg.learning.q_threshold);
        filter.set_models(std::move(m));
      }
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.final_model = filter.models().radio_model;
  return out;
}

void write_track_outputs(const config::AppConfig& cfg, const TrackedLog& in,
                         const TrackingRun& run, const std::string& out_dir) {
  ensure_out(out_dir);
  std::ostringstream est;
  est << "scan,device_id,x,y,mode\n";
  for (const auto& s : run.summaries) {
    for (const auto& [dev, pos] : s.estimates) {
      const auto it = s.devices.find(dev);
      const bool cam = it != s.devices.end() && it->second.updated;
      est << s.t << ',' << dev << ',' << format_fixed(pos.x(), 6) << ','
          << format_fixed(pos.y(), 6) << ',' << (cam ? "cam" : "imu") << '\n';
    }
  }
  write_text(out_dir + "/estimates.csv", est.str());

  const auto histories = learning::collect_track_histories(run.summaries, in.log.scans);
  std::vector<learning::TrackQuality> quality;
  quality.reserve(histories.size());
  for (const auto& [dev, th] : histories)
    quality.push_back(learning::qualify_track(th, cfg.learning.q_threshold));
  write_text(out_dir + "/quality.csv", learning::quality_report_csv(quality));

  if (cfg.tracker.record_associations) {
    std::ostringstream assoc;
    assoc << "scan,particle,measurement,event\n";
    for (const auto& s : run.summaries)
      for (const auto& line : s.association_log) assoc << line << '\n';
    write_text(out_dir + "/associations.csv", assoc.str());
  }
}

int cmd_track(const GlobalArgs& g, const std::string& log_path, const std::string& model_path,
              bool learn_radio) {
  const config::AppConfig cfg = load_or_default(g);
  const TrackedLog in = load_tracked_inputs(log_path, model_path);
  const TrackingRun run = run_filter(cfg, in, learn_radio);
  write_track_outputs(cfg, in, run, g.out_dir);
  if (learn_radio) radio::save_radio_model(run.final_model, g.out_dir + "/radio_learned.txt");
  if (!run.error.empty()) {
    std::cerr << "tracking stopped after " << run.summaries.size() << " scans: " << run.error
              << "\n";
    return 3;
  }
  std::cout << "tracked " << run.summaries.size() << " scans to " << g.out_dir << "\n";
  return 0;
}

int cmd_learn(const GlobalArgs& g, const std::string& log_path, const std::string& model_path) {
  const config::AppConfig cfg = load_or_default(g);
  const TrackedLog in = load_tracked_inputs(log_path, model_path);
  const TrackingRun run = run_filter(cfg, in, false);
  ensure_out(g.out_dir);

  const auto histories = learning::collect_track_histories(run.summaries, in.log.scans);
  std::vector<learning::TrackHistory> hv;
  std::vector<learning::TrackQuality> quality;
  hv.reserve(histories.size());
  for (const auto& [dev, th] : histories) {
    hv.push_back(th);
    quality.push_back(learning::qualify_track(th, cfg.learning.q_threshold));
  }
  write_text(g.out_dir + "/quality.csv", learning::quality_report_csv(quality));

  const radio::RadioModel learned =
      learning::learn_radio_model(hv, in.radio_model, cfg.learning.q_threshold);
  radio::save_radio_model(learned, g.out_dir + "/radio_learned.txt");

  std::vector<Eigen::Vector2d> dets;
  for (const auto& scan : in.log.scans)
    dets.insert(dets.end(), scan.camera.begin(), scan.camera.end());
  const sim::Rect& a = cfg.scenario.area;
  const double cell = cfg.learning.occlusion_cell;
  const int cols = static_cast<int>(std::ceil((a.max_x - a.min_x) / cell));
  const int rows = static_cast<int>(std::ceil((a.max_y - a.min_y) / cell));
  const learning::OcclusionMap omap = learning::learn_occlusion_map(
      dets, {a.min_x, a.min_y}, cell, cols, rows, cfg.learning.occlusion_threshold);
  write_text(g.out_dir + "/occlusion.txt", learning::serialize_occlusion(omap));

  std::ostringstream steps;
  steps << "device_id,slope,intercept,r_squared,personal_active\n";
  for (const auto& [dev, th] : histories) {
    const auto cal = learning::extract_step_calibration(th);
    try {
      const inertial::PersonalStepModel pm = inertial::fit_personal_step_model(cal);
      inertial::StepModelState st = cfg.step.make_state();
      st.personal = pm;
      steps << dev << ',' << format_fixed(pm.slope, 6) << ',' << format_fixed(pm.intercept, 6)
            << ',' << format_fixed(pm.r_squared, 6) << ',' << (st.personal_active() ? 1 : 0)
            << '\n';
    } catch (const Error&) {
      steps << dev << ",nan,nan,nan,0\n";
    }
  }
  write_text(g.out_dir + "/step_models.txt", steps.str());

  if (!run.error.empty()) {
    std::cerr << "tracking stopped early: " << run.error << "\n";
    return 3;
  }
  std::cout << "learned models from " << run.summaries.size() << " scans to " << g.out_dir
            << "\n";
  return 0;
}

int cmd_experiment(const GlobalArgs& g) {
  const config::AppConfig cfg = load_or_default(g);
  const experiment::ExperimentResult res = experiment::run_experiment(cfg, g.out_dir);
  int failures = 0;
  for (const auto& r : res.runs)
    if (!r.error.empty()) ++failures;
  std::cout << res.kind << " '" << res.name << "': " << res.runs.size() << " runs, " << failures
            << " failed, outputs in " << g.out_dir << "\n";
  return 0;
}

int cmd_validate(const GlobalArgs& g) {
  const config::AppConfig cfg = load_or_default(g);
  std::cout << "config ok: " << cfg.scenario.agents.size() << " agents, "
            << cfg.scenario.radio.aps.size() << " access points, " << cfg.scenario.scans
            << " scans, experiment kind '" << cfg.experiment.kind << "'\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-sensor indoor tracking: simulation, tracking, learning, experiments"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("-c,--config", g.config_path, "configuration file (JSON)");
  app.add_option("-o,--out", g.out_dir, "output directory")->capture_default_str();
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("-s,--seed", seed_value, "override every configured seed");
  app.add_option("-t,--threads", g.threads,
                 "worker threads (env SITETRACKER_THREADS wins when set)");

  auto* sim_cmd = app.add_subcommand("simulate", "generate a scenario and write its sensor log");
  std::string log_path, model_path;
  auto* track_cmd = app.add_subcommand("track", "run the tracker over a sensor log");
  track_cmd->add_option("--log", log_path, "sensor log file")->required();
  track_cmd->add_option("--radio-model", model_path, "radio model file")->required();
  bool learn_radio = false;
  track_cmd->add_flag("--learn-radio", learn_radio, "refit the radio model online");
  auto* learn_cmd = app.add_subcommand("learn", "batch-learn models from a sensor log");
  learn_cmd->add_option("--log", log_path, "sensor log file")->required();
  learn_cmd->add_option("--radio-model", model_path, "radio model file")->required();
  auto* exp_cmd = app.add_subcommand("experiment", "run the configured experiment sweep");
  auto* val_cmd = app.add_subcommand("validate-config", "parse the config and report totals");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;
  apply_threads(g.threads);

  try {
    if (sim_cmd->parsed()) return cmd_simulate(g);
    if (track_cmd->parsed()) return cmd_track(g, log_path, model_path, learn_radio);
    if (learn_cmd->parsed()) return cmd_learn(g, log_path, model_path);
    if (exp_cmd->parsed()) return cmd_experiment(g);
    if (val_cmd->parsed()) return cmd_validate(g);
  } catch (const sitetrack::InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
