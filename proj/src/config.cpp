#include "sitetrack/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "sitetrack/errors.hpp"

namespace sitetrack::config {
namespace {

using nlohmann::json;

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

[[noreturn]] void fail(const std::string& msg) { throw InvalidConfig(msg); }

void check_keys(const json& j, const std::string& path,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (std::string_view a : allowed) {
      if (item.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) fail("unknown config key: " + path + "." + item.key());
  }
}

const json& expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path + ": expected an object");
  return j;
}

const json& expect_array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path + ": expected an array");
  return j;
}

double get_num(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path + ": expected a number");
  return j.get<double>();
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path + ": expected an integer");
  return j.get<int>();
}

std::uint64_t get_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  fail(path + ": expected a non-negative integer");
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path + ": expected a boolean");
  return j.get<bool>();
}

std::string get_str(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path + ": expected a string");
  return j.get<std::string>();
}

Eigen::Vector2d get_vec2(const json& j, const std::string& path) {
  expect_array(j, path);
  if (j.size() != 2) fail(path + ": expected [x, y]");
  return {get_num(j[0], path + "[0]"), get_num(j[1], path + "[1]")};
}

sim::Rect get_rect(const json& j, const std::string& path) {
  expect_array(j, path);
  if (j.size() != 4) fail(path + ": expected [min_x, min_y, max_x, max_y]");
  sim::Rect r;
  r.min_x = get_num(j[0], path + "[0]");
  r.min_y = get_num(j[1], path + "[1]");
  r.max_x = get_num(j[2], path + "[2]");
  r.max_y = get_num(j[3], path + "[3]");
  return r;
}

std::vector<double> get_num_array(const json& j, const std::string& path) {
  expect_array(j, path);
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_num(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

template <typename Enum>
Enum get_enum(const json& j, const std::string& path,
              std::initializer_list<std::pair<std::string_view, Enum>> table) {
  const std::string s = get_str(j, path);
  for (const auto& [name, value] : table)
    if (s == name) return value;
  fail(path + ": unknown value '" + s + "'");
}

void merge_agent(sim::AgentConfig& a, const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"id", "device_id", "height", "policy", "waypoints", "loop", "f_range", "step",
              "dwell_scans", "waypoint_tolerance", "heading_noise_deg"});
  if (j.contains("id")) a.id = get_int(j["id"], path + ".id");
  if (j.contains("device_id")) a.device_id = get_int(j["device_id"], path + ".device_id");
  if (j.contains("height")) a.height = get_num(j["height"], path + ".height");
  if (j.contains("policy"))
    a.policy = get_enum<sim::MotionPolicy>(j["policy"], path + ".policy",
                                           {{"waypoints", sim::MotionPolicy::Waypoints},
                                            {"stationary", sim::MotionPolicy::Stationary},
                                            {"random_walk", sim::MotionPolicy::RandomWalk}});
  if (j.contains("waypoints")) {
    const json& w = expect_array(j["waypoints"], path + ".waypoints");
    a.waypoints.clear();
    for (std::size_t i = 0; i < w.size(); ++i)
      a.waypoints.push_back(get_vec2(w[i], path + ".waypoints[" + std::to_string(i) + "]"));
  }
  if (j.contains("loop")) a.loop = get_bool(j["loop"], path + ".loop");
  if (j.contains("f_range")) {
    const json& f = expect_array(j["f_range"], path + ".f_range");
    if (f.size() != 2) fail(path + ".f_range: expected [lo, hi]");
    a.f_lo = get_num(f[0], path + ".f_range[0]");
    a.f_hi = get_num(f[1], path + ".f_range[1]");
  }
  if (j.contains("step")) {
    const json& s = expect_object(j["step"], path + ".step");
    check_keys(s, path + ".step", {"use_universal", "slope", "intercept"});
    if (s.contains("use_universal"))
      a.step.use_universal = get_bool(s["use_universal"], path + ".step.use_universal");
    if (s.contains("slope")) a.step.slope = get_num(s["slope"], path + ".step.slope");
    if (s.contains("intercept"))
      a.step.intercept = get_num(s["intercept"], path + ".step.intercept");
  }
  if (j.contains("dwell_scans")) a.dwell_scans = get_int(j["dwell_scans"], path + ".dwell_scans");
  if (j.contains("waypoint_tolerance"))
    a.waypoint_tolerance = get_num(j["waypoint_tolerance"], path + ".waypoint_tolerance");
  if (j.contains("heading_noise_deg"))
    a.heading_noise = kDegToRad * get_num(j["heading_noise_deg"], path + ".heading_noise_deg");
}

void merge_camera(sim::CameraConfig& c, const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"pd", "clutter_rate", "sigma", "occlusions", "phantoms", "phantom_offset_scans"});
  if (j.contains("pd")) c.pd = get_num(j["pd"], path + ".pd");
  if (j.contains("clutter_rate")) c.clutter_rate = get_num(j["clutter_rate"], path + ".clutter_rate");
  if (j.contains("sigma")) c.sigma = get_num(j["sigma"], path + ".sigma");
  if (j.contains("occlusions")) {
    const json& o = expect_array(j["occlusions"], path + ".occlusions");
    c.occlusions.clear();
    for (std::size_t i = 0; i < o.size(); ++i) {
      const std::string p = path + ".occlusions[" + std::to_string(i) + "]";
      expect_object(o[i], p);
      check_keys(o[i], p, {"rect", "from_scan", "to_scan"});
      sim::TimedRect tr;
      if (!o[i].contains("rect")) fail(p + ": missing rect");
      tr.rect = get_rect(o[i]["rect"], p + ".rect");
      if (o[i].contains("from_scan")) tr.from_scan = get_int(o[i]["from_scan"], p + ".from_scan");
      if (o[i].contains("to_scan")) tr.to_scan = get_int(o[i]["to_scan"], p + ".to_scan");
      c.occlusions.push_back(tr);
    }
  }
  if (j.contains("phantoms")) c.phantoms = get_int(j["phantoms"], path + ".phantoms");
  if (j.contains("phantom_offset_scans"))
    c.phantom_offset_scans = get_int(j["phantom_offset_scans"], path + ".phantom_offset_scans");
}

void merge_radio(sim::RadioSimConfig& r, const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"aps", "sigma", "rate_divisor", "events"});
  if (j.contains("aps")) {
    const json& a = expect_array(j["aps"], path + ".aps");
    r.aps.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = path + ".aps[" + std::to_string(i) + "]";
      expect_object(a[i], p);
      check_keys(a[i], p, {"id", "position", "ref_power", "exponent", "rate_divisor"});
      sim::ApConfig ap;
      if (a[i].contains("id")) ap.ap.id = get_int(a[i]["id"], p + ".id");
      if (!a[i].contains("position")) fail(p + ": missing position");
      ap.ap.position = get_vec2(a[i]["position"], p + ".position");
      if (a[i].contains("ref_power")) ap.ap.ref_power = get_num(a[i]["ref_power"], p + ".ref_power");
      if (a[i].contains("exponent"))
        ap.ap.path_loss_exponent = get_num(a[i]["exponent"], p + ".exponent");
      if (a[i].contains("rate_divisor"))
        ap.rate_divisor = get_int(a[i]["rate_divisor"], p + ".rate_divisor");
      r.aps.push_back(ap);
    }
  }
  if (j.contains("sigma")) r.sigma = get_num(j["sigma"], path + ".sigma");
  if (j.contains("rate_divisor")) r.rate_divisor = get_int(j["rate_divisor"], path + ".rate_divisor");
  if (j.contains("events")) {
    const json& e = expect_array(j["events"], path + ".events");
    r.events.clear();
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::string p = path + ".events[" + std::to_string(i) + "]";
      expect_object(e[i], p);
      check_keys(e[i], p, {"scan", "ap_id", "ref_power", "exponent"});
      sim::RadioEvent ev;
      if (e[i].contains("scan")) ev.scan = get_int(e[i]["scan"], p + ".scan");
      if (e[i].contains("ap_id")) ev.ap_id = get_int(e[i]["ap_id"], p + ".ap_id");
      if (e[i].contains("ref_power")) ev.ref_power = get_num(e[i]["ref_power"], p + ".ref_power");
      if (e[i].contains("exponent")) ev.exponent = get_num(e[i]["exponent"], p + ".exponent");
      r.events.push_back(ev);
    }
  }
}

void merge_imu(sim::ImuConfig& m, const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"step_error_rate", "heading_bias_deg", "heading_jitter_deg"});
  if (j.contains("step_error_rate"))
    m.step_error_rate = get_num(j["step_error_rate"], path + ".step_error_rate");
  if (j.contains("heading_bias_deg")) {
    const json& b = expect_array(j["heading_bias_deg"], path + ".heading_bias_deg");
    if (b.size() != 2) fail(path + ".heading_bias_deg: expected [lo, hi]");
    m.heading_bias_lo = kDegToRad * get_num(b[0], path + ".heading_bias_deg[0]");
    m.heading_bias_hi = kDegToRad * get_num(b[1], path + ".heading_bias_deg[1]");
  }
  if (j.contains("heading_jitter_deg"))
    m.heading_jitter = kDegToRad * get_num(j["heading_jitter_deg"], path + ".heading_jitter_deg");
}

void merge_scenario(sim::ScenarioConfig& s, const json& j) {
  const std::string path = "scenario";
  expect_object(j, path);
  check_keys(j, path, {"seed", "area", "scans", "dt", "agents", "walls", "camera", "radio", "imu"});
  if (j.contains("seed")) s.seed = get_u64(j["seed"], path + ".seed");
  if (j.contains("area")) s.area = get_rect(j["area"], path + ".area");
  if (j.contains("scans")) s.scans = get_int(j["scans"], path + ".scans");
  if (j.contains("dt")) s.dt = get_num(j["dt"], path + ".dt");
  if (j.contains("agents")) {
    const json& a = expect_array(j["agents"], path + ".agents");
    s.agents.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      sim::AgentConfig ac;
      merge_agent(ac, a[i], path + ".agents[" + std::to_string(i) + "]");
      s.agents.push_back(std::move(ac));
    }
  }
  if (j.contains("walls")) {
    const json& w = expect_array(j["walls"], path + ".walls");
    s.walls.clear();
    for (std::size_t i = 0; i < w.size(); ++i)
      s.walls.push_back(get_rect(w[i], path + ".walls[" + std::to_string(i) + "]"));
  }
  if (j.contains("camera")) merge_camera(s.camera, j["camera"], path + ".camera");
  if (j.contains("radio")) merge_radio(s.radio, j["radio"], path + ".radio");
  if (j.contains("imu")) merge_imu(s.imu, j["imu"], path + ".imu");
}

void merge_tracker(tracker::TrackerConfig& t, const json& j) {
  const std::string path = "tracker";
  expect_object(j, path);
  check_keys(j, path,
             {"particles", "pd", "clutter_prior", "clutter_density", "death_timeout", "sfm_enabled",
              "estimate_mode", "prediction", "execution", "camera_sigma", "rss_sigma",
              "process_sigma", "dt", "birth_gate_db", "rss_span_db", "allow_shared_detection",
              "resample_fraction", "seed", "record_associations", "ut"});
  if (j.contains("particles")) t.particles = get_int(j["particles"], path + ".particles");
  if (j.contains("pd")) t.pd = get_num(j["pd"], path + ".pd");
  if (j.contains("clutter_prior"))
    t.clutter_prior = get_num(j["clutter_prior"], path + ".clutter_prior");
  if (j.contains("clutter_density"))
    t.clutter_density = get_num(j["clutter_density"], path + ".clutter_density");
  if (j.contains("death_timeout"))
    t.death_timeout = get_int(j["death_timeout"], path + ".death_timeout");
  if (j.contains("sfm_enabled")) t.sfm_enabled = get_bool(j["sfm_enabled"], path + ".sfm_enabled");
  if (j.contains("estimate_mode"))
    t.estimate_mode =
        get_enum<tracker::EstimateMode>(j["estimate_mode"], path + ".estimate_mode",
                                        {{"max_weight", tracker::EstimateMode::MaxWeight},
                                         {"mixture", tracker::EstimateMode::Mixture}});
  if (j.contains("prediction"))
    t.prediction =
        get_enum<tracker::PredictionStyle>(j["prediction"], path + ".prediction",
                                           {{"unscented", tracker::PredictionStyle::Unscented},
                                            {"linearized", tracker::PredictionStyle::Linearized}});
  if (j.contains("execution"))
    t.execution = get_enum<tracker::Execution>(j["execution"], path + ".execution",
                                               {{"serial", tracker::Execution::Serial},
                                                {"parallel", tracker::Execution::Parallel}});
  if (j.contains("camera_sigma")) t.camera_sigma = get_num(j["camera_sigma"], path + ".camera_sigma");
  if (j.contains("rss_sigma")) t.rss_sigma = get_num(j["rss_sigma"], path + ".rss_sigma");
  if (j.contains("process_sigma"))
    t.process_sigma = get_num(j["process_sigma"], path + ".process_sigma");
  if (j.contains("dt")) t.dt = get_num(j["dt"], path + ".dt");
  if (j.contains("birth_gate_db")) t.birth_gate_db = get_num(j["birth_gate_db"], path + ".birth_gate_db");
  if (j.contains("rss_span_db")) t.rss_span_db = get_num(j["rss_span_db"], path + ".rss_span_db");
  if (j.contains("allow_shared_detection"))
    t.allow_shared_detection = get_bool(j["allow_shared_detection"], path + ".allow_shared_detection");
  if (j.contains("resample_fraction"))
    t.resample_fraction = get_num(j["resample_fraction"], path + ".resample_fraction");
  if (j.contains("seed")) t.seed = get_u64(j["seed"], path + ".seed");
  if (j.contains("record_associations"))
    t.record_associations = get_bool(j["record_associations"], path + ".record_associations");
  if (j.contains("ut")) {
    const json& u = expect_object(j["ut"], path + ".ut");
    check_keys(u, path + ".ut", {"alpha", "beta", "kappa"});
    if (u.contains("alpha")) t.ut.alpha = get_num(u["alpha"], path + ".ut.alpha");
    if (u.contains("beta")) t.ut.beta = get_num(u["beta"], path + ".ut.beta");
    if (u.contains("kappa")) t.ut.kappa = get_num(u["kappa"], path + ".ut.kappa");
  }
}

void merge_sfm(socialforce::SfmParams& s, const json& j) {
  const std::string path = "sfm";
  expect_object(j, path);
  check_keys(j, path, {"a", "b", "c", "lambda", "mass", "person_radius", "obstacle_radius",
                       "cutoff_factor"});
  if (j.contains("a")) s.a = get_num(j["a"], path + ".a");
  if (j.contains("b")) s.b = get_num(j["b"], path + ".b");
  if (j.contains("c")) s.c = get_num(j["c"], path + ".c");
  if (j.contains("lambda")) s.lambda_aniso = get_num(j["lambda"], path + ".lambda");
  if (j.contains("mass")) s.mass = get_num(j["mass"], path + ".mass");
  if (j.contains("person_radius"))
    s.person_radius = get_num(j["person_radius"], path + ".person_radius");
  if (j.contains("obstacle_radius"))
    s.obstacle_radius = get_num(j["obstacle_radius"], path + ".obstacle_radius");
  if (j.contains("cutoff_factor"))
    s.cutoff_factor = get_num(j["cutoff_factor"], path + ".cutoff_factor");
}

void merge_step(StepSection& s, const json& j) {
  const std::string path = "step";
  expect_object(j, path);
  check_keys(j, path, {"universal", "r2_threshold", "default_height_m", "clamp"});
  if (j.contains("universal")) {
    const json& u = expect_array(j["universal"], path + ".universal");
    if (u.size() != 3) fail(path + ".universal: expected [a, b, c]");
    s.universal.a = get_num(u[0], path + ".universal[0]");
    s.universal.b = get_num(u[1], path + ".universal[1]");
    s.universal.c = get_num(u[2], path + ".universal[2]");
  }
  if (j.contains("r2_threshold")) s.r2_threshold = get_num(j["r2_threshold"], path + ".r2_threshold");
  if (j.contains("default_height_m"))
    s.default_height_m = get_num(j["default_height_m"], path + ".default_height_m");
  if (j.contains("clamp")) {
    const json& c = expect_array(j["clamp"], path + ".clamp");
    if (c.size() != 2) fail(path + ".clamp: expected [lo, hi]");
    s.clamp_lo = get_num(c[0], path + ".clamp[0]");
    s.clamp_hi = get_num(c[1], path + ".clamp[1]");
  }
}

void merge_learning(LearningSection& l, const json& j) {
  const std::string path = "learning";
  expect_object(j, path);
  check_keys(j, path, {"q_threshold", "occlusion_cell", "occlusion_threshold",
                       "occlusion_window_scans", "alpha_grid", "radio_refit_interval_s",
                       "radio_window_s"});
  if (j.contains("q_threshold")) l.q_threshold = get_num(j["q_threshold"], path + ".q_threshold");
  if (j.contains("occlusion_cell"))
    l.occlusion_cell = get_num(j["occlusion_cell"], path + ".occlusion_cell");
  if (j.contains("occlusion_threshold"))
    l.occlusion_threshold = get_num(j["occlusion_threshold"], path + ".occlusion_threshold");
  if (j.contains("occlusion_window_scans"))
    l.occlusion_window_scans = get_int(j["occlusion_window_scans"], path + ".occlusion_window_scans");
  if (j.contains("alpha_grid")) l.alpha_grid = get_num_array(j["alpha_grid"], path + ".alpha_grid");
  if (j.contains("radio_refit_interval_s"))
    l.radio_refit_interval_s = get_num(j["radio_refit_interval_s"], path + ".radio_refit_interval_s");
  if (j.contains("radio_window_s"))
    l.radio_window_s = get_num(j["radio_window_s"], path + ".radio_window_s");
}

void merge_vision(vision::VisionConfig& v, const json& j) {
  const std::string path = "vision";
  expect_object(j, path);
  check_keys(j, path,
             {"components", "background_mass", "sigma_init_sq", "sigma_min_sq", "match_sigma",
              "min_area", "frame_width", "frame_height", "background_level", "blob_radius_px",
              "blob_intensity", "noise_sigma", "illumination_drift"});
  if (j.contains("components")) v.components = get_int(j["components"], path + ".components");
  if (j.contains("background_mass"))
    v.background_mass = get_num(j["background_mass"], path + ".background_mass");
  if (j.contains("sigma_init_sq")) v.sigma_init_sq = get_num(j["sigma_init_sq"], path + ".sigma_init_sq");
  if (j.contains("sigma_min_sq")) v.sigma_min_sq = get_num(j["sigma_min_sq"], path + ".sigma_min_sq");
  if (j.contains("match_sigma")) v.match_sigma = get_num(j["match_sigma"], path + ".match_sigma");
  if (j.contains("min_area")) v.min_area = get_int(j["min_area"], path + ".min_area");
  if (j.contains("frame_width")) v.frame_width = get_int(j["frame_width"], path + ".frame_width");
  if (j.contains("frame_height")) v.frame_height = get_int(j["frame_height"], path + ".frame_height");
  if (j.contains("background_level"))
    v.background_level = get_num(j["background_level"], path + ".background_level");
  if (j.contains("blob_radius_px"))
    v.blob_radius_px = get_num(j["blob_radius_px"], path + ".blob_radius_px");
  if (j.contains("blob_intensity"))
    v.blob_intensity = get_num(j["blob_intensity"], path + ".blob_intensity");
  if (j.contains("noise_sigma")) v.noise_sigma = get_num(j["noise_sigma"], path + ".noise_sigma");
  if (j.contains("illumination_drift"))
    v.illumination_drift = get_num(j["illumination_drift"], path + ".illumination_drift");
}

void merge_baseline(baseline::BaselineConfig& b, const json& j) {
  const std::string path = "baseline";
  expect_object(j, path);
  check_keys(j, path,
             {"particles", "pd", "clutter_prior", "clutter_density", "birth_prior", "camera_sigma",
              "accel_sigma", "dt", "death_timeout", "resample_fraction", "seed", "area"});
  if (j.contains("particles")) b.particles = get_int(j["particles"], path + ".particles");
  if (j.contains("pd")) b.pd = get_num(j["pd"], path + ".pd");
  if (j.contains("clutter_prior"))
    b.clutter_prior = get_num(j["clutter_prior"], path + ".clutter_prior");
  if (j.contains("clutter_density"))
    b.clutter_density = get_num(j["clutter_density"], path + ".clutter_density");
  if (j.contains("birth_prior")) b.birth_prior = get_num(j["birth_prior"], path + ".birth_prior");
  if (j.contains("camera_sigma")) b.camera_sigma = get_num(j["camera_sigma"], path + ".camera_sigma");
  if (j.contains("accel_sigma")) b.accel_sigma = get_num(j["accel_sigma"], path + ".accel_sigma");
  if (j.contains("dt")) b.dt = get_num(j["dt"], path + ".dt");
  if (j.contains("death_timeout")) b.death_timeout = get_int(j["death_timeout"], path + ".death_timeout");
  if (j.contains("resample_fraction"))
    b.resample_fraction = get_num(j["resample_fraction"], path + ".resample_fraction");
  if (j.contains("seed")) b.seed = get_u64(j["seed"], path + ".seed");
  if (j.contains("area")) {
    sim::Rect r = get_rect(j["area"], path + ".area");
    b.area_min = {r.min_x, r.min_y};
    b.area_max = {r.max_x, r.max_y};
  }
}

void merge_experiment(ExperimentSection& e, const json& j) {
  const std::string path = "experiment";
  expect_object(j, path);
  check_keys(j, path, {"kind", "name", "seeds", "occlusion_fractions", "heading_biases_deg",
                       "phantom_counts", "radio_power_shift_db", "radio_exponent_shift"});
  if (j.contains("kind")) e.kind = get_str(j["kind"], path + ".kind");
  if (j.contains("name")) e.name = get_str(j["name"], path + ".name");
  if (j.contains("seeds")) {
    const json& s = expect_array(j["seeds"], path + ".seeds");
    e.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i)
      e.seeds.push_back(get_u64(s[i], path + ".seeds[" + std::to_string(i) + "]"));
  }
  if (j.contains("occlusion_fractions"))
    e.occlusion_fractions = get_num_array(j["occlusion_fractions"], path + ".occlusion_fractions");
  if (j.contains("heading_biases_deg"))
    e.heading_biases_deg = get_num_array(j["heading_biases_deg"], path + ".heading_biases_deg");
  if (j.contains("phantom_counts")) {
    const json& p = expect_array(j["phantom_counts"], path + ".phantom_counts");
    e.phantom_counts.clear();
    for (std::size_t i = 0; i < p.size(); ++i)
      e.phantom_counts.push_back(get_int(p[i], path + ".phantom_counts[" + std::to_string(i) + "]"));
  }
  if (j.contains("radio_power_shift_db"))
    e.radio_power_shift_db = get_num(j["radio_power_shift_db"], path + ".radio_power_shift_db");
  if (j.contains("radio_exponent_shift"))
    e.radio_exponent_shift = get_num(j["radio_exponent_shift"], path + ".radio_exponent_shift");
}

}  // namespace

inertial::StepModelState StepSection::make_state() const {
  inertial::StepModelState st;
  st.universal = universal;
  st.height = default_height_m;
  st.r2_threshold = r2_threshold;
  st.clamp_lo = clamp_lo;
  st.clamp_hi = clamp_hi;
  return st;
}

AppConfig default_config() {
  AppConfig cfg;
  sim::ScenarioConfig& s = cfg.scenario;

  // Five looping walkers, heights spread across the adult range.
  const struct {
    int id;
    double height;
    std::vector<Eigen::Vector2d> wp;
  } walkers[] = {
      {0, 1.62, {{1.5, 1.5}, {9.5, 1.5}, {9.5, 7.5}, {1.5, 7.5}}},
      {1, 1.85, {{9.5, 7.5}, {9.5, 1.5}, {1.5, 1.5}, {1.5, 7.5}}},
      {2, 1.78, {{1.5, 4.5}, {9.5, 4.5}}},
      {3, 1.70, {{5.5, 1.5}, {5.5, 7.5}}},
      {4, 1.90, {{3.0, 3.0}, {8.0, 3.0}, {8.0, 6.0}, {3.0, 6.0}}},
  };
  for (const auto& w : walkers) {
    sim::AgentConfig a;
    a.id = w.id;
    a.device_id = w.id;
    a.height = w.height;
    a.waypoints = w.wp;
    s.agents.push_back(std::move(a));
  }

  // Twelve access points around the perimeter.
  const Eigen::Vector2d ap_positions[] = {
      {1.0, 0.0},  {5.5, 0.0},  {10.0, 0.0},               // south wall
      {11.0, 2.25}, {11.0, 4.5}, {11.0, 6.75},             // east wall
      {10.0, 9.0}, {5.5, 9.0},  {1.0, 9.0},                // north wall
      {0.0, 6.75}, {0.0, 4.5},  {0.0, 2.25},               // west wall
  };
  int next_ap = 0;
  for (const auto& p : ap_positions) {
    sim::ApConfig ap;
    ap.ap.id = next_ap++;
    ap.ap.position = p;
    s.radio.aps.push_back(ap);
  }

  return cfg;
}

AppConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config parse error: ") + e.what());
  }
  expect_object(root, "config");
  check_keys(root, "config", {"scenario", "tracker", "sfm", "step", "learning", "vision",
                              "baseline", "experiment"});

  AppConfig cfg = default_config();
  try {
    if (root.contains("scenario")) merge_scenario(cfg.scenario, root["scenario"]);
    if (root.contains("tracker")) merge_tracker(cfg.tracker, root["tracker"]);
    if (root.contains("sfm")) merge_sfm(cfg.sfm, root["sfm"]);
    if (root.contains("step")) merge_step(cfg.step, root["step"]);
    if (root.contains("learning")) merge_learning(cfg.learning, root["learning"]);
    if (root.contains("vision")) merge_vision(cfg.vision, root["vision"]);
    if (root.contains("baseline")) merge_baseline(cfg.baseline, root["baseline"]);
    if (root.contains("experiment")) merge_experiment(cfg.experiment, root["experiment"]);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config parse error: ") + e.what());
  }

  // The camera-only reference tracker works the same ground plane unless its
  // area is pinned explicitly.
  if (!root.contains("baseline") || !root["baseline"].contains("area")) {
    cfg.baseline.area_min = {cfg.scenario.area.min_x, cfg.scenario.area.min_y};
    cfg.baseline.area_max = {cfg.scenario.area.max_x, cfg.scenario.area.max_y};
  }
  return cfg;
}

AppConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_seed(AppConfig& cfg, std::uint64_t seed) {
  cfg.scenario.seed = seed;
  cfg.tracker.seed = seed;
  cfg.baseline.seed = seed;
  cfg.experiment.seeds = {seed};
}

}  // namespace sitetrack::config
