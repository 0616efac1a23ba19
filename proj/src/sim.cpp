#include "sitetrack/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "sitetrack/errors.hpp"
#include "sitetrack/rng.hpp"
#include "sitetrack/textio.hpp"

namespace sitetrack::sim {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double truth_step_length(const AgentConfig& a, double f) {
  if (a.step.use_universal) {
    return inertial::universal_step_length(a.height, f, inertial::UniversalStepParams{});
  }
  return a.step.slope * f + a.step.intercept;
}

bool blocked(const ScenarioConfig& cfg, const Eigen::Vector2d& p) {
  if (!cfg.area.contains(p)) return true;
  for (const auto& w : cfg.walls) {
    if (w.contains(p)) return true;
  }
  return false;
}

void validate(const ScenarioConfig& cfg) {
  if (cfg.area.max_x <= cfg.area.min_x || cfg.area.max_y <= cfg.area.min_y) {
    throw InvalidConfig("scenario area is degenerate");
  }
  if (cfg.scans < 1) throw InvalidConfig("scenario needs at least one scan");
  if (cfg.dt <= 0.0) throw InvalidConfig("scan interval must be positive");
  if (cfg.camera.pd < 0.0 || cfg.camera.pd > 1.0) throw InvalidConfig("camera pd outside [0,1]");
  if (cfg.camera.clutter_rate < 0.0) throw InvalidConfig("negative clutter rate");
  std::set<int> agent_ids, device_ids, ap_ids;
  for (const auto& a : cfg.agents) {
    if (!agent_ids.insert(a.id).second) throw InvalidConfig("duplicate agent id");
    if (a.device_id >= 0 && !device_ids.insert(a.device_id).second) {
      throw InvalidConfig("duplicate device id");
    }
    if (a.f_lo > a.f_hi) throw InvalidConfig("step frequency range inverted");
    const std::size_t min_wp = a.policy == MotionPolicy::Waypoints ? 2 : 1;
    if (a.waypoints.size() < min_wp) throw InvalidConfig("agent needs a start position");
    for (const auto& w : a.waypoints) {
      if (!cfg.area.contains(w)) throw InvalidConfig("waypoint outside scenario area");
    }
  }
  for (const auto& ap : cfg.radio.aps) {
    if (!ap_ids.insert(ap.ap.id).second) throw InvalidConfig("duplicate access point id");
    if (ap.rate_divisor < 0) throw InvalidConfig("negative radio rate divisor");
  }
  if (cfg.radio.rate_divisor < 0) throw InvalidConfig("negative radio rate divisor");
  for (const auto& e : cfg.radio.events) {
    if (!ap_ids.count(e.ap_id)) throw InvalidConfig("radio event references unknown access point");
  }
}

struct AgentState {
  Eigen::Vector2d pos{0, 0};
  double facing = 0.0;
  std::size_t target = 0;  // waypoint index currently walked toward
  int dwell_left = 0;
  bool done = false;  // non-loop agent that reached the last waypoint
};

}  // namespace

const AgentTruth* GroundTruth::by_device(int device_id) const {
  for (const auto& a : agents) {
    if (a.device_id == device_id) return &a;
  }
  return nullptr;
}

radio::RadioModel initial_radio_model(const ScenarioConfig& cfg) {
  radio::RadioModel m;
  for (const auto& ap : cfg.radio.aps) m.access_points.push_back(ap.ap);
  return m;
}

Scenario generate_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  Scenario sc;
  sc.config = cfg;
  const Rng master(cfg.seed);
  const int T = cfg.scans;
  const int n_agents = static_cast<int>(cfg.agents.size());

  // Truth trajectories first; phantoms replay them with a lead.
  std::vector<AgentState> st(n_agents);
  std::vector<std::vector<double>> facing_at(n_agents);   // per scan
  std::vector<std::vector<int>> step_at(n_agents);        // step index per scan, -1 if none
  sc.truth.agents.resize(n_agents);
  for (int a = 0; a < n_agents; ++a) {
    const AgentConfig& ac = cfg.agents[a];
    st[a].pos = ac.waypoints.front();
    st[a].target = std::min<std::size_t>(1, ac.waypoints.size() - 1);
    if (ac.waypoints.size() > 1) {
      const Eigen::Vector2d d = ac.waypoints[1] - ac.waypoints[0];
      if (d.norm() > 1e-12) st[a].facing = std::atan2(d.y(), d.x());
    }
    sc.truth.agents[a].agent_id = ac.id;
    sc.truth.agents[a].device_id = ac.device_id;
    sc.truth.agents[a].positions.reserve(T);
  }

  for (int t = 0; t < T; ++t) {
    for (int a = 0; a < n_agents; ++a) {
      const AgentConfig& ac = cfg.agents[a];
      AgentState& s = st[a];
      Rng rng = master.derive(stream::kTruth, ac.id, t);
      bool stepped = false;
      double len = 0.0, heading = 0.0, freq = 0.0;
      if (ac.policy == MotionPolicy::Waypoints && !s.done) {
        if (s.dwell_left > 0) {
          --s.dwell_left;
        } else {
          if ((ac.waypoints[s.target] - s.pos).norm() <= ac.waypoint_tolerance) {
            if (s.target + 1 < ac.waypoints.size()) {
              ++s.target;
              s.dwell_left = ac.dwell_scans;
            } else if (ac.loop) {
              s.target = 0;
              s.dwell_left = ac.dwell_scans;
            } else {
              s.done = true;
            }
          }
          if (!s.done && s.dwell_left == 0) {
            const Eigen::Vector2d d = ac.waypoints[s.target] - s.pos;
            freq = rng.uniform(ac.f_lo, ac.f_hi);
            len = truth_step_length(ac, freq);
            heading = std::atan2(d.y(), d.x()) + ac.heading_noise * rng.gaussian();
            const Eigen::Vector2d cand =
                s.pos + len * Eigen::Vector2d(std::cos(heading), std::sin(heading));
            if (!blocked(cfg, cand)) {
              s.pos = cand;
              s.facing = heading;
              stepped = true;
            }
          }
        }
      } else if (ac.policy == MotionPolicy::RandomWalk) {
        freq = rng.uniform(ac.f_lo, ac.f_hi);
        heading = wrap_angle(s.facing + 0.3 * rng.gaussian());
        len = truth_step_length(ac, freq);
        const Eigen::Vector2d cand =
            s.pos + len * Eigen::Vector2d(std::cos(heading), std::sin(heading));
        if (blocked(cfg, cand)) {
          s.facing = wrap_angle(heading + kPi);
        } else {
          s.pos = cand;
          s.facing = heading;
          stepped = true;
        }
      }
      sc.truth.agents[a].positions.push_back(s.pos);
      if (stepped) {
        step_at[a].push_back(static_cast<int>(sc.truth.agents[a].steps.size()));
        sc.truth.agents[a].steps.push_back({t, len, wrap_angle(heading), freq});
      } else {
        step_at[a].push_back(-1);
      }
      facing_at[a].push_back(s.facing);
    }
  }

  // Phantom trajectories: future truth of a source agent, wrapped around.
  const int n_ph = cfg.camera.phantoms;
  std::vector<std::vector<Eigen::Vector2d>> phantom_pos(n_ph);
  for (int k = 0; k < n_ph && n_agents > 0; ++k) {
    const auto& src = sc.truth.agents[k % n_agents].positions;
    phantom_pos[k].reserve(T);
    const long lead = static_cast<long>(cfg.camera.phantom_offset_scans) * (k + 1);
    for (int t = 0; t < T; ++t) {
      phantom_pos[k].push_back(src[(t + lead) % T]);
    }
  }

  auto occluded = [&](const Eigen::Vector2d& p, int t) {
    for (const auto& o : cfg.camera.occlusions) {
      if (o.active(t) && o.rect.contains(p)) return true;
    }
    return false;
  };

  radio::RadioModel true_radio = initial_radio_model(cfg);
  std::vector<RadioEvent> events = cfg.radio.events;
  std::stable_sort(events.begin(), events.end(),
                   [](const RadioEvent& l, const RadioEvent& r) { return l.scan < r.scan; });
  std::size_t next_event = 0;

  sc.scans.resize(T);
  for (int t = 0; t < T; ++t) {
    while (next_event < events.size() && events[next_event].scan <= t) {
      const RadioEvent& e = events[next_event++];
      auto& ap = true_radio.access_points[true_radio.index_of(e.ap_id)];
      ap.ref_power = e.ref_power;
      ap.path_loss_exponent = e.exponent;
    }
    ScanMeasurements& scan = sc.scans[t];
    scan.t = t;

    for (int a = 0; a < n_agents; ++a) {
      const Eigen::Vector2d p = sc.truth.agents[a].positions[t];
      if (occluded(p, t)) continue;
      Rng rng = master.derive(stream::kCamera, cfg.agents[a].id, t);
      if (rng.bernoulli(cfg.camera.pd)) {
        scan.camera.push_back(p + cfg.camera.sigma * Eigen::Vector2d(rng.gaussian(),
                                                                     rng.gaussian()));
      }
    }
    for (int k = 0; k < n_ph; ++k) {
      const Eigen::Vector2d p = phantom_pos[k][t];
      if (occluded(p, t)) continue;
      Rng rng = master.derive(stream::kPhantom, k, t);
      if (rng.bernoulli(cfg.camera.pd)) {
        scan.camera.push_back(p + cfg.camera.sigma * Eigen::Vector2d(rng.gaussian(),
                                                                     rng.gaussian()));
      }
    }
    {
      Rng rng = master.derive(stream::kClutter, 0, t);
      const int n = rng.poisson(cfg.camera.clutter_rate);
      for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(cfg.area.min_x, cfg.area.max_x);
        const double y = rng.uniform(cfg.area.min_y, cfg.area.max_y);
        scan.camera.push_back({x, y});
      }
    }

    for (int a = 0; a < n_agents; ++a) {
      const AgentConfig& ac = cfg.agents[a];
      if (ac.device_id < 0) continue;
      const Eigen::Vector2d p = sc.truth.agents[a].positions[t];

      Rng rr = master.derive(stream::kRadio, ac.device_id, t);
      std::vector<double> rss(true_radio.access_points.size(),
                              std::numeric_limits<double>::quiet_NaN());
      bool any = false;
      for (std::size_t i = 0; i < true_radio.access_points.size(); ++i) {
        int div = cfg.radio.aps[i].rate_divisor;
        if (div == 0) div = cfg.radio.rate_divisor;
        if (div <= 0 || t % div != 0) continue;
        rss[i] = radio::expected_rss(true_radio.access_points[i], p) +
                 cfg.radio.sigma * rr.gaussian();
        any = true;
      }
      if (any) scan.radio.emplace(ac.device_id, std::move(rss));

      Rng ri = master.derive(stream::kImu, ac.device_id, t);
      const double bias = ri.uniform(cfg.imu.heading_bias_lo, cfg.imu.heading_bias_hi);
      const double jitter = cfg.imu.heading_jitter * ri.gaussian();
      const bool flip = ri.bernoulli(cfg.imu.step_error_rate);
      const StepEvent* ev =
          step_at[a][t] >= 0 ? &sc.truth.agents[a].steps[step_at[a][t]] : nullptr;
      inertial::StepObservation obs;
      obs.device_id = ac.device_id;
      obs.timestamp = t * cfg.dt;
      if (ev && !flip) {
        obs.step_indicator = true;
        obs.step_frequency = ev->frequency;
        obs.step_length =
            inertial::universal_step_length(ac.height, ev->frequency,
                                            inertial::UniversalStepParams{});
        obs.heading = wrap_angle(ev->heading + bias + jitter);
      } else if (!ev && flip) {
        obs.step_indicator = true;  // spurious
        obs.step_frequency = ri.uniform(ac.f_lo, ac.f_hi);
        obs.step_length =
            inertial::universal_step_length(ac.height, obs.step_frequency,
                                            inertial::UniversalStepParams{});
        obs.heading = wrap_angle(facing_at[a][t] + bias + jitter);
      } else {
        obs.step_indicator = false;
        obs.heading = wrap_angle((ev ? ev->heading : facing_at[a][t]) + bias + jitter);
      }
      scan.steps.emplace(ac.device_id, obs);
    }
  }

  sc.final_radio_model = true_radio;
  return sc;
}

std::vector<std::vector<Eigen::Vector2d>> visible_world_positions(const Scenario& sc) {
  const int T = sc.config.scans;
  const int n_agents = static_cast<int>(sc.truth.agents.size());
  auto occluded = [&](const Eigen::Vector2d& p, int t) {
    for (const auto& o : sc.config.camera.occlusions) {
      if (o.active(t) && o.rect.contains(p)) return true;
    }
    return false;
  };
  std::vector<std::vector<Eigen::Vector2d>> out(T);
  for (int t = 0; t < T; ++t) {
    for (int a = 0; a < n_agents; ++a) {
      const Eigen::Vector2d p = sc.truth.agents[a].positions[t];
      if (!occluded(p, t)) out[t].push_back(p);
    }
    for (int k = 0; k < sc.config.camera.phantoms && n_agents > 0; ++k) {
      const auto& src = sc.truth.agents[k % n_agents].positions;
      const long lead = static_cast<long>(sc.config.camera.phantom_offset_scans) * (k + 1);
      const Eigen::Vector2d p = src[(t + lead) % T];
      if (!occluded(p, t)) out[t].push_back(p);
    }
  }
  return out;
}

std::string serialize_scenario(const Scenario& sc) {
  std::string out;
  const int T = static_cast<int>(sc.scans.size());
  for (int t = 0; t < T; ++t) {
    for (const auto& a : sc.truth.agents) {
      out += std::to_string(t) + " TRUTH " + std::to_string(a.agent_id) + " " +
             std::to_string(a.device_id) + " " + format_fixed(a.positions[t].x()) + " " +
             format_fixed(a.positions[t].y()) + "\n";
    }
    const ScanMeasurements& scan = sc.scans[t];
    for (const auto& c : scan.camera) {
      out += std::to_string(t) + " CAM " + format_fixed(c.x()) + " " +
             format_fixed(c.y()) + "\n";
    }
    for (const auto& [dev, rss] : scan.radio) {
      out += std::to_string(t) + " RSS " + std::to_string(dev) + " " +
             std::to_string(rss.size());
      for (const double v : rss) out += " " + format_fixed(v);
      out += "\n";
    }
    for (const auto& [dev, obs] : scan.steps) {
      out += std::to_string(t) + " IMU " + std::to_string(dev) + " " +
             std::string(obs.step_indicator ? "1" : "0") + " " +
             format_fixed(obs.step_length) + " " + format_fixed(obs.heading) +
             " " + format_fixed(obs.step_frequency) + " " +
             format_fixed(obs.timestamp) + "\n";
    }
  }
  return out;
}

ParsedLog parse_scenario_log(const std::string& text, int ap_count) {
  ParsedLog out;
  std::map<int, AgentTruth> agents;
  std::istringstream in(text);
  std::string line;
  int max_t = -1;
  struct Row {
    int t;
    std::vector<std::string> f;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split_ws(line);
    if (f.size() < 2) throw IoError("malformed scenario log line: " + line);
    const int t = static_cast<int>(parse_double(f[0]));
    max_t = std::max(max_t, t);
    rows.push_back({t, std::move(f)});
  }
  out.scans.resize(max_t + 1);
  for (int t = 0; t <= max_t; ++t) out.scans[t].t = t;
  for (const auto& row : rows) {
    const auto& f = row.f;
    const int t = row.t;
    if (f[1] == "TRUTH") {
      if (f.size() != 6) throw IoError("malformed TRUTH line");
      const int agent = static_cast<int>(parse_double(f[2]));
      auto& a = agents[agent];
      a.agent_id = agent;
      a.device_id = static_cast<int>(parse_double(f[3]));
      a.positions.resize(max_t + 1, Eigen::Vector2d::Zero());
      a.positions[t] = {parse_double(f[4]), parse_double(f[5])};
    } else if (f[1] == "CAM") {
      if (f.size() != 4) throw IoError("malformed CAM line");
      out.scans[t].camera.push_back({parse_double(f[2]), parse_double(f[3])});
    } else if (f[1] == "RSS") {
      if (f.size() < 4) throw IoError("malformed RSS line");
      const int dev = static_cast<int>(parse_double(f[2]));
      const int n = static_cast<int>(parse_double(f[3]));
      if (n != ap_count || static_cast<int>(f.size()) != 4 + n) {
        throw DimensionMismatch("RSS line has wrong access-point count");
      }
      std::vector<double> rss(n);
      for (int i = 0; i < n; ++i) rss[i] = parse_double(f[4 + i]);
      out.scans[t].radio.emplace(dev, std::move(rss));
    } else if (f[1] == "IMU") {
      if (f.size() != 8) throw IoError("malformed IMU line");
      inertial::StepObservation obs;
      obs.device_id = static_cast<int>(parse_double(f[2]));
      obs.step_indicator = parse_double(f[3]) != 0.0;
      obs.step_length = parse_double(f[4]);
      obs.heading = parse_double(f[5]);
      obs.step_frequency = parse_double(f[6]);
      obs.timestamp = parse_double(f[7]);
      out.scans[t].steps.emplace(obs.device_id, obs);
    } else {
      throw IoError("unknown scenario log record: " + f[1]);
    }
  }
  for (auto& [id, a] : agents) out.truth.agents.push_back(std::move(a));
  return out;
}

}  // namespace sitetrack::sim
