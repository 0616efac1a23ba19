#include "sitetrack/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sitetrack/errors.hpp"
#include "sitetrack/textio.hpp"

namespace sitetrack::learning {

double quality_increment(std::optional<double> likelihood, double clutter_likelihood, double pd) {
  if (likelihood.has_value()) {
    return std::log(likelihood.value() * pd / clutter_likelihood);
  }
  return std::log(1.0 - pd);
}

double TrackHistory::quality() const {
  double q = 0.0;
  for (const auto& r : rows) q += r.quality_increment;
  return q;
}

std::map<int, TrackHistory> collect_track_histories(
    const std::vector<tracker::ScanSummary>& summaries,
    const std::vector<ScanMeasurements>& scans) {
  std::map<int, const ScanMeasurements*> by_t;
  for (const auto& s : scans) by_t[s.t] = &s;
  std::map<int, TrackHistory> out;
  for (const auto& sum : summaries) {
    const auto it = by_t.find(sum.t);
    const ScanMeasurements* scan = it == by_t.end() ? nullptr : it->second;
    for (const auto& [dev, info] : sum.devices) {
      if (!info.has_track) continue;
      TrackHistory& th = out[dev];
      th.device_id = dev;
      TrackRow row;
      row.scan = sum.t;
      const auto est = sum.estimates.find(dev);
      row.position = est != sum.estimates.end() ? est->second : info.position;
      row.camera_updated = info.updated;
      row.had_radio = info.had_radio;
      row.quality_increment = info.quality_increment;
      if (scan != nullptr) {
        const auto rit = scan->radio.find(dev);
        if (rit != scan->radio.end()) row.rss = rit->second;
        const auto sit = scan->steps.find(dev);
        if (sit != scan->steps.end()) {
          row.step_taken = sit->second.step_indicator;
          row.step_frequency = sit->second.step_frequency;
        }
      }
      th.rows.push_back(std::move(row));
    }
  }
  return out;
}

TrackQuality qualify_track(const TrackHistory& track, double q_threshold) {
  TrackQuality q;
  q.device_id = track.device_id;
  q.scans = static_cast<int>(track.rows.size());
  q.q = track.quality();
  q.qualified = q.q >= q_threshold;
  return q;
}

std::string quality_report_csv(const std::vector<TrackQuality>& tracks) {
  std::string out = "track,device_id,T,Q,qualified\n";
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(tracks[i].device_id) + "," +
           std::to_string(tracks[i].scans) + "," + format_fixed(tracks[i].q) + "," +
           (tracks[i].qualified ? "1" : "0") + "\n";
  }
  return out;
}

radio::RadioModel learn_radio_model(const std::vector<TrackHistory>& tracks,
                                    const radio::RadioModel& current, double q_threshold) {
  radio::RadioModel out = current;
  const std::size_t n_ap = current.access_points.size();
  std::vector<std::vector<radio::RssSample>> samples(n_ap);
  for (const auto& track : tracks) {
    if (!qualify_track(track, q_threshold).qualified) continue;
    for (const auto& row : track.rows) {
      if (!row.camera_updated) continue;  // only type (a) states carry a position fix
      for (std::size_t i = 0; i < std::min(row.rss.size(), n_ap); ++i) {
        if (!std::isnan(row.rss[i])) samples[i].push_back({row.position, row.rss[i]});
      }
    }
  }
  for (std::size_t i = 0; i < n_ap; ++i) {
    try {
      const radio::PathLossFit fit =
          radio::fit_path_loss(samples[i], current.access_points[i].position);
      out.access_points[i].ref_power = fit.ref_power;
      out.access_points[i].path_loss_exponent = fit.exponent;
    } catch (const Error&) {
      // unusable data for this access point: keep the prior parameters
    }
  }
  return out;
}

int OcclusionMap::cell_index(const Eigen::Vector2d& p) const {
  const int cx = static_cast<int>(std::floor((p.x() - origin.x()) / cell));
  const int cy = static_cast<int>(std::floor((p.y() - origin.y()) / cell));
  if (cx < 0 || cy < 0 || cx >= cols || cy >= rows) return -1;
  return cy * cols + cx;
}

bool OcclusionMap::is_occluded(const Eigen::Vector2d& p) const {
  const int i = cell_index(p);
  return i >= 0 && occluded[i] != 0;
}

OcclusionMap learn_occlusion_map(const std::vector<Eigen::Vector2d>& detections,
                                 const Eigen::Vector2d& origin, double cell, int cols, int rows,
                                 double threshold) {
  if (cols < 1 || rows < 1 || cell <= 0.0) throw InvalidConfig("occlusion grid is degenerate");
  OcclusionMap map;
  map.origin = origin;
  map.cell = cell;
  map.cols = cols;
  map.rows = rows;
  map.counts.assign(static_cast<std::size_t>(cols) * rows, 0);
  map.occluded.assign(map.counts.size(), 0);
  for (const auto& d : detections) {
    const int i = map.cell_index(d);
    if (i >= 0) ++map.counts[i];
  }
  const int max_count = *std::max_element(map.counts.begin(), map.counts.end());
  if (max_count == 0) return map;  // nothing observed: no basis for flags
  for (std::size_t i = 0; i < map.counts.size(); ++i) {
    const double normalized = static_cast<double>(map.counts[i]) / max_count;
    map.occluded[i] = normalized < threshold ? 1 : 0;
  }
  return map;
}

std::vector<socialforce::Entity> occlusion_obstacles(const OcclusionMap& map, double radius) {
  std::vector<socialforce::Entity> out;
  for (int y = 0; y < map.rows; ++y) {
    for (int x = 0; x < map.cols; ++x) {
      if (!map.occluded[static_cast<std::size_t>(y) * map.cols + x]) continue;
      const Eigen::Vector2d center = map.origin + map.cell * Eigen::Vector2d(x + 0.5, y + 0.5);
      out.push_back({center, radius, socialforce::EntityKind::Obstacle});
    }
  }
  return out;
}

std::string serialize_occlusion(const OcclusionMap& map) {
  std::string out = "origin " + format_fixed(map.origin.x()) + " " +
                    format_fixed(map.origin.y()) + "\ncell " +
                    format_fixed(map.cell) + "\ndims " + std::to_string(map.cols) + " " +
                    std::to_string(map.rows) + "\n";
  for (int y = 0; y < map.rows; ++y) {
    for (int x = 0; x < map.cols; ++x) {
      out += map.occluded[static_cast<std::size_t>(y) * map.cols + x] ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

OcclusionMap parse_occlusion(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  OcclusionMap map;
  int stage = 0, row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_ws(line);
    if (stage == 0) {
      if (f.size() != 3 || f[0] != "origin") throw IoError("expected occlusion origin line");
      map.origin = {parse_double(f[1]), parse_double(f[2])};
      stage = 1;
    } else if (stage == 1) {
      if (f.size() != 2 || f[0] != "cell") throw IoError("expected occlusion cell line");
      map.cell = parse_double(f[1]);
      stage = 2;
    } else if (stage == 2) {
      if (f.size() != 3 || f[0] != "dims") throw IoError("expected occlusion dims line");
      map.cols = static_cast<int>(parse_double(f[1]));
      map.rows = static_cast<int>(parse_double(f[2]));
      if (map.cols < 1 || map.rows < 1) throw IoError("occlusion dims out of range");
      map.occluded.assign(static_cast<std::size_t>(map.cols) * map.rows, 0);
      map.counts.assign(map.occluded.size(), 0);
      stage = 3;
    } else {
      if (row >= map.rows || static_cast<int>(line.size()) != map.cols) {
        throw IoError("occlusion grid row malformed");
      }
      for (int x = 0; x < map.cols; ++x) {
        if (line[x] != '0' && line[x] != '1') throw IoError("occlusion grid cell malformed");
        map.occluded[static_cast<std::size_t>(row) * map.cols + x] = line[x] == '1';
      }
      ++row;
    }
  }
  if (stage != 3 || row != map.rows) throw IoError("occlusion grid truncated");
  return map;
}

std::vector<inertial::StepCalibrationPoint> extract_step_calibration(const TrackHistory& track) {
  std::vector<inertial::StepCalibrationPoint> out;
  for (std::size_t i = 1; i < track.rows.size(); ++i) {
    const TrackRow& prev = track.rows[i - 1];
    const TrackRow& cur = track.rows[i];
    if (cur.scan != prev.scan + 1) continue;  // endpoints must be adjacent scans
    if (!cur.step_taken || !cur.camera_updated || !prev.camera_updated) continue;
    out.push_back({(cur.position - prev.position).norm(), cur.step_frequency});
  }
  return out;
}

ReplayResult replay_run(const ReplayWindow& window, double alpha) {
  vision::PixelGrid grid = vision::make_pixel_grid(window.vision_cfg);
  if (!window.frames.empty()) vision::warm_start(grid, window.frames.front());
  tracker::Filter filter(window.tracker_cfg, window.models);
  std::vector<tracker::ScanSummary> summaries;
  std::vector<ScanMeasurements> scans = window.scans;
  const std::size_t n = std::min(window.frames.size(), scans.size());
  summaries.reserve(n);
  ReplayResult out;
  for (std::size_t t = 0; t < n; ++t) {
    const auto mask = vision::classify_frame(grid, window.frames[t], alpha, window.vision_cfg,
                                             vision::Execution::Parallel);
    const auto blobs = vision::extract_detections(mask, window.vision_cfg.frame_width,
                                                  window.vision_cfg.frame_height,
                                                  window.vision_cfg.min_area);
    scans[t].camera.clear();
    for (const auto& b : blobs) {
      scans[t].camera.push_back(geometry::project_point(window.px_to_world, b.centroid_px));
    }
    const tracker::ScanSummary s = filter.process_scan(scans[t]);
    for (const auto& [dev, pos] : s.estimates) out.estimates[dev][s.t] = pos;
    summaries.push_back(s);
  }
  const auto histories = collect_track_histories(summaries, scans);
  for (const auto& [dev, th] : histories) {
    const TrackQuality q = qualify_track(th, window.q_threshold);
    if (q.qualified) out.cqs += q.q;
  }
  return out;
}

double replay_cqs(const ReplayWindow& window, double alpha) { return replay_run(window, alpha).cqs; }

double optimize_detector_learning_rate(const ReplayWindow& window, const std::vector<double>& grid,
                                       std::vector<std::pair<double, double>>* scores) {
  if (grid.empty()) throw InvalidConfig("learning-rate grid is empty");
  double best_alpha = grid.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (const double alpha : grid) {
    const double score = replay_cqs(window, alpha);
    if (scores != nullptr) scores->emplace_back(alpha, score);
    // strict improvement only: ties keep the earlier (smaller) rate
    if (score > best_score || (score == best_score && alpha < best_alpha)) {
      best_score = score;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

}  // namespace sitetrack::learning
