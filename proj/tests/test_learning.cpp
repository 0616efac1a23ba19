#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "sitetrack/errors.hpp"
#include "sitetrack/geometry.hpp"
#include "sitetrack/inertial.hpp"
#include "sitetrack/learning.hpp"
#include "sitetrack/radio.hpp"
#include "sitetrack/rng.hpp"
#include "sitetrack/tracker.hpp"
#include "sitetrack/vision.hpp"

using namespace sitetrack;
using namespace sitetrack::learning;
using Eigen::Vector2d;

namespace {

radio::RadioModel one_ap(double ref, double exponent) {
  radio::RadioModel m;
  radio::AccessPoint ap;
  ap.id = 0;
  ap.position = Vector2d(0, 0);
  ap.ref_power = ref;
  ap.path_loss_exponent = exponent;
  m.access_points.push_back(ap);
  return m;
}

}  // namespace

TEST_CASE("assigned-scan quality is the log ratio against the clutter route") {
  CHECK(quality_increment(0.5, 0.01, 0.9) == doctest::Approx(std::log(45.0)));
  CHECK(quality_increment(std::nullopt, 0.01, 0.9) == doctest::Approx(std::log(0.1)));
  // Break-even point: likelihood * pd exactly pays for the clutter density.
  CHECK(quality_increment(0.025, 0.02, 0.8) == doctest::Approx(0.0));
}

TEST_CASE("track quality is the sum of its increments") {
  TrackHistory th;
  th.device_id = 4;
  for (double q : {1.5, -0.3, 2.0}) {
    TrackRow r;
    r.quality_increment = q;
    th.rows.push_back(r);
  }
  CHECK(th.quality() == doctest::Approx(3.2));

  TrackQuality tq = qualify_track(th, 3.2);
  CHECK(tq.qualified);  // threshold is inclusive
  CHECK(tq.scans == 3);
  CHECK(tq.device_id == 4);
  CHECK_FALSE(qualify_track(th, 3.2000001).qualified);
}

TEST_CASE("quality report prints one csv row per track") {
  TrackQuality a{3, 120, 305.5, true};
  TrackQuality b{7, 40, -12.25, false};
  const std::string csv = quality_report_csv({a, b});
  CHECK(csv.find("track,device_id,T,Q,qualified\n") == 0);
  CHECK(csv.find("0,3,120,305.500000000,1\n") != std::string::npos);
  CHECK(csv.find("1,7,40,-12.250000000,0\n") != std::string::npos);
}

TEST_CASE("track histories are assembled from summaries joined to scans by id") {
  std::vector<tracker::ScanSummary> summaries(2);
  summaries[0].t = 10;
  {
    tracker::DeviceScanInfo info;
    info.has_track = true;
    info.had_radio = true;
    info.updated = true;
    info.quality_increment = 2.5;
    info.position = Vector2d(1, 1);
    summaries[0].devices[0] = info;
    summaries[0].estimates[0] = Vector2d(1.25, 1.0);  // preferred over the raw mean
    tracker::DeviceScanInfo no_track;
    no_track.has_track = false;
    no_track.had_radio = true;
    summaries[0].devices[5] = no_track;  // radio without a track: no history row
  }
  summaries[1].t = 12;  // gap: scan 11 produced nothing for this device
  {
    tracker::DeviceScanInfo info;
    info.has_track = true;
    info.position = Vector2d(2, 2);
    summaries[1].devices[0] = info;  // no estimate entry: fall back to the mean
  }

  std::vector<ScanMeasurements> scans(2);
  scans[0].t = 10;
  scans[0].radio[0] = {-48.0};
  scans[0].steps[0] = {0, true, 0.7, 0.1, 1.9, 5.0};
  scans[1].t = 12;

  const auto histories = collect_track_histories(summaries, scans);
  REQUIRE(histories.size() == 1);
  const TrackHistory& th = histories.at(0);
  REQUIRE(th.rows.size() == 2);
  CHECK(th.rows[0].scan == 10);
  CHECK(th.rows[0].camera_updated);
  CHECK(th.rows[0].had_radio);
  CHECK(th.rows[0].quality_increment == doctest::Approx(2.5));
  CHECK((th.rows[0].position - Vector2d(1.25, 1.0)).norm() == 0.0);
  REQUIRE(th.rows[0].rss.size() == 1);
  CHECK(th.rows[0].rss[0] == doctest::Approx(-48.0));
  CHECK(th.rows[0].step_taken);
  CHECK(th.rows[0].step_frequency == doctest::Approx(1.9));
  CHECK(th.rows[1].scan == 12);
  CHECK((th.rows[1].position - Vector2d(2, 2)).norm() == 0.0);
  CHECK(th.rows[1].rss.empty());
}

TEST_CASE("radio relearning recovers exact parameters from clean fixes") {
  const radio::RadioModel truth = one_ap(-47.0, 3.0);
  const radio::RadioModel prior = one_ap(-40.0, 2.5);

  TrackHistory th;
  th.device_id = 0;
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    TrackRow r;
    r.scan = i;
    r.position = Vector2d(rng.uniform(0.8, 10.0), rng.uniform(0.8, 8.0));
    r.camera_updated = true;
    r.rss = {radio::expected_rss(truth.access_points[0], r.position)};
    th.rows.push_back(r);
  }
  // Poisoned rows that must be ignored: no camera fix backing the position.
  for (int i = 40; i < 50; ++i) {
    TrackRow r;
    r.scan = i;
    r.position = Vector2d(0.5, 0.5);
    r.camera_updated = false;
    r.rss = {-10.0};
    th.rows.push_back(r);
  }

  const radio::RadioModel learned = learn_radio_model({th}, prior, 0.0);
  CHECK(learned.access_points[0].ref_power == doctest::Approx(-47.0).epsilon(1e-9));
  CHECK(learned.access_points[0].path_loss_exponent == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("unqualified tracks contribute nothing to the radio fit") {
  const radio::RadioModel truth = one_ap(-47.0, 3.0);
  const radio::RadioModel prior = one_ap(-40.0, 2.5);
  TrackHistory th;
  th.device_id = 0;
  for (int i = 0; i < 40; ++i) {
    TrackRow r;
    r.scan = i;
    r.position = Vector2d(1.0 + 0.2 * i, 4.0);
    r.camera_updated = true;
    r.quality_increment = -1.0;  // hopeless track
    r.rss = {radio::expected_rss(truth.access_points[0], r.position)};
    th.rows.push_back(r);
  }
  const radio::RadioModel learned = learn_radio_model({th}, prior, 300.0);
  CHECK(learned.access_points[0].ref_power == doctest::Approx(-40.0));
  CHECK(learned.access_points[0].path_loss_exponent == doctest::Approx(2.5));
}

TEST_CASE("an access point with unusable data keeps its prior parameters") {
  radio::RadioModel truth = one_ap(-47.0, 3.0);
  radio::AccessPoint silent;
  silent.id = 1;
  silent.position = Vector2d(11, 9);
  silent.ref_power = -33.0;
  silent.path_loss_exponent = 1.9;
  truth.access_points.push_back(silent);
  radio::RadioModel prior = truth;
  prior.access_points[0].ref_power = -40.0;
  prior.access_points[0].path_loss_exponent = 2.5;

  TrackHistory th;
  th.device_id = 0;
  Rng rng(8);
  for (int i = 0; i < 40; ++i) {
    TrackRow r;
    r.scan = i;
    r.position = Vector2d(rng.uniform(0.8, 10.0), rng.uniform(0.8, 8.0));
    r.camera_updated = true;
    r.rss = {radio::expected_rss(truth.access_points[0], r.position), std::nan("")};
    th.rows.push_back(r);
  }
  const radio::RadioModel learned = learn_radio_model({th}, prior, 0.0);
  CHECK(learned.access_points[0].ref_power == doctest::Approx(-47.0).epsilon(1e-9));
  CHECK(learned.access_points[1].ref_power == doctest::Approx(-33.0));
  CHECK(learned.access_points[1].path_loss_exponent == doctest::Approx(1.9));
}

TEST_CASE("occlusion cells are flagged relative to the busiest cell") {
  std::vector<Vector2d> dets;
  for (int i = 0; i < 100; ++i) dets.emplace_back(0.25, 0.25);  // cell (0,0)
  for (int i = 0; i < 10; ++i) dets.emplace_back(0.75, 0.25);   // cell (1,0)
  dets.emplace_back(0.25, 0.75);                                // cell (0,1): 1 hit
  // cell (1,1): never hit

  const OcclusionMap map = learn_occlusion_map(dets, {0, 0}, 0.5, 2, 2, 0.05);
  CHECK_FALSE(map.is_occluded({0.25, 0.25}));
  CHECK_FALSE(map.is_occluded({0.75, 0.25}));  // 10/100 = 0.1 >= 0.05
  CHECK(map.is_occluded({0.25, 0.75}));        // 1/100 < 0.05
  CHECK(map.is_occluded({0.75, 0.75}));
  CHECK(map.counts[0] == 100);

  // Outside the grid nothing is occluded and the index is the sentinel.
  CHECK(map.cell_index({-0.1, 0.2}) == -1);
  CHECK(map.cell_index({0.2, 5.0}) == -1);
  CHECK_FALSE(map.is_occluded({-0.1, 0.2}));
}

TEST_CASE("threshold zero never flags and an empty map flags nothing") {
  std::vector<Vector2d> dets = {{0.1, 0.1}};
  const OcclusionMap map = learn_occlusion_map(dets, {0, 0}, 0.5, 4, 4, 0.0);
  for (const auto f : map.occluded) CHECK(f == 0);

  const OcclusionMap blank = learn_occlusion_map({}, {0, 0}, 0.5, 4, 4, 0.5);
  for (const auto f : blank.occluded) CHECK(f == 0);  // no evidence, no flags

  CHECK_THROWS_AS(learn_occlusion_map({}, {0, 0}, 0.5, 0, 4, 0.5), InvalidConfig);
  CHECK_THROWS_AS(learn_occlusion_map({}, {0, 0}, -1.0, 4, 4, 0.5), InvalidConfig);
}

TEST_CASE("occluded cells become centered obstacle entities") {
  std::vector<Vector2d> dets;
  for (int i = 0; i < 50; ++i) dets.emplace_back(2.25, 3.25);  // lands in cell (0,0)
  const OcclusionMap map = learn_occlusion_map(dets, {2, 3}, 0.5, 2, 1, 0.5);
  const auto obs = occlusion_obstacles(map, 0.3);
  REQUIRE(obs.size() == 1);  // only cell (1,0) is starved
  CHECK((obs[0].center - Vector2d(2.75, 3.25)).norm() < 1e-12);
  CHECK(obs[0].radius == doctest::Approx(0.3));
  CHECK(obs[0].kind == socialforce::EntityKind::Obstacle);
}

TEST_CASE("occlusion maps round-trip through their text form") {
  std::vector<Vector2d> dets;
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    dets.emplace_back(rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.5));
  }
  const OcclusionMap map = learn_occlusion_map(dets, {0.5, -0.5}, 0.5, 6, 4, 0.4);
  const OcclusionMap back = parse_occlusion(serialize_occlusion(map));
  CHECK(back.origin.x() == doctest::Approx(map.origin.x()));
  CHECK(back.origin.y() == doctest::Approx(map.origin.y()));
  CHECK(back.cell == doctest::Approx(map.cell));
  CHECK(back.cols == map.cols);
  CHECK(back.rows == map.rows);
  CHECK(back.occluded == map.occluded);

  CHECK_THROWS_AS(parse_occlusion("cell 0.5\n"), IoError);
  CHECK_THROWS_AS(parse_occlusion("origin 0 0\ncell 0.5\ndims 2 2\n01\n"), IoError);
  CHECK_THROWS_AS(parse_occlusion("origin 0 0\ncell 0.5\ndims 2 1\n0x\n"), IoError);
}

TEST_CASE("step calibration needs adjacent camera-fixed scans around a step") {
  TrackHistory th;
  auto add = [&](int scan, Vector2d pos, bool cam, bool step, double f) {
    TrackRow r;
    r.scan = scan;
    r.position = pos;
    r.camera_updated = cam;
    r.step_taken = step;
    r.step_frequency = f;
    th.rows.push_back(r);
  };
  add(0, {0, 0}, true, false, 0.0);
  add(1, {0.7, 0}, true, true, 2.0);    // usable: both endpoints fixed, adjacent
  add(2, {1.4, 0}, false, true, 1.8);   // no fix at the end: skipped
  add(3, {2.0, 0}, true, true, 1.9);    // previous scan unfixed: skipped
  add(5, {2.8, 0}, true, true, 2.1);    // scan gap: skipped
  add(6, {3.3, 0}, true, false, 0.0);   // no step: skipped

  const auto points = extract_step_calibration(th);
  REQUIRE(points.size() == 1);
  CHECK(points[0].visual_step_length == doctest::Approx(0.7));
  CHECK(points[0].frequency == doctest::Approx(2.0));
  CHECK(extract_step_calibration({}).empty());
}

TEST_CASE("camera-derived steps recover a personal gait model exactly") {
  const double slope = 0.45, intercept = 0.08;
  TrackHistory th;
  Vector2d pos(1, 1);
  Rng rng(11);
  for (int i = 0; i < 12; ++i) {
    TrackRow r;
    r.scan = i;
    r.position = pos;
    r.camera_updated = true;
    if (i > 0) {
      const double f = 1.4 + 0.07 * i;
      r.step_taken = true;
      r.step_frequency = f;
      const double len = slope * f + intercept;
      const double dir = rng.uniform(0.0, 6.28);
      pos += len * Vector2d(std::cos(dir), std::sin(dir));
      r.position = pos;
    }
    th.rows.push_back(r);
  }
  const auto points = extract_step_calibration(th);
  REQUIRE(points.size() == 11);
  const inertial::PersonalStepModel fit = inertial::fit_personal_step_model(points);
  CHECK(fit.slope == doctest::Approx(slope).epsilon(1e-9));
  CHECK(fit.intercept == doctest::Approx(intercept).epsilon(1e-9));
  CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("replays are deterministic and replace the recorded detections") {
  ReplayWindow w;
  w.vision_cfg.frame_width = 96;
  w.vision_cfg.frame_height = 72;
  w.vision_cfg.noise_sigma = 1.0;
  // A tight initial variance keeps the anchored background component dominant
  // for ~10 frames, so a blob crossing a pixel in 5 frames is never absorbed.
  w.vision_cfg.sigma_init_sq = 25.0;
  w.px_to_world = geometry::make_homography(Eigen::Matrix3d::Identity());
  w.q_threshold = 1.0;

  radio::RadioModel model;
  for (int i = 0; i < 4; ++i) {
    radio::AccessPoint ap;
    ap.id = i;
    ap.position = Vector2d(i % 2 == 0 ? 0.0 : 96.0, i < 2 ? 0.0 : 72.0);
    model.access_points.push_back(ap);
  }
  w.models.radio_model = model;
  w.tracker_cfg.particles = 30;
  w.tracker_cfg.execution = tracker::Execution::Serial;

  const int T = 45;
  Rng seed(41);
  for (int t = 0; t < T; ++t) {
    const Vector2d truth(20.0 + 1.0 * t, 36.0);
    // Frame 0 is empty so the warm start anchors pure background; the walker
    // enters at t=1 and never leaves a stationary ghost behind.
    std::vector<Vector2d> visible;
    if (t > 0) visible.push_back(truth);
    w.frames.push_back(vision::render_frame(visible, t, w.vision_cfg,
                                            seed.derive(stream::kPixelNoise, t)));
    ScanMeasurements s;
    s.t = t;
    s.camera = {{90.0, 65.0}};  // decoy that must be discarded by the replay
    std::vector<double> rss;
    for (const auto& ap : model.access_points) rss.push_back(radio::expected_rss(ap, truth));
    s.radio[0] = rss;
    w.scans.push_back(s);
  }

  const ReplayResult a = replay_run(w, 0.02);
  const ReplayResult b = replay_run(w, 0.02);
  CHECK(a.cqs == b.cqs);
  REQUIRE(a.estimates.size() == b.estimates.size());
  for (const auto& [dev, series] : a.estimates) {
    REQUIRE(b.estimates.count(dev) == 1);
    REQUIRE(series.size() == b.estimates.at(dev).size());
    for (const auto& [t, p] : series) {
      REQUIRE(p == b.estimates.at(dev).at(t));
    }
  }
  // A track existed and never parked on the decoy coordinates.
  REQUIRE(a.estimates.count(0) == 1);
  CHECK(a.cqs > 0.0);
  const auto& series = a.estimates.at(0);
  REQUIRE(!series.empty());
  const Vector2d last = series.rbegin()->second;
  CHECK((last - Vector2d(90.0, 65.0)).norm() > 10.0);
  CHECK(std::abs(last.y() - 36.0) < 8.0);

  // A faster learning rate reabsorbs a pixel in fewer frames than the walker
  // needs to cross it, eroding the blob's trailing edge — the replay outcome
  // must genuinely depend on the rate.
  const ReplayResult c = replay_run(w, 0.05);
  CHECK(a.cqs != c.cqs);
}

TEST_CASE("learning-rate optimization walks the grid in order") {
  ReplayWindow w;  // no frames: every candidate scores zero
  w.px_to_world = geometry::make_homography(Eigen::Matrix3d::Identity());
  std::vector<std::pair<double, double>> scores;
  const double best = optimize_detector_learning_rate(w, {0.01, 0.02, 0.04}, &scores);
  CHECK(best == doctest::Approx(0.01));  // ties resolve to the earliest entry
  REQUIRE(scores.size() == 3);
  CHECK(scores[0].first == doctest::Approx(0.01));
  CHECK(scores[1].first == doctest::Approx(0.02));
  CHECK(scores[2].first == doctest::Approx(0.04));
  CHECK_THROWS_AS(optimize_detector_learning_rate(w, {}, nullptr), InvalidConfig);
}
