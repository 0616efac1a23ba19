#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <vector>

#include "sitetrack/errors.hpp"
#include "sitetrack/rng.hpp"
#include "sitetrack/vision.hpp"

using namespace sitetrack;
using namespace sitetrack::vision;

namespace {

double weight_sum(const PixelModel& m) {
  double s = 0.0;
  for (const auto& c : m.comps) s += c.weight;
  return s;
}

Frame flat_frame(int w, int h, float value) {
  Frame f;
  f.width = w;
  f.height = h;
  f.data.assign(static_cast<std::size_t>(w) * h, value);
  return f;
}

// Frames a static blob takes to be classified background, starting from a
// model converged on the flat background.
int absorption_frames(double alpha, const VisionConfig& cfg, int limit) {
  PixelModel m = make_initial_pixel_model(cfg);
  for (int i = 0; i < 3000; ++i) mog_update_pixel(m, cfg.background_level, 0.05, cfg);
  for (int i = 1; i <= limit; ++i) {
    if (mog_update_pixel(m, cfg.blob_intensity, alpha, cfg) == PixelClass::Background) return i;
  }
  return limit + 1;
}

// Independent 8-neighbour-free connected components: plain BFS over the mask
// with 4-connectivity, centroids in row-major discovery order.
std::vector<Detection2d> cc_oracle(const std::vector<std::uint8_t>& mask, int w, int h,
                                   int min_area) {
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<Detection2d> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (mask[idx] == 0 || seen[idx]) continue;
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      seen[idx] = 1;
      double sx = 0, sy = 0;
      int area = 0;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        sx += cx;
        sy += cy;
        ++area;
        const int dx[4] = {1, -1, 0, 0};
        const int dy[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int nx = cx + dx[d], ny = cy + dy[d];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
          if (mask[nidx] == 0 || seen[nidx]) continue;
          seen[nidx] = 1;
          q.push({nx, ny});
        }
      }
      if (area >= min_area) out.push_back({{sx / area, sy / area}, area});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("matched update moves weight by the learning rate") {
  // Two equal components; the sample lands on the first. With rate 0.0032 the
  // matched weight becomes 0.9968 * 0.5 + 0.0032 = 0.5016 and the other decays
  // to 0.4984.
  VisionConfig cfg;
  PixelModel m;
  m.comps = {{0.5, 60.0, 16.0}, {0.5, 180.0, 16.0}};
  const PixelClass c = mog_update_pixel(m, 60.0, 0.0032, cfg);
  CHECK(m.comps[0].weight == doctest::Approx(0.5016).epsilon(1e-12));
  CHECK(m.comps[1].weight == doctest::Approx(0.4984).epsilon(1e-12));
  CHECK(c == PixelClass::Background);
  CHECK(weight_sum(m) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("matched mean and variance blend toward the sample") {
  VisionConfig cfg;
  PixelModel m;
  m.comps = {{0.5, 60.0, 16.0}, {0.5, 180.0, 16.0}};
  const double alpha = 0.01;
  mog_update_pixel(m, 64.0, alpha, cfg);
  const double w_new = 0.99 * 0.5 + alpha;
  const double rho = alpha / w_new;
  const double mu = (1.0 - rho) * 60.0 + rho * 64.0;
  const double diff = 64.0 - mu;
  CHECK(m.comps[0].mean == doctest::Approx(mu).epsilon(1e-12));
  CHECK(m.comps[0].var ==
        doctest::Approx(std::max((1.0 - rho) * 16.0 + rho * diff * diff, cfg.sigma_min_sq)));
  // The unmatched component's shape parameters are untouched.
  CHECK(m.comps[1].mean == doctest::Approx(180.0));
  CHECK(m.comps[1].var == doctest::Approx(16.0));
}

TEST_CASE("match picks the nearest component in sigmas, not in intensity") {
  VisionConfig cfg;
  PixelModel m;
  // Component 0 is closer in raw intensity (|100-90|=10 vs 20) but 10/sqrt(4)=5
  // sigmas away; component 1 sits 20/sqrt(400)=1 sigma away.
  m.comps = {{0.5, 90.0, 4.0}, {0.5, 120.0, 400.0}};
  mog_update_pixel(m, 100.0, 0.5, cfg);
  CHECK(m.comps[1].weight > m.comps[0].weight);
  CHECK(m.comps[0].mean == doctest::Approx(90.0));  // untouched
}

TEST_CASE("no match replaces the lowest-weight component and renormalizes") {
  VisionConfig cfg;
  PixelModel m;
  m.comps = {{0.7, 50.0, 4.0}, {0.3, 200.0, 4.0}};
  const double alpha = 0.01;
  const PixelClass c = mog_update_pixel(m, 120.0, alpha, cfg);  // far from both
  CHECK(c == PixelClass::Foreground);
  CHECK(m.comps[1].mean == doctest::Approx(120.0));
  CHECK(m.comps[1].var == doctest::Approx(cfg.sigma_init_sq));
  CHECK(m.comps[1].weight == doctest::Approx(alpha / (0.7 + alpha)));
  CHECK(weight_sum(m) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("variance never shrinks below the floor") {
  VisionConfig cfg;
  PixelModel m;
  m.comps = {{1.0, 100.0, cfg.sigma_min_sq}};
  for (int i = 0; i < 500; ++i) mog_update_pixel(m, 100.0, 0.2, cfg);
  CHECK(m.comps[0].var == doctest::Approx(cfg.sigma_min_sq));
}

TEST_CASE("weight simplex survives long mixed-input runs") {
  VisionConfig cfg;
  PixelModel m = make_initial_pixel_model(cfg);
  Rng rng(99);
  for (int i = 0; i < 5000; ++i) {
    mog_update_pixel(m, rng.uniform(0.0, 255.0), 0.05, cfg);
    for (const auto& c : m.comps) CHECK(c.weight >= 0.0);
  }
  CHECK(weight_sum(m) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("background prefix is the smallest set crossing the mass threshold") {
  // Weights (0.5, 0.3, 0.2) at equal variance: cumulative 0.5, 0.8, 1.0 with a
  // 0.82 threshold makes all three background, so a sample matching the
  // third-ranked component still reads Background.
  VisionConfig cfg;
  cfg.background_mass = 0.82;
  PixelModel m;
  m.comps = {{0.5, 40.0, 4.0}, {0.3, 120.0, 4.0}, {0.2, 200.0, 4.0}};
  CHECK(mog_update_pixel(m, 200.0, 1e-9, cfg) == PixelClass::Background);

  // Dropping the threshold below the two-component prefix flips it.
  PixelModel m2;
  m2.comps = {{0.5, 40.0, 4.0}, {0.3, 120.0, 4.0}, {0.2, 200.0, 4.0}};
  cfg.background_mass = 0.79;
  CHECK(mog_update_pixel(m2, 200.0, 1e-9, cfg) == PixelClass::Foreground);
}

TEST_CASE("a fresh flat scene converges to background within 200 frames") {
  VisionConfig cfg;
  PixelModel m = make_initial_pixel_model(cfg);
  int first_background = -1;
  for (int i = 1; i <= 200; ++i) {
    if (mog_update_pixel(m, cfg.background_level, 0.05, cfg) == PixelClass::Background) {
      first_background = i;
      break;
    }
  }
  CHECK(first_background > 0);
  CHECK(first_background <= 200);
}

TEST_CASE("a static object is absorbed faster at higher learning rates") {
  VisionConfig cfg;
  const int a1 = absorption_frames(0.9, cfg, 2000);
  const int a2 = absorption_frames(0.1, cfg, 2000);
  const int a3 = absorption_frames(0.01, cfg, 2000);
  CHECK(a1 <= 4);  // near-instant takeover at rate 0.9
  CHECK(a1 < a2);
  CHECK(a2 < a3);
}

TEST_CASE("bright blob on a converged background is mostly foreground") {
  VisionConfig cfg;
  cfg.frame_width = 32;
  cfg.frame_height = 24;
  PixelGrid grid = make_pixel_grid(cfg);
  const Frame bg = flat_frame(32, 24, static_cast<float>(cfg.background_level));
  for (int i = 0; i < 400; ++i) classify_frame(grid, bg, 0.05, cfg);

  Frame f = bg;
  int blob = 0;
  for (int y = 10; y < 15; ++y) {
    for (int x = 8; x < 13; ++x) {
      f.data[static_cast<std::size_t>(y) * 32 + x] = static_cast<float>(cfg.blob_intensity);
      ++blob;
    }
  }
  const auto mask = classify_frame(grid, f, 0.005, cfg);
  int fg_in_blob = 0, fg_outside = 0;
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 32; ++x) {
      const bool in_blob = y >= 10 && y < 15 && x >= 8 && x < 13;
      if (mask[static_cast<std::size_t>(y) * 32 + x]) (in_blob ? fg_in_blob : fg_outside)++;
    }
  }
  CHECK(fg_in_blob >= (blob * 8) / 10);
  CHECK(fg_outside == 0);
}

TEST_CASE("warm start anchors the reference frame as background") {
  VisionConfig cfg;
  cfg.frame_width = 16;
  cfg.frame_height = 12;
  PixelGrid grid = make_pixel_grid(cfg);
  Frame ref = flat_frame(16, 12, 70.0f);
  ref.data[5] = 200.0f;  // an object present at start
  warm_start(grid, ref);

  // The very next identical frame is entirely background — including the
  // object pixel (the ghost: it stays background until it moves).
  const auto mask = classify_frame(grid, ref, 0.005, cfg);
  CHECK(std::accumulate(mask.begin(), mask.end(), 0) == 0);

  // A pixel that departs from its anchored value is foreground immediately.
  Frame moved = ref;
  moved.data[40] = 220.0f;
  const auto mask2 = classify_frame(grid, moved, 0.005, cfg);
  CHECK(mask2[40] == 1);

  PixelModel m = grid.model_at(0, 1);
  CHECK(weight_sum(m) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("warm start rejects a frame of the wrong shape") {
  VisionConfig cfg;
  PixelGrid grid = make_pixel_grid(cfg);
  Frame bad = flat_frame(8, 8, 60.0f);
  CHECK_THROWS_AS(warm_start(grid, bad), DimensionMismatch);
}

TEST_CASE("serial and parallel classification are bit-identical") {
  VisionConfig cfg;
  cfg.frame_width = 48;
  cfg.frame_height = 36;
  PixelGrid serial = make_pixel_grid(cfg);
  PixelGrid parallel = make_pixel_grid(cfg);
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    Frame f = flat_frame(48, 36, 0.0f);
    Rng frame_rng = rng.derive(1, i);
    for (auto& v : f.data) v = static_cast<float>(frame_rng.uniform(0.0, 255.0));
    const auto ms = classify_frame(serial, f, 0.02, cfg, Execution::Serial);
    const auto mp = classify_frame(parallel, f, 0.02, cfg, Execution::Parallel);
    REQUIRE(ms == mp);
  }
  REQUIRE(serial.weight == parallel.weight);
  REQUIRE(serial.mean == parallel.mean);
  REQUIRE(serial.var == parallel.var);
}

TEST_CASE("detections match a brute-force connected-components pass") {
  const int w = 40, h = 30;
  Rng rng(12345);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
    Rng trial_rng = rng.derive(2, trial);
    for (auto& v : mask) v = trial_rng.uniform(0.0, 1.0) < 0.35 ? 1 : 0;
    for (int min_area : {1, 3, 9}) {
      const auto got = extract_detections(mask, w, h, min_area);
      const auto want = cc_oracle(mask, w, h, min_area);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].area == want[i].area);
        CHECK(got[i].centroid_px.x() == doctest::Approx(want[i].centroid_px.x()).epsilon(1e-12));
        CHECK(got[i].centroid_px.y() == doctest::Approx(want[i].centroid_px.y()).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("a 3x3 block reports its center and area") {
  const int w = 64, h = 48;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  for (int y = 20; y <= 22; ++y) {
    for (int x = 10; x <= 12; ++x) mask[static_cast<std::size_t>(y) * w + x] = 1;
  }
  const auto dets = extract_detections(mask, w, h, 9);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].centroid_px.x() == doctest::Approx(11.0));
  CHECK(dets[0].centroid_px.y() == doctest::Approx(21.0));
  CHECK(dets[0].area == 9);
}

TEST_CASE("blobs below the area floor are dropped") {
  const int w = 16, h = 16;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  mask[0] = mask[1] = mask[2] = 1;  // 3-pixel strip
  CHECK(extract_detections(mask, w, h, 4).empty());
  CHECK(extract_detections(mask, w, h, 3).size() == 1);
}

TEST_CASE("diagonal pixels are separate components") {
  const int w = 8, h = 8;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  mask[0] = 1;                               // (0,0)
  mask[static_cast<std::size_t>(1) * w + 1] = 1;  // (1,1) touches only diagonally
  CHECK(extract_detections(mask, w, h, 1).size() == 2);
}

TEST_CASE("rendered frames are deterministic in the rng stream") {
  VisionConfig cfg;
  cfg.frame_width = 32;
  cfg.frame_height = 24;
  const std::vector<Eigen::Vector2d> objs = {{10.0, 12.0}, {25.0, 6.0}};
  const Frame a = render_frame(objs, 3, cfg, Rng(42).derive(8, 3));
  const Frame b = render_frame(objs, 3, cfg, Rng(42).derive(8, 3));
  REQUIRE(a.data == b.data);
  const Frame c = render_frame(objs, 4, cfg, Rng(42).derive(8, 4));
  CHECK(a.data != c.data);
}

TEST_CASE("rendered blob pixels are brighter than the surround") {
  VisionConfig cfg;
  cfg.frame_width = 32;
  cfg.frame_height = 24;
  cfg.noise_sigma = 0.0;
  const Frame f = render_frame({{16.0, 12.0}}, 0, cfg, Rng(1).derive(8, 0));
  CHECK(f.at(16, 12) == doctest::Approx(cfg.blob_intensity));
  CHECK(f.at(2, 2) == doctest::Approx(cfg.background_level));
}

TEST_CASE("illumination drift raises the whole frame per index") {
  VisionConfig cfg;
  cfg.frame_width = 8;
  cfg.frame_height = 8;
  cfg.noise_sigma = 0.0;
  cfg.illumination_drift = 0.25;
  const Frame f0 = render_frame({}, 0, cfg, Rng(1).derive(8, 0));
  const Frame f8 = render_frame({}, 8, cfg, Rng(1).derive(8, 8));
  CHECK(f8.at(3, 3) - f0.at(3, 3) == doctest::Approx(2.0));
}
