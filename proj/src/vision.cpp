#include "sitetrack/vision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sitetrack/errors.hpp"

namespace sitetrack::vision {

namespace {

// Core recursion on raw component arrays so the flat grid and the struct API
// share one implementation.
PixelClass update_components(double* w, double* mu, double* var, int k, double value, double alpha,
                             const VisionConfig& cfg) {
  // Match: nearest component (in sigmas) within the match window.
  int matched = -1;
  double best_dist = cfg.match_sigma;
  for (int i = 0; i < k; ++i) {
    const double d = std::abs(value - mu[i]) / std::sqrt(var[i]);
    if (d < best_dist) {
      best_dist = d;
      matched = i;
    }
  }

  if (matched >= 0) {
    for (int i = 0; i < k; ++i) w[i] *= (1.0 - alpha);
    w[matched] += alpha;  // simplex preserved: sum scales by (1-a) then gains a
    const double rho = alpha / w[matched];
    mu[matched] = (1.0 - rho) * mu[matched] + rho * value;
    const double diff = value - mu[matched];
    var[matched] = std::max((1.0 - rho) * var[matched] + rho * diff * diff, cfg.sigma_min_sq);
  } else {
    int lowest = 0;
    for (int i = 1; i < k; ++i) {
      if (w[i] < w[lowest]) lowest = i;
    }
    w[lowest] = alpha;
    mu[lowest] = value;
    var[lowest] = cfg.sigma_init_sq;
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += w[i];
    for (int i = 0; i < k; ++i) w[i] /= sum;
  }

  // Background set: components sorted by weight/sigma descending; the first B*
  // of them (smallest prefix whose cumulative weight exceeds the threshold)
  // model the background.
  int order[16];
  for (int i = 0; i < k; ++i) order[i] = i;
  auto score = [&](int i) { return w[i] / std::sqrt(var[i]); };
  for (int i = 1; i < k; ++i) {  // stable insertion sort; ties keep index order
    const int key = order[i];
    int j = i - 1;
    while (j >= 0 && score(order[j]) < score(key)) {
      order[j + 1] = order[j];
      --j;
    }
    order[j + 1] = key;
  }
  int b_star = k;
  double cum = 0.0;
  for (int i = 0; i < k; ++i) {
    cum += w[order[i]];
    if (cum > cfg.background_mass) {
      b_star = i + 1;
      break;
    }
  }

  if (matched < 0) return PixelClass::Foreground;
  for (int i = 0; i < b_star; ++i) {
    if (order[i] == matched) return PixelClass::Background;
  }
  return PixelClass::Foreground;
}

void classify_rows(PixelGrid& grid, const Frame& frame, double alpha, const VisionConfig& cfg,
                   std::uint8_t* mask, int row_begin, int row_end) {
  const int k = grid.k;
  for (int y = row_begin; y < row_end; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t px = static_cast<std::size_t>(y) * grid.width + x;
      const std::size_t base = px * k;
      const PixelClass c =
          update_components(grid.weight.data() + base, grid.mean.data() + base,
                            grid.var.data() + base, k, frame.data[px], alpha, cfg);
      mask[px] = static_cast<std::uint8_t>(c);
    }
  }
}

}  // namespace

PixelModel PixelGrid::model_at(int x, int y) const {
  PixelModel m;
  const std::size_t base = (static_cast<std::size_t>(y) * width + x) * k;
  for (int i = 0; i < k; ++i) {
    m.comps.push_back({weight[base + i], mean[base + i], var[base + i]});
  }
  return m;
}

PixelModel make_initial_pixel_model(const VisionConfig& cfg) {
  if (cfg.components < 1 || cfg.components > 16) {
    throw InvalidConfig("mixture component count out of range");
  }
  PixelModel m;
  // Spread the initial means over the intensity range so any stable input
  // finds a component to adapt within a few frames.
  for (int i = 0; i < cfg.components; ++i) {
    const double mean = 255.0 * (i + 0.5) / cfg.components;
    m.comps.push_back({1.0 / cfg.components, mean, cfg.sigma_init_sq});
  }
  return m;
}

PixelGrid make_pixel_grid(const VisionConfig& cfg) {
  const PixelModel proto = make_initial_pixel_model(cfg);
  PixelGrid g;
  g.width = cfg.frame_width;
  g.height = cfg.frame_height;
  g.k = cfg.components;
  const std::size_t n = static_cast<std::size_t>(g.width) * g.height * g.k;
  g.weight.resize(n);
  g.mean.resize(n);
  g.var.resize(n);
  for (std::size_t px = 0; px < static_cast<std::size_t>(g.width) * g.height; ++px) {
    for (int i = 0; i < g.k; ++i) {
      g.weight[px * g.k + i] = proto.comps[i].weight;
      g.mean[px * g.k + i] = proto.comps[i].mean;
      g.var[px * g.k + i] = proto.comps[i].var;
    }
  }
  return g;
}

void warm_start(PixelGrid& grid, const Frame& frame) {
  if (frame.width != grid.width || frame.height != grid.height) {
    throw DimensionMismatch("frame dimensions do not match pixel grid");
  }
  const int k = grid.k;
  const double spare = k > 1 ? 1e-3 : 0.0;
  for (std::size_t px = 0; px < static_cast<std::size_t>(grid.width) * grid.height; ++px) {
    const std::size_t base = px * k;
    grid.weight[base] = 1.0 - spare * (k - 1);
    grid.mean[base] = frame.data[px];
    for (int i = 1; i < k; ++i) {
      grid.weight[base + i] = spare;
      grid.mean[base + i] = 255.0 * (i + 0.5) / k;
    }
    // variances keep their current values (sigma_init on a fresh grid)
  }
}

PixelClass mog_update_pixel(PixelModel& model, double value, double alpha, const VisionConfig& cfg) {
  const int k = static_cast<int>(model.comps.size());
  if (k == 0 || k > 16) throw InvalidConfig("pixel model component count out of range");
  std::vector<double> w(k), mu(k), var(k);
  for (int i = 0; i < k; ++i) {
    w[i] = model.comps[i].weight;
    mu[i] = model.comps[i].mean;
    var[i] = model.comps[i].var;
  }
  const PixelClass c = update_components(w.data(), mu.data(), var.data(), k, value, alpha, cfg);
  for (int i = 0; i < k; ++i) model.comps[i] = {w[i], mu[i], var[i]};
  return c;
}

std::vector<std::uint8_t> classify_frame(PixelGrid& grid, const Frame& frame, double alpha,
                                         const VisionConfig& cfg, Execution exec) {
  if (frame.width != grid.width || frame.height != grid.height) {
    throw DimensionMismatch("frame dimensions do not match pixel grid");
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(grid.width) * grid.height, 0);
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < grid.height; ++y) {
      classify_rows(grid, frame, alpha, cfg, mask.data(), y, y + 1);
    }
  } else {
    classify_rows(grid, frame, alpha, cfg, mask.data(), 0, grid.height);
  }
  return mask;
}

std::vector<Detection2d> extract_detections(const std::vector<std::uint8_t>& mask, int width,
                                            int height, int min_area) {
  if (static_cast<std::size_t>(width) * height != mask.size()) {
    throw DimensionMismatch("mask size does not match dimensions");
  }
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<Detection2d> out;
  std::vector<int> stack;
  for (int y0 = 0; y0 < height; ++y0) {
    for (int x0 = 0; x0 < width; ++x0) {
      const int start = y0 * width + x0;
      if (!mask[start] || seen[start]) continue;
      stack.clear();
      stack.push_back(start);
      seen[start] = 1;
      long sum_x = 0, sum_y = 0;
      int area = 0;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int x = p % width;
        const int y = p / width;
        sum_x += x;
        sum_y += y;
        ++area;
        const int nb[4] = {p - width, p + width, p - 1, p + 1};
        const bool ok[4] = {y > 0, y + 1 < height, x > 0, x + 1 < width};
        for (int i = 0; i < 4; ++i) {
          if (ok[i] && mask[nb[i]] && !seen[nb[i]]) {
            seen[nb[i]] = 1;
            stack.push_back(nb[i]);
          }
        }
      }
      if (area >= min_area) {
        out.push_back({{static_cast<double>(sum_x) / area, static_cast<double>(sum_y) / area},
                       area});
      }
    }
  }
  return out;
}

Frame render_frame(const std::vector<Eigen::Vector2d>& visible_px, int frame_index,
                   const VisionConfig& cfg, Rng rng) {
  Frame f;
  f.width = cfg.frame_width;
  f.height = cfg.frame_height;
  f.data.resize(static_cast<std::size_t>(f.width) * f.height);
  const double base = cfg.background_level + cfg.illumination_drift * frame_index;
  const double r2 = cfg.blob_radius_px * cfg.blob_radius_px;
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      double v = base;
      for (const auto& c : visible_px) {
        const double dx = x - c.x();
        const double dy = y - c.y();
        if (dx * dx + dy * dy <= r2) {
          v = cfg.blob_intensity + cfg.illumination_drift * frame_index;
          break;
        }
      }
      v += cfg.noise_sigma * rng.gaussian();
      f.data[static_cast<std::size_t>(y) * f.width + x] =
          static_cast<float>(std::clamp(v, 0.0, 255.0));
    }
  }
  return f;
}

void dump_mask_pgm(const std::vector<std::uint8_t>& mask, int width, int height,
                   const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  for (const std::uint8_t m : mask) {
    out.put(m ? static_cast<char>(255) : static_cast<char>(0));
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace sitetrack::vision
