#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sitetrack/rng.hpp"

namespace sitetrack::vision {

struct VisionConfig {
  int components = 5;
  double background_mass = 0.82;  // cumulative weight that counts as background
  double sigma_init_sq = 225.0;
  double sigma_min_sq = 4.0;
  double match_sigma = 2.5;  // match window in standard deviations
  int min_area = 9;          // pixels; smaller blobs are noise
  int frame_width = 96;
  int frame_height = 72;
  double background_level = 60.0;
  double blob_radius_px = 2.5;
  double blob_intensity = 170.0;
  double noise_sigma = 2.0;
  double illumination_drift = 0.0;  // intensity added per frame index
};

struct GaussComponent {
  double weight = 0.0;
  double mean = 0.0;
  double var = 1.0;
};

struct PixelModel {
  std::vector<GaussComponent> comps;
};

enum class PixelClass : std::uint8_t { Background = 0, Foreground = 1 };

// Per-pixel mixture bank stored flat (component-major per pixel) so the frame
// kernel touches contiguous memory.
struct PixelGrid {
  int width = 0;
  int height = 0;
  int k = 0;
  std::vector<double> weight;
  std::vector<double> mean;
  std::vector<double> var;

  PixelModel model_at(int x, int y) const;
};

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // row-major intensities

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

struct Detection2d {
  Eigen::Vector2d centroid_px;  // (x, y) in pixel coordinates
  int area = 0;
};

PixelModel make_initial_pixel_model(const VisionConfig& cfg);
PixelGrid make_pixel_grid(const VisionConfig& cfg);

// Re-anchors every pixel on a reference frame: the first component takes the
// observed value and nearly all weight, the spares keep spread means at low
// weight. Objects present in the reference become background until they move
// (the usual ghost artifact).
void warm_start(PixelGrid& grid, const Frame& frame);

// One adaptation step for a single pixel. Returns the pixel's classification
// against the post-update model. The weight simplex is preserved exactly on a
// match and restored by renormalization on a replacement.
PixelClass mog_update_pixel(PixelModel& model, double value, double alpha, const VisionConfig& cfg);

enum class Execution { Serial, Parallel };

// Adapts every pixel model with the new frame and returns the foreground mask
// (row-major, 1 = foreground). Parallel execution partitions rows across
// threads; pixels are independent so both modes are bit-identical.
std::vector<std::uint8_t> classify_frame(PixelGrid& grid, const Frame& frame, double alpha,
                                         const VisionConfig& cfg,
                                         Execution exec = Execution::Serial);

// 4-connected components of at least cfg.min_area pixels, reported as centroids
// in discovery (row-major) order.
std::vector<Detection2d> extract_detections(const std::vector<std::uint8_t>& mask, int width,
                                            int height, int min_area);

// Renders one synthetic frame: flat background plus an optional per-frame
// illumination offset, one disk per visible object, then pixel noise.
Frame render_frame(const std::vector<Eigen::Vector2d>& visible_px, int frame_index,
                   const VisionConfig& cfg, Rng rng);

void dump_mask_pgm(const std::vector<std::uint8_t>& mask, int width, int height,
                   const std::string& path);

}  // namespace sitetrack::vision
