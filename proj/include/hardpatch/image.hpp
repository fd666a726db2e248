#pragma once

#include <cstddef>
#include <vector>

#include "hardpatch/mask.hpp"

namespace hardpatch {

// Row-major H x W x C raster of intensities in [0, 1]. Every public
// operation clamps its output back into range. Values are immutable by
// convention once an image is handed to another component.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f);

  float& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  size_t pixel_count() const {
    return static_cast<size_t>(width) * height;
  }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  void clamp01();
  bool finite() const;
};

// Signed offsets on the perturbation plane; pairs with a Mask of the same
// grid and contributes nothing outside it.
struct Perturbation {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> delta;

  Perturbation() = default;
  Perturbation(int w, int h, int c, float fill = 0.0f);

  float& at(int x, int y, int c) {
    return delta[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c) const {
    return delta[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  double l2_norm() const;
};

// Bilinear resample with half-pixel centers (align-corners-false); the one
// corner convention used across the project. Output clamped to [0, 1].
Image resize_bilinear(const Image& img, int new_w, int new_h);

// Unclamped bilinear resample of raw planes; used for perturbations, which
// may be negative.
std::vector<float> resample_bilinear_raw(const std::vector<float>& src,
                                         int w, int h, int c,
                                         int new_w, int new_h);

// out = clamp(x + up(m) * up(d), 0, 1). m and d share a grid and are
// upsampled to x's resolution (nearest for the mask, bilinear for the
// perturbation). Pixels where the upsampled mask is 0 equal x exactly.
Image apply_perturbation(const Image& x, const Mask& m, const Perturbation& d);

// delta_tar = x_tar - x, downsampled onto the perturbation plane.
Perturbation target_delta(const Image& x, const Image& x_tar, int pw, int ph);

}  // namespace hardpatch
