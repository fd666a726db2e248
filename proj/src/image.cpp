#include "hardpatch/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hardpatch {

Image::Image(int w, int h, int c, float fill)
    : width(w), height(h), channels(c),
      data(static_cast<size_t>(w) * h * c, fill) {
  if (w < 1 || h < 1 || (c != 1 && c != 3)) {
    throw std::invalid_argument("image: dimensions must be positive, channels 1 or 3");
  }
}

void Image::clamp01() {
  for (float& v : data) v = std::clamp(v, 0.0f, 1.0f);
}

bool Image::finite() const {
  for (float v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Perturbation::Perturbation(int w, int h, int c, float fill)
    : width(w), height(h), channels(c),
      delta(static_cast<size_t>(w) * h * c, fill) {}

double Perturbation::l2_norm() const {
  double s = 0;
  for (float v : delta) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

std::vector<float> resample_bilinear_raw(const std::vector<float>& src,
                                         int w, int h, int c,
                                         int new_w, int new_h) {
  if (w < 1 || h < 1 || new_w < 1 || new_h < 1) {
    throw std::invalid_argument("bilinear resample: zero-dimension input");
  }
  if (new_w == w && new_h == h) return src;
  std::vector<float> out(static_cast<size_t>(new_w) * new_h * c);
  const double sx = static_cast<double>(w) / new_w;
  const double sy = static_cast<double>(h) / new_h;
  for (int y = 0; y < new_h; ++y) {
    // Half-pixel centers; samples clamp at the border.
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, h - 1);
    int y1c = std::clamp(y0 + 1, 0, h - 1);
    for (int x = 0; x < new_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, w - 1);
      int x1c = std::clamp(x0 + 1, 0, w - 1);
      for (int ch = 0; ch < c; ++ch) {
        auto px = [&](int xx, int yy) {
          return static_cast<double>(
              src[(static_cast<size_t>(yy) * w + xx) * c + ch]);
        };
        double top = px(x0c, y0c) * (1 - wx) + px(x1c, y0c) * wx;
        double bot = px(x0c, y1c) * (1 - wx) + px(x1c, y1c) * wx;
        out[(static_cast<size_t>(y) * new_w + x) * c + ch] =
            static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Image resize_bilinear(const Image& img, int new_w, int new_h) {
  if (img.width < 1 || img.height < 1) {
    throw std::invalid_argument("resize: zero-dimension input");
  }
  if (new_w < 1 || new_h < 1) {
    throw std::invalid_argument("resize: target dimensions must be >= 1");
  }
  Image out;
  out.width = new_w;
  out.height = new_h;
  out.channels = img.channels;
  out.data = resample_bilinear_raw(img.data, img.width, img.height,
                                   img.channels, new_w, new_h);
  out.clamp01();
  return out;
}

Image apply_perturbation(const Image& x, const Mask& m, const Perturbation& d) {
  if (d.channels != x.channels) {
    throw std::invalid_argument("apply_perturbation: channel mismatch");
  }
  if (m.width() != d.width || m.height() != d.height) {
    throw std::invalid_argument("apply_perturbation: mask and perturbation grids differ");
  }
  const Grid bits = upsample_grid_nearest(m.bits, x.width, x.height);
  std::vector<float> delta = resample_bilinear_raw(
      d.delta, d.width, d.height, d.channels, x.width, x.height);

  Image out = x;
  for (int y = 0; y < x.height; ++y) {
    for (int xx = 0; xx < x.width; ++xx) {
      if (!bits.get(xx, y)) continue;  // gated: untouched pixels stay exact
      for (int c = 0; c < x.channels; ++c) {
        float& v = out.at(xx, y, c);
        v = std::clamp(
            v + delta[(static_cast<size_t>(y) * x.width + xx) * x.channels + c],
            0.0f, 1.0f);
      }
    }
  }
  return out;
}

Perturbation target_delta(const Image& x, const Image& x_tar, int pw, int ph) {
  if (!x.same_shape(x_tar)) {
    throw std::invalid_argument("target_delta: victim and target shapes differ");
  }
  Image xl = resize_bilinear(x, pw, ph);
  Image tl = resize_bilinear(x_tar, pw, ph);
  Perturbation d(pw, ph, x.channels);
  for (size_t i = 0; i < d.delta.size(); ++i) {
    d.delta[i] = tl.data[i] - xl.data[i];
  }
  return d;
}

}  // namespace hardpatch
