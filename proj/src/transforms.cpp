#include "hardpatch/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hardpatch/errors.hpp"
#include "json.hpp"

namespace hardpatch {

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
      r(i, j) = s;
    }
  }
  return r;
}

Mat3 Mat3::inverse() const {
  const auto& a = m;
  double det = a[0] * (a[4] * a[8] - a[5] * a[7]) -
               a[1] * (a[3] * a[8] - a[5] * a[6]) +
               a[2] * (a[3] * a[7] - a[4] * a[6]);
  if (std::abs(det) < 1e-14) {
    throw std::invalid_argument("homography: singular matrix");
  }
  Mat3 r;
  r.m = {(a[4] * a[8] - a[5] * a[7]) / det, (a[2] * a[7] - a[1] * a[8]) / det,
         (a[1] * a[5] - a[2] * a[4]) / det, (a[5] * a[6] - a[3] * a[8]) / det,
         (a[0] * a[8] - a[2] * a[6]) / det, (a[2] * a[3] - a[0] * a[5]) / det,
         (a[3] * a[7] - a[4] * a[6]) / det, (a[1] * a[6] - a[0] * a[7]) / det,
         (a[0] * a[4] - a[1] * a[3]) / det};
  return r;
}

void Mat3::apply(double x, double y, double& ox, double& oy) const {
  double w = m[6] * x + m[7] * y + m[8];
  ox = (m[0] * x + m[1] * y + m[2]) / w;
  oy = (m[3] * x + m[4] * y + m[5]) / w;
}

void TransformDistribution::validate() const {
  if (focal <= 0) throw std::invalid_argument("transforms: focal must be > 0");
  if (dist_min != focal) {
    throw std::invalid_argument("transforms: distance range must start at the focal length");
  }
  if (dist_max < dist_min) throw std::invalid_argument("transforms: empty distance range");
  if (rot_y_max_deg < 0 || rot_y_max_deg >= 90) {
    throw std::invalid_argument("transforms: rotation range must lie in [0, 90)");
  }
  if (gamma_max < 1) throw std::invalid_argument("transforms: gamma_max must be >= 1");
  if (crop_percent_max < 0 || crop_percent_max >= 0.5) {
    throw std::invalid_argument("transforms: crop fraction out of range");
  }
  if (blur_kernels.empty()) throw std::invalid_argument("transforms: no blur kernels");
  for (int k : blur_kernels) {
    if (k < 1 || k % 2 == 0) {
      throw std::invalid_argument("transforms: blur kernels must be odd and >= 1");
    }
  }
}

TransformDistribution TransformDistribution::gtsrb() { return TransformDistribution{}; }

TransformDistribution TransformDistribution::alpr() {
  TransformDistribution d;
  d.rot_y_max_deg = 15.0;
  d.focal = 10.0;
  d.dist_min = 10.0;
  d.dist_max = 15.0;
  d.blur_kernels = {1, 3, 5};
  return d;
}

TransformDistribution TransformDistribution::identity() {
  TransformDistribution d;
  d.rot_y_max_deg = 0.0;
  d.focal = 1.0;
  d.dist_min = 1.0;
  d.dist_max = 1.0;
  d.crop_percent_max = 0.0;
  d.gamma_max = 1.0;
  d.blur_kernels = {1};
  return d;
}

bool TransformParams::is_identity() const {
  return theta_deg == 0.0 && dist == focal && crop_scale == 0.0 &&
         crop_dx == 0.0 && crop_dy == 0.0 && gamma == 1.0 && kernel == 1;
}

TransformParams sample(const TransformDistribution& dist, Rng& rng) {
  dist.validate();
  TransformParams p;
  p.theta_deg = rng.uniform(-dist.rot_y_max_deg, dist.rot_y_max_deg);
  p.dist = rng.uniform(dist.dist_min, dist.dist_max);
  const double c = dist.crop_percent_max;
  p.crop_scale = rng.uniform(-c, c);
  p.crop_dx = rng.uniform(-c, c);
  p.crop_dy = rng.uniform(-c, c);
  // Fair coin between the lightening and darkening side, then uniform
  // within the chosen side.
  if (rng.coin()) {
    p.gamma = rng.uniform(1.0 / dist.gamma_max, 1.0);
  } else {
    p.gamma = rng.uniform(1.0, dist.gamma_max);
  }
  p.kernel = dist.blur_kernels[rng.uniform_int(static_cast<int>(dist.blur_kernels.size()))];
  p.background = dist.background;
  p.focal = dist.focal;
  return p;
}

Mat3 build_homography(double theta_deg, double dist, double focal,
                      int frame_w, int frame_h) {
  if (focal <= 0 || dist < focal) {
    throw std::invalid_argument("homography: need dist >= focal > 0");
  }
  if (std::abs(theta_deg) >= 90.0) {
    throw std::invalid_argument("homography: |theta| must be < 90 deg");
  }
  const double th = theta_deg * M_PI / 180.0;
  const double ct = std::cos(th);
  const double st = std::sin(th);

  // Normalized object plane: X = (px - cx)/s with s = frame_w/2, so the
  // object spans [-1, 1] horizontally. A point (X, Y, 0) rotated about the
  // vertical axis and pushed to distance `dist` projects through a pinhole
  // of focal length `focal`.
  const double s = frame_w / 2.0;
  const double cx = frame_w / 2.0;
  const double cy = frame_h / 2.0;

  Mat3 to_plane;   // pixel -> plane
  to_plane.m = {1.0 / s, 0, -cx / s, 0, 1.0 / s, -cy / s, 0, 0, 1};
  Mat3 project;    // plane -> projected plane (rotation, translation, pinhole)
  project.m = {focal * ct, 0, 0,
               0,          focal, 0,
               -st,        0, dist};
  Mat3 to_pixel;   // projected plane -> pixel
  to_pixel.m = {s, 0, cx, 0, s, cy, 0, 0, 1};

  return to_pixel * project * to_plane;
}

namespace {

struct Box {
  double x0, y0, x1, y1;
  double w() const { return x1 - x0; }
  double h() const { return y1 - y0; }
};

// Bounding box of the forward-mapped object corners, in frame pixels.
// A projective map sends the object rectangle to a quad, so the bbox of
// the corners is exact.
Box warped_bbox(const Mat3& H, int frame_w, int frame_h, const Grid& object) {
  int bx0 = object.width, by0 = object.height, bx1 = -1, by1 = -1;
  for (int y = 0; y < object.height; ++y) {
    for (int x = 0; x < object.width; ++x) {
      if (!object.get(x, y)) continue;
      bx0 = std::min(bx0, x);
      by0 = std::min(by0, y);
      bx1 = std::max(bx1, x);
      by1 = std::max(by1, y);
    }
  }
  if (bx1 < 0) throw std::invalid_argument("transforms: empty object region");
  const double sx = static_cast<double>(frame_w) / object.width;
  const double sy = static_cast<double>(frame_h) / object.height;
  const double cs[4][2] = {{bx0 * sx, by0 * sy},
                           {(bx1 + 1) * sx, by0 * sy},
                           {bx0 * sx, (by1 + 1) * sy},
                           {(bx1 + 1) * sx, (by1 + 1) * sy}};
  Box b{1e300, 1e300, -1e300, -1e300};
  for (auto& c : cs) {
    double w = H(2, 0) * c[0] + H(2, 1) * c[1] + H(2, 2);
    if (w <= 1e-12) {
      throw TransformDegenerate("transforms: object corner behind the camera");
    }
    double ox, oy;
    H.apply(c[0], c[1], ox, oy);
    b.x0 = std::min(b.x0, ox);
    b.y0 = std::min(b.y0, oy);
    b.x1 = std::max(b.x1, ox);
    b.y1 = std::max(b.y1, oy);
  }
  return b;
}

// Square crop window around the warped object, jittered and clipped to the
// frame. Degenerate when the object has left the frame.
Box crop_window(const TransformParams& p, const Box& bbox, int frame_w, int frame_h) {
  if (bbox.x1 <= 0 || bbox.y1 <= 0 || bbox.x0 >= frame_w || bbox.y0 >= frame_h) {
    throw TransformDegenerate("transforms: warped object fully out of frame");
  }
  double side = std::max(bbox.w(), bbox.h()) * (1.0 + p.crop_scale);
  side = std::min({side, static_cast<double>(frame_w), static_cast<double>(frame_h)});
  if (!(side >= 1.0)) {
    throw TransformDegenerate("transforms: degenerate crop window");
  }
  double mx = (bbox.x0 + bbox.x1) / 2.0 + p.crop_dx * side;
  double my = (bbox.y0 + bbox.y1) / 2.0 + p.crop_dy * side;
  double x0 = std::clamp(mx - side / 2.0, 0.0, frame_w - side);
  double y0 = std::clamp(my - side / 2.0, 0.0, frame_h - side);
  return Box{x0, y0, x0 + side, y0 + side};
}

float sample_bilinear(const Image& img, double px, double py, int c) {
  double fx = px - 0.5;
  double fy = py - 0.5;
  int x0 = static_cast<int>(std::floor(fx));
  int y0 = static_cast<int>(std::floor(fy));
  double wx = fx - x0;
  double wy = fy - y0;
  auto pix = [&](int xx, int yy) {
    xx = std::clamp(xx, 0, img.width - 1);
    yy = std::clamp(yy, 0, img.height - 1);
    return static_cast<double>(img.at(xx, yy, c));
  };
  double top = pix(x0, y0) * (1 - wx) + pix(x0 + 1, y0) * wx;
  double bot = pix(x0, y0 + 1) * (1 - wx) + pix(x0 + 1, y0 + 1) * wx;
  return static_cast<float>(top * (1 - wy) + bot * wy);
}

void gaussian_blur_inplace(Image& img, int kernel) {
  const int r = kernel / 2;
  const double sigma = kernel / 6.0;
  std::vector<double> w(kernel);
  double sum = 0;
  for (int i = 0; i < kernel; ++i) {
    double d = i - r;
    w[i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;

  Image tmp = img;
  // Horizontal pass, replicate padding.
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0;
        for (int i = 0; i < kernel; ++i) {
          int sx = std::clamp(x + i - r, 0, img.width - 1);
          acc += w[i] * img.at(sx, y, c);
        }
        tmp.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0;
        for (int i = 0; i < kernel; ++i) {
          int sy = std::clamp(y + i - r, 0, img.height - 1);
          acc += w[i] * tmp.at(x, sy, c);
        }
        img.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
}

}  // namespace

bool degenerate(const TransformParams& p, int frame_w, int frame_h,
                const Grid& object) {
  try {
    Mat3 H = build_homography(p.theta_deg, p.dist, p.focal, frame_w, frame_h);
    Box b = warped_bbox(H, frame_w, frame_h, object);
    crop_window(p, b, frame_w, frame_h);
    return false;
  } catch (const TransformDegenerate&) {
    return true;
  }
}

TransformParams sample_at(const TransformDistribution& dist, uint64_t seed,
                          uint64_t index, int frame_w, int frame_h,
                          const Grid& object) {
  Rng rng(Rng::derive(seed, index));
  for (int attempt = 0; attempt < 100; ++attempt) {
    TransformParams p = sample(dist, rng);
    p.seed = seed;
    p.index = index;
    if (!degenerate(p, frame_w, frame_h, object)) return p;
  }
  throw TransformDegenerate("transforms: no valid sample after 100 redraws");
}

Image apply(const TransformParams& p, const Image& x, const Grid& object) {
  if (object.empty_region()) {
    throw std::invalid_argument("transforms: empty object region");
  }
  Mat3 H = build_homography(p.theta_deg, p.dist, p.focal, x.width, x.height);
  Box bbox = warped_bbox(H, x.width, x.height, object);
  Box win = crop_window(p, bbox, x.width, x.height);
  Mat3 Hinv = H.inverse();

  // Perspective warp, crop and resize composed into one bilinear pass:
  // output pixel -> crop window point -> inverse-warped source point.
  Image out(x.width, x.height, x.channels);
  const double sx = win.w() / x.width;
  const double sy = win.h() / x.height;
  for (int oy = 0; oy < x.height; ++oy) {
    for (int ox = 0; ox < x.width; ++ox) {
      double wxp = win.x0 + (ox + 0.5) * sx;
      double wyp = win.y0 + (oy + 0.5) * sy;
      double spx, spy;
      Hinv.apply(wxp, wyp, spx, spy);
      if (spx < 0 || spx > x.width || spy < 0 || spy > x.height) {
        for (int c = 0; c < x.channels; ++c) out.at(ox, oy, c) = p.background;
      } else {
        for (int c = 0; c < x.channels; ++c) {
          out.at(ox, oy, c) = sample_bilinear(x, spx, spy, c);
        }
      }
    }
  }

  if (p.gamma != 1.0) {
    for (float& v : out.data) {
      v = static_cast<float>(std::pow(std::max(0.0, static_cast<double>(v)), p.gamma));
    }
  }
  if (p.kernel > 1) gaussian_blur_inplace(out, p.kernel);
  out.clamp01();
  return out;
}

std::string params_to_json(const TransformParams& p) {
  nlohmann::json j;
  j["theta"] = p.theta_deg;
  j["dist"] = p.dist;
  j["crop_scale"] = p.crop_scale;
  j["crop_dx"] = p.crop_dx;
  j["crop_dy"] = p.crop_dy;
  j["gamma"] = p.gamma;
  j["kernel"] = p.kernel;
  j["background"] = p.background;
  j["focal"] = p.focal;
  j["seed"] = p.seed;
  j["index"] = p.index;
  return j.dump();
}

TransformParams params_from_json(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  TransformParams p;
  p.theta_deg = j.at("theta").get<double>();
  p.dist = j.at("dist").get<double>();
  p.crop_scale = j.at("crop_scale").get<double>();
  p.crop_dx = j.at("crop_dx").get<double>();
  p.crop_dy = j.at("crop_dy").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.kernel = j.at("kernel").get<int>();
  p.background = j.at("background").get<float>();
  p.focal = j.at("focal").get<double>();
  p.seed = j.value("seed", uint64_t{0});
  p.index = j.value("index", uint64_t{0});
  return p;
}

void write_trace(const std::vector<TransformParams>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("trace: cannot open " + path);
  for (const auto& p : trace) out << params_to_json(p) << "\n";
}

std::vector<TransformParams> read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("trace: cannot open " + path);
  std::vector<TransformParams> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(params_from_json(line));
  }
  return out;
}

}  // namespace hardpatch
