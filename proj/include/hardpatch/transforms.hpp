#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hardpatch/image.hpp"
#include "hardpatch/mask.hpp"
#include "hardpatch/rng.hpp"

namespace hardpatch {

struct Mat3 {
  // Row-major 3x3.
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return m[r * 3 + c]; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }

  Mat3 operator*(const Mat3& o) const;
  Mat3 inverse() const;

  // Applies the homography to a point; divides by w.
  void apply(double x, double y, double& ox, double& oy) const;
};

// Ranges of the composite physical transform: perspective (rotation about
// the vertical axis + viewing distance through a pinhole), crop jitter
// around the object, gamma correction, and Gaussian blur.
struct TransformDistribution {
  double rot_y_max_deg = 50.0;
  double focal = 3.0;              // scene-distance units
  double dist_min = 3.0;           // lower bound; must equal focal
  double dist_max = 15.0;
  double crop_percent_max = 0.03125;
  double gamma_max = 3.5;          // >= 1
  std::vector<int> blur_kernels{1, 5, 9};  // odd sizes
  float background = 0.5f;         // out-of-frame fill

  void validate() const;

  static TransformDistribution gtsrb();
  static TransformDistribution alpr();
  // All stages pinned to identity.
  static TransformDistribution identity();
};

// One concrete sample of the composite transform, with rng provenance so a
// trace can be replayed exactly.
struct TransformParams {
  double theta_deg = 0.0;
  double dist = 0.0;
  double crop_scale = 0.0;   // in [-c, c]
  double crop_dx = 0.0;      // offsets as fractions of the crop side
  double crop_dy = 0.0;
  double gamma = 1.0;
  int kernel = 1;
  float background = 0.5f;
  double focal = 0.0;
  uint64_t seed = 0;         // provenance
  uint64_t index = 0;

  bool is_identity() const;
};

// Draws one parameter set; every field uniform in its range except gamma,
// where a fair coin picks the lightening [1/gmax, 1] or darkening
// [1, gmax] side first.
TransformParams sample(const TransformDistribution& dist, Rng& rng);

// Child-seed convention used everywhere transforms are enumerated: the
// i-th transform of a sequence uses Rng(Rng::derive(seed, i)). Redraws on
// degenerate geometry continue the same stream, up to 100 attempts.
TransformParams sample_at(const TransformDistribution& dist, uint64_t seed,
                          uint64_t index, int frame_w, int frame_h,
                          const Grid& object);

// Pixel-space homography for a fronto-parallel planar object rotated by
// theta about the vertical axis, viewed at distance dist through a pinhole
// with focal length f. theta=0, dist=f is the identity mapping.
Mat3 build_homography(double theta_deg, double dist, double focal,
                      int frame_w, int frame_h);

// Composite application in fixed stage order: perspective warp, square
// crop around the warped object (scaled by 1+crop_scale, offset, clipped
// to frame), resize back to the input resolution, gamma, Gaussian blur
// (sigma = kernel/6, replicate padding). The two geometric stages are
// composed into a single bilinear resample.
Image apply(const TransformParams& p, const Image& x, const Grid& object);

// True when the warped object's bounding square has left the frame; the
// sampler redraws such params.
bool degenerate(const TransformParams& p, int frame_w, int frame_h,
                const Grid& object);

// Line-delimited record export/import for exact replay.
std::string params_to_json(const TransformParams& p);
TransformParams params_from_json(const std::string& line);
void write_trace(const std::vector<TransformParams>& trace, const std::string& path);
std::vector<TransformParams> read_trace(const std::string& path);

}  // namespace hardpatch
