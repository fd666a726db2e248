#include "doctest.h"

#include <cmath>

#include "hardpatch/errors.hpp"
#include "hardpatch/rng.hpp"
#include "hardpatch/transforms.hpp"

using namespace hardpatch;

namespace {

Image checker(int side) {
  Image img(side, side, 3);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      float v = ((x / 4 + y / 4) % 2) ? 0.8f : 0.2f;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = v + 0.05f * c;
    }
  }
  return img;
}

TransformParams identity_params() {
  TransformParams p;
  p.theta_deg = 0;
  p.dist = 1.0;
  p.focal = 1.0;
  p.gamma = 1.0;
  p.kernel = 1;
  p.background = 0.5f;
  return p;
}

}  // namespace

TEST_CASE("sampling a degenerate distribution yields identity params") {
  TransformDistribution d = TransformDistribution::identity();
  Rng rng(42);
  TransformParams p = sample(d, rng);
  CHECK(p.is_identity());
  CHECK(p.theta_deg == 0.0);
  CHECK(p.dist == d.focal);
  CHECK(p.gamma == 1.0);
  CHECK(p.kernel == 1);
}

TEST_CASE("profile defaults") {
  TransformDistribution g = TransformDistribution::gtsrb();
  CHECK(g.rot_y_max_deg == 50.0);
  CHECK(g.focal == 3.0);
  CHECK(g.dist_max == 15.0);
  CHECK(g.crop_percent_max == doctest::Approx(0.03125));
  CHECK(g.gamma_max == 3.5);
  CHECK(g.blur_kernels == std::vector<int>{1, 5, 9});

  TransformDistribution a = TransformDistribution::alpr();
  CHECK(a.rot_y_max_deg == 15.0);
  CHECK(a.focal == 10.0);
  CHECK(a.blur_kernels == std::vector<int>{1, 3, 5});
}

TEST_CASE("gamma coin split: half the samples land at or below 1") {
  TransformDistribution d = TransformDistribution::gtsrb();
  Rng rng(1234);
  const int n = 100000;
  int low = 0;
  int out_of_range = 0;
  for (int i = 0; i < n; ++i) {
    TransformParams p = sample(d, rng);
    if (p.gamma <= 1.0) ++low;
    if (p.gamma < 1.0 / d.gamma_max - 1e-12 || p.gamma > d.gamma_max + 1e-12) {
      ++out_of_range;
    }
  }
  CHECK(out_of_range == 0);
  CHECK(std::abs(low / static_cast<double>(n) - 0.5) < 0.01);
}

TEST_CASE("sampled fields stay inside their ranges and replay from seed") {
  TransformDistribution d = TransformDistribution::gtsrb();
  Grid object(32, 32, 1);
  for (uint64_t i = 0; i < 200; ++i) {
    TransformParams p = sample_at(d, 99, i, 32, 32, object);
    CHECK(std::abs(p.theta_deg) <= d.rot_y_max_deg);
    CHECK(p.dist >= d.dist_min);
    CHECK(p.dist <= d.dist_max);
    CHECK(std::abs(p.crop_scale) <= d.crop_percent_max);
    CHECK(std::abs(p.crop_dx) <= d.crop_percent_max);
    CHECK(std::abs(p.crop_dy) <= d.crop_percent_max);
    TransformParams q = sample_at(d, 99, i, 32, 32, object);
    CHECK(params_to_json(p) == params_to_json(q));
  }
}

TEST_CASE("build_homography") {
  SUBCASE("theta=0, dist=focal is the identity map") {
    Mat3 h = build_homography(0.0, 3.0, 3.0, 32, 32);
    double ox, oy;
    h.apply(7.25, 21.5, ox, oy);
    CHECK(ox == doctest::Approx(7.25).epsilon(1e-12));
    CHECK(oy == doctest::Approx(21.5).epsilon(1e-12));
  }
  SUBCASE("theta=0, dist=2f scales by 1/2 about the principal point") {
    Mat3 h = build_homography(0.0, 6.0, 3.0, 32, 32);
    double ox, oy;
    h.apply(32.0, 32.0, ox, oy);  // corner -> halfway to the center
    CHECK(ox == doctest::Approx(24.0).epsilon(1e-9));
    CHECK(oy == doctest::Approx(24.0).epsilon(1e-9));
    h.apply(16.0, 16.0, ox, oy);  // principal point is fixed
    CHECK(ox == doctest::Approx(16.0).epsilon(1e-9));
    CHECK(oy == doctest::Approx(16.0).epsilon(1e-9));
  }
  SUBCASE("corners match an independent rotate-project computation") {
    // Oracle: map pixel -> plane, rotate the 3D point about the vertical
    // axis, translate to the viewing distance, project through the
    // pinhole, map back to pixels. No shared matrix code.
    const double theta = 30.0 * M_PI / 180.0;
    const double f = 3.0, dist = 3.0;
    const int W = 32, H = 32;
    auto oracle = [&](double px, double py, double& ox, double& oy) {
      double X = (px - W / 2.0) / (W / 2.0);
      double Y = (py - H / 2.0) / (W / 2.0);
      double x3 = X * std::cos(theta), y3 = Y, z3 = dist - X * std::sin(theta);
      double u = f * x3 / z3, v = f * y3 / z3;
      ox = u * (W / 2.0) + W / 2.0;
      oy = v * (W / 2.0) + H / 2.0;
    };
    Mat3 h = build_homography(30.0, dist, f, W, H);
    const double corners[4][2] = {{0, 0}, {32, 0}, {0, 32}, {32, 32}};
    for (auto& c : corners) {
      double ex, ey, ax, ay;
      oracle(c[0], c[1], ex, ey);
      h.apply(c[0], c[1], ax, ay);
      CHECK(ax == doctest::Approx(ex).epsilon(1e-9));
      CHECK(ay == doctest::Approx(ey).epsilon(1e-9));
    }
  }
  SUBCASE("invalid configurations are rejected") {
    CHECK_THROWS_AS(build_homography(90.0, 3.0, 3.0, 32, 32), std::invalid_argument);
    CHECK_THROWS_AS(build_homography(0.0, 2.0, 3.0, 32, 32), std::invalid_argument);
    CHECK_THROWS_AS(build_homography(0.0, 3.0, 0.0, 32, 32), std::invalid_argument);
  }
}

TEST_CASE("apply: identity params reproduce the input within 1e-6") {
  Image img = checker(32);
  Grid object(32, 32, 1);
  Image out = apply(identity_params(), img, object);
  REQUIRE(out.same_shape(img));
  for (size_t i = 0; i < img.data.size(); ++i) {
    CHECK(std::abs(out.data[i] - img.data[i]) <= 1e-6f);
  }
}

TEST_CASE("apply: each stage is individually identity at its neutral value") {
  Image img = checker(32);
  Grid object(32, 32, 1);

  SUBCASE("gamma only") {
    TransformParams p = identity_params();
    p.gamma = 1.0;
    p.kernel = 1;
    Image out = apply(p, img, object);
    for (size_t i = 0; i < img.data.size(); ++i) {
      CHECK(std::abs(out.data[i] - img.data[i]) <= 1e-6f);
    }
  }
  SUBCASE("gamma squares a constant field") {
    Image c(8, 8, 1, 0.25f);
    TransformParams p = identity_params();
    p.gamma = 2.0;
    Image out = apply(p, c, Grid(8, 8, 1));
    for (float v : out.data) CHECK(v == doctest::Approx(0.0625).epsilon(1e-6));
  }
  SUBCASE("constant field under arbitrary params maps to constant^gamma") {
    TransformDistribution d = TransformDistribution::gtsrb();
    d.background = 0.3f;  // fill equals the constant, so warp preserves it
    Grid object8(8, 8, 1);
    Image c(8, 8, 3, 0.3f);
    for (uint64_t i = 0; i < 25; ++i) {
      TransformParams p = sample_at(d, 7, i, 8, 8, object8);
      Image out = apply(p, c, object8);
      const float expect = static_cast<float>(std::pow(0.3, p.gamma));
      for (float v : out.data) CHECK(v == doctest::Approx(expect).epsilon(1e-4));
    }
  }
}

TEST_CASE("gamma stage preserves pointwise image order") {
  Rng rng(8);
  Image a(8, 8, 1), b(8, 8, 1);
  for (size_t i = 0; i < a.data.size(); ++i) {
    a.data[i] = static_cast<float>(rng.uniform());
    b.data[i] = std::min(1.0f, a.data[i] + static_cast<float>(rng.uniform() * 0.3));
  }
  TransformParams p = identity_params();
  p.gamma = 2.7;
  Grid object(8, 8, 1);
  Image ta = apply(p, a, object);
  Image tb = apply(p, b, object);
  for (size_t i = 0; i < ta.data.size(); ++i) CHECK(ta.data[i] <= tb.data[i] + 1e-7f);
}

TEST_CASE("determinism: same seed, same params, same output image") {
  TransformDistribution d = TransformDistribution::gtsrb();
  Grid object(16, 16, 1);
  Image img = checker(16);
  for (uint64_t i = 0; i < 10; ++i) {
    TransformParams p1 = sample_at(d, 5, i, 16, 16, object);
    TransformParams p2 = sample_at(d, 5, i, 16, 16, object);
    Image o1 = apply(p1, img, object);
    Image o2 = apply(p2, img, object);
    CHECK(o1.data == o2.data);
  }
}

TEST_CASE("warped object bbox matches a materialized warp within a pixel") {
  // Bright object on a dark frame: warp the image alone (no crop) and
  // compare the lit bounding box against the forward-mapped corners.
  const int W = 48, H = 48;
  Image img(W, H, 1, 0.0f);
  Grid object(W, H, 0);
  for (int y = 12; y < 36; ++y) {
    for (int x = 8; x < 40; ++x) {
      img.at(x, y, 0) = 1.0f;
      object.set(x, y, 1);
    }
  }
  const double theta = 35.0, dist = 4.5, f = 3.0;
  Mat3 h = build_homography(theta, dist, f, W, H);
  Mat3 hinv = h.inverse();

  // Materialize the pure warp by inverse sampling.
  double lit_x0 = W, lit_x1 = -1, lit_y0 = H, lit_y1 = -1;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double sx, sy;
      hinv.apply(x + 0.5, y + 0.5, sx, sy);
      int ix = static_cast<int>(std::floor(sx));
      int iy = static_cast<int>(std::floor(sy));
      if (ix < 0 || ix >= W || iy < 0 || iy >= H) continue;
      if (img.at(ix, iy, 0) > 0.5f) {
        lit_x0 = std::min(lit_x0, static_cast<double>(x));
        lit_x1 = std::max(lit_x1, static_cast<double>(x));
        lit_y0 = std::min(lit_y0, static_cast<double>(y));
        lit_y1 = std::max(lit_y1, static_cast<double>(y));
      }
    }
  }

  // Forward-map the object's bbox corners.
  double fx0 = 1e9, fx1 = -1e9, fy0 = 1e9, fy1 = -1e9;
  const double corners[4][2] = {{8, 12}, {40, 12}, {8, 36}, {40, 36}};
  for (auto& c : corners) {
    double ox, oy;
    h.apply(c[0], c[1], ox, oy);
    fx0 = std::min(fx0, ox);
    fx1 = std::max(fx1, ox);
    fy0 = std::min(fy0, oy);
    fy1 = std::max(fy1, oy);
  }
  CHECK(std::abs(lit_x0 - fx0) <= 1.0);
  CHECK(std::abs(lit_x1 + 1 - fx1) <= 1.0);
  CHECK(std::abs(lit_y0 - fy0) <= 1.0);
  CHECK(std::abs(lit_y1 + 1 - fy1) <= 1.0);
}

TEST_CASE("degenerate geometry raises and the sampler redraws") {
  // A thin strip at the right edge swings far out of frame at a strong
  // forward rotation and close distance.
  const int W = 64, H = 64;
  Grid object(W, H, 0);
  for (int y = 28; y < 36; ++y) {
    for (int x = 62; x < 64; ++x) object.set(x, y, 1);
  }
  TransformParams p = identity_params();
  p.theta_deg = 80.0;
  p.dist = 1.0;
  p.focal = 1.0;
  CHECK(degenerate(p, W, H, object));
  Image img(W, H, 1, 0.2f);
  CHECK_THROWS_AS(apply(p, img, object), TransformDegenerate);

  // Identity params on the same object are fine.
  CHECK_FALSE(degenerate(identity_params(), W, H, object));
}

TEST_CASE("trace export/import round-trips exactly") {
  TransformDistribution d = TransformDistribution::gtsrb();
  Grid object(16, 16, 1);
  std::vector<TransformParams> trace;
  for (uint64_t i = 0; i < 32; ++i) {
    trace.push_back(sample_at(d, 77, i, 16, 16, object));
  }
  const std::string path = "/tmp/hardpatch_trace_test.ndjson";
  write_trace(trace, path);
  std::vector<TransformParams> back = read_trace(path);
  REQUIRE(back.size() == trace.size());
  Image img = checker(16);
  for (size_t i = 0; i < trace.size(); ++i) {
    CHECK(params_to_json(back[i]) == params_to_json(trace[i]));
    // Replay produces identical images.
    CHECK(apply(back[i], img, object).data == apply(trace[i], img, object).data);
  }
}
