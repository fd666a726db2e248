#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "hardpatch/image.hpp"
#include "hardpatch/mask.hpp"
#include "hardpatch/png_io.hpp"
#include "hardpatch/rng.hpp"

using namespace hardpatch;

TEST_CASE("resize_bilinear keeps constant fields fixed") {
  Image img(2, 2, 1, 0.5f);
  Image out = resize_bilinear(img, 4, 4);
  REQUIRE(out.width == 4);
  REQUIRE(out.height == 4);
  for (float v : out.data) CHECK(v == doctest::Approx(0.5f).epsilon(1e-7));
}

TEST_CASE("resize_bilinear to identical dimensions is bitwise identity") {
  Rng rng(3);
  Image img(5, 7, 3);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  Image out = resize_bilinear(img, 5, 7);
  CHECK(out.data == img.data);
}

TEST_CASE("resize_bilinear matches the scalar interpolation formula") {
  // 1x2 image [0, 1] resized to 1x4, half-pixel-center convention:
  // source coordinate of output x is (x + 0.5) * (2/4) - 0.5.
  Image img(2, 1, 1);
  img.at(0, 0, 0) = 0.0f;
  img.at(1, 0, 0) = 1.0f;
  Image out = resize_bilinear(img, 4, 1);
  auto expected = [](int x) {
    double fx = (x + 0.5) * 0.5 - 0.5;
    double clamped = std::clamp(fx, 0.0, 1.0);
    return clamped;  // linear between the two samples
  };
  for (int x = 0; x < 4; ++x) {
    CHECK(out.at(x, 0, 0) == doctest::Approx(expected(x)).epsilon(1e-6));
  }
}

TEST_CASE("resize rejects zero dimensions") {
  Image img(2, 2, 1, 0.0f);
  CHECK_THROWS_AS(resize_bilinear(img, 0, 2), std::invalid_argument);
  Image broken;
  CHECK_THROWS_AS(resize_bilinear(broken, 2, 2), std::invalid_argument);
}

TEST_CASE("upsample_mask_nearest") {
  Grid object(2, 2, 1);
  SUBCASE("all-ones mask stays all ones at any scale") {
    Mask m = Mask::full(object);
    Mask up = upsample_mask_nearest(m, 244, 244);
    CHECK(up.size() == 244 * 244);
  }
  SUBCASE("single corner bit maps to the matching block") {
    Mask m = Mask::empty(object);
    m.bits.set(0, 0, 1);
    Mask up = upsample_mask_nearest(m, 4, 4);
    CHECK(up.size() == 4);
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) CHECK(up.bits.get(x, y) == 1);
    }
  }
  SUBCASE("identity dimensions") {
    Mask m = Mask::empty(object);
    m.bits.set(1, 0, 1);
    CHECK(upsample_mask_nearest(m, 2, 2) == m);
  }
  SUBCASE("downsampling is rejected") {
    Mask m = Mask::full(object);
    CHECK_THROWS_AS(upsample_mask_nearest(m, 1, 1), std::invalid_argument);
  }
}

TEST_CASE("apply_perturbation") {
  Grid object(4, 4, 1);
  Image x(4, 4, 3, 0.5f);

  SUBCASE("zero delta is pixel-exact identity") {
    Mask m = Mask::full(object);
    Perturbation d(4, 4, 3, 0.0f);
    Image out = apply_perturbation(x, m, d);
    CHECK(out.data == x.data);
  }
  SUBCASE("empty mask gates arbitrary deltas away") {
    Mask m = Mask::empty(object);
    Perturbation d(4, 4, 3, 123.0f);
    Image out = apply_perturbation(x, m, d);
    CHECK(out.data == x.data);
  }
  SUBCASE("clamp at the upper bound") {
    Mask m = Mask::full(object);
    Perturbation d(4, 4, 3, 1.0f);
    Image out = apply_perturbation(x, m, d);
    for (float v : out.data) CHECK(v == 1.0f);
  }
  SUBCASE("channel mismatch is rejected") {
    Mask m = Mask::full(object);
    Perturbation d(4, 4, 1, 0.0f);
    CHECK_THROWS_AS(apply_perturbation(x, m, d), std::invalid_argument);
  }
  SUBCASE("low-resolution masks gate exactly after upsampling") {
    Grid small(2, 2, 1);
    Mask m = Mask::empty(small);
    m.bits.set(0, 0, 1);
    Perturbation d(2, 2, 3, 0.25f);
    Image out = apply_perturbation(x, m, d);
    // The unmasked three quadrants are untouched, bit for bit.
    for (int y = 0; y < 4; ++y) {
      for (int xx = 0; xx < 4; ++xx) {
        if (xx < 2 && y < 2) continue;
        for (int c = 0; c < 3; ++c) CHECK(out.at(xx, y, c) == x.at(xx, y, c));
      }
    }
    CHECK(out.at(0, 0, 0) > 0.5f);
  }
}

TEST_CASE("build_patch_grid anchor enumeration") {
  SUBCASE("8x8 object, patch 4, stride 4: four disjoint patches") {
    Grid object(8, 8, 1);
    PatchGrid g = build_patch_grid(object, 4, 4);
    REQUIRE(g.patches.size() == 4);
    int total = 0;
    for (const auto& p : g.patches) total += static_cast<int>(p.pixels.size());
    CHECK(total == 64);
  }
  SUBCASE("8x8 object, patch 4, stride 2: nine overlapping patches") {
    Grid object(8, 8, 1);
    PatchGrid g = build_patch_grid(object, 4, 2);
    CHECK(g.patches.size() == 9);
  }
  SUBCASE("object clipped to the top-left quarter keeps one patch") {
    Grid object(8, 8, 0);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) object.set(x, y, 1);
    }
    PatchGrid g = build_patch_grid(object, 4, 4);
    CHECK(g.patches.size() == 1);
    CHECK(g.patches[0].pixels.size() == 16);
  }
  SUBCASE("empty object region is rejected") {
    Grid object(8, 8, 0);
    CHECK_THROWS_AS(build_patch_grid(object, 4, 4), std::invalid_argument);
  }
  SUBCASE("patch union covers the object when stride <= patch size") {
    Grid object(10, 6, 1);
    PatchGrid g = build_patch_grid(object, 4, 3);
    Grid covered(10, 6, 0);
    for (const auto& p : g.patches) {
      for (int idx : p.pixels) covered.v[idx] = 1;
    }
    CHECK(covered == object);
  }
}

TEST_CASE("mask_minus and mask_union set arithmetic") {
  Grid object(8, 8, 1);
  PatchGrid g = build_patch_grid(object, 4, 4);

  SUBCASE("minus then union over a disjoint partition rebuilds the object") {
    std::vector<const Patch*> all;
    for (const auto& p : g.patches) all.push_back(&p);
    Mask u = mask_union(all, object);
    CHECK(u.bits == object);
    Mask m = Mask::full(object);
    for (const auto& p : g.patches) m = mask_minus(m, p);
    CHECK(m.size() == 0);
  }
  SUBCASE("union of the empty list is the empty mask") {
    Mask u = mask_union({}, object);
    CHECK(u.size() == 0);
  }
  SUBCASE("overlapping patches count shared pixels once") {
    PatchGrid g2 = build_patch_grid(object, 4, 2);
    // Two horizontally adjacent anchors overlap in a 2x4 strip.
    const Patch& p1 = g2.patches[0];
    const Patch& p2 = g2.patches[1];
    Mask u = mask_union({&p1, &p2}, object);
    CHECK(p1.pixels.size() == 16);
    CHECK(p2.pixels.size() == 16);
    CHECK(u.size() == 24);
  }
  SUBCASE("minus clears overlap shared with retained patches") {
    PatchGrid g2 = build_patch_grid(object, 4, 2);
    Mask m = Mask::full(object);
    Mask after = mask_minus(m, g2.patches[0]);
    CHECK(after.size() == 64 - 16);
    for (int idx : g2.patches[0].pixels) CHECK(after.bits.v[idx] == 0);
  }
}

TEST_CASE("mask size accounting matches direct set computation") {
  Rng rng(11);
  Grid object(12, 12, 0);
  for (int i = 0; i < 144; ++i) object.v[i] = rng.uniform() < 0.8;
  if (object.empty_region()) object.set(0, 0, 1);
  PatchGrid g = build_patch_grid(object, 3, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<const Patch*> pick;
    std::vector<uint8_t> expected(object.v.size(), 0);
    for (const auto& p : g.patches) {
      if (rng.uniform() < 0.5) continue;
      pick.push_back(&p);
      for (int idx : p.pixels) expected[idx] = 1;
    }
    Mask u = mask_union(pick, object);
    int direct = 0;
    for (size_t i = 0; i < expected.size(); ++i) direct += (expected[i] && object.v[i]);
    CHECK(u.size() == direct);
  }
}

TEST_CASE("png round trip preserves 8-bit images and masks") {
  Rng rng(5);
  Image img(9, 7, 3);
  for (float& v : img.data) {
    v = static_cast<float>(static_cast<int>(rng.uniform() * 256) % 256) / 255.0f;
  }
  const std::string path = "/tmp/hardpatch_test_img.png";
  write_png(img, path);
  Image back = read_png(path);
  REQUIRE(back.same_shape(img));
  for (size_t i = 0; i < img.data.size(); ++i) {
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
  }

  Grid g(9, 7, 0);
  for (int i = 0; i < 63; ++i) g.v[i] = rng.uniform() < 0.5;
  const std::string mpath = "/tmp/hardpatch_test_mask.png";
  write_grid_png(g, mpath);
  Grid gb = read_grid_png(mpath);
  CHECK(gb == g);

  std::vector<uint8_t> mem = encode_png(img);
  Image dec = decode_png(mem.data(), mem.size());
  CHECK(dec.data == back.data);
}

TEST_CASE("base64 round trip") {
  std::vector<uint8_t> data;
  for (int i = 0; i < 99; ++i) data.push_back(static_cast<uint8_t>(i * 37));
  std::string text = base64_encode(data.data(), data.size());
  CHECK(base64_decode(text) == data);
  CHECK_THROWS_AS(base64_decode("invalid!payload"), std::invalid_argument);
}
