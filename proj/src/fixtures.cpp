#include "hardpatch/fixtures.hpp"

#include "hardpatch/rng.hpp"

namespace hardpatch {

namespace {

constexpr int kSide = 32;
constexpr float kBackground = 0.45f;
constexpr float kGlyph = 0.95f;

Image glyph_image(int x0, int y0, int x1, int y1) {
  Image img(kSide, kSide, 3, kBackground);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = kGlyph;
    }
  }
  return img;
}

}  // namespace

DeskFixture make_desk_fixture(uint64_t noise_seed) {
  DeskFixture f;
  f.prototypes.emplace_back(0, glyph_image(4, 12, 12, 20));    // left block
  f.prototypes.emplace_back(1, glyph_image(12, 4, 20, 12));    // top block
  f.prototypes.emplace_back(2, glyph_image(20, 12, 28, 20));   // right block

  f.victim = f.prototypes[0].second;
  Rng rng(noise_seed);
  for (float& v : f.victim.data) {
    v += static_cast<float>(rng.uniform(-0.05, 0.05));
  }
  f.victim.clamp01();

  f.target_example = f.prototypes[2].second;
  f.object = Grid(kSide, kSide, 1);
  return f;
}

std::shared_ptr<TemplateClassifier> make_desk_classifier() {
  return std::make_shared<TemplateClassifier>(make_desk_fixture().prototypes);
}

}  // namespace hardpatch
