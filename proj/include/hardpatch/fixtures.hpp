#pragma once

#include <memory>
#include <vector>

#include "hardpatch/image.hpp"
#include "hardpatch/mask.hpp"
#include "hardpatch/oracle.hpp"

namespace hardpatch {

// Desk-scale attack scenario backed by the built-in classifier: three
// 32x32 classes told apart by the position of a bright glyph on a mid-gray
// background, a noisy class-0 victim, and class 2 as the target. Spatial
// (rather than intensity) class evidence keeps the classifier stable under
// gamma and blur, which is what makes the scenario attackable at desk
// scale.
struct DeskFixture {
  std::vector<std::pair<int, Image>> prototypes;
  Image victim;          // noisy class-0 instance
  Image target_example;  // class-2 prototype
  int victim_label = 0;
  int target_label = 2;
  Grid object;           // full frame
};

DeskFixture make_desk_fixture(uint64_t noise_seed = 17);

std::shared_ptr<TemplateClassifier> make_desk_classifier();

}  // namespace hardpatch
