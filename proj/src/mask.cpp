#include "hardpatch/mask.hpp"

#include <algorithm>
#include <stdexcept>

namespace hardpatch {

int Grid::count() const {
  int n = 0;
  for (uint8_t b : v) n += (b != 0);
  return n;
}

Mask::Mask(Grid bits_in, Grid object_in)
    : bits(std::move(bits_in)), object(std::move(object_in)) {
  if (!bits.same_shape(object)) {
    throw std::invalid_argument("mask: bits and object grids differ in shape");
  }
  // bits ⊆ object, enforced on construction.
  for (size_t i = 0; i < bits.v.size(); ++i) {
    if (bits.v[i] && !object.v[i]) bits.v[i] = 0;
  }
}

Mask Mask::full(const Grid& object) { return Mask(object, object); }

Mask Mask::empty(const Grid& object) {
  return Mask(Grid(object.width, object.height, 0), object);
}

PatchGrid build_patch_grid(const Grid& object, int patch_size, int stride) {
  if (patch_size < 1 || stride < 1) {
    throw std::invalid_argument("patch grid: patch_size and stride must be >= 1");
  }
  if (object.empty_region()) {
    throw std::invalid_argument("patch grid: empty object region");
  }
  PatchGrid grid;
  grid.width = object.width;
  grid.height = object.height;
  grid.patch_size = patch_size;
  grid.stride = stride;
  grid.object = object;

  // Anchors step by stride; a final anchor is appended when the strided
  // walk would leave a strip of the frame uncovered.
  auto anchors = [&](int extent) {
    std::vector<int> out;
    int last = std::max(0, extent - patch_size);
    for (int a = 0; a <= last; a += stride) out.push_back(a);
    if (out.empty() || out.back() != last) out.push_back(last);
    return out;
  };
  const std::vector<int> xs = anchors(object.width);
  const std::vector<int> ys = anchors(object.height);

  int index = 0;
  for (int ay : ys) {
    for (int ax : xs) {
      Patch p;
      p.anchor_x = ax;
      p.anchor_y = ay;
      const int x1 = std::min(object.width, ax + patch_size);
      const int y1 = std::min(object.height, ay + patch_size);
      for (int y = ay; y < y1; ++y) {
        for (int x = ax; x < x1; ++x) {
          if (object.get(x, y)) p.pixels.push_back(y * object.width + x);
        }
      }
      if (p.pixels.empty()) continue;
      p.index = index++;
      grid.patches.push_back(std::move(p));
    }
  }
  return grid;
}

Mask mask_minus(const Mask& m, const Patch& p) {
  Mask out = m;
  for (int idx : p.pixels) out.bits.v[idx] = 0;
  return out;
}

Mask mask_union(const std::vector<const Patch*>& ps, const Grid& object) {
  Grid bits(object.width, object.height, 0);
  for (const Patch* p : ps) {
    for (int idx : p->pixels) bits.v[idx] = 1;
  }
  return Mask(std::move(bits), object);
}

Grid resize_grid_nearest(const Grid& g, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1) {
    throw std::invalid_argument("nearest resample: target dimensions must be >= 1");
  }
  if (new_w == g.width && new_h == g.height) return g;
  Grid out(new_w, new_h, 0);
  for (int y = 0; y < new_h; ++y) {
    // Nearest source pixel under half-pixel-center mapping.
    int sy = std::min(g.height - 1,
                      static_cast<int>((y + 0.5) * g.height / new_h));
    for (int x = 0; x < new_w; ++x) {
      int sx = std::min(g.width - 1,
                        static_cast<int>((x + 0.5) * g.width / new_w));
      out.set(x, y, g.get(sx, sy));
    }
  }
  return out;
}

Grid upsample_grid_nearest(const Grid& g, int new_w, int new_h) {
  if (new_w < g.width || new_h < g.height) {
    throw std::invalid_argument("nearest upsample: target smaller than source");
  }
  return resize_grid_nearest(g, new_w, new_h);
}

Mask upsample_mask_nearest(const Mask& m, int new_w, int new_h) {
  return Mask(upsample_grid_nearest(m.bits, new_w, new_h),
              upsample_grid_nearest(m.object, new_w, new_h));
}

}  // namespace hardpatch
