#pragma once

#include <cstdint>
#include <vector>

namespace hardpatch {

// Binary raster. Used for object regions and mask bit planes.
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> v;

  Grid() = default;
  Grid(int w, int h, uint8_t fill = 0)
      : width(w), height(h), v(static_cast<size_t>(w) * h, fill) {}

  uint8_t get(int x, int y) const { return v[static_cast<size_t>(y) * width + x]; }
  void set(int x, int y, uint8_t b) { v[static_cast<size_t>(y) * width + x] = b; }
  int count() const;
  bool empty_region() const { return count() == 0; }
  bool same_shape(const Grid& o) const { return width == o.width && height == o.height; }
  bool operator==(const Grid& o) const = default;
};

// Binary mask on the perturbation plane, constrained to an object region.
// Invariant: bits is a subset of object.
struct Mask {
  Grid bits;
  Grid object;

  Mask() = default;
  Mask(Grid bits_in, Grid object_in);

  int width() const { return object.width; }
  int height() const { return object.height; }
  int size() const { return bits.count(); }
  int object_size() const { return object.count(); }

  // Mask covering the whole object region.
  static Mask full(const Grid& object);
  static Mask empty(const Grid& object);

  bool operator==(const Mask& o) const = default;
};

// Contiguous pixel block clipped to the object region, the atomic unit of
// mask editing. Pixels are linear indices into the grid.
struct Patch {
  int index = 0;   // position in the grid's enumeration order
  int anchor_x = 0;
  int anchor_y = 0;
  std::vector<int> pixels;
};

struct PatchGrid {
  int width = 0;   // grid dimensions the patches index into
  int height = 0;
  int patch_size = 0;
  int stride = 0;
  Grid object;
  std::vector<Patch> patches;
};

// Enumerates patch_size x patch_size patches row-major over anchors spaced
// by stride, clipped to the object region; patches with an empty
// intersection are dropped. Anchors are placed so the union of patches
// covers the region whenever stride <= patch_size.
PatchGrid build_patch_grid(const Grid& object, int patch_size, int stride);

// Clears every pixel of p, regardless of overlap with other patches.
Mask mask_minus(const Mask& m, const Patch& p);

// Union of the given patches intersected with the object region.
Mask mask_union(const std::vector<const Patch*>& ps, const Grid& object);

// Nearest-neighbor upsample; keeps the grid binary. Downsampling is an
// error.
Mask upsample_mask_nearest(const Mask& m, int new_w, int new_h);
Grid upsample_grid_nearest(const Grid& g, int new_w, int new_h);

// Unrestricted nearest-neighbor resample (config loading only).
Grid resize_grid_nearest(const Grid& g, int new_w, int new_h);

}  // namespace hardpatch
