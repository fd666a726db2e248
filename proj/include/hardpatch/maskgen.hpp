#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hardpatch/image.hpp"
#include "hardpatch/mask.hpp"
#include "hardpatch/oracle.hpp"
#include "hardpatch/survivability.hpp"
#include "hardpatch/transforms.hpp"

namespace hardpatch {

struct MaskGenConfig {
  double s_lo = 0.70;  // minimum survivability the mask must keep
  double s_hi = 0.90;  // coarse-reduction target
  double lambda1 = 0.25;  // weight on normalized mask size in the objective
  int patch_size = 4;
  int stride = 0;  // 0 -> patch_size / 2
  int n = 100;     // transforms per estimate
  int parallelism = 1;

  enum class Mode { full, coarse_only, fine_only };
  Mode mode = Mode::full;

  int effective_stride() const;
  void validate() const;
};

// Per-patch survivability with the patch removed from the full mask;
// impact = baseline - s_rho (the drop caused by removing the patch).
struct HeatmapResult {
  std::vector<double> s_per_patch;  // by patch index
  double baseline = 0.0;            // full-mask survivability
  double impact(int patch_index) const { return baseline - s_per_patch[patch_index]; }
};

class BudgetExceededWithHeatmap : public BudgetExceeded {
 public:
  explicit BudgetExceededWithHeatmap(HeatmapResult partial_in)
      : BudgetExceeded("query budget exhausted during heatmap estimation"),
        partial(std::move(partial_in)) {}
  HeatmapResult partial;
};

// Removes one patch at a time from the full-object mask filled with
// delta_tar = x_tar - x and measures the survivability drop. Spends
// exactly n*(|P|+1) queries in phase "heatmap" (the +1 is the baseline).
HeatmapResult heatmap(const Image& x, const Image& x_tar, int y_adv,
                      const PatchGrid& grid, const TransformDistribution& dist,
                      const MaskGenConfig& cfg, HardLabelOracle& oracle,
                      QueryLedger& ledger, uint64_t seed);

// Patch indices ordered least impactful first (highest s_rho first; ties
// by patch index).
std::vector<int> impact_order(const HeatmapResult& heat);

struct CoarseResult {
  Mask mask;
  double s = 0.0;        // measured survivability of the returned mask
  int pivot = 1;         // 1-based position in the sorted order
  bool reached_hi = false;
  int estimates = 0;     // pivot evaluations spent (each n queries)
};

// Binary search over suffixes of the impact-sorted patch list for the
// largest pivot whose union still clears s_hi; when even the full union
// misses the threshold, all patches are kept. At most ceil(log2 |P|) + 1
// estimates, billed to phase "coarse".
CoarseResult coarse_reduce(const HeatmapResult& heat, const PatchGrid& grid,
                           const Image& x, const Image& x_tar, int y_adv,
                           const TransformDistribution& dist,
                           const MaskGenConfig& cfg, HardLabelOracle& oracle,
                           QueryLedger& ledger, uint64_t seed);

// lambda1 * |M|/|object| + (1 - s), infinite below the s_lo floor. Mask
// size is normalized by the object pixel count so lambda1 is
// resolution-independent.
double objective_j(const Mask& m, double s, const MaskGenConfig& cfg);

struct FineStep {
  int patch_index;
  double j_before;
  double j_after;
  double s_after;
};

struct FineResult {
  Mask mask;
  double s = 0.0;
  std::vector<FineStep> accepted;  // J strictly decreases along this list
  int estimates = 0;
};

// One greedy pass from least to most impactful patch; a removal is kept
// only when J strictly decreases. At most n*|P| queries in phase "fine".
FineResult fine_reduce(const Mask& m0, double s0, const HeatmapResult& heat,
                       const PatchGrid& grid, const Image& x, const Image& x_tar,
                       int y_adv, const TransformDistribution& dist,
                       const MaskGenConfig& cfg, HardLabelOracle& oracle,
                       QueryLedger& ledger, uint64_t seed);

struct MaskGenResult {
  Mask mask;
  SurvivabilityEstimate estimate;  // of the returned mask, shared seed
  HeatmapResult heatmap;
  PatchGrid grid;
  CoarseResult coarse;  // pivot 0 when the stage was skipped
  FineResult fine;
  bool coarse_ran = false;
  bool fine_ran = false;
};

// Heatmap -> coarse -> fine composition (stages gated by cfg.mode). All
// estimates share one transform seed so stage outputs are comparable.
MaskGenResult generate_mask(const Image& x, const Image& x_tar, int y_adv,
                            const Grid& object, const TransformDistribution& dist,
                            const MaskGenConfig& cfg, HardLabelOracle& oracle,
                            QueryLedger& ledger, uint64_t seed);

// Impact map rendered per pixel (max over covering patches, normalized to
// [0,1]) and a JSON dump of the raw per-patch values.
Image heatmap_to_image(const HeatmapResult& heat, const PatchGrid& grid);
std::string heatmap_to_json(const HeatmapResult& heat, const PatchGrid& grid);

}  // namespace hardpatch
