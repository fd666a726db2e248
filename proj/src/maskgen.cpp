#include "hardpatch/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "hardpatch/errors.hpp"
#include "json.hpp"

namespace hardpatch {

int MaskGenConfig::effective_stride() const {
  if (stride > 0) return stride;
  return std::max(1, patch_size / 2);
}

void MaskGenConfig::validate() const {
  if (!(0.0 <= s_lo && s_lo <= s_hi && s_hi <= 1.0)) {
    throw std::invalid_argument("maskgen: need 0 <= s_lo <= s_hi <= 1");
  }
  if (lambda1 < 0) throw std::invalid_argument("maskgen: lambda1 must be >= 0");
  if (patch_size < 1) throw std::invalid_argument("maskgen: patch_size must be >= 1");
  if (n < 1) throw std::invalid_argument("maskgen: n must be >= 1");
}

namespace {

// All mask-generation estimates share one pre-sampled transform set, so
// survivabilities of different masks are directly comparable.
struct StageContext {
  const Image& x;
  Perturbation delta_tar;
  std::vector<TransformParams> params;
  uint64_t seed;
  int parallelism;

  StageContext(const Image& x_in, const Image& x_tar, const PatchGrid& grid,
               const TransformDistribution& dist, const MaskGenConfig& cfg,
               uint64_t seed_in)
      : x(x_in),
        delta_tar(target_delta(x_in, x_tar, grid.object.width, grid.object.height)),
        params(sample_transforms(dist, cfg.n, seed_in, x_in.width, x_in.height,
                                 grid.object)),
        seed(seed_in),
        parallelism(cfg.parallelism) {}

  double eval(const Mask& m, int y_adv, HardLabelOracle& oracle,
              QueryLedger& ledger, const std::string& phase) const {
    Image x_adv = apply_perturbation(x, m, delta_tar);
    EstimateOptions opts;
    opts.phase = phase;
    opts.parallelism = parallelism;
    return estimate_with_params(x_adv, y_adv, m.object, params, seed, oracle,
                                ledger, opts)
        .value;
  }
};

bool patch_intersects(const Mask& m, const Patch& p) {
  for (int idx : p.pixels) {
    if (m.bits.v[idx]) return true;
  }
  return false;
}

}  // namespace

HeatmapResult heatmap(const Image& x, const Image& x_tar, int y_adv,
                      const PatchGrid& grid, const TransformDistribution& dist,
                      const MaskGenConfig& cfg, HardLabelOracle& oracle,
                      QueryLedger& ledger, uint64_t seed) {
  cfg.validate();
  if (grid.object.empty_region()) {
    throw std::invalid_argument("heatmap: empty object region");
  }
  StageContext ctx(x, x_tar, grid, dist, cfg, seed);
  const Mask full = Mask::full(grid.object);
  const int np = static_cast<int>(grid.patches.size());

  HeatmapResult heat;
  heat.s_per_patch.assign(np, 0.0);
  try {
    heat.baseline = ctx.eval(full, y_adv, oracle, ledger, "heatmap");

    const int workers =
        (cfg.parallelism > 1 && oracle.concurrent_safe())
            ? std::min(cfg.parallelism, np)
            : 1;
    if (workers == 1) {
      for (int i = 0; i < np; ++i) {
        heat.s_per_patch[i] = ctx.eval(mask_minus(full, grid.patches[i]), y_adv,
                                       oracle, ledger, "heatmap");
      }
    } else {
      std::exception_ptr failure;
      std::mutex failure_mu;
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          try {
            for (;;) {
              int i = next.fetch_add(1);
              if (i >= np) return;
              heat.s_per_patch[i] = ctx.eval(mask_minus(full, grid.patches[i]),
                                             y_adv, oracle, ledger, "heatmap");
            }
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      if (failure) std::rethrow_exception(failure);
    }
  } catch (const BudgetExceeded&) {
    throw BudgetExceededWithHeatmap(std::move(heat));
  }
  return heat;
}

std::vector<int> impact_order(const HeatmapResult& heat) {
  std::vector<int> order(heat.s_per_patch.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return heat.s_per_patch[a] > heat.s_per_patch[b];
  });
  return order;
}

CoarseResult coarse_reduce(const HeatmapResult& heat, const PatchGrid& grid,
                           const Image& x, const Image& x_tar, int y_adv,
                           const TransformDistribution& dist,
                           const MaskGenConfig& cfg, HardLabelOracle& oracle,
                           QueryLedger& ledger, uint64_t seed) {
  cfg.validate();
  StageContext ctx(x, x_tar, grid, dist, cfg, seed);
  const std::vector<int> order = impact_order(heat);
  const int np = static_cast<int>(order.size());

  // Union of sorted patches from 1-based position `pivot` to the end:
  // the most impactful suffix.
  auto mask_for_pivot = [&](int pivot) {
    std::vector<const Patch*> keep;
    for (int i = pivot - 1; i < np; ++i) keep.push_back(&grid.patches[order[i]]);
    return mask_union(keep, grid.object);
  };

  CoarseResult res;
  std::map<int, double> memo;
  auto eval_pivot = [&](int pivot) {
    auto it = memo.find(pivot);
    if (it != memo.end()) return it->second;
    double s = ctx.eval(mask_for_pivot(pivot), y_adv, oracle, ledger, "coarse");
    ++res.estimates;
    memo.emplace(pivot, s);
    return s;
  };

  // The full union first: when s_hi is out of reach we keep every patch.
  if (eval_pivot(1) < cfg.s_hi) {
    res.mask = mask_for_pivot(1);
    res.s = memo.at(1);
    res.pivot = 1;
    res.reached_hi = false;
    return res;
  }
  int lo = 1;
  int hi = np;
  while (lo < hi) {
    int mid = lo + (hi - lo + 1) / 2;
    if (eval_pivot(mid) >= cfg.s_hi) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  res.mask = mask_for_pivot(lo);
  res.s = memo.at(lo);
  res.pivot = lo;
  res.reached_hi = true;
  return res;
}

double objective_j(const Mask& m, double s, const MaskGenConfig& cfg) {
  if (s < 0.0 || s > 1.0) {
    throw std::invalid_argument("objective: survivability must be in [0, 1]");
  }
  if (s < cfg.s_lo) return std::numeric_limits<double>::infinity();
  const double object_px = m.object_size();
  return cfg.lambda1 * (m.size() / object_px) + (1.0 - s);
}

FineResult fine_reduce(const Mask& m0, double s0, const HeatmapResult& heat,
                       const PatchGrid& grid, const Image& x, const Image& x_tar,
                       int y_adv, const TransformDistribution& dist,
                       const MaskGenConfig& cfg, HardLabelOracle& oracle,
                       QueryLedger& ledger, uint64_t seed) {
  cfg.validate();
  StageContext ctx(x, x_tar, grid, dist, cfg, seed);

  FineResult res;
  res.mask = m0;
  res.s = s0;
  double j_cur = objective_j(m0, s0, cfg);

  for (int idx : impact_order(heat)) {
    const Patch& p = grid.patches[idx];
    if (!patch_intersects(res.mask, p)) continue;  // removal is a no-op
    Mask m_try = mask_minus(res.mask, p);
    double s_try = ctx.eval(m_try, y_adv, oracle, ledger, "fine");
    ++res.estimates;
    double j_try = objective_j(m_try, s_try, cfg);
    if (j_try < j_cur) {
      res.accepted.push_back({idx, j_cur, j_try, s_try});
      res.mask = std::move(m_try);
      res.s = s_try;
      j_cur = j_try;
    }
  }
  return res;
}

MaskGenResult generate_mask(const Image& x, const Image& x_tar, int y_adv,
                            const Grid& object, const TransformDistribution& dist,
                            const MaskGenConfig& cfg, HardLabelOracle& oracle,
                            QueryLedger& ledger, uint64_t seed) {
  cfg.validate();
  MaskGenResult out;
  out.grid = build_patch_grid(object, cfg.patch_size, cfg.effective_stride());
  out.heatmap = heatmap(x, x_tar, y_adv, out.grid, dist, cfg, oracle, ledger, seed);

  Mask m0 = Mask::full(object);
  double s0 = out.heatmap.baseline;
  if (cfg.mode != MaskGenConfig::Mode::fine_only) {
    out.coarse = coarse_reduce(out.heatmap, out.grid, x, x_tar, y_adv, dist,
                               cfg, oracle, ledger, seed);
    out.coarse_ran = true;
    m0 = out.coarse.mask;
    s0 = out.coarse.s;
  }
  if (cfg.mode != MaskGenConfig::Mode::coarse_only) {
    out.fine = fine_reduce(m0, s0, out.heatmap, out.grid, x, x_tar, y_adv,
                           dist, cfg, oracle, ledger, seed);
    out.fine_ran = true;
    out.mask = out.fine.mask;
    s0 = out.fine.s;
  } else {
    out.mask = m0;
  }

  out.estimate.value = s0;
  out.estimate.n = cfg.n;
  out.estimate.seed = seed;
  out.estimate.queries_spent = cfg.n;
  return out;
}

Image heatmap_to_image(const HeatmapResult& heat, const PatchGrid& grid) {
  double max_impact = 0.0;
  for (size_t i = 0; i < heat.s_per_patch.size(); ++i) {
    max_impact = std::max(max_impact, heat.impact(static_cast<int>(i)));
  }
  Image img(grid.width, grid.height, 1, 0.0f);
  if (max_impact <= 0.0) return img;
  for (size_t i = 0; i < grid.patches.size(); ++i) {
    float v = static_cast<float>(
        std::max(0.0, heat.impact(static_cast<int>(i))) / max_impact);
    for (int idx : grid.patches[i].pixels) {
      img.data[idx] = std::max(img.data[idx], v);
    }
  }
  return img;
}

std::string heatmap_to_json(const HeatmapResult& heat, const PatchGrid& grid) {
  nlohmann::json j;
  j["baseline"] = heat.baseline;
  j["patch_size"] = grid.patch_size;
  j["stride"] = grid.stride;
  nlohmann::json arr = nlohmann::json::array();
  for (size_t i = 0; i < heat.s_per_patch.size(); ++i) {
    const Patch& p = grid.patches[i];
    arr.push_back({{"patch", p.index},
                   {"anchor_x", p.anchor_x},
                   {"anchor_y", p.anchor_y},
                   {"survivability", heat.s_per_patch[i]},
                   {"impact", heat.impact(static_cast<int>(i))}});
  }
  j["patches"] = arr;
  return j.dump(2);
}

}  // namespace hardpatch
