#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hardpatch/errors.hpp"
#include "hardpatch/image.hpp"
#include "hardpatch/mask.hpp"
#include "hardpatch/oracle.hpp"
#include "hardpatch/transforms.hpp"

namespace hardpatch {

// Monte-Carlo estimate of the probability that a perturbed image keeps the
// target label under the transform distribution.
struct SurvivabilityEstimate {
  double value = 0.0;        // in {0, 1/n, ..., 1}
  int n = 0;                 // transforms requested
  uint64_t seed = 0;
  long long queries_spent = 0;  // <= n (early exit / budget may spend fewer)
  bool partial = false;         // budget ran out mid-estimate

  // Set when early exit is enabled.
  enum class Decision { exact, above, below };
  Decision decision = Decision::exact;
};

struct EstimateOptions {
  std::string phase = "estimate";
  int parallelism = 1;  // >1 needs a concurrent-safe oracle
  // Early exit against a threshold: stop as soon as the final estimate
  // can no longer cross it. OFF for paper-faithful query accounting.
  std::optional<double> early_exit_threshold;
  // When set, the accepted TransformParams are appended here.
  std::vector<TransformParams>* trace_out = nullptr;
  // When set, receives the per-transform outcome (1 = target label held).
  std::vector<uint8_t>* hits_out = nullptr;
};

// Budget exhaustion mid-estimate carries the partial estimate along.
class BudgetExceededWithEstimate : public BudgetExceeded {
 public:
  explicit BudgetExceededWithEstimate(SurvivabilityEstimate est)
      : BudgetExceeded("query budget exhausted mid-estimate"),
        estimate(est) {}
  SurvivabilityEstimate estimate;
};

// value = (1/n) * sum_i 1[F(t_i(x_adv)) == y_adv] over the seeded transform
// sequence; identical seeds give identical transform sets, so estimates of
// two perturbations under one seed are paired.
SurvivabilityEstimate estimate_image(const Image& x_adv, int y_adv,
                                     const Grid& object,
                                     const TransformDistribution& dist, int n,
                                     HardLabelOracle& oracle, QueryLedger& ledger,
                                     uint64_t seed, const EstimateOptions& opts = {});

// Same, for x + M*delta.
SurvivabilityEstimate estimate(const Image& x, const Mask& m, const Perturbation& d,
                               int y_adv, const TransformDistribution& dist, int n,
                               HardLabelOracle& oracle, QueryLedger& ledger,
                               uint64_t seed, const EstimateOptions& opts = {});

// Replays an explicit transform list instead of sampling.
SurvivabilityEstimate estimate_with_trace(const Image& x_adv, int y_adv,
                                          const Grid& object,
                                          const std::vector<TransformParams>& trace,
                                          HardLabelOracle& oracle, QueryLedger& ledger,
                                          const EstimateOptions& opts = {});

// Core loop over pre-sampled params; callers that evaluate many images
// against one transform set sample once and reuse.
SurvivabilityEstimate estimate_with_params(
    const Image& x_adv, int y_adv, const Grid& object,
    const std::vector<TransformParams>& params, uint64_t seed,
    HardLabelOracle& oracle, QueryLedger& ledger, const EstimateOptions& opts = {});

// The per-index transform set estimate_image draws for a given seed.
std::vector<TransformParams> sample_transforms(const TransformDistribution& dist,
                                               int n, uint64_t seed,
                                               int frame_w, int frame_h,
                                               const Grid& object);

// Sampling-error tail bound as printed: 2*exp(-n*q^3 / (3*eps^2)), clamped
// to [0, 1]. See also chernoff_bound_theorem for the form the underlying
// concentration theorem actually yields; the two disagree and both are
// kept.
double chernoff_bound(long long n, double q, double eps);

// Theorem-form tail: P(|A/n - p| >= zeta*p) <= 2*exp(-n*p*zeta^2/3),
// clamped to [0, 1]. Instantiating zeta = eps/p gives
// 2*exp(-n*eps^2/(3*p)).
double chernoff_bound_theorem(long long n, double p, double zeta);

// Observed local smoothness of the survivability surface: ratios
// |S_new - S_base| / ||step||_2 and their running maximum.
struct LipschitzTrace {
  std::vector<double> samples;
  double max = 0.0;

  void record(double s_new, double s_base, double step_norm);
  void record(double s_new, double s_base, const std::vector<float>& step);
};

}  // namespace hardpatch
