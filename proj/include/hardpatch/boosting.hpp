#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hardpatch/image.hpp"
#include "hardpatch/mask.hpp"
#include "hardpatch/oracle.hpp"
#include "hardpatch/survivability.hpp"
#include "hardpatch/transforms.hpp"

namespace hardpatch {

struct BoostConfig {
  double beta = 1.0;    // smoothing radius
  double eta = 500.0;   // step size
  int q = 10;           // directions per gradient estimate
  int n = 100;          // transforms per estimate
  long long budget = 20000;  // query cap for the boost phase
  bool line_search = false;
  int max_backtracks = 8;    // halvings tried by the line search
  uint64_t seed = 0;
  int parallelism = 1;
  std::string phase = "boost";
  std::string checkpoint_dir;  // empty -> no checkpoints

  void validate() const;
};

struct RgfResult {
  Perturbation g_hat;              // gradient estimate, supported inside M
  SurvivabilityEstimate base;      // S at the current perturbation
};

// One RGF estimate: q unit-normalized Gaussian directions inside the mask,
// finite differences against the shared base estimate; exactly (q+1)*n
// queries. Probe/base pairs are recorded into the Lipschitz trace.
RgfResult rgf_gradient(const Image& x, const Mask& m, const Perturbation& d,
                       int y_adv, const TransformDistribution& dist,
                       const BoostConfig& cfg, HardLabelOracle& oracle,
                       QueryLedger& ledger, uint64_t seed,
                       LipschitzTrace* trace);

// Clips delta so x + M*delta stays inside [0,1] on the perturbation plane
// and zeroes it outside the mask.
Perturbation clamp_feasible(const Image& x, const Mask& m, Perturbation d);

struct LineSearchResult {
  Perturbation delta;
  SurvivabilityEstimate s;
  double step = 0.0;
  int trials = 0;  // estimates spent, n queries each
};

// Backtracking step selection: starts at eta, halves up to max_backtracks
// times, accepts the first step whose re-estimated S is >= the base S;
// falls back to the smallest trial. Trials share the gradient's transform
// seed so comparisons are paired.
LineSearchResult line_search_step(const Image& x, const Mask& m,
                                  const Perturbation& d, const Perturbation& g_hat,
                                  double s_base, int y_adv,
                                  const TransformDistribution& dist,
                                  const BoostConfig& cfg, HardLabelOracle& oracle,
                                  QueryLedger& ledger, uint64_t seed);

struct BoostCheckpoint {
  int iteration = 0;
  Perturbation current;
  Perturbation best;
  SurvivabilityEstimate best_estimate;
  long long phase_queries = 0;
  uint64_t seed = 0;
};

std::string checkpoint_to_json(const BoostCheckpoint& cp);
BoostCheckpoint checkpoint_from_json(const std::string& text);
void write_checkpoint(const BoostCheckpoint& cp, const std::string& dir);
std::optional<BoostCheckpoint> load_latest_checkpoint(const std::string& dir);

struct BoostResult {
  Perturbation d_best;
  SurvivabilityEstimate s_best;
  LipschitzTrace lipschitz;
  int iterations = 0;
  long long queries = 0;       // spent in the boost phase
  bool cold_start = false;     // initial survivability was zero
  bool partial = false;        // global ledger budget cut the run short
};

// Survivability ascent: iterates delta <- clamp(delta + eta * g_hat) while
// the phase budget allows, returning the delta with the highest observed
// estimate (ties keep the earliest). Iteration k derives a fresh transform
// seed from cfg.seed, shared by that iteration's base, probes and trials.
BoostResult boost_perturbation(const Image& x, const Mask& m, const Perturbation& d0,
                               int y_adv, const TransformDistribution& dist,
                               const BoostConfig& cfg, HardLabelOracle& oracle,
                               QueryLedger& ledger,
                               const std::optional<BoostCheckpoint>& resume = std::nullopt);

}  // namespace hardpatch
