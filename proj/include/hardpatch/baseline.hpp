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

// Boundary-distance attack configuration (the distance-minimizing
// baseline, not the survivability ascent).
struct OptConfig {
  double beta = 1.0;
  double eta = 0.25;
  int q = 10;
  double tol = 1e-3;          // boundary bracket width, normalized units
  int max_iters = 50;
  int expansion_doublings = 10;  // adversarial-scale search cap: 2^k * guess
  bool line_search = true;
  int max_backtracks = 8;
  std::optional<long long> budget;  // cap on phase queries
  uint64_t seed = 0;
  std::string phase = "baseline";

  void validate() const;
};

// Direction under optimization: phi with its boundary distance.
struct DirectionState {
  std::vector<float> phi;
  double g_val = 0.0;
  long long queries = 0;
};

// Distance to the nearest adversarial point along phi: doubles an initial
// guess until the label flips (capped), then binary-searches the bracket
// down to `tol` and returns the adversarial upper end. The lower end is
// non-adversarial and the upper end adversarial throughout.
double boundary_distance(const Image& x, const std::vector<float>& phi,
                         int y_adv, HardLabelOracle& oracle, QueryLedger& ledger,
                         double tol, double lambda_init,
                         const std::string& phase = "baseline",
                         int expansion_doublings = 10);

// Survivability-thresholded oracle: classifies n transformed copies and
// returns the majority label when its share clears the threshold, else the
// sentinel. A fixed per-instance seed keeps it a deterministic function of
// the image. Burns exactly n inner queries per outer call.
class WrappedOracle : public HardLabelOracle {
 public:
  static constexpr int kInsufficient = -1;

  WrappedOracle(HardLabelOracle& inner, QueryLedger& ledger,
                TransformDistribution dist, int n, double threshold,
                uint64_t seed, Grid object,
                std::string inner_phase = "baseline-inner");

  int classify(const Image& img) override;
  bool concurrent_safe() const override { return false; }

  long long outer_calls() const { return outer_calls_; }
  double threshold() const { return threshold_; }

 private:
  HardLabelOracle& inner_;
  QueryLedger& ledger_;
  TransformDistribution dist_;
  int n_;
  double threshold_;
  uint64_t seed_;
  Grid object_;
  std::string inner_phase_;
  long long outer_calls_ = 0;
};

// Stepping form of the boundary-distance attack so callers can drive
// epochs themselves (the threshold-schedule driver swaps oracles between
// levels). One epoch = one RGF gradient step plus its line search.
class OptAttackState {
 public:
  OptAttackState(const Image& x, const Image& x_tar, int y_adv, OptConfig cfg,
                 const Grid* mask_support);

  // Finds the initial boundary point along x_tar - x.
  void initialize(HardLabelOracle& oracle, QueryLedger& ledger);
  // Re-anchors g after the oracle changed underneath (threshold raise).
  void re_anchor(HardLabelOracle& oracle, QueryLedger& ledger);
  void epoch(HardLabelOracle& oracle, QueryLedger& ledger);

  double g() const { return state_.g_val; }
  const DirectionState& state() const { return state_; }
  int epochs_run() const { return epochs_; }
  // x + g * phi / ||phi||, the current boundary point.
  Image boundary_point() const;
  std::vector<float> perturbation() const;

 private:
  std::vector<float> project(std::vector<float> v) const;
  double eval_g(const std::vector<float>& phi, double lambda_init,
                HardLabelOracle& oracle, QueryLedger& ledger) const;

  Image x_;
  int y_adv_;
  OptConfig cfg_;
  Grid support_;   // empty grid -> unconstrained
  bool has_support_ = false;
  DirectionState state_;
  int epochs_ = 0;
  bool initialized_ = false;
};

struct OptResult {
  DirectionState state;
  Image adversarial;      // boundary point
  int iterations = 0;
  bool partial = false;   // stopped on budget
};

// RGF descent on g(phi), initialized from the target example direction.
OptResult opt_attack(const Image& x, const Image& x_tar, int y_adv,
                     HardLabelOracle& oracle, const OptConfig& cfg,
                     QueryLedger& ledger, const Grid* mask_support = nullptr);

struct ScheduleLevel {
  double threshold;
  int start_epoch;
  long long inner_queries;  // spent while this level was active
  double g_at_end;
};

struct ScheduleReport {
  enum class Status { ok, threshold_unreachable, initialization_failure, budget_exhausted };
  Status status = Status::ok;
  double start_threshold = 0;
  double final_threshold = 0;
  std::vector<ScheduleLevel> levels;
  double final_robustness = 0.0;  // plain-estimator survivability of the result
  long long inner_queries = 0;
  long long outer_queries = 0;
  Image final_image;
  bool has_result = false;
};

struct ScheduleConfig {
  double start_threshold = 0.40;  // in [0.40, 1.0]
  double step = 0.05;             // +5 points
  int epochs_per_level = 5;
  double top_threshold = 1.0;
  int wrap_n = 100;               // transforms per F' call
  uint64_t wrap_seed = 7;
  int robustness_n = 200;         // final plain re-estimate
  OptConfig opt;
};

// The distance-minimizing baseline driven against F' with a rising
// survivability threshold; stops with threshold_unreachable when a raise
// leaves no adversarial reference along the current direction.
ScheduleReport threshold_schedule_run(const Image& x, const Image& x_tar,
                                      int y_adv, const Grid& mask_support,
                                      const Grid& object,
                                      const TransformDistribution& dist,
                                      const ScheduleConfig& cfg,
                                      HardLabelOracle& oracle, QueryLedger& ledger);

}  // namespace hardpatch
