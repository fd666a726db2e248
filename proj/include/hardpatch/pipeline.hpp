#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hardpatch/baseline.hpp"
#include "hardpatch/boosting.hpp"
#include "hardpatch/image.hpp"
#include "hardpatch/maskgen.hpp"
#include "hardpatch/oracle.hpp"
#include "hardpatch/survivability.hpp"
#include "hardpatch/transforms.hpp"
#include "json.hpp"

namespace hardpatch {

struct AttackInstance {
  Image victim;
  Image target_example;
  int target_label = 0;
  Grid object;                 // on the perturbation plane
  int perturb_resolution = 32;

  void validate() const;
};

struct AttackSettings {
  TransformDistribution dist;
  MaskGenConfig maskgen;
  BoostConfig boost;
  int holdout_n = 1000;
  uint64_t seed = 0;
  std::optional<long long> total_budget;  // caps attack phases, not evaluation
  std::string out_dir;                    // empty -> nothing persisted
  bool resume = false;                    // continue boost from checkpoints
  std::string config_hash;                // embedded in the report
};

struct RoundSpec {
  enum class Policy { generate, pinned_border, pinned_png };
  Policy policy = Policy::generate;
  int patch_size = 4;
  int border_width = 2;      // pinned_border
  std::string mask_png;      // pinned_png
};

struct RoundSummary {
  int round = 0;
  std::string policy;
  int mask_pixels = 0;
  double mask_estimate = 0.0;   // attack-time S after mask stage
  double boost_estimate = 0.0;  // attack-time S after boosting
  long long queries = 0;
};

struct AttackReport {
  Mask mask;
  Perturbation perturbation;
  SurvivabilityEstimate attack_estimate;     // best boost estimate (attack-time n)
  SurvivabilityEstimate holdout;             // held-out estimate of the result
  SurvivabilityEstimate holdout_post_mask;   // held-out estimate before boosting
  double mask_to_object_ratio = 0.0;
  std::map<std::string, long long> ledger_phases;
  long long total_queries = 0;
  std::string config_hash;
  uint64_t seed = 0;
  double wall_clock_s = 0.0;
  std::string status = "ok";  // ok | budget-exceeded-partial
  bool cold_start = false;
  bool no_boost_gain = false;
  int boost_iterations = 0;
  std::vector<RoundSummary> rounds;

  // Derived artifacts, persisted as PNGs but not serialized into JSON.
  Image adversarial;
  Image post_mask;
  Image heatmap_image;
  std::string heatmap_json;
  std::vector<TransformParams> holdout_trace;
  std::vector<uint8_t> holdout_hits;
};

nlohmann::json report_to_json(const AttackReport& r);
AttackReport report_from_json(const nlohmann::json& j);
// Canonical dump with timing fields stripped; the determinism contract
// compares these.
std::string report_canonical_dump(const nlohmann::json& report_json);

// Mask generation followed by boosting; persists report.json plus PNGs of
// the heatmap, post-mask image and final adversarial image under
// settings.out_dir. Budget exhaustion produces a partial report with
// status "budget-exceeded-partial" instead of failing.
AttackReport run_attack(const AttackInstance& inst, const AttackSettings& settings,
                        HardLabelOracle& oracle, QueryLedger& ledger);

// Alternating mask generation and boosting; each round feeds its boosted
// image forward. Rounds with a pinned mask skip mask generation entirely.
AttackReport run_iterative(const AttackInstance& inst,
                           const std::vector<RoundSpec>& rounds,
                           const AttackSettings& settings,
                           HardLabelOracle& oracle, QueryLedger& ledger);

struct SweepRow {
  long long budget = 0;
  double survivability = 0.0;
  long long queries = 0;
};

// Independent attacks at each total budget (ascending); emits sweep.csv
// and a rendered survivability-vs-budget curve under settings.out_dir.
std::vector<SweepRow> run_budget_sweep(const AttackInstance& inst,
                                       const std::vector<long long>& budgets,
                                       const AttackSettings& settings,
                                       HardLabelOracle& oracle);

struct AblationRow {
  std::string mode;
  double survivability = 0.0;
  int mask_pixels = 0;
  long long queries = 0;
  double runtime_s = 0.0;
};

// full / coarse-only / fine-only reduction comparison. Coarse-only runs
// with s_hi lowered to s_lo, since no fine stage enforces the floor.
std::vector<AblationRow> run_ablation(const AttackInstance& inst,
                                      const AttackSettings& settings,
                                      HardLabelOracle& oracle);

// Object-region border band: object pixels within `width` of the object
// bounding box edge (pinned-mask rounds).
Grid border_region(const Grid& object, int width);

// Tiny plot helper for the sweep curve.
Image render_xy_curve(const std::vector<std::pair<double, double>>& points,
                      int width = 480, int height = 320);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// ---- Configuration ----------------------------------------------------

struct OracleSpec {
  std::string locator = "builtin";  // builtin | proc:CMD | http:URL
  std::vector<std::pair<int, std::string>> prototype_pngs;
  double timeout_s = 30.0;
  std::string bearer_token;
};

struct LoadedConfig {
  nlohmann::json raw;
  std::string hash;
  AttackInstance instance;
  AttackSettings settings;
  std::vector<RoundSpec> rounds;
  std::vector<long long> budgets;
  ScheduleConfig schedule;
  std::vector<double> schedule_thresholds;  // baseline sweep starts
  OracleSpec oracle;
};

// Parses the JSON config document; missing instance paths fall back to the
// built-in desk fixture so the toolkit runs out of the box.
LoadedConfig load_config_json(const nlohmann::json& j);
LoadedConfig load_config_file(const std::string& path);
std::string config_hash(const nlohmann::json& j);

std::shared_ptr<HardLabelOracle> build_oracle(const OracleSpec& spec);

}  // namespace hardpatch
