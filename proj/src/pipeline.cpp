#include "hardpatch/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "hardpatch/errors.hpp"
#include "hardpatch/fixtures.hpp"
#include "hardpatch/oracle_remote.hpp"
#include "hardpatch/png_io.hpp"
#include "hardpatch/rng.hpp"
#include "hardpatch/serialize.hpp"

namespace hardpatch {

namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

void AttackInstance::validate() const {
  if (!victim.same_shape(target_example)) {
    throw std::invalid_argument("instance: victim and target must share the scene resolution");
  }
  if (object.empty_region()) {
    throw std::invalid_argument("instance: object region is empty");
  }
  if (perturb_resolution < 1) {
    throw std::invalid_argument("instance: perturb_resolution must be >= 1");
  }
}

namespace {

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

void to_json(nlohmann::json& j, const RoundSummary& r) {
  j = nlohmann::json{{"round", r.round},
                     {"policy", r.policy},
                     {"mask_pixels", r.mask_pixels},
                     {"mask_estimate", r.mask_estimate},
                     {"boost_estimate", r.boost_estimate},
                     {"queries", r.queries}};
}

RoundSummary round_from_json(const nlohmann::json& j) {
  RoundSummary r;
  r.round = j.at("round").get<int>();
  r.policy = j.at("policy").get<std::string>();
  r.mask_pixels = j.at("mask_pixels").get<int>();
  r.mask_estimate = j.at("mask_estimate").get<double>();
  r.boost_estimate = j.at("boost_estimate").get<double>();
  r.queries = j.at("queries").get<long long>();
  return r;
}

void persist_report(const AttackReport& rep, const AttackInstance& inst,
                    const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "report.json");
    out << report_to_json(rep).dump(2) << "\n";
  }
  write_png(rep.adversarial, (fs::path(dir) / "adversarial.png").string());
  write_png(rep.post_mask, (fs::path(dir) / "post_mask.png").string());
  write_grid_png(rep.mask.bits, (fs::path(dir) / "mask.png").string());
  write_grid_png(inst.object, (fs::path(dir) / "object.png").string());
  if (rep.heatmap_image.width > 0) {
    write_png(rep.heatmap_image, (fs::path(dir) / "heatmap.png").string());
    std::ofstream out(fs::path(dir) / "heatmap.json");
    out << rep.heatmap_json << "\n";
  }
  if (!rep.holdout_trace.empty()) {
    std::ofstream out(fs::path(dir) / "trace.ndjson");
    for (size_t i = 0; i < rep.holdout_trace.size(); ++i) {
      nlohmann::json j = nlohmann::json::parse(params_to_json(rep.holdout_trace[i]));
      j["hit"] = i < rep.holdout_hits.size() ? rep.holdout_hits[i] : 0;
      out << j.dump() << "\n";
    }
  }
}

}  // namespace

nlohmann::json report_to_json(const AttackReport& r) {
  nlohmann::json j;
  j["mask"] = r.mask;
  j["perturbation"] = r.perturbation;
  j["attack_estimate"] = r.attack_estimate;
  j["holdout"] = r.holdout;
  j["holdout_post_mask"] = r.holdout_post_mask;
  j["mask_to_object_ratio"] = r.mask_to_object_ratio;
  j["ledger_phases"] = r.ledger_phases;
  j["total_queries"] = r.total_queries;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  j["wall_clock_s"] = r.wall_clock_s;
  j["status"] = r.status;
  j["cold_start"] = r.cold_start;
  j["no_boost_gain"] = r.no_boost_gain;
  j["boost_iterations"] = r.boost_iterations;
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& rs : r.rounds) {
    nlohmann::json rj;
    to_json(rj, rs);
    rounds.push_back(rj);
  }
  j["rounds"] = rounds;
  return j;
}

AttackReport report_from_json(const nlohmann::json& j) {
  AttackReport r;
  r.mask = j.at("mask").get<Mask>();
  r.perturbation = j.at("perturbation").get<Perturbation>();
  r.attack_estimate = j.at("attack_estimate").get<SurvivabilityEstimate>();
  r.holdout = j.at("holdout").get<SurvivabilityEstimate>();
  r.holdout_post_mask = j.at("holdout_post_mask").get<SurvivabilityEstimate>();
  r.mask_to_object_ratio = j.at("mask_to_object_ratio").get<double>();
  r.ledger_phases = j.at("ledger_phases").get<std::map<std::string, long long>>();
  r.total_queries = j.at("total_queries").get<long long>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.wall_clock_s = j.at("wall_clock_s").get<double>();
  r.status = j.at("status").get<std::string>();
  r.cold_start = j.at("cold_start").get<bool>();
  r.no_boost_gain = j.at("no_boost_gain").get<bool>();
  r.boost_iterations = j.at("boost_iterations").get<int>();
  for (const auto& rj : j.at("rounds")) r.rounds.push_back(round_from_json(rj));
  return r;
}

std::string report_canonical_dump(const nlohmann::json& report_json) {
  nlohmann::json j = report_json;
  j.erase("wall_clock_s");
  return j.dump();
}

AttackReport run_attack(const AttackInstance& inst, const AttackSettings& settings,
                        HardLabelOracle& oracle, QueryLedger& ledger) {
  const auto t0 = clock_type::now();
  inst.validate();
  ledger.set_budget(settings.total_budget);

  AttackReport rep;
  rep.seed = settings.seed;
  rep.config_hash = settings.config_hash;

  const int y_adv = inst.target_label;
  const Perturbation delta_tar =
      target_delta(inst.victim, inst.target_example,
                   inst.object.width, inst.object.height);

  Mask mask = Mask::full(inst.object);
  bool maskgen_ok = false;
  try {
    MaskGenResult mg = generate_mask(inst.victim, inst.target_example, y_adv,
                                     inst.object, settings.dist, settings.maskgen,
                                     oracle, ledger, Rng::derive(settings.seed, 1));
    mask = mg.mask;
    rep.heatmap_image = heatmap_to_image(mg.heatmap, mg.grid);
    rep.heatmap_json = heatmap_to_json(mg.heatmap, mg.grid);
    maskgen_ok = true;
  } catch (const BudgetExceeded&) {
    rep.status = "budget-exceeded-partial";  // keep the full-object mask
  }

  rep.post_mask = apply_perturbation(inst.victim, mask, delta_tar);

  BoostConfig bc = settings.boost;
  bc.seed = Rng::derive(settings.seed, 2);
  if (!settings.out_dir.empty()) {
    bc.checkpoint_dir = (fs::path(settings.out_dir) / "checkpoints").string();
  }
  std::optional<BoostCheckpoint> resume;
  if (settings.resume && !bc.checkpoint_dir.empty()) {
    resume = load_latest_checkpoint(bc.checkpoint_dir);
  }

  if (maskgen_ok) {
    BoostResult br = boost_perturbation(inst.victim, mask, delta_tar, y_adv,
                                        settings.dist, bc, oracle, ledger, resume);
    rep.perturbation = br.d_best;
    rep.attack_estimate = br.s_best;
    rep.cold_start = br.cold_start;
    rep.boost_iterations = br.iterations;
    if (br.partial) rep.status = "budget-exceeded-partial";
  } else {
    rep.perturbation = clamp_feasible(inst.victim, mask, delta_tar);
  }
  rep.mask = mask;
  rep.adversarial = apply_perturbation(inst.victim, mask, rep.perturbation);
  rep.mask_to_object_ratio =
      static_cast<double>(mask.size()) / mask.object_size();

  // Held-out evaluation is measurement, not attack: the budget is lifted
  // and the queries land in their own phase. The same seed estimates both
  // the boosted and the post-mask image, so the comparison is paired.
  ledger.set_budget(std::nullopt);
  const uint64_t holdout_seed = Rng::derive(settings.seed, 3);
  EstimateOptions ho;
  ho.phase = "final-eval";
  ho.parallelism = settings.boost.parallelism;
  ho.trace_out = &rep.holdout_trace;
  ho.hits_out = &rep.holdout_hits;
  rep.holdout = estimate_image(rep.adversarial, y_adv, inst.object, settings.dist,
                               settings.holdout_n, oracle, ledger, holdout_seed, ho);
  EstimateOptions hp;
  hp.phase = "final-eval";
  hp.parallelism = settings.boost.parallelism;
  rep.holdout_post_mask =
      estimate_image(rep.post_mask, y_adv, inst.object, settings.dist,
                     settings.holdout_n, oracle, ledger, holdout_seed, hp);
  rep.no_boost_gain = rep.holdout.value <= rep.holdout_post_mask.value;

  rep.ledger_phases = ledger.phases();
  rep.total_queries = ledger.total();
  rep.wall_clock_s = seconds_since(t0);
  if (!settings.out_dir.empty()) persist_report(rep, inst, settings.out_dir);
  return rep;
}

Grid border_region(const Grid& object, int width) {
  int bx0 = object.width, by0 = object.height, bx1 = -1, by1 = -1;
  for (int y = 0; y < object.height; ++y) {
    for (int x = 0; x < object.width; ++x) {
      if (!object.get(x, y)) continue;
      bx0 = std::min(bx0, x);
      by0 = std::min(by0, y);
      bx1 = std::max(bx1, x);
      by1 = std::max(by1, y);
    }
  }
  if (bx1 < 0) throw std::invalid_argument("border_region: empty object");
  Grid out(object.width, object.height, 0);
  for (int y = by0; y <= by1; ++y) {
    for (int x = bx0; x <= bx1; ++x) {
      if (!object.get(x, y)) continue;
      bool band = (x - bx0 < width) || (bx1 - x < width) ||
                  (y - by0 < width) || (by1 - y < width);
      if (band) out.set(x, y, 1);
    }
  }
  return out;
}

AttackReport run_iterative(const AttackInstance& inst,
                           const std::vector<RoundSpec>& rounds,
                           const AttackSettings& settings,
                           HardLabelOracle& oracle, QueryLedger& ledger) {
  const auto t0 = clock_type::now();
  inst.validate();
  if (rounds.empty()) throw std::invalid_argument("iterative: no rounds");
  ledger.set_budget(settings.total_budget);

  AttackReport rep;
  rep.seed = settings.seed;
  rep.config_hash = settings.config_hash;

  const int y_adv = inst.target_label;
  Image x_cur = inst.victim;
  Mask mask = Mask::full(inst.object);
  Perturbation d_last(inst.object.width, inst.object.height, inst.victim.channels);

  for (size_t r = 0; r < rounds.size(); ++r) {
    const RoundSpec& spec = rounds[r];
    const long long queries_before = ledger.total();
    RoundSummary summary;
    summary.round = static_cast<int>(r);

    Perturbation delta_tar = target_delta(x_cur, inst.target_example,
                                          inst.object.width, inst.object.height);
    try {
      if (spec.policy == RoundSpec::Policy::generate) {
        summary.policy = "generate";
        MaskGenConfig mc = settings.maskgen;
        mc.patch_size = spec.patch_size;
        mc.stride = 0;  // width divided by two
        MaskGenResult mg =
            generate_mask(x_cur, inst.target_example, y_adv, inst.object,
                          settings.dist, mc, oracle, ledger,
                          Rng::derive(settings.seed, 100 + r));
        mask = mg.mask;
        summary.mask_estimate = mg.estimate.value;
        rep.heatmap_image = heatmap_to_image(mg.heatmap, mg.grid);
        rep.heatmap_json = heatmap_to_json(mg.heatmap, mg.grid);
      } else if (spec.policy == RoundSpec::Policy::pinned_border) {
        summary.policy = "pinned-border";
        mask = Mask(border_region(inst.object, spec.border_width), inst.object);
      } else {
        summary.policy = "pinned-png";
        mask = Mask(read_grid_png(spec.mask_png), inst.object);
      }

      rep.post_mask = apply_perturbation(x_cur, mask, delta_tar);

      BoostConfig bc = settings.boost;
      bc.seed = Rng::derive(settings.seed, 200 + r);
      BoostResult br = boost_perturbation(x_cur, mask, delta_tar, y_adv,
                                          settings.dist, bc, oracle, ledger);
      if (br.partial) rep.status = "budget-exceeded-partial";
      d_last = br.d_best;
      rep.attack_estimate = br.s_best;
      rep.boost_iterations = br.iterations;
      if (r == 0) rep.cold_start = br.cold_start;
      summary.boost_estimate = br.s_best.value;
      x_cur = apply_perturbation(x_cur, mask, d_last);
    } catch (const BudgetExceeded&) {
      rep.status = "budget-exceeded-partial";
      summary.policy += " (cut short)";
      summary.queries = ledger.total() - queries_before;
      rep.rounds.push_back(summary);
      break;
    }
    summary.mask_pixels = mask.size();
    summary.queries = ledger.total() - queries_before;
    rep.rounds.push_back(summary);
  }

  rep.mask = mask;
  rep.perturbation = d_last;
  rep.adversarial = x_cur;
  rep.mask_to_object_ratio = static_cast<double>(mask.size()) / mask.object_size();
  if (rep.post_mask.width == 0) rep.post_mask = inst.victim;

  ledger.set_budget(std::nullopt);
  const uint64_t holdout_seed = Rng::derive(settings.seed, 3);
  EstimateOptions ho;
  ho.phase = "final-eval";
  ho.parallelism = settings.boost.parallelism;
  ho.trace_out = &rep.holdout_trace;
  ho.hits_out = &rep.holdout_hits;
  rep.holdout = estimate_image(x_cur, y_adv, inst.object, settings.dist,
                               settings.holdout_n, oracle, ledger, holdout_seed, ho);
  EstimateOptions hp;
  hp.phase = "final-eval";
  hp.parallelism = settings.boost.parallelism;
  rep.holdout_post_mask =
      estimate_image(rep.post_mask, y_adv, inst.object, settings.dist,
                     settings.holdout_n, oracle, ledger, holdout_seed, hp);
  rep.no_boost_gain = rep.holdout.value <= rep.holdout_post_mask.value;

  rep.ledger_phases = ledger.phases();
  rep.total_queries = ledger.total();
  rep.wall_clock_s = seconds_since(t0);
  if (!settings.out_dir.empty()) persist_report(rep, inst, settings.out_dir);
  return rep;
}

std::vector<SweepRow> run_budget_sweep(const AttackInstance& inst,
                                       const std::vector<long long>& budgets,
                                       const AttackSettings& settings,
                                       HardLabelOracle& oracle) {
  if (budgets.empty()) throw std::invalid_argument("sweep: no budgets");
  if (!std::is_sorted(budgets.begin(), budgets.end())) {
    throw std::invalid_argument("sweep: budgets must be ascending");
  }
  std::vector<SweepRow> rows;
  for (long long b : budgets) {
    AttackSettings s = settings;
    s.total_budget = b;
    s.boost.budget = b;  // let larger budgets reach the boost stage
    if (!settings.out_dir.empty()) {
      s.out_dir = (fs::path(settings.out_dir) /
                   ("budget_" + std::to_string(b))).string();
    }
    QueryLedger ledger;
    AttackReport rep = run_attack(inst, s, oracle, ledger);
    rows.push_back({b, rep.holdout.value,
                    rep.total_queries - rep.ledger_phases["final-eval"]});
  }

  if (!settings.out_dir.empty()) {
    fs::create_directories(settings.out_dir);
    std::vector<std::vector<std::string>> csv;
    std::vector<std::pair<double, double>> points;
    for (const auto& r : rows) {
      csv.push_back({std::to_string(r.budget), std::to_string(r.survivability),
                     std::to_string(r.queries)});
      points.emplace_back(static_cast<double>(r.budget), r.survivability);
    }
    write_csv((fs::path(settings.out_dir) / "sweep.csv").string(),
              {"budget", "survivability", "queries"}, csv);
    write_png(render_xy_curve(points),
              (fs::path(settings.out_dir) / "sweep.png").string());
  }
  return rows;
}

std::vector<AblationRow> run_ablation(const AttackInstance& inst,
                                      const AttackSettings& settings,
                                      HardLabelOracle& oracle) {
  using Mode = MaskGenConfig::Mode;
  const std::vector<std::pair<std::string, Mode>> modes = {
      {"full", Mode::full},
      {"coarse-only", Mode::coarse_only},
      {"fine-only", Mode::fine_only},
  };
  std::vector<AblationRow> rows;
  for (const auto& [name, mode] : modes) {
    AttackSettings s = settings;
    s.maskgen.mode = mode;
    if (mode == Mode::coarse_only) {
      s.maskgen.s_hi = s.maskgen.s_lo;  // no fine stage to enforce the floor
    }
    if (!settings.out_dir.empty()) {
      s.out_dir = (fs::path(settings.out_dir) / name).string();
    }
    const auto t0 = clock_type::now();
    QueryLedger ledger;
    AttackReport rep = run_attack(inst, s, oracle, ledger);
    rows.push_back({name, rep.holdout.value, rep.mask.size(),
                    rep.total_queries - rep.ledger_phases["final-eval"],
                    seconds_since(t0)});
  }
  if (!settings.out_dir.empty()) {
    fs::create_directories(settings.out_dir);
    std::vector<std::vector<std::string>> csv;
    for (const auto& r : rows) {
      csv.push_back({r.mode, std::to_string(r.survivability),
                     std::to_string(r.mask_pixels), std::to_string(r.queries),
                     std::to_string(r.runtime_s)});
    }
    write_csv((fs::path(settings.out_dir) / "ablation.csv").string(),
              {"mode", "survivability", "mask_pixels", "queries", "runtime_s"}, csv);
  }
  return rows;
}

Image render_xy_curve(const std::vector<std::pair<double, double>>& points,
                      int width, int height) {
  Image img(width, height, 3, 1.0f);
  const int ml = 48, mr = 16, mt = 16, mb = 32;
  auto put = [&](int x, int y, float r, float g, float b) {
    if (x < 0 || x >= width || y < 0 || y >= height) return;
    img.at(x, y, 0) = r;
    img.at(x, y, 1) = g;
    img.at(x, y, 2) = b;
  };
  // Axes.
  for (int x = ml; x < width - mr; ++x) put(x, height - mb, 0, 0, 0);
  for (int y = mt; y < height - mb; ++y) put(ml, y, 0, 0, 0);
  if (points.empty()) return img;

  double x0 = points.front().first, x1 = points.front().first;
  for (const auto& p : points) {
    x0 = std::min(x0, p.first);
    x1 = std::max(x1, p.first);
  }
  if (x1 <= x0) x1 = x0 + 1;
  const double y0 = 0.0, y1 = 1.0;
  auto px = [&](double x) {
    return ml + static_cast<int>((x - x0) / (x1 - x0) * (width - ml - mr - 1));
  };
  auto py = [&](double y) {
    double c = std::clamp(y, y0, y1);
    return height - mb - static_cast<int>((c - y0) / (y1 - y0) * (height - mt - mb - 1));
  };
  for (size_t i = 0; i + 1 < points.size(); ++i) {
    int ax = px(points[i].first), ay = py(points[i].second);
    int bx = px(points[i + 1].first), by = py(points[i + 1].second);
    int steps = std::max(std::abs(bx - ax), std::abs(by - ay)) + 1;
    for (int s = 0; s <= steps; ++s) {
      double t = static_cast<double>(s) / steps;
      put(static_cast<int>(ax + t * (bx - ax)),
          static_cast<int>(ay + t * (by - ay)), 0.1f, 0.2f, 0.7f);
    }
  }
  for (const auto& p : points) {
    int cx = px(p.first), cy = py(p.second);
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) put(cx + dx, cy + dy, 0.7f, 0.1f, 0.1f);
    }
  }
  return img;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i) {
    out << header[i] << (i + 1 < header.size() ? "," : "");
  }
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      out << row[i] << (i + 1 < row.size() ? "," : "");
    }
    out << "\n";
  }
}

// ---- Configuration ----------------------------------------------------

std::string config_hash(const nlohmann::json& j) {
  const std::string text = j.dump();  // sorted keys: canonical
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

TransformDistribution dist_from_json(const nlohmann::json& j) {
  TransformDistribution d = TransformDistribution::gtsrb();
  if (j.contains("profile")) {
    const std::string p = j.at("profile").get<std::string>();
    if (p == "gtsrb") d = TransformDistribution::gtsrb();
    else if (p == "alpr") d = TransformDistribution::alpr();
    else if (p == "identity") d = TransformDistribution::identity();
    else throw std::invalid_argument("config: unknown transform profile " + p);
  }
  if (j.contains("rot_y_max_deg")) d.rot_y_max_deg = j["rot_y_max_deg"].get<double>();
  if (j.contains("focal")) {
    d.focal = j["focal"].get<double>();
    d.dist_min = d.focal;
  }
  if (j.contains("dist_max")) d.dist_max = j["dist_max"].get<double>();
  if (j.contains("crop_percent_max")) d.crop_percent_max = j["crop_percent_max"].get<double>();
  if (j.contains("gamma_max")) d.gamma_max = j["gamma_max"].get<double>();
  if (j.contains("blur_kernels")) d.blur_kernels = j["blur_kernels"].get<std::vector<int>>();
  if (j.contains("background")) d.background = j["background"].get<float>();
  d.validate();
  return d;
}

MaskGenConfig maskgen_from_json(const nlohmann::json& j) {
  MaskGenConfig c;
  c.s_lo = j.value("s_lo", c.s_lo);
  c.s_hi = j.value("s_hi", c.s_hi);
  c.lambda1 = j.value("lambda1", c.lambda1);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.stride = j.value("stride", c.stride);
  c.n = j.value("n", c.n);
  c.parallelism = j.value("parallelism", c.parallelism);
  if (j.contains("mode")) {
    const std::string m = j["mode"].get<std::string>();
    if (m == "full") c.mode = MaskGenConfig::Mode::full;
    else if (m == "coarse-only") c.mode = MaskGenConfig::Mode::coarse_only;
    else if (m == "fine-only") c.mode = MaskGenConfig::Mode::fine_only;
    else throw std::invalid_argument("config: unknown maskgen mode " + m);
  }
  c.validate();
  return c;
}

BoostConfig boost_from_json(const nlohmann::json& j) {
  BoostConfig c;
  c.beta = j.value("beta", c.beta);
  c.eta = j.value("eta", c.eta);
  c.q = j.value("q", c.q);
  c.n = j.value("n", c.n);
  c.budget = j.value("budget", c.budget);
  c.line_search = j.value("line_search", c.line_search);
  c.max_backtracks = j.value("max_backtracks", c.max_backtracks);
  c.parallelism = j.value("parallelism", c.parallelism);
  c.validate();
  return c;
}

std::vector<RoundSpec> rounds_from_json(const nlohmann::json& j) {
  std::vector<RoundSpec> rounds;
  for (const auto& rj : j) {
    RoundSpec r;
    if (rj.contains("pinned")) {
      const std::string p = rj["pinned"].get<std::string>();
      if (p == "border") {
        r.policy = RoundSpec::Policy::pinned_border;
        r.border_width = rj.value("border_width", r.border_width);
      } else {
        r.policy = RoundSpec::Policy::pinned_png;
        r.mask_png = p;
      }
    } else {
      r.policy = RoundSpec::Policy::generate;
      r.patch_size = rj.value("patch_size", r.patch_size);
    }
    rounds.push_back(r);
  }
  return rounds;
}

ScheduleConfig schedule_from_json(const nlohmann::json& j) {
  ScheduleConfig c;
  c.start_threshold = j.value("start_threshold", c.start_threshold);
  c.step = j.value("step", c.step);
  c.epochs_per_level = j.value("epochs_per_level", c.epochs_per_level);
  c.top_threshold = j.value("top_threshold", c.top_threshold);
  c.wrap_n = j.value("wrap_n", c.wrap_n);
  c.wrap_seed = j.value("wrap_seed", c.wrap_seed);
  c.robustness_n = j.value("robustness_n", c.robustness_n);
  if (j.contains("opt")) {
    const auto& oj = j["opt"];
    c.opt.beta = oj.value("beta", c.opt.beta);
    c.opt.eta = oj.value("eta", c.opt.eta);
    c.opt.q = oj.value("q", c.opt.q);
    c.opt.tol = oj.value("tol", c.opt.tol);
    c.opt.max_iters = oj.value("max_iters", c.opt.max_iters);
    if (oj.contains("budget") && !oj["budget"].is_null()) {
      c.opt.budget = oj["budget"].get<long long>();
    }
  }
  return c;
}

}  // namespace

LoadedConfig load_config_json(const nlohmann::json& j) {
  LoadedConfig lc;
  lc.raw = j;
  lc.hash = config_hash(j);

  lc.settings.seed = j.value("seed", uint64_t{0});
  lc.settings.holdout_n = j.value("holdout_n", 1000);
  lc.settings.out_dir = j.value("out", std::string{});
  if (j.contains("budget") && !j["budget"].is_null()) {
    lc.settings.total_budget = j["budget"].get<long long>();
  }
  lc.settings.dist = j.contains("transforms") ? dist_from_json(j["transforms"])
                                              : TransformDistribution::gtsrb();
  lc.settings.maskgen = j.contains("maskgen") ? maskgen_from_json(j["maskgen"])
                                              : MaskGenConfig{};
  lc.settings.boost = j.contains("boost") ? boost_from_json(j["boost"])
                                          : BoostConfig{};
  lc.settings.config_hash = lc.hash;

  const int pres = j.contains("instance")
                       ? j["instance"].value("perturb_resolution", 32)
                       : 32;
  if (j.contains("instance") && j["instance"].contains("victim")) {
    const auto& ij = j["instance"];
    lc.instance.victim = read_png(ij.at("victim").get<std::string>());
    lc.instance.target_example = read_png(ij.at("target").get<std::string>());
    lc.instance.target_label = ij.at("target_label").get<int>();
    lc.instance.perturb_resolution = pres;
    if (ij.contains("object")) {
      Grid g = read_grid_png(ij.at("object").get<std::string>());
      lc.instance.object = resize_grid_nearest(g, pres, pres);
    } else {
      lc.instance.object = Grid(pres, pres, 1);
    }
  } else {
    DeskFixture f = make_desk_fixture();
    lc.instance.victim = f.victim;
    lc.instance.target_example = f.target_example;
    lc.instance.target_label = f.target_label;
    lc.instance.object = f.object;
    lc.instance.perturb_resolution = f.object.width;
  }

  if (j.contains("rounds")) {
    lc.rounds = rounds_from_json(j["rounds"]);
  } else {
    // Alternating schedule: coarse patches, finer patches, then the
    // perturbation pinned to the border.
    lc.rounds = {{RoundSpec::Policy::generate, 8, 2, ""},
                 {RoundSpec::Policy::generate, 4, 2, ""},
                 {RoundSpec::Policy::pinned_border, 4, 2, ""}};
  }
  if (j.contains("budgets")) {
    lc.budgets = j["budgets"].get<std::vector<long long>>();
  } else {
    for (long long b = 25000; b <= 200000; b += 25000) lc.budgets.push_back(b);
  }
  lc.schedule = j.contains("baseline") ? schedule_from_json(j["baseline"])
                                       : ScheduleConfig{};
  if (j.contains("baseline") && j["baseline"].contains("start_thresholds")) {
    lc.schedule_thresholds =
        j["baseline"]["start_thresholds"].get<std::vector<double>>();
  } else {
    for (double t = 0.40; t <= 1.0 + 1e-9; t += 0.05) lc.schedule_thresholds.push_back(t);
  }

  if (j.contains("oracle")) {
    const auto& oj = j["oracle"];
    const std::string type = oj.value("type", std::string{"builtin"});
    if (type == "builtin") {
      lc.oracle.locator = "builtin";
      if (oj.contains("prototypes")) {
        for (const auto& pj : oj["prototypes"]) {
          lc.oracle.prototype_pngs.emplace_back(pj.at("label").get<int>(),
                                                pj.at("png").get<std::string>());
        }
      }
    } else if (type == "proc") {
      lc.oracle.locator = "proc:" + oj.at("command").get<std::string>();
    } else if (type == "http") {
      lc.oracle.locator = "http:" + oj.at("url").get<std::string>();
    } else {
      throw std::invalid_argument("config: unknown oracle type " + type);
    }
    lc.oracle.timeout_s = oj.value("timeout_s", 30.0);
    lc.oracle.bearer_token = oj.value("token", std::string{});
  }
  return lc;
}

LoadedConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return load_config_json(j);
}

std::shared_ptr<HardLabelOracle> build_oracle(const OracleSpec& spec) {
  if (spec.locator == "builtin") {
    if (spec.prototype_pngs.empty()) return make_desk_classifier();
    std::vector<std::pair<int, Image>> protos;
    for (const auto& [label, path] : spec.prototype_pngs) {
      protos.emplace_back(label, read_png(path));
    }
    return std::make_shared<TemplateClassifier>(std::move(protos));
  }
  return open_remote_oracle(spec.locator, spec.timeout_s, spec.bearer_token);
}

}  // namespace hardpatch
