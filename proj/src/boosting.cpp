#include "hardpatch/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hardpatch/errors.hpp"
#include "hardpatch/rng.hpp"
#include "hardpatch/serialize.hpp"

namespace hardpatch {

namespace fs = std::filesystem;

void BoostConfig::validate() const {
  if (beta <= 0) throw std::invalid_argument("boost: beta must be > 0");
  if (q < 1) throw std::invalid_argument("boost: q must be >= 1");
  if (n < 1) throw std::invalid_argument("boost: n must be >= 1");
  if (budget < 0) throw std::invalid_argument("boost: budget must be >= 0");
  if (max_backtracks < 0) throw std::invalid_argument("boost: max_backtracks must be >= 0");
}

Perturbation clamp_feasible(const Image& x, const Mask& m, Perturbation d) {
  Image x_lo = resize_bilinear(x, d.width, d.height);
  for (int y = 0; y < d.height; ++y) {
    for (int xx = 0; xx < d.width; ++xx) {
      const bool inside = m.bits.get(xx, y) != 0;
      for (int c = 0; c < d.channels; ++c) {
        float& v = d.at(xx, y, c);
        if (!inside) {
          v = 0.0f;
        } else {
          float base = x_lo.at(xx, y, c);
          v = std::clamp(v, -base, 1.0f - base);
        }
      }
    }
  }
  return d;
}

namespace {

// Gaussian direction on the mask support, unit L2 norm.
Perturbation draw_direction(const Mask& m, int channels, Rng& rng) {
  Perturbation u(m.width(), m.height(), channels, 0.0f);
  double norm_sq = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.bits.get(x, y)) continue;
      for (int c = 0; c < channels; ++c) {
        double g = rng.normal();
        u.at(x, y, c) = static_cast<float>(g);
        norm_sq += g * g;
      }
    }
  }
  if (norm_sq > 0) {
    const float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
    for (float& v : u.delta) v *= inv;
  }
  return u;
}

Perturbation axpy(const Perturbation& d, double alpha, const Perturbation& g) {
  Perturbation out = d;
  for (size_t i = 0; i < out.delta.size(); ++i) {
    out.delta[i] += static_cast<float>(alpha * g.delta[i]);
  }
  return out;
}

}  // namespace

RgfResult rgf_gradient(const Image& x, const Mask& m, const Perturbation& d,
                       int y_adv, const TransformDistribution& dist,
                       const BoostConfig& cfg, HardLabelOracle& oracle,
                       QueryLedger& ledger, uint64_t seed,
                       LipschitzTrace* trace) {
  cfg.validate();
  EstimateOptions opts;
  opts.phase = cfg.phase;
  opts.parallelism = cfg.parallelism;

  RgfResult res;
  res.base = estimate(x, m, d, y_adv, dist, cfg.n, oracle, ledger, seed, opts);
  res.g_hat = Perturbation(d.width, d.height, d.channels, 0.0f);
  if (m.size() == 0) return res;  // no support, zero gradient

  Rng dir_rng(Rng::derive(seed, 0x646972));  // direction stream for this step
  for (int i = 0; i < cfg.q; ++i) {
    Perturbation u = draw_direction(m, d.channels, dir_rng);
    Perturbation probe = axpy(d, cfg.beta, u);
    // Probes share the base estimate's transform seed (paired comparison).
    SurvivabilityEstimate s_i =
        estimate(x, m, probe, y_adv, dist, cfg.n, oracle, ledger, seed, opts);
    if (trace) trace->record(s_i.value, res.base.value, cfg.beta);  // ||u|| = 1
    const double coeff = (s_i.value - res.base.value) / cfg.beta / cfg.q;
    for (size_t k = 0; k < res.g_hat.delta.size(); ++k) {
      res.g_hat.delta[k] += static_cast<float>(coeff * u.delta[k]);
    }
  }
  return res;
}

LineSearchResult line_search_step(const Image& x, const Mask& m,
                                  const Perturbation& d, const Perturbation& g_hat,
                                  double s_base, int y_adv,
                                  const TransformDistribution& dist,
                                  const BoostConfig& cfg, HardLabelOracle& oracle,
                                  QueryLedger& ledger, uint64_t seed) {
  EstimateOptions opts;
  opts.phase = cfg.phase;
  opts.parallelism = cfg.parallelism;

  LineSearchResult res;
  double step = cfg.eta;
  for (int t = 0; t <= cfg.max_backtracks; ++t, step /= 2.0) {
    Perturbation d_try = clamp_feasible(x, m, axpy(d, step, g_hat));
    SurvivabilityEstimate s_try =
        estimate(x, m, d_try, y_adv, dist, cfg.n, oracle, ledger, seed, opts);
    ++res.trials;
    res.delta = std::move(d_try);
    res.s = s_try;
    res.step = step;
    if (s_try.value >= s_base) break;  // none improves -> smallest trial stays
  }
  return res;
}

std::string checkpoint_to_json(const BoostCheckpoint& cp) {
  nlohmann::json j;
  j["iteration"] = cp.iteration;
  j["current"] = cp.current;
  j["best"] = cp.best;
  j["best_estimate"] = cp.best_estimate;
  j["phase_queries"] = cp.phase_queries;
  j["seed"] = cp.seed;
  return j.dump();
}

BoostCheckpoint checkpoint_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  BoostCheckpoint cp;
  cp.iteration = j.at("iteration").get<int>();
  cp.current = j.at("current").get<Perturbation>();
  cp.best = j.at("best").get<Perturbation>();
  cp.best_estimate = j.at("best_estimate").get<SurvivabilityEstimate>();
  cp.phase_queries = j.at("phase_queries").get<long long>();
  cp.seed = j.at("seed").get<uint64_t>();
  return cp;
}

void write_checkpoint(const BoostCheckpoint& cp, const std::string& dir) {
  fs::create_directories(dir);
  char name[32];
  std::snprintf(name, sizeof(name), "iter_%06d.json", cp.iteration);
  std::ofstream out(fs::path(dir) / name);
  out << checkpoint_to_json(cp) << "\n";
}

std::optional<BoostCheckpoint> load_latest_checkpoint(const std::string& dir) {
  if (!fs::is_directory(dir)) return std::nullopt;
  fs::path latest;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("iter_", 0) == 0 && name.size() > 5 &&
        (latest.empty() || name > latest.filename().string())) {
      latest = entry.path();
    }
  }
  if (latest.empty()) return std::nullopt;
  std::ifstream in(latest);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return checkpoint_from_json(text);
}

BoostResult boost_perturbation(const Image& x, const Mask& m, const Perturbation& d0,
                               int y_adv, const TransformDistribution& dist,
                               const BoostConfig& cfg, HardLabelOracle& oracle,
                               QueryLedger& ledger,
                               const std::optional<BoostCheckpoint>& resume) {
  cfg.validate();
  BoostResult res;
  const long long start_total = ledger.phase(cfg.phase);
  long long carried = resume ? resume->phase_queries : 0;
  auto spent = [&] { return carried + ledger.phase(cfg.phase) - start_total; };

  Perturbation d = resume ? resume->current : clamp_feasible(x, m, d0);
  int k = resume ? resume->iteration : 0;
  bool have_best = false;
  bool d_observed = false;
  if (resume) {
    res.d_best = resume->best;
    res.s_best = resume->best_estimate;
    have_best = true;
  }

  auto consider_best = [&](const Perturbation& cand, const SurvivabilityEstimate& s) {
    if (!have_best || s.value > res.s_best.value) {
      res.d_best = cand;
      res.s_best = s;
      have_best = true;
    }
  };

  const long long iter_cost =
      static_cast<long long>(cfg.q + 1) * cfg.n + (cfg.line_search ? cfg.n : 0);
  bool first_estimate = !resume;

  try {
    while (spent() + iter_cost <= cfg.budget) {
      const uint64_t seed_k = Rng::derive(cfg.seed, static_cast<uint64_t>(k));
      RgfResult rgf = rgf_gradient(x, m, d, y_adv, dist, cfg, oracle, ledger,
                                   seed_k, &res.lipschitz);
      if (first_estimate) {
        res.cold_start = rgf.base.value == 0.0;
        first_estimate = false;
      }
      consider_best(d, rgf.base);
      d_observed = true;

      if (cfg.line_search) {
        LineSearchResult ls =
            line_search_step(x, m, d, rgf.g_hat, rgf.base.value, y_adv, dist,
                             cfg, oracle, ledger, seed_k);
        consider_best(ls.delta, ls.s);
        d = std::move(ls.delta);
        d_observed = true;
      } else {
        d = clamp_feasible(x, m, axpy(d, cfg.eta, rgf.g_hat));
        d_observed = false;
      }
      ++k;
      ++res.iterations;

      if (!cfg.checkpoint_dir.empty()) {
        BoostCheckpoint cp;
        cp.iteration = k;
        cp.current = d;
        cp.best = res.d_best;
        cp.best_estimate = res.s_best;
        cp.phase_queries = spent();
        cp.seed = cfg.seed;
        write_checkpoint(cp, cfg.checkpoint_dir);
      }
    }

    // Leftover budget observes the final (or only) perturbation.
    if (!d_observed && spent() + cfg.n <= cfg.budget) {
      EstimateOptions opts;
      opts.phase = cfg.phase;
      opts.parallelism = cfg.parallelism;
      SurvivabilityEstimate s =
          estimate(x, m, d, y_adv, dist, cfg.n, oracle, ledger,
                   Rng::derive(cfg.seed, static_cast<uint64_t>(k)), opts);
      if (first_estimate) {
        res.cold_start = s.value == 0.0;
        first_estimate = false;
      }
      consider_best(d, s);
    }
  } catch (const BudgetExceededWithEstimate&) {
    res.partial = true;  // global ledger cap: stop gracefully, keep best
  } catch (const BudgetExceeded&) {
    res.partial = true;
  }

  if (!have_best) {
    // Nothing could be estimated (budget below one estimate); hand back
    // the start point with an empty estimate.
    res.d_best = d;
    res.s_best = SurvivabilityEstimate{};
    res.s_best.seed = cfg.seed;
  }
  res.queries = spent();
  return res;
}

}  // namespace hardpatch
