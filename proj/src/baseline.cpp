#include "hardpatch/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hardpatch/errors.hpp"
#include "hardpatch/rng.hpp"

namespace hardpatch {

void OptConfig::validate() const {
  if (beta <= 0) throw std::invalid_argument("opt: beta must be > 0");
  if (q < 1) throw std::invalid_argument("opt: q must be >= 1");
  if (tol <= 0) throw std::invalid_argument("opt: tol must be > 0");
  if (expansion_doublings < 0) throw std::invalid_argument("opt: bad expansion cap");
}

namespace {

double vec_norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

Image point_at(const Image& x, const std::vector<float>& phi_unit, double lambda) {
  Image img = x;
  for (size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] += static_cast<float>(lambda * phi_unit[i]);
  }
  img.clamp01();
  return img;
}

}  // namespace

double boundary_distance(const Image& x, const std::vector<float>& phi,
                         int y_adv, HardLabelOracle& oracle, QueryLedger& ledger,
                         double tol, double lambda_init,
                         const std::string& phase, int expansion_doublings) {
  if (tol <= 0) throw std::invalid_argument("boundary: tol must be > 0");
  const double norm = vec_norm(phi);
  if (norm <= 0) throw std::invalid_argument("boundary: zero direction");
  std::vector<float> unit(phi.size());
  for (size_t i = 0; i < phi.size(); ++i) {
    unit[i] = static_cast<float>(phi[i] / norm);
  }

  if (query(oracle, x, ledger, phase) == y_adv) return 0.0;

  double hi = lambda_init > 0 ? lambda_init : 1.0;
  const double cap = hi * std::pow(2.0, expansion_doublings);
  double lo = 0.0;  // known non-adversarial (x itself)
  for (;;) {
    if (query(oracle, point_at(x, unit, hi), ledger, phase) == y_adv) break;
    lo = hi;
    hi *= 2.0;
    if (hi > cap) {
      throw InitializationFailure("boundary: no adversarial scale within cap");
    }
  }
  // Invariant: lo non-adversarial, hi adversarial.
  while (hi - lo > tol) {
    double mid = (lo + hi) / 2.0;
    if (query(oracle, point_at(x, unit, mid), ledger, phase) == y_adv) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

WrappedOracle::WrappedOracle(HardLabelOracle& inner, QueryLedger& ledger,
                             TransformDistribution dist, int n, double threshold,
                             uint64_t seed, Grid object, std::string inner_phase)
    : inner_(inner),
      ledger_(ledger),
      dist_(std::move(dist)),
      n_(n),
      threshold_(threshold),
      seed_(seed),
      object_(std::move(object)),
      inner_phase_(std::move(inner_phase)) {
  if (n_ < 1) throw std::invalid_argument("wrapped oracle: n must be >= 1");
  if (threshold_ < 0 || threshold_ > 1) {
    throw std::invalid_argument("wrapped oracle: threshold must be in [0, 1]");
  }
}

int WrappedOracle::classify(const Image& img) {
  ++outer_calls_;
  std::map<int, int> counts;
  for (int i = 0; i < n_; ++i) {
    TransformParams p = sample_at(dist_, seed_, static_cast<uint64_t>(i),
                                  img.width, img.height, object_);
    ++counts[query(inner_, apply(p, img, object_), ledger_, inner_phase_)];
  }
  int best_label = kInsufficient;
  int best_count = -1;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {  // map order: ties keep the lowest label
      best_label = label;
      best_count = count;
    }
  }
  if (static_cast<double>(best_count) / n_ + 1e-12 >= threshold_) {
    return best_label;
  }
  return kInsufficient;
}

OptAttackState::OptAttackState(const Image& x, const Image& x_tar, int y_adv,
                               OptConfig cfg, const Grid* mask_support)
    : x_(x), y_adv_(y_adv), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (!x.same_shape(x_tar)) {
    throw std::invalid_argument("opt: victim and target shapes differ");
  }
  if (mask_support) {
    support_ = upsample_grid_nearest(*mask_support, x.width, x.height);
    has_support_ = true;
  }
  state_.phi.resize(x.data.size());
  for (size_t i = 0; i < x.data.size(); ++i) {
    state_.phi[i] = x_tar.data[i] - x.data[i];
  }
  state_.phi = project(std::move(state_.phi));
  if (vec_norm(state_.phi) <= 0) {
    throw std::invalid_argument("opt: initial direction is zero (mask too small?)");
  }
}

std::vector<float> OptAttackState::project(std::vector<float> v) const {
  if (!has_support_) return v;
  // Perturbations confined to the mask: zero the direction outside it.
  for (int y = 0; y < x_.height; ++y) {
    for (int xx = 0; xx < x_.width; ++xx) {
      if (support_.get(xx, y)) continue;
      for (int c = 0; c < x_.channels; ++c) {
        v[(static_cast<size_t>(y) * x_.width + xx) * x_.channels + c] = 0.0f;
      }
    }
  }
  return v;
}

double OptAttackState::eval_g(const std::vector<float>& phi, double lambda_init,
                              HardLabelOracle& oracle, QueryLedger& ledger) const {
  return boundary_distance(x_, phi, y_adv_, oracle, ledger, cfg_.tol,
                           lambda_init, cfg_.phase, cfg_.expansion_doublings);
}

void OptAttackState::initialize(HardLabelOracle& oracle, QueryLedger& ledger) {
  state_.g_val = eval_g(state_.phi, vec_norm(state_.phi), oracle, ledger);
  initialized_ = true;
}

void OptAttackState::re_anchor(HardLabelOracle& oracle, QueryLedger& ledger) {
  state_.g_val = eval_g(state_.phi, std::max(state_.g_val, cfg_.tol), oracle, ledger);
}

void OptAttackState::epoch(HardLabelOracle& oracle, QueryLedger& ledger) {
  if (!initialized_) throw std::logic_error("opt: epoch before initialize");
  Rng rng(Rng::derive(cfg_.seed, static_cast<uint64_t>(epochs_)));

  // RGF estimate of dg/dphi.
  std::vector<float> g_hat(state_.phi.size(), 0.0f);
  for (int i = 0; i < cfg_.q; ++i) {
    std::vector<float> u(state_.phi.size());
    for (auto& v : u) v = static_cast<float>(rng.normal());
    u = project(std::move(u));
    double un = vec_norm(u);
    if (un <= 0) continue;
    for (auto& v : u) v = static_cast<float>(v / un);

    std::vector<float> probe = state_.phi;
    for (size_t k = 0; k < probe.size(); ++k) {
      probe[k] += static_cast<float>(cfg_.beta * u[k]);
    }
    double g_probe = eval_g(probe, std::max(state_.g_val, cfg_.tol), oracle, ledger);
    double coeff = (g_probe - state_.g_val) / cfg_.beta / cfg_.q;
    for (size_t k = 0; k < g_hat.size(); ++k) {
      g_hat[k] += static_cast<float>(coeff * u[k]);
    }
  }

  auto try_step = [&](double step) {
    std::vector<float> cand = state_.phi;
    for (size_t k = 0; k < cand.size(); ++k) {
      cand[k] -= static_cast<float>(step * g_hat[k]);
    }
    return project(std::move(cand));
  };

  if (cfg_.line_search) {
    double step = cfg_.eta;
    for (int t = 0; t <= cfg_.max_backtracks; ++t, step /= 2.0) {
      std::vector<float> cand = try_step(step);
      if (vec_norm(cand) <= 0) continue;
      double g_cand;
      try {
        g_cand = eval_g(cand, std::max(state_.g_val, cfg_.tol), oracle, ledger);
      } catch (const InitializationFailure&) {
        continue;  // direction no longer reaches the target class
      }
      if (g_cand < state_.g_val) {
        state_.phi = std::move(cand);
        state_.g_val = g_cand;
        break;
      }
    }
  } else {
    std::vector<float> cand = try_step(cfg_.eta);
    if (vec_norm(cand) > 0) {
      double g_cand = eval_g(cand, std::max(state_.g_val, cfg_.tol), oracle, ledger);
      if (g_cand < state_.g_val) {
        state_.phi = std::move(cand);
        state_.g_val = g_cand;
      }
    }
  }
  ++epochs_;
}

Image OptAttackState::boundary_point() const {
  double norm = vec_norm(state_.phi);
  std::vector<float> unit(state_.phi.size());
  for (size_t i = 0; i < unit.size(); ++i) {
    unit[i] = static_cast<float>(state_.phi[i] / norm);
  }
  return point_at(x_, unit, state_.g_val);
}

std::vector<float> OptAttackState::perturbation() const {
  Image bp = boundary_point();
  std::vector<float> d(bp.data.size());
  for (size_t i = 0; i < d.size(); ++i) d[i] = bp.data[i] - x_.data[i];
  return d;
}

OptResult opt_attack(const Image& x, const Image& x_tar, int y_adv,
                     HardLabelOracle& oracle, const OptConfig& cfg,
                     QueryLedger& ledger, const Grid* mask_support) {
  OptAttackState st(x, x_tar, y_adv, cfg, mask_support);
  const long long start = ledger.phase(cfg.phase);
  auto spent = [&] { return ledger.phase(cfg.phase) - start; };

  OptResult res;
  try {
    st.initialize(oracle, ledger);
    for (int it = 0; it < cfg.max_iters; ++it) {
      if (cfg.budget && spent() >= *cfg.budget) {
        res.partial = true;
        break;
      }
      st.epoch(oracle, ledger);
      ++res.iterations;
    }
  } catch (const BudgetExceeded&) {
    res.partial = true;
  }
  res.state = st.state();
  res.adversarial = st.boundary_point();
  return res;
}

ScheduleReport threshold_schedule_run(const Image& x, const Image& x_tar,
                                      int y_adv, const Grid& mask_support,
                                      const Grid& object,
                                      const TransformDistribution& dist,
                                      const ScheduleConfig& cfg,
                                      HardLabelOracle& oracle, QueryLedger& ledger) {
  ScheduleReport rep;
  rep.start_threshold = cfg.start_threshold;
  rep.final_threshold = cfg.start_threshold;

  auto make_wrapped = [&](double threshold) {
    return WrappedOracle(oracle, ledger, dist, cfg.wrap_n, threshold,
                         cfg.wrap_seed, object);
  };

  double threshold = cfg.start_threshold;
  auto wrapped = std::make_unique<WrappedOracle>(make_wrapped(threshold));
  OptAttackState st(x, x_tar, y_adv, cfg.opt, &mask_support);

  long long level_start_inner = 0;
  auto close_level = [&](int start_epoch) {
    rep.levels.push_back({threshold, start_epoch,
                          ledger.phase("baseline-inner") - level_start_inner,
                          st.g()});
    level_start_inner = ledger.phase("baseline-inner");
  };

  try {
    st.initialize(*wrapped, ledger);
  } catch (const InitializationFailure&) {
    rep.status = ScheduleReport::Status::initialization_failure;
    rep.inner_queries = ledger.phase("baseline-inner");
    rep.outer_queries = wrapped->outer_calls();
    return rep;
  }

  long long outer_total = 0;
  try {
    for (;;) {
      int level_epoch0 = st.epochs_run();
      for (int e = 0; e < cfg.epochs_per_level; ++e) {
        st.epoch(*wrapped, ledger);
      }
      close_level(level_epoch0);

      if (threshold + 1e-9 >= cfg.top_threshold) break;  // climbed out

      threshold += cfg.step;
      rep.final_threshold = threshold;
      outer_total += wrapped->outer_calls();
      wrapped = std::make_unique<WrappedOracle>(make_wrapped(threshold));
      try {
        st.re_anchor(*wrapped, ledger);
      } catch (const InitializationFailure&) {
        // No adversarial reference survives the raised threshold.
        rep.status = ScheduleReport::Status::threshold_unreachable;
        break;
      }
    }
  } catch (const BudgetExceeded&) {
    rep.status = ScheduleReport::Status::budget_exhausted;
  }

  outer_total += wrapped->outer_calls();
  rep.outer_queries = outer_total;
  rep.inner_queries = ledger.phase("baseline-inner");
  rep.final_image = st.boundary_point();
  rep.has_result = true;

  // Plain survivability of the final point, outside the F' wrapper.
  SurvivabilityEstimate est = estimate_image(
      rep.final_image, y_adv, object, dist, cfg.robustness_n, oracle, ledger,
      Rng::derive(cfg.wrap_seed, 0xF1A4), EstimateOptions{.phase = "baseline-final"});
  rep.final_robustness = est.value;
  return rep;
}

}  // namespace hardpatch
