#include "hardpatch/survivability.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "hardpatch/errors.hpp"

namespace hardpatch {

namespace {

// Evaluates indices [begin, end) serially; returns hits. Budget exhaustion
// surfaces as BudgetExceeded from the ledger.
int run_block(const Image& x_adv, int y_adv, const Grid& object,
              const std::vector<TransformParams>& params,
              int begin, int end, HardLabelOracle& oracle,
              QueryLedger& ledger, const std::string& phase,
              std::vector<uint8_t>* hits_by_index) {
  int hits = 0;
  for (int i = begin; i < end; ++i) {
    Image t = apply(params[i], x_adv, object);
    int label = query(oracle, t, ledger, phase);
    bool hit = (label == y_adv);
    hits += hit;
    if (hits_by_index) (*hits_by_index)[i] = hit;
  }
  return hits;
}

}  // namespace

SurvivabilityEstimate estimate_with_params(
    const Image& x_adv, int y_adv, const Grid& object,
    const std::vector<TransformParams>& params, uint64_t seed,
    HardLabelOracle& oracle, QueryLedger& ledger, const EstimateOptions& opts) {
  const int n = static_cast<int>(params.size());
  if (n < 1) throw std::invalid_argument("estimate: n must be >= 1");

  SurvivabilityEstimate est;
  est.n = n;
  est.seed = seed;

  if (opts.trace_out) {
    opts.trace_out->insert(opts.trace_out->end(), params.begin(), params.end());
  }

  const int workers =
      (opts.parallelism > 1 && oracle.concurrent_safe())
          ? std::min(opts.parallelism, n)
          : 1;

  if (opts.hits_out) opts.hits_out->assign(n, 0);

  if (workers == 1) {
    int hits = 0;
    int spent = 0;
    const double tau = opts.early_exit_threshold.value_or(-1.0);
    const int need = opts.early_exit_threshold
                         ? static_cast<int>(std::ceil(tau * n))
                         : n + 1;
    try {
      for (int i = 0; i < n; ++i) {
        Image t = apply(params[i], x_adv, object);
        bool hit = (query(oracle, t, ledger, opts.phase) == y_adv);
        hits += hit;
        if (opts.hits_out) (*opts.hits_out)[i] = hit;
        ++spent;
        if (opts.early_exit_threshold) {
          if (hits >= need) {
            est.decision = SurvivabilityEstimate::Decision::above;
            break;
          }
          if (hits + (n - spent) < need) {
            est.decision = SurvivabilityEstimate::Decision::below;
            break;
          }
        }
      }
    } catch (const BudgetExceeded&) {
      est.value = spent > 0 ? static_cast<double>(hits) / n : 0.0;
      est.queries_spent = spent;
      est.partial = true;
      throw BudgetExceededWithEstimate(est);
    }
    est.queries_spent = spent;
    est.value = static_cast<double>(hits) / n;
    if (opts.early_exit_threshold &&
        est.decision == SurvivabilityEstimate::Decision::exact) {
      est.decision = est.value >= tau ? SurvivabilityEstimate::Decision::above
                                      : SurvivabilityEstimate::Decision::below;
    }
    return est;
  }

  // Parallel fan-out; results reduced by transform index so parallel and
  // serial runs agree. Early exit is a serial-only mode.
  std::vector<uint8_t> hits_by_index(n, 0);
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mu;
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    int b = w * chunk;
    int e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      try {
        run_block(x_adv, y_adv, object, params, b, e, oracle, ledger,
                  opts.phase, &hits_by_index);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  if (opts.hits_out) *opts.hits_out = hits_by_index;
  int hits = 0;
  for (uint8_t h : hits_by_index) hits += h;
  est.queries_spent = n;
  est.value = static_cast<double>(hits) / n;
  return est;
}

std::vector<TransformParams> sample_transforms(const TransformDistribution& dist,
                                               int n, uint64_t seed,
                                               int frame_w, int frame_h,
                                               const Grid& object) {
  std::vector<TransformParams> params;
  params.reserve(n);
  for (int i = 0; i < n; ++i) {
    params.push_back(sample_at(dist, seed, static_cast<uint64_t>(i),
                               frame_w, frame_h, object));
  }
  return params;
}

SurvivabilityEstimate estimate_image(const Image& x_adv, int y_adv,
                                     const Grid& object,
                                     const TransformDistribution& dist, int n,
                                     HardLabelOracle& oracle, QueryLedger& ledger,
                                     uint64_t seed, const EstimateOptions& opts) {
  if (n < 1) throw std::invalid_argument("estimate: n must be >= 1");
  return estimate_with_params(
      x_adv, y_adv, object,
      sample_transforms(dist, n, seed, x_adv.width, x_adv.height, object),
      seed, oracle, ledger, opts);
}

SurvivabilityEstimate estimate(const Image& x, const Mask& m, const Perturbation& d,
                               int y_adv, const TransformDistribution& dist, int n,
                               HardLabelOracle& oracle, QueryLedger& ledger,
                               uint64_t seed, const EstimateOptions& opts) {
  Image x_adv = apply_perturbation(x, m, d);
  return estimate_image(x_adv, y_adv, m.object, dist, n, oracle, ledger, seed, opts);
}

SurvivabilityEstimate estimate_with_trace(const Image& x_adv, int y_adv,
                                          const Grid& object,
                                          const std::vector<TransformParams>& trace,
                                          HardLabelOracle& oracle, QueryLedger& ledger,
                                          const EstimateOptions& opts) {
  uint64_t seed = trace.empty() ? 0 : trace.front().seed;
  return estimate_with_params(x_adv, y_adv, object, trace, seed, oracle,
                              ledger, opts);
}

double chernoff_bound(long long n, double q, double eps) {
  if (eps <= 0) throw std::invalid_argument("chernoff: eps must be > 0");
  if (q <= 0 || q > 1) throw std::invalid_argument("chernoff: q must be in (0, 1]");
  if (n < 0) throw std::invalid_argument("chernoff: n must be >= 0");
  double b = 2.0 * std::exp(-static_cast<double>(n) * q * q * q / (3.0 * eps * eps));
  return std::clamp(b, 0.0, 1.0);
}

double chernoff_bound_theorem(long long n, double p, double zeta) {
  if (zeta <= 0) throw std::invalid_argument("chernoff: zeta must be > 0");
  if (p <= 0 || p > 1) throw std::invalid_argument("chernoff: p must be in (0, 1]");
  if (n < 0) throw std::invalid_argument("chernoff: n must be >= 0");
  double b = 2.0 * std::exp(-static_cast<double>(n) * p * zeta * zeta / 3.0);
  return std::clamp(b, 0.0, 1.0);
}

void LipschitzTrace::record(double s_new, double s_base, double step_norm) {
  if (!(step_norm > 0)) {
    throw std::invalid_argument("lipschitz: step norm must be > 0");
  }
  double ratio = std::abs(s_new - s_base) / step_norm;
  samples.push_back(ratio);
  max = std::max(max, ratio);
}

void LipschitzTrace::record(double s_new, double s_base,
                            const std::vector<float>& step) {
  double norm = 0;
  for (float v : step) norm += static_cast<double>(v) * v;
  record(s_new, s_base, std::sqrt(norm));
}

}  // namespace hardpatch
