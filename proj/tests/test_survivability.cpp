#include "doctest.h"

#include <cmath>

#include "hardpatch/errors.hpp"
#include "hardpatch/fixtures.hpp"
#include "hardpatch/survivability.hpp"

using namespace hardpatch;

namespace {

class FixedOracle : public HardLabelOracle {
 public:
  explicit FixedOracle(int label) : label_(label) {}
  int classify(const Image&) override { return label_; }
  bool concurrent_safe() const override { return true; }

 private:
  int label_;
};

}  // namespace

TEST_CASE("estimate hits 1.0 and 0.0 at the extremes") {
  DeskFixture f = make_desk_fixture();
  Mask m = Mask::full(f.object);
  Perturbation d = target_delta(f.victim, f.target_example, 32, 32);
  QueryLedger ledger;

  FixedOracle always(f.target_label);
  auto e1 = estimate(f.victim, m, d, f.target_label,
                     TransformDistribution::gtsrb(), 37, always, ledger, 5);
  CHECK(e1.value == 1.0);
  CHECK(e1.queries_spent == 37);

  FixedOracle never(f.target_label + 1);
  auto e0 = estimate(f.victim, m, d, f.target_label,
                     TransformDistribution::gtsrb(), 37, never, ledger, 5);
  CHECK(e0.value == 0.0);
}

TEST_CASE("estimate equals an independent plain-loop recomputation") {
  DeskFixture f = make_desk_fixture();
  auto oracle = make_desk_classifier();
  Mask m = Mask::full(f.object);
  Perturbation d = target_delta(f.victim, f.target_example, 32, 32);
  TransformDistribution dist = TransformDistribution::gtsrb();
  const uint64_t seed = 4242;

  for (int n : {1, 50, 100}) {
    QueryLedger ledger;
    auto est = estimate(f.victim, m, d, f.target_label, dist, n, *oracle,
                        ledger, seed);

    // Plain loop, written against the documented seed convention.
    Image x_adv = apply_perturbation(f.victim, m, d);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      TransformParams p = sample_at(dist, seed, static_cast<uint64_t>(i),
                                    x_adv.width, x_adv.height, f.object);
      Image t = apply(p, x_adv, f.object);
      hits += (oracle->classify(t) == f.target_label);
    }
    CHECK(est.value == static_cast<double>(hits) / n);
    CHECK(est.queries_spent == n);
    CHECK(ledger.phase("estimate") == n);
  }
}

TEST_CASE("paired sampling: same seed gives the same transforms") {
  DeskFixture f = make_desk_fixture();
  TransformDistribution dist = TransformDistribution::gtsrb();
  auto oracle = make_desk_classifier();
  QueryLedger ledger;
  Mask m = Mask::full(f.object);
  Perturbation d1 = target_delta(f.victim, f.target_example, 32, 32);
  Perturbation d2 = d1;
  for (float& v : d2.delta) v *= 0.5f;

  std::vector<TransformParams> t1, t2;
  EstimateOptions o1, o2;
  o1.trace_out = &t1;
  o2.trace_out = &t2;
  estimate(f.victim, m, d1, f.target_label, dist, 25, *oracle, ledger, 9, o1);
  estimate(f.victim, m, d2, f.target_label, dist, 25, *oracle, ledger, 9, o2);
  REQUIRE(t1.size() == t2.size());
  for (size_t i = 0; i < t1.size(); ++i) {
    CHECK(params_to_json(t1[i]) == params_to_json(t2[i]));
  }
}

TEST_CASE("parallel estimate equals serial estimate") {
  DeskFixture f = make_desk_fixture();
  auto oracle = make_desk_classifier();
  TransformDistribution dist = TransformDistribution::gtsrb();
  Mask m = Mask::full(f.object);
  Perturbation d = target_delta(f.victim, f.target_example, 32, 32);

  QueryLedger l1, l2;
  EstimateOptions par;
  par.parallelism = 4;
  auto serial = estimate(f.victim, m, d, f.target_label, dist, 64, *oracle, l1, 3);
  auto parallel = estimate(f.victim, m, d, f.target_label, dist, 64, *oracle, l2, 3, par);
  CHECK(serial.value == parallel.value);
  CHECK(l1.total() == l2.total());
}

TEST_CASE("early exit decisions agree with the full estimate") {
  DeskFixture f = make_desk_fixture();
  auto oracle = make_desk_classifier();
  TransformDistribution dist = TransformDistribution::gtsrb();
  Mask m = Mask::full(f.object);
  Perturbation d = target_delta(f.victim, f.target_example, 32, 32);

  for (double tau : {0.2, 0.5, 0.8, 0.95}) {
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
      QueryLedger l1, l2;
      auto full = estimate(f.victim, m, d, f.target_label, dist, 40, *oracle, l1, seed);
      EstimateOptions opts;
      opts.early_exit_threshold = tau;
      auto quick = estimate(f.victim, m, d, f.target_label, dist, 40, *oracle, l2, seed, opts);
      CHECK(quick.queries_spent <= full.queries_spent);
      const bool above = full.value >= tau;
      CHECK((quick.decision == SurvivabilityEstimate::Decision::above) == above);
    }
  }
}

TEST_CASE("budget exhaustion carries the partial estimate") {
  DeskFixture f = make_desk_fixture();
  auto oracle = make_desk_classifier();
  TransformDistribution dist = TransformDistribution::gtsrb();
  Mask m = Mask::full(f.object);
  Perturbation d = target_delta(f.victim, f.target_example, 32, 32);
  QueryLedger ledger(10);

  try {
    estimate(f.victim, m, d, f.target_label, dist, 50, *oracle, ledger, 5);
    FAIL("expected BudgetExceeded");
  } catch (const BudgetExceededWithEstimate& e) {
    CHECK(e.estimate.partial);
    CHECK(e.estimate.queries_spent == 10);
  }
  CHECK(ledger.total() == 10);
}

TEST_CASE("chernoff bound: printed form") {
  // Direct evaluation of 2*exp(-n q^3 / (3 eps^2)).
  CHECK(chernoff_bound(10, 0.5, 0.5) ==
        doctest::Approx(2.0 * std::exp(-10.0 * 0.125 / (3.0 * 0.25))).epsilon(1e-12));
  SUBCASE("monotone decreasing in n, to zero in the limit") {
    double prev = 2.0;
    for (long long n : {1, 10, 100, 1000, 100000}) {
      double b = chernoff_bound(n, 0.5, 0.25);
      CHECK(b <= prev + 1e-15);
      prev = b;
    }
    CHECK(chernoff_bound(100000000, 0.5, 0.25) == 0.0);
  }
  SUBCASE("huge eps clamps at 1") {
    CHECK(chernoff_bound(10, 0.5, 1e9) == 1.0);
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(chernoff_bound(10, 0.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(chernoff_bound(10, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(chernoff_bound(10, 1.5, 0.1), std::invalid_argument);
  }
}

TEST_CASE("chernoff bound: theorem form differs from the printed form") {
  // Theorem: 2 exp(-n p zeta^2 / 3). Instantiating zeta = eps/p gives
  // 2 exp(-n eps^2/(3p)), not the printed 2 exp(-n p^3/(3 eps^2)); the
  // two coincide only when eps == p. Both are exposed.
  const double p = 0.5, eps = 0.25;
  double theorem = chernoff_bound_theorem(100, p, eps / p);
  CHECK(theorem ==
        doctest::Approx(2.0 * std::exp(-100.0 * eps * eps / (3.0 * p))).epsilon(1e-12));
  double printed = chernoff_bound(100, p, eps);
  CHECK(printed != doctest::Approx(theorem).epsilon(1e-6));
  CHECK(chernoff_bound(100, p, p) ==
        doctest::Approx(chernoff_bound_theorem(100, p, 1.0)).epsilon(1e-12));
}

TEST_CASE("lipschitz trace") {
  LipschitzTrace t;
  t.record(0.5, 0.5, 2.0);
  CHECK(t.samples.back() == 0.0);
  t.record(0.6, 0.5, 2.0);
  CHECK(t.samples.back() == doctest::Approx(0.05));
  CHECK(t.max == doctest::Approx(0.05));

  SUBCASE("max equals a rescan after many appends") {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
      t.record(rng.uniform(), rng.uniform(), rng.uniform(0.5, 3.0));
    }
    double rescan = 0;
    for (double s : t.samples) rescan = std::max(rescan, s);
    CHECK(t.max == rescan);
  }
  SUBCASE("zero step is rejected") {
    CHECK_THROWS_AS(t.record(0.1, 0.2, 0.0), std::invalid_argument);
  }
  SUBCASE("vector step norm") {
    LipschitzTrace v;
    v.record(0.4, 0.1, std::vector<float>{3.0f, 4.0f});
    CHECK(v.samples.back() == doctest::Approx(0.3 / 5.0));
  }
}
