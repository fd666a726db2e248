#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hardpatch/image.hpp"

namespace hardpatch {

// Hard-label query boundary. Implementations return only a top-1 label;
// no scores ever cross this interface.
class HardLabelOracle {
 public:
  virtual ~HardLabelOracle() = default;
  virtual int classify(const Image& img) = 0;
  // Whether concurrent classify() calls are allowed; estimators fan out
  // only over concurrent-safe oracles.
  virtual bool concurrent_safe() const { return false; }
  // Cache probe; only the caching wrapper answers. A hit is not billed.
  virtual std::optional<int> try_cached(const Image&) { return std::nullopt; }
};

// Exact per-phase query accounting with an optional hard budget. Budget
// checks happen before dispatch, so the cap is never overshot.
class QueryLedger {
 public:
  QueryLedger() = default;
  explicit QueryLedger(long long budget) : budget_(budget) {}

  void set_budget(std::optional<long long> b);
  std::optional<long long> budget() const;

  // Bills one query to `phase`; throws BudgetExceeded when the budget
  // would be passed.
  void charge(const std::string& phase);
  // Seeds a phase counter (checkpoint resume).
  void preload(const std::string& phase, long long count);

  long long total() const;
  long long phase(const std::string& name) const;
  std::map<std::string, long long> phases() const;

 private:
  mutable std::mutex mu_;
  long long total_ = 0;
  std::map<std::string, long long> per_phase_;
  std::optional<long long> budget_;
};

// The one entry point for oracle calls: bills the ledger, then dispatches.
int query(HardLabelOracle& oracle, const Image& img, QueryLedger& ledger,
          const std::string& phase);

// Deterministic built-in classifier: nearest prototype under mean squared
// distance, ties broken by the lowest label index. Queries whose shape
// differs from the prototypes are resized first.
class TemplateClassifier : public HardLabelOracle {
 public:
  explicit TemplateClassifier(std::vector<std::pair<int, Image>> prototypes);
  int classify(const Image& img) override;
  bool concurrent_safe() const override { return true; }

  const std::vector<std::pair<int, Image>>& prototypes() const { return prototypes_; }

 private:
  std::vector<std::pair<int, Image>> prototypes_;
};

// Memoizes labels by image digest. Off by default in every pipeline: the
// per-phase counts assume no caching.
class CachingOracle : public HardLabelOracle {
 public:
  explicit CachingOracle(std::shared_ptr<HardLabelOracle> inner);
  int classify(const Image& img) override;
  bool concurrent_safe() const override { return false; }
  std::optional<int> try_cached(const Image& img) override;
  size_t entries() const { return cache_.size(); }

 private:
  std::shared_ptr<HardLabelOracle> inner_;
  std::unordered_map<uint64_t, int> cache_;
};

uint64_t image_digest(const Image& img);

// Maps string labels (e.g. plate reads) onto opaque integers; a reserved
// integer stands for "no detection".
class StringLabelMap {
 public:
  static constexpr int kNoDetection = 0;
  int intern(const std::string& label);  // "" -> kNoDetection
  std::optional<std::string> name(int label) const;
  size_t size() const { return by_name_.size(); }

 private:
  std::map<std::string, int> by_name_;
  std::vector<std::string> by_id_{""};
};

// Edit distance between string labels; reporting utility only.
int levenshtein(const std::string& a, const std::string& b);

}  // namespace hardpatch
