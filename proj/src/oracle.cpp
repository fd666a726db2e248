#include "hardpatch/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hardpatch/errors.hpp"

namespace hardpatch {

void QueryLedger::set_budget(std::optional<long long> b) {
  std::lock_guard lock(mu_);
  budget_ = b;
}

std::optional<long long> QueryLedger::budget() const {
  std::lock_guard lock(mu_);
  return budget_;
}

void QueryLedger::charge(const std::string& phase) {
  std::lock_guard lock(mu_);
  if (budget_ && total_ + 1 > *budget_) {
    throw BudgetExceeded("query budget of " + std::to_string(*budget_) + " exhausted");
  }
  ++total_;
  ++per_phase_[phase];
}

void QueryLedger::preload(const std::string& phase, long long count) {
  std::lock_guard lock(mu_);
  total_ += count;
  per_phase_[phase] += count;
}

long long QueryLedger::total() const {
  std::lock_guard lock(mu_);
  return total_;
}

long long QueryLedger::phase(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = per_phase_.find(name);
  return it == per_phase_.end() ? 0 : it->second;
}

std::map<std::string, long long> QueryLedger::phases() const {
  std::lock_guard lock(mu_);
  return per_phase_;
}

int query(HardLabelOracle& oracle, const Image& img, QueryLedger& ledger,
          const std::string& phase) {
  if (!img.finite()) {
    throw std::invalid_argument("query: image has non-finite values");
  }
  if (auto hit = oracle.try_cached(img)) return *hit;
  ledger.charge(phase);
  return oracle.classify(img);
}

TemplateClassifier::TemplateClassifier(std::vector<std::pair<int, Image>> prototypes)
    : prototypes_(std::move(prototypes)) {
  if (prototypes_.empty()) {
    throw std::invalid_argument("template classifier: no prototypes");
  }
  for (auto& [label, img] : prototypes_) {
    if (!img.same_shape(prototypes_.front().second)) {
      throw std::invalid_argument("template classifier: prototype shapes differ");
    }
    (void)label;
  }
}

int TemplateClassifier::classify(const Image& img) {
  const Image& ref = prototypes_.front().second;
  Image probe = img.same_shape(ref) ? img : resize_bilinear(img, ref.width, ref.height);
  if (probe.channels != ref.channels) {
    throw std::invalid_argument("template classifier: channel mismatch");
  }
  double best = 0;
  int best_label = 0;
  bool first = true;
  for (const auto& [label, proto] : prototypes_) {
    double d = 0;
    for (size_t i = 0; i < proto.data.size(); ++i) {
      double e = static_cast<double>(probe.data[i]) - proto.data[i];
      d += e * e;
    }
    d /= static_cast<double>(proto.data.size());
    if (first || d < best || (d == best && label < best_label)) {
      best = d;
      best_label = label;
      first = false;
    }
  }
  return best_label;
}

uint64_t image_digest(const Image& img) {
  // FNV-1a over dimensions and raw sample bytes.
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  int dims[3] = {img.width, img.height, img.channels};
  mix(dims, sizeof(dims));
  mix(img.data.data(), img.data.size() * sizeof(float));
  return h;
}

CachingOracle::CachingOracle(std::shared_ptr<HardLabelOracle> inner)
    : inner_(std::move(inner)) {}

std::optional<int> CachingOracle::try_cached(const Image& img) {
  auto it = cache_.find(image_digest(img));
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

int CachingOracle::classify(const Image& img) {
  uint64_t d = image_digest(img);
  auto it = cache_.find(d);
  if (it != cache_.end()) return it->second;
  int label = inner_->classify(img);
  cache_.emplace(d, label);
  return label;
}

int StringLabelMap::intern(const std::string& label) {
  if (label.empty()) return kNoDetection;
  auto it = by_name_.find(label);
  if (it != by_name_.end()) return it->second;
  int id = static_cast<int>(by_id_.size());
  by_name_.emplace(label, id);
  by_id_.push_back(label);
  return id;
}

std::optional<std::string> StringLabelMap::name(int label) const {
  if (label < 0 || label >= static_cast<int>(by_id_.size())) return std::nullopt;
  return by_id_[label];
}

int levenshtein(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace hardpatch
