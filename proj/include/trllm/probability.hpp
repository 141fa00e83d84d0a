#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "trllm/errors.hpp"

namespace trllm {

// Counters for the places where a total function silently takes a fallback path.
struct Telemetry {
  long rank_defaults = 0;          // labels that defaulted to rank D while parsing
  long judge_unparsable = 0;       // judge responses without a 0/1 token
  long zero_mass_fallbacks = 0;    // heatmap put no mass on any object
  long fusion_fallbacks = 0;       // every fused product was zero
  long truncation_saturated = 0;   // trajectory shorter than the requested progress

  Telemetry& operator+=(const Telemetry& o) {
    rank_defaults += o.rank_defaults;
    judge_unparsable += o.judge_unparsable;
    zero_mass_fallbacks += o.zero_mass_fallbacks;
    fusion_fallbacks += o.fusion_fallbacks;
    truncation_saturated += o.truncation_saturated;
    return *this;
  }
  bool operator==(const Telemetry&) const = default;
};

// label -> probability over a fixed, ordered label set. Probabilities are non-negative and
// sum to one.
class ObjectProbabilityMap {
public:
  ObjectProbabilityMap() = default;

  // Normalizes `weights`; an all-zero weight vector becomes the uniform distribution and
  // sets *fell_back.
  static ObjectProbabilityMap from_weights(std::vector<std::string> labels, std::vector<double> weights,
                                           bool* fell_back = nullptr) {
    if (labels.size() != weights.size()) throw ContractError("probability map: label/weight count mismatch");
    if (labels.empty()) throw ContractError("probability map: empty label set");
    check_unique(labels);
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("probability map: weights must be finite and >= 0");
      total += w;
    }
    if (fell_back) *fell_back = false;
    if (total <= 0.0) {
      if (fell_back) *fell_back = true;
      return uniform(std::move(labels));
    }
    for (double& w : weights) w /= total;
    ObjectProbabilityMap m;
    m.labels_ = std::move(labels);
    m.probs_ = std::move(weights);
    return m;
  }

  static ObjectProbabilityMap uniform(std::vector<std::string> labels) {
    if (labels.empty()) throw ContractError("probability map: empty label set");
    check_unique(labels);
    ObjectProbabilityMap m;
    m.probs_.assign(labels.size(), 1.0 / static_cast<double>(labels.size()));
    m.labels_ = std::move(labels);
    return m;
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<double>& probabilities() const { return probs_; }

  bool contains(std::string_view label) const { return index_of(label) < labels_.size(); }

  double at(std::string_view label) const {
    const auto i = index_of(label);
    if (i >= labels_.size()) throw ContractError("probability map: unknown label '" + std::string(label) + "'");
    return probs_[i];
  }

  std::size_t index_of(std::string_view label) const {
    return static_cast<std::size_t>(std::find(labels_.begin(), labels_.end(), label) - labels_.begin());
  }

  bool same_label_set(const ObjectProbabilityMap& other) const {
    if (other.size() != size()) return false;
    return std::all_of(labels_.begin(), labels_.end(), [&](const auto& l) { return other.contains(l); });
  }

  bool operator==(const ObjectProbabilityMap&) const = default;

private:
  static void check_unique(const std::vector<std::string>& labels) {
    std::unordered_set<std::string_view> seen;
    for (const auto& l : labels) {
      if (!seen.insert(l).second) throw ContractError("probability map: duplicate label '" + l + "'");
    }
  }

  std::vector<std::string> labels_;
  std::vector<double> probs_;
};

}  // namespace trllm
