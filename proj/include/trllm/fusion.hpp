#pragma once

// Semantic x physical fusion and deterministic ranking.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "trllm/probability.hpp"

namespace trllm {

// Elementwise product, renormalized, in `semantic`'s label order. When every product is zero
// the result is uniform and telemetry->fusion_fallbacks is incremented.
inline ObjectProbabilityMap fuse(const ObjectProbabilityMap& semantic, const ObjectProbabilityMap& physical,
                                 Telemetry* telemetry = nullptr) {
  if (!semantic.same_label_set(physical)) throw ContractError("fuse: label sets differ");
  std::vector<double> products;
  products.reserve(semantic.size());
  for (std::size_t i = 0; i < semantic.size(); ++i) {
    products.push_back(semantic.probabilities()[i] * physical.at(semantic.labels()[i]));
  }
  bool fell_back = false;
  auto out = ObjectProbabilityMap::from_weights(semantic.labels(), std::move(products), &fell_back);
  if (fell_back && telemetry) ++telemetry->fusion_fallbacks;
  return out;
}

// Non-increasing probability, ties by ascending label.
inline std::vector<std::string> top_k(const ObjectProbabilityMap& p, std::size_t k) {
  if (k < 1) throw ContractError("top_k: k must be >= 1");
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& probs = p.probabilities();
  const auto& labels = p.labels();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return labels[a] < labels[b];
  });
  order.resize(std::min(k, order.size()));
  std::vector<std::string> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(labels[i]);
  return out;
}

}  // namespace trllm
