#pragma once

// Dialogue-wise cross-validation folds.

#include <set>
#include <string>
#include <vector>

#include "iqrl/corpus/types.hpp"
#include "iqrl/random.hpp"

namespace iqrl::corpus {

using Fold = std::vector<std::string>;

/// Seeded shuffle of the ids, dealt round-robin into k folds.
inline std::vector<Fold> make_folds(const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error("make_folds: k must be positive");
  if (ids.size() < k) {
    throw Error("make_folds: " + std::to_string(ids.size()) + " dialogues cannot fill " + std::to_string(k) + " folds");
  }
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size()) {
    throw Error("make_folds: duplicate dialogue ids");
  }
  std::vector<std::string> order = ids;
  Rng rng = derive_rng(seed, "folds");
  shuffle(std::span<std::string>(order), rng);
  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(order[i]);
  return folds;
}

inline std::vector<Fold> make_folds(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& d : corpus) ids.push_back(d.dialogue_id);
  return make_folds(ids, k, seed);
}

}  // namespace iqrl::corpus
