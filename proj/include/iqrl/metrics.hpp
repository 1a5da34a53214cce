#pragma once

// Agreement metrics for ordinal labels 1..C: unweighted average recall,
// linearly weighted Cohen's kappa and Spearman's rank correlation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "iqrl/error.hpp"

namespace iqrl::metrics {

class UndefinedCorrelationError : public Error {
 public:
  UndefinedCorrelationError() : Error("spearman_rho: correlation undefined, both sequences are constant") {}
};

struct LabelPairs {
  std::vector<int> gold;
  std::vector<int> pred;
  int classes = 5;

  void validate() const {
    if (gold.empty()) throw Error("metrics: empty label sequence");
    if (gold.size() != pred.size()) {
      throw Error("metrics: gold has " + std::to_string(gold.size()) + " labels but pred has " +
                  std::to_string(pred.size()));
    }
    if (classes < 2) throw Error("metrics: at least two classes are required");
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] < 1 || gold[i] > classes || pred[i] < 1 || pred[i] > classes) {
        throw Error("metrics: label pair " + std::to_string(i) + " outside 1.." + std::to_string(classes));
      }
    }
  }
};

/// Mean recall over the classes that occur in gold.
inline double uar(const LabelPairs& pairs) {
  pairs.validate();
  const auto C = static_cast<std::size_t>(pairs.classes);
  std::vector<std::size_t> support(C + 1, 0), hits(C + 1, 0);
  for (std::size_t i = 0; i < pairs.gold.size(); ++i) {
    ++support[pairs.gold[i]];
    if (pairs.gold[i] == pairs.pred[i]) ++hits[pairs.gold[i]];
  }
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 1; c <= C; ++c) {
    if (support[c] == 0) continue;
    total += static_cast<double>(hits[c]) / static_cast<double>(support[c]);
    ++present;
  }
  return total / static_cast<double>(present);
}

/// Cohen's kappa with weights |i-j|/(C-1). When expected disagreement is zero
/// (both raters constant on the same class) kappa is defined as 1.
inline double weighted_kappa_linear(const LabelPairs& pairs) {
  pairs.validate();
  const auto C = static_cast<std::size_t>(pairs.classes);
  const double n = static_cast<double>(pairs.gold.size());
  std::vector<double> observed(C * C, 0.0), gold_margin(C, 0.0), pred_margin(C, 0.0);
  for (std::size_t i = 0; i < pairs.gold.size(); ++i) {
    const std::size_t g = pairs.gold[i] - 1, p = pairs.pred[i] - 1;
    observed[g * C + p] += 1.0 / n;
    gold_margin[g] += 1.0 / n;
    pred_margin[p] += 1.0 / n;
  }
  double disagree_observed = 0.0, disagree_expected = 0.0;
  for (std::size_t i = 0; i < C; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      const double w = std::abs(static_cast<double>(i) - static_cast<double>(j)) / static_cast<double>(C - 1);
      disagree_observed += w * observed[i * C + j];
      disagree_expected += w * gold_margin[i] * pred_margin[j];
    }
  }
  if (disagree_expected == 0.0) return 1.0;
  return 1.0 - disagree_observed / disagree_expected;
}

/// 1-based ranks with ties sharing their mean rank.
inline std::vector<double> average_ranks(std::span<const int> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

/// Pearson correlation of average ranks. Throws UndefinedCorrelationError when
/// both sequences are constant; returns 0 when exactly one is.
inline double spearman_rho(const LabelPairs& pairs) {
  pairs.validate();
  const std::vector<double> rg = average_ranks(pairs.gold), rp = average_ranks(pairs.pred);
  const double n = static_cast<double>(rg.size());
  const double mg = std::accumulate(rg.begin(), rg.end(), 0.0) / n;
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
  double cov = 0.0, vg = 0.0, vp = 0.0;
  for (std::size_t i = 0; i < rg.size(); ++i) {
    cov += (rg[i] - mg) * (rp[i] - mp);
    vg += (rg[i] - mg) * (rg[i] - mg);
    vp += (rp[i] - mp) * (rp[i] - mp);
  }
  if (vg == 0.0 && vp == 0.0) throw UndefinedCorrelationError();
  if (vg == 0.0 || vp == 0.0) return 0.0;
  return cov / std::sqrt(vg * vp);
}

struct Report {
  double uar = 0.0;
  double kappa = 0.0;
  double rho = 0.0;
  bool rho_defined = true;
  std::size_t n = 0;
};

/// All three metrics; rho is reported as undefined (NaN) instead of throwing.
inline Report evaluate(const LabelPairs& pairs) {
  Report r;
  r.uar = uar(pairs);
  r.kappa = weighted_kappa_linear(pairs);
  r.n = pairs.gold.size();
  try {
    r.rho = spearman_rho(pairs);
  } catch (const UndefinedCorrelationError&) {
    r.rho = std::nan("");
    r.rho_defined = false;
  }
  return r;
}

}  // namespace iqrl::metrics
