#pragma once

// Brute-force metric formulas, written independently of iqrl/metrics.hpp.

#include <cmath>
#include <vector>

namespace iqrl::oracle {

inline double uar(const std::vector<int>& gold, const std::vector<int>& pred, int classes) {
  double sum = 0.0;
  int present = 0;
  for (int c = 1; c <= classes; ++c) {
    int support = 0, hit = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] != c) continue;
      ++support;
      hit += pred[i] == c;
    }
    if (support > 0) {
      sum += static_cast<double>(hit) / support;
      ++present;
    }
  }
  return sum / present;
}

// Integer-count form: kappa = 1 - n * sum w O / sum w (row_i * col_j).
inline double kappa_linear(const std::vector<int>& gold, const std::vector<int>& pred, int classes) {
  const long n = static_cast<long>(gold.size());
  double num = 0.0, den = 0.0;
  for (int i = 1; i <= classes; ++i) {
    for (int j = 1; j <= classes; ++j) {
      long o = 0, gi = 0, pj = 0;
      for (long k = 0; k < n; ++k) {
        o += gold[k] == i && pred[k] == j;
        gi += gold[k] == i;
        pj += pred[k] == j;
      }
      const double w = std::abs(i - j) / static_cast<double>(classes - 1);
      num += w * static_cast<double>(o) * static_cast<double>(n);
      den += w * static_cast<double>(gi) * static_cast<double>(pj);
    }
  }
  return den == 0.0 ? 1.0 : 1.0 - num / den;
}

// Rank = 1 + (#smaller) + (#equal - 1)/2, quadratic time.
inline std::vector<double> ranks(const std::vector<int>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (int x : v) {
      less += x < v[i];
      equal += x == v[i];
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double spearman(const std::vector<int>& gold, const std::vector<int>& pred) {
  const auto a = ranks(gold), b = ranks(pred);
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    sab += a[i] * b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
  }
  const double cov = sab - sa * sb / n;
  const double va = saa - sa * sa / n, vb = sbb - sb * sb / n;
  return cov / std::sqrt(va * vb);
}

}  // namespace iqrl::oracle
