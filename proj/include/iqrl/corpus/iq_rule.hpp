#pragma once

// The planted interaction-quality rule used for synthetic labels and for the
// oracle estimator. A flagged system turn (a reprompt or another visible
// system error) costs one point; three clean turns in a row earn one back.

#include <algorithm>
#include <vector>

#include "iqrl/corpus/types.hpp"

namespace iqrl::corpus {

class IqRule {
 public:
  /// Label of the turn just processed.
  int push(bool flagged) {
    if (flagged) {
      iq_ = std::max(kMinIq, iq_ - 1);
      clean_run_ = 0;
    } else if (++clean_run_ == 3) {
      iq_ = std::min(kMaxIq, iq_ + 1);
      clean_run_ = 0;
    }
    return iq_;
  }
  int current() const { return iq_; }

 private:
  int iq_ = kMaxIq;
  int clean_run_ = 0;
};

inline std::vector<int> iq_labels(const std::vector<bool>& flagged) {
  IqRule rule;
  std::vector<int> labels;
  labels.reserve(flagged.size());
  for (bool f : flagged) labels.push_back(rule.push(f));
  return labels;
}

}  // namespace iqrl::corpus
