#pragma once

// IQ estimators consulted at the end of an episode.

#include <array>
#include <string>
#include <vector>

#include "iqrl/corpus/iq_rule.hpp"
#include "iqrl/corpus/types.hpp"

namespace iqrl::env {

struct IqEstimate {
  int iq = 5;
  std::array<double, 5> probs{};
};

class IqEstimator {
 public:
  virtual ~IqEstimator() = default;
  /// `error_log[t]` marks system turn t as a visible system error.
  virtual IqEstimate estimate(const corpus::AnnotatedDialogue& transcript, const std::vector<bool>& error_log) = 0;
};

/// The planted rule applied to the simulator's own error log.
class OracleIqEstimator : public IqEstimator {
 public:
  IqEstimate estimate(const corpus::AnnotatedDialogue& transcript, const std::vector<bool>& error_log) override {
    if (transcript.turns.empty()) throw Error("estimate_iq: empty transcript '" + transcript.dialogue_id + "'");
    if (error_log.size() != transcript.turns.size()) {
      throw Error("estimate_iq: error log of episode '" + transcript.dialogue_id + "' does not match its transcript");
    }
    IqEstimate e;
    e.iq = corpus::iq_labels(error_log).back();
    e.probs[e.iq - 1] = 1.0;
    return e;
  }
};

}  // namespace iqrl::env
