#pragma once

#include "iqrl/env/estimator.hpp"
#include "iqrl/env/service.hpp"
#include "iqrl/iq/model.hpp"

namespace iqrl::iq {

/// Runs the model in the calling process on the final turn.
class InProcessIqEstimator : public env::IqEstimator {
 public:
  explicit InProcessIqEstimator(const IqModel& model) : model_(&model) {}

  env::IqEstimate estimate(const corpus::AnnotatedDialogue& transcript, const std::vector<bool>&) override {
    if (transcript.turns.empty()) throw Error("estimate_iq: empty transcript '" + transcript.dialogue_id + "'");
    const IqPrediction p = model_->predict_final(transcript);
    return {p.iq, p.probs};
  }

 private:
  const IqModel* model_;
};

/// Service handler sharing one read-only model across connections.
inline env::EstimateHandler model_handler(const IqModel& model) {
  return [&model](const corpus::AnnotatedDialogue& d) {
    const IqPrediction p = model.predict_final(d);
    return env::IqEstimate{p.iq, p.probs};
  };
}

}  // namespace iqrl::iq
