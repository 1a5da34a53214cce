#pragma once

// Mini-batch Adam training of the IQ model and pooled evaluation.

#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "iqrl/iq/model.hpp"
#include "iqrl/metrics.hpp"
#include "iqrl/nn/adam.hpp"

namespace iqrl::iq {

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // summed over labeled turns
  double train_uar = 0.0;
  std::optional<double> dev_uar;
};

struct TrainOptions {
  const corpus::Corpus* dev = nullptr;
  std::optional<corpus::Vocab> vocab;                 // built from the training corpus when absent
  std::function<void(IqModel&)> init;                 // runs after initialisation, e.g. to load embeddings
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  IqModel model;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
};

/// Zero-based class targets; every turn must carry a label in 1..5.
inline std::vector<int> label_targets(const corpus::AnnotatedDialogue& d) {
  std::vector<int> targets;
  for (std::size_t t = 0; t < d.turns.size(); ++t) {
    const auto& label = d.turns[t].iq_label;
    if (!label || *label < corpus::kMinIq || *label > corpus::kMaxIq) {
      throw Error("train: dialogue '" + d.dialogue_id + "' turn " + std::to_string(t) +
                  (label ? " has label " + std::to_string(*label) + " outside 1..5" : " has no IQ label"));
    }
    targets.push_back(*label - 1);
  }
  return targets;
}

struct EvalResult {
  metrics::Report report;
  metrics::LabelPairs pairs;
};

/// Pools every labeled turn across the corpus, then scores.
inline EvalResult evaluate(const IqModel& model, const corpus::Corpus& corpus) {
  EvalResult r;
  r.pairs.classes = static_cast<int>(kNumClasses);
  for (const auto& d : corpus) {
    const auto preds = model.predict(d);
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      if (!d.turns[t].iq_label) continue;
      r.pairs.gold.push_back(*d.turns[t].iq_label);
      r.pairs.pred.push_back(preds[t].iq);
    }
  }
  if (r.pairs.gold.empty()) throw Error("evaluate: corpus has no labeled turns");
  r.report = metrics::evaluate(r.pairs);
  return r;
}

inline TrainResult train(const corpus::Corpus& corpus, IqModelConfig cfg, const TrainOptions& opts = {}) {
  if (corpus.empty()) throw Error("train: empty corpus");
  std::vector<std::vector<int>> targets;
  for (const auto& d : corpus) targets.push_back(label_targets(d));

  TrainResult result;
  result.model.vocab = opts.vocab ? *opts.vocab : corpus::build_vocab(corpus);
  cfg.vocab_size = result.model.vocab.size();
  result.model.config = cfg;
  result.model.params = init_parameters(cfg);
  if (opts.init) opts.init(result.model);
  IqModel& model = result.model;

  std::vector<std::vector<std::vector<std::size_t>>> inputs;
  for (const auto& d : corpus) inputs.push_back(model.encode(d));

  nn::AdamState adam;
  adam.lr = cfg.lr;
  Rng shuffle_rng = derive_rng(cfg.seed, "shuffle");
  Rng dropout_rng = derive_rng(cfg.seed, "dropout");
  const Dropout drop{cfg.dropout_rate, &dropout_rng};
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  std::optional<ParameterSet> best;
  double best_dev = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), shuffle_rng);
    EpochStats stats;
    stats.epoch = epoch;
    metrics::LabelPairs seen{{}, {}, static_cast<int>(kNumClasses)};
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_dialogues) {
      model.params.zero_grad();
      const std::size_t stop = std::min(order.size(), start + cfg.batch_dialogues);
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t di = order[i];
        Tape tape;
        const ModelVars m = ModelVars::bind(tape, model.params, true);
        Var logits = dialogue_logits(inputs[di], m, cfg, drop);
        Var loss = nn::softmax_cross_entropy_rows(logits, targets[di]);
        tape.backward(loss);
        stats.loss += loss.value()[0];
        const Tensor& lv = logits.value();
        for (std::size_t t = 0; t < lv.rows(); ++t) {
          seen.gold.push_back(targets[di][t] + 1);
          seen.pred.push_back(argmax_class(lv.data().subspan(t * kNumClasses, kNumClasses)));
        }
      }
      if (cfg.grad_clip > 0.0) nn::clip_grad_norm(model.params, cfg.grad_clip);
      nn::adam_step(model.params, adam);
    }
    stats.train_uar = metrics::uar(seen);
    if (opts.dev && !opts.dev->empty()) {
      stats.dev_uar = evaluate(model, *opts.dev).report.uar;
      if (*stats.dev_uar > best_dev) {
        best_dev = *stats.dev_uar;
        best = model.params;
        result.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    result.history.push_back(stats);
    if (opts.on_epoch) opts.on_epoch(stats);
    if (stats.dev_uar && cfg.patience > 0 && (since_best >= cfg.patience || best_dev >= 1.0)) break;
  }
  if (best) {
    model.params = std::move(*best);
  } else {
    result.best_epoch = result.history.size();
  }
  model.params.zero_grad();
  return result;
}

}  // namespace iqrl::iq
