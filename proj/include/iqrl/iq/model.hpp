#pragma once

// Hierarchical IQ estimator. Each turn's tokens go through a bidirectional GRU
// and are pooled by additive attention; the pooled turn vectors feed a
// unidirectional dialogue GRU whose state at every turn is classified into
// IQ 1..5.

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "iqrl/corpus/tokenizer.hpp"
#include "iqrl/corpus/types.hpp"
#include "iqrl/nn/gru.hpp"
#include "iqrl/nn/ops.hpp"
#include "iqrl/nn/tape.hpp"
#include "iqrl/nn/tensor.hpp"

namespace iqrl::iq {

using nn::ParameterSet;
using nn::Tape;
using nn::Tensor;
using nn::Var;

inline constexpr std::size_t kNumClasses = 5;

struct IqModelConfig {
  std::size_t vocab_size = 1;
  std::size_t embedding_dim = 300;
  std::size_t turn_hidden = 64;
  std::size_t attention_dim = 64;
  std::size_t dialogue_hidden = 64;
  std::size_t num_classes = kNumClasses;
  std::size_t max_context_turns = 100;
  double dropout_rate = 0.5;
  double attention_scale = 1.0;
  double lr = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch_dialogues = 8;
  double grad_clip = 5.0;  // 0 disables clipping
  std::size_t patience = 0;  // stop after this many epochs without dev gain; 0 never stops early
  std::uint64_t seed = 1;

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw Error(std::string("iq model config: ") + name + " must be positive");
    };
    positive(vocab_size, "vocab_size");
    positive(embedding_dim, "embedding_dim");
    positive(turn_hidden, "turn_hidden");
    positive(attention_dim, "attention_dim");
    positive(dialogue_hidden, "dialogue_hidden");
    positive(max_context_turns, "max_context_turns");
    positive(batch_dialogues, "batch_dialogues");
    if (num_classes != kNumClasses) throw Error("iq model config: num_classes must be 5");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("iq model config: dropout_rate must lie in [0,1)");
    if (!(lr > 0.0)) throw Error("iq model config: lr must be positive");
    if (grad_clip < 0.0) throw Error("iq model config: grad_clip must be non-negative");
  }

  /// Fields that fix parameter shapes or inference behaviour.
  std::vector<std::pair<std::string, std::string>> architecture() const {
    auto real = [](double v) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    return {{"vocab_size", std::to_string(vocab_size)},
            {"embedding_dim", std::to_string(embedding_dim)},
            {"turn_hidden", std::to_string(turn_hidden)},
            {"attention_dim", std::to_string(attention_dim)},
            {"dialogue_hidden", std::to_string(dialogue_hidden)},
            {"num_classes", std::to_string(num_classes)},
            {"max_context_turns", std::to_string(max_context_turns)},
            {"attention_scale", real(attention_scale)}};
  }
};

inline constexpr double kInitScale = 0.08;

/// Weights uniform(-0.08, 0.08) from the config seed, biases zero.
inline ParameterSet init_parameters(const IqModelConfig& cfg) {
  cfg.validate();
  ParameterSet p(cfg.seed);
  const std::size_t u = cfg.turn_hidden, a = cfg.attention_dim, ud = cfg.dialogue_hidden;
  p.add_uniform("embedding", {cfg.vocab_size, cfg.embedding_dim}, kInitScale);
  nn::add_gru_parameters(p, "turn.fwd", {cfg.embedding_dim, u}, kInitScale);
  nn::add_gru_parameters(p, "turn.bwd", {cfg.embedding_dim, u}, kInitScale);
  p.add_uniform("att.W", {a, 2 * u}, kInitScale);
  p.add_zeros("att.b", {a});
  p.add_uniform("att.v", {a}, kInitScale);
  nn::add_gru_parameters(p, "dialogue", {2 * u, ud}, kInitScale);
  p.add_uniform("out.W", {cfg.num_classes, ud}, kInitScale);
  p.add_zeros("out.b", {cfg.num_classes});
  return p;
}

/// Tape handles for all model parameters.
struct ModelVars {
  Var embedding;
  nn::GruVars turn_fwd, turn_bwd, dialogue;
  Var att_w, att_b, att_v, out_w, out_b;

  /// `trainable` binds gradient-collecting leaves, otherwise read-only ones.
  static ModelVars bind(Tape& tape, ParameterSet& params, bool trainable) {
    auto leaf = [&](const std::string& name) {
      return trainable ? tape.parameter(params.at(name)) : tape.constant_ref(params.at(name));
    };
    auto gru = [&](const std::string& prefix) {
      return trainable ? nn::GruVars::bind(tape, params, prefix) : nn::GruVars::bind_const(tape, params, prefix);
    };
    return {leaf("embedding"), gru("turn.fwd"), gru("turn.bwd"), gru("dialogue"), leaf("att.W"),
            leaf("att.b"),     leaf("att.v"),   leaf("out.W"),   leaf("out.b")};
  }

  static ModelVars bind_const(Tape& tape, const ParameterSet& params) {
    auto leaf = [&](const std::string& name) { return tape.constant_ref(params.at(name)); };
    return {leaf("embedding"),
            nn::GruVars::bind_const(tape, params, "turn.fwd"),
            nn::GruVars::bind_const(tape, params, "turn.bwd"),
            nn::GruVars::bind_const(tape, params, "dialogue"),
            leaf("att.W"),
            leaf("att.b"),
            leaf("att.v"),
            leaf("out.W"),
            leaf("out.b")};
  }
};

/// Dropout source for training; null at inference.
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;
};

struct TurnVars {
  Var alpha;   // [K] attention weights
  Var pooled;  // [2u]
};

inline Var embed_turn(Var table, std::span<const std::size_t> ids) { return nn::embedding(table, ids); }

inline TurnVars encode_turn(Var embedded, const ModelVars& m, double attention_scale, const Dropout& drop = {}) {
  Var h = nn::bigru_sequence(embedded, m.turn_fwd, m.turn_bwd);
  if (drop.rng && drop.rate > 0.0) h = nn::dropout(h, drop.rate, *drop.rng);
  Var scores = nn::matmul(nn::tanh(nn::linear_rows(h, m.att_w, m.att_b)), m.att_v);
  if (attention_scale != 1.0) scores = nn::scale(scores, attention_scale);
  Var alpha = nn::softmax(scores);
  return {alpha, nn::matmul(nn::transpose(h), alpha)};
}

/// Dialogue GRU states [T x u_d] over stacked turn vectors [T x 2u]. Past the
/// context limit m, the state at turn t is a fresh recurrence over the m
/// turns ending at t.
inline Var dialogue_states(Var turns, const ModelVars& m, std::size_t max_context) {
  Tape& tape = turns.tape();
  const std::size_t T = turns.shape()[0];
  Var h0 = tape.constant(Tensor({m.dialogue.hidden_dim()}));
  if (T <= max_context) return nn::gru_sequence(turns, h0, m.dialogue);
  Var head = nn::gru_sequence(nn::slice_rows(turns, 0, max_context), h0, m.dialogue);
  std::vector<Var> rows{head};
  for (std::size_t t = max_context; t < T; ++t) {
    Var window = nn::gru_sequence(nn::slice_rows(turns, t + 1 - max_context, t + 1), h0, m.dialogue);
    rows.push_back(nn::row(window, max_context - 1));
  }
  return nn::stack_rows(rows);
}

/// Per-turn class logits [T x C] for a dialogue given as token-id lists.
inline Var dialogue_logits(const std::vector<std::vector<std::size_t>>& turns, const ModelVars& m,
                           const IqModelConfig& cfg, const Dropout& drop = {},
                           std::vector<Var>* alphas = nullptr) {
  if (turns.empty()) throw Error("predict_sequence: empty dialogue");
  std::vector<Var> pooled;
  pooled.reserve(turns.size());
  for (const auto& ids : turns) {
    TurnVars tv = encode_turn(embed_turn(m.embedding, ids), m, cfg.attention_scale, drop);
    if (alphas) alphas->push_back(tv.alpha);
    pooled.push_back(tv.pooled);
  }
  Var states = dialogue_states(nn::stack_rows(pooled), m, cfg.max_context_turns);
  return nn::linear_rows(states, m.out_w, m.out_b);
}

struct IqPrediction {
  std::array<double, kNumClasses> probs{};
  int iq = 1;

  bool operator==(const IqPrediction&) const = default;
};

/// Most probable class in 1..5; ties go to the lowest class.
inline int argmax_class(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c)
    if (probs[c] > probs[best]) best = c;
  return static_cast<int>(best) + 1;
}

inline IqPrediction to_prediction(std::span<const double> logits) {
  IqPrediction p;
  const std::vector<double> probs = nn::softmax(logits);
  std::copy(probs.begin(), probs.end(), p.probs.begin());
  p.iq = argmax_class(probs);
  return p;
}

inline std::vector<IqPrediction> predictions_from_logits(const Tensor& logits) {
  std::vector<IqPrediction> out;
  const std::size_t C = logits.cols();
  for (std::size_t t = 0; t < logits.rows(); ++t) out.push_back(to_prediction(logits.data().subspan(t * C, C)));
  return out;
}

/// Inference with dropout off.
inline std::vector<IqPrediction> predict_sequence(const std::vector<std::vector<std::size_t>>& turns,
                                                  const ParameterSet& params, const IqModelConfig& cfg) {
  Tape tape;
  const ModelVars m = ModelVars::bind_const(tape, params);
  return predictions_from_logits(dialogue_logits(turns, m, cfg).value());
}

struct TurnEncoding {
  std::vector<double> alpha;
  std::vector<double> pooled;
};

/// Encoding of one turn from its embedded tokens ([K x d]).
inline TurnEncoding encode_turn(const Tensor& embedded, const ParameterSet& params, const IqModelConfig& cfg) {
  Tape tape;
  const ModelVars m = ModelVars::bind_const(tape, params);
  TurnVars tv = encode_turn(tape.constant_ref(embedded), m, cfg.attention_scale);
  return {tv.alpha.value().storage(), tv.pooled.value().storage()};
}

/// Plain-value row lookup.
inline Tensor embed_turn(std::span<const std::size_t> ids, const Tensor& table) {
  Tape tape;
  return embed_turn(tape.constant_ref(table), ids).value();
}

/// A trained estimator: configuration, vocabulary and parameters.
struct IqModel {
  IqModelConfig config;
  corpus::Vocab vocab;
  ParameterSet params;

  std::vector<std::vector<std::size_t>> encode(const corpus::AnnotatedDialogue& d) const {
    std::vector<std::vector<std::size_t>> turns;
    turns.reserve(d.turns.size());
    for (const auto& t : d.turns) turns.push_back(vocab.encode_turn(t));
    return turns;
  }

  std::vector<IqPrediction> predict(const corpus::AnnotatedDialogue& d) const {
    return predict_sequence(encode(d), params, config);
  }

  /// Prediction at the final turn.
  IqPrediction predict_final(const corpus::AnnotatedDialogue& d) const { return predict(d).back(); }
};

}  // namespace iqrl::iq
