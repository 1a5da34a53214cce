#pragma once

// Straight-line evaluation of the IQ model from its parameter tensors, with
// plain loops and no use of the library's ops or tape.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "iqrl/iq/model.hpp"

namespace iqrl::oracle {

using Vec = std::vector<double>;

inline Vec gru_step(const Vec& x, const Vec& h, const nn::ParameterSet& p, const std::string& prefix) {
  const std::size_t u = h.size(), d = x.size();
  auto affine = [&](const char* gate, const Vec& hin) {
    const nn::Tensor& W = p.at(prefix + ".W_" + gate);
    const nn::Tensor& U = p.at(prefix + ".U_" + gate);
    const nn::Tensor& b = p.at(prefix + ".b_" + gate);
    Vec out(u);
    for (std::size_t i = 0; i < u; ++i) {
      double s = b[i];
      for (std::size_t j = 0; j < d; ++j) s += W[i * d + j] * x[j];
      for (std::size_t j = 0; j < u; ++j) s += U[i * u + j] * hin[j];
      out[i] = s;
    }
    return out;
  };
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  Vec z = affine("z", h), r = affine("r", h);
  for (auto& v : z) v = sig(v);
  for (auto& v : r) v = sig(v);
  Vec rh(u);
  for (std::size_t i = 0; i < u; ++i) rh[i] = r[i] * h[i];
  Vec hc = affine("h", rh);
  Vec out(u);
  for (std::size_t i = 0; i < u; ++i) out[i] = (1 - z[i]) * h[i] + z[i] * std::tanh(hc[i]);
  return out;
}

inline Vec softmax(const Vec& s) {
  const double m = *std::max_element(s.begin(), s.end());
  Vec e(s.size());
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) total += e[i] = std::exp(s[i] - m);
  for (double& v : e) v /= total;
  return e;
}

struct TurnResult {
  Vec alpha;
  Vec pooled;
};

/// Token rows [K][d] -> attention weights and pooled [2u].
inline TurnResult encode_turn(const std::vector<Vec>& E, const nn::ParameterSet& p, const iq::IqModelConfig& cfg) {
  const std::size_t K = E.size(), u = cfg.turn_hidden, a = cfg.attention_dim;
  std::vector<Vec> fwd(K), bwd(K);
  Vec h(u, 0.0);
  for (std::size_t k = 0; k < K; ++k) fwd[k] = h = gru_step(E[k], h, p, "turn.fwd");
  h.assign(u, 0.0);
  for (std::size_t k = K; k-- > 0;) bwd[k] = h = gru_step(E[k], h, p, "turn.bwd");
  std::vector<Vec> H(K);
  for (std::size_t k = 0; k < K; ++k) {
    H[k] = fwd[k];
    H[k].insert(H[k].end(), bwd[k].begin(), bwd[k].end());
  }
  const nn::Tensor &W = p.at("att.W"), &b = p.at("att.b"), &v = p.at("att.v");
  Vec scores(K);
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < a; ++i) {
      double acc = b[i];
      for (std::size_t j = 0; j < 2 * u; ++j) acc += W[i * 2 * u + j] * H[k][j];
      s += v[i] * std::tanh(acc);
    }
    scores[k] = s * cfg.attention_scale;
  }
  TurnResult r;
  r.alpha = softmax(scores);
  r.pooled.assign(2 * u, 0.0);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < 2 * u; ++j) r.pooled[j] += r.alpha[k] * H[k][j];
  return r;
}

/// Per-turn class distributions; beyond the context limit each turn gets a
/// fresh recurrence over its window.
inline std::vector<Vec> dialogue_probs(const std::vector<std::vector<std::size_t>>& turns, const nn::ParameterSet& p,
                                       const iq::IqModelConfig& cfg) {
  const nn::Tensor& emb = p.at("embedding");
  const std::size_t d = cfg.embedding_dim, ud = cfg.dialogue_hidden;
  std::vector<Vec> pooled;
  for (const auto& ids : turns) {
    std::vector<Vec> E;
    for (std::size_t id : ids) E.emplace_back(emb.data().begin() + id * d, emb.data().begin() + (id + 1) * d);
    pooled.push_back(encode_turn(E, p, cfg).pooled);
  }
  const nn::Tensor &W = p.at("out.W"), &b = p.at("out.b");
  std::vector<Vec> out;
  for (std::size_t t = 0; t < turns.size(); ++t) {
    const std::size_t m = cfg.max_context_turns;
    const std::size_t start = t + 1 > m && turns.size() > m ? t + 1 - m : 0;
    Vec h(ud, 0.0);
    for (std::size_t s = start; s <= t; ++s) h = gru_step(pooled[s], h, p, "dialogue");
    Vec logits(cfg.num_classes);
    for (std::size_t c = 0; c < logits.size(); ++c) {
      double acc = b[c];
      for (std::size_t j = 0; j < ud; ++j) acc += W[c * ud + j] * h[j];
      logits[c] = acc;
    }
    out.push_back(softmax(logits));
  }
  return out;
}

}  // namespace iqrl::oracle
