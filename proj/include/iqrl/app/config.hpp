#pragma once

// Experiment configuration: a flat key = value file. Every key has a default;
// unknown keys are rejected before any work starts.

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "iqrl/corpus/synth.hpp"
#include "iqrl/env/reward.hpp"
#include "iqrl/iq/model.hpp"
#include "iqrl/kv.hpp"
#include "iqrl/policy/gpsarsa.hpp"

#ifndef IQRL_DATA_DIR
#define IQRL_DATA_DIR "data"
#endif

namespace iqrl::app {

enum class EstimatorMode { oracle, inprocess, service };

inline EstimatorMode parse_estimator_mode(const std::string& s) {
  if (s == "oracle") return EstimatorMode::oracle;
  if (s == "inprocess") return EstimatorMode::inprocess;
  if (s == "service") return EstimatorMode::service;
  throw ParseError("estimator must be oracle, inprocess or service, got '" + s + "'");
}

inline std::string estimator_name(EstimatorMode m) {
  switch (m) {
    case EstimatorMode::oracle:
      return "oracle";
    case EstimatorMode::inprocess:
      return "inprocess";
    case EstimatorMode::service:
      return "service";
  }
  return "?";
}

inline std::string reward_name(env::RewardKind k) { return k == env::RewardKind::ts ? "ts" : "iq"; }

struct ExperimentConfig {
  std::string domain = "letsgo4";
  std::string data_dir = IQRL_DATA_DIR;
  std::size_t db_size = 0;  // 0 keeps the domain file's size
  std::string out_dir = "results";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3};

  // corpus
  std::string corpus;          // empty: <out_dir>/corpus.jsonl
  std::string corpus_mapping;  // empty: the corpus is JSONL
  corpus::SynthConfig synth;

  // IQ estimator
  iq::IqModelConfig iq;
  std::size_t min_count = 1;
  std::size_t folds = 10;
  std::string embeddings;
  std::string iq_model;  // empty: <out_dir>/iq-model.bin

  // reinforcement learning
  env::RewardConfig reward;
  EstimatorMode estimator = EstimatorMode::oracle;
  std::size_t n_train_dialogues = 1000;
  std::size_t n_eval_dialogues = 100;
  policy::GpConfig gp{10.0, 0.001, 1.0, 1000};
  std::string policy_dir;  // empty: out_dir
  std::string socket = "/tmp/iqrl-iq.sock";
  double service_timeout = 30.0;

  // chat
  std::string policy_file;  // empty: the first seed's policy in policy_dir
  std::string transcript;   // empty: <out_dir>/chat-transcript.jsonl

  ExperimentConfig() {
    iq.embedding_dim = 16;
    iq.turn_hidden = 16;
    iq.attention_dim = 16;
    iq.dialogue_hidden = 32;
    iq.lr = 0.005;
    iq.patience = 3;
    synth.seed = 11;
  }

  std::string domain_path() const {
    if (domain.find('/') != std::string::npos || domain.ends_with(".json")) return domain;
    return data_dir + "/domains/" + domain + ".json";
  }
  std::string corpus_path() const { return corpus.empty() ? out_dir + "/corpus.jsonl" : corpus; }
  std::string iq_model_path() const { return iq_model.empty() ? out_dir + "/iq-model.bin" : iq_model; }
  std::string policies() const { return policy_dir.empty() ? out_dir : policy_dir; }
  std::string policy_path(std::uint64_t s) const {
    return policies() + "/policy-" + domain_tag() + "-" + reward_name(reward.kind) + "-seed" + std::to_string(s) + ".bin";
  }
  std::string chat_policy_path() const { return policy_file.empty() ? policy_path(seeds.front()) : policy_file; }
  std::string transcript_path() const { return transcript.empty() ? out_dir + "/chat-transcript.jsonl" : transcript; }

  /// Domain name without directories or extension.
  std::string domain_tag() const {
    std::string tag = domain.substr(domain.find_last_of('/') + 1);
    if (tag.ends_with(".json")) tag.resize(tag.size() - 5);
    return tag;
  }
};

namespace detail {

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_number(const std::string& text, const std::string& key) {
  T v{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ParseError("config key " + key + ": '" + text + "' is not a valid number");
  }
  return v;
}

inline std::vector<std::uint64_t> parse_list(const std::string& text, const std::string& key) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::uint64_t>(trim(item), key));
  if (out.empty()) throw ParseError("config key " + key + ": empty list");
  return out;
}

inline std::string join_list(const std::vector<std::uint64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string doc;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

/// The complete key table, in documentation order.
inline const std::vector<ConfigKey>& config_keys() {
  using C = ExperimentConfig;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto text = [&](std::string name, std::string doc, std::string C::*field) {
      k.push_back({name, doc, [field](C& c, const std::string& v) { c.*field = v; },
                   [field](const C& c) { return c.*field; }});
    };
    auto size = [&](std::string name, std::string doc, std::function<std::size_t&(C&)> ref) {
      k.push_back({name, doc, [ref, name](C& c, const std::string& v) { ref(c) = detail::parse_number<std::size_t>(v, name); },
                   [ref](const C& c) { return std::to_string(ref(const_cast<C&>(c))); }});
    };
    auto real = [&](std::string name, std::string doc, std::function<double&(C&)> ref) {
      k.push_back({name, doc, [ref, name](C& c, const std::string& v) { ref(c) = detail::parse_number<double>(v, name); },
                   [ref](const C& c) { return detail::format_real(ref(const_cast<C&>(c))); }});
    };

    text("domain", "domain name under <data_dir>/domains, or a path to a domain JSON file", &C::domain);
    text("data_dir", "directory holding domains/", &C::data_dir);
    size("db_size", "entity count override for generated databases; 0 keeps the file's db_gen size",
         [](C& c) -> std::size_t& { return c.db_size; });
    text("out_dir", "directory for every file a command writes", &C::out_dir);
    k.push_back({"seed", "seed for corpus folds and IQ model training",
                 [](C& c, const std::string& v) { c.seed = detail::parse_number<std::uint64_t>(v, "seed"); },
                 [](const C& c) { return std::to_string(c.seed); }});
    k.push_back({"seeds", "comma-separated RL seeds, one policy per seed",
                 [](C& c, const std::string& v) { c.seeds = detail::parse_list(v, "seeds"); },
                 [](const C& c) { return detail::join_list(c.seeds); }});

    text("corpus", "corpus file; empty means <out_dir>/corpus.jsonl", &C::corpus);
    text("corpus_mapping", "column mapping file for a delimited corpus; empty means JSONL", &C::corpus_mapping);
    size("synth_dialogues", "dialogues generated by gen-corpus", [](C& c) -> std::size_t& { return c.synth.n_dialogues; });
    real("synth_mean_turns", "mean turns per generated dialogue", [](C& c) -> double& { return c.synth.mean_turns; });
    size("synth_max_turns", "turn cap per generated dialogue", [](C& c) -> std::size_t& { return c.synth.max_turns; });
    real("synth_mean_tokens", "mean tokens per generated turn", [](C& c) -> double& { return c.synth.mean_tokens; });
    size("synth_max_tokens", "token cap per generated turn", [](C& c) -> std::size_t& { return c.synth.max_tokens; });
    real("misunderstanding_rate", "probability that a generated user turn is misheard",
         [](C& c) -> double& { return c.synth.misunderstanding_rate; });
    k.push_back({"synth_seed", "seed for gen-corpus",
                 [](C& c, const std::string& v) { c.synth.seed = detail::parse_number<std::uint64_t>(v, "synth_seed"); },
                 [](const C& c) { return std::to_string(c.synth.seed); }});

    size("iq_embedding_dim", "word embedding size d", [](C& c) -> std::size_t& { return c.iq.embedding_dim; });
    size("iq_turn_hidden", "turn BiGRU size u per direction", [](C& c) -> std::size_t& { return c.iq.turn_hidden; });
    size("iq_attention_dim", "attention projection size", [](C& c) -> std::size_t& { return c.iq.attention_dim; });
    size("iq_dialogue_hidden", "dialogue GRU size", [](C& c) -> std::size_t& { return c.iq.dialogue_hidden; });
    size("iq_max_context_turns", "dialogue GRU window m", [](C& c) -> std::size_t& { return c.iq.max_context_turns; });
    real("iq_attention_scale", "multiplier on attention scores", [](C& c) -> double& { return c.iq.attention_scale; });
    real("iq_dropout", "dropout rate on BiGRU outputs during training", [](C& c) -> double& { return c.iq.dropout_rate; });
    real("iq_lr", "Adam learning rate", [](C& c) -> double& { return c.iq.lr; });
    size("iq_epochs", "maximum training epochs", [](C& c) -> std::size_t& { return c.iq.epochs; });
    size("iq_batch_dialogues", "dialogues per Adam step", [](C& c) -> std::size_t& { return c.iq.batch_dialogues; });
    real("iq_grad_clip", "global gradient norm clip; 0 disables", [](C& c) -> double& { return c.iq.grad_clip; });
    size("iq_patience", "epochs without dev UAR gain before stopping; 0 never stops early",
         [](C& c) -> std::size_t& { return c.iq.patience; });
    size("min_count", "minimum token frequency for the vocabulary", [](C& c) -> std::size_t& { return c.min_count; });
    size("folds", "cross-validation folds for train-iq", [](C& c) -> std::size_t& { return c.folds; });
    text("embeddings", "optional text embedding file loaded into the embedding table", &C::embeddings);
    text("iq_model", "IQ model file; empty means <out_dir>/iq-model.bin", &C::iq_model);

    k.push_back({"reward", "ts or iq",
                 [](C& c, const std::string& v) { c.reward.kind = env::parse_reward_kind(v); },
                 [](const C& c) { return reward_name(c.reward.kind); }});
    k.push_back({"estimator", "oracle, inprocess or service",
                 [](C& c, const std::string& v) { c.estimator = parse_estimator_mode(v); },
                 [](const C& c) { return estimator_name(c.estimator); }});
    size("n_train_dialogues", "training episodes per seed", [](C& c) -> std::size_t& { return c.n_train_dialogues; });
    size("n_eval_dialogues", "greedy evaluation episodes per seed", [](C& c) -> std::size_t& { return c.n_eval_dialogues; });
    size("max_turns", "system turns before an episode fails", [](C& c) -> std::size_t& { return c.reward.max_turns; });
    real("turn_penalty", "per-turn reward", [](C& c) -> double& { return c.reward.turn_penalty; });
    real("success_bonus", "terminal bonus for success under ts", [](C& c) -> double& { return c.reward.success_bonus; });
    real("iq_scale", "terminal bonus per IQ point above 1 under iq", [](C& c) -> double& { return c.reward.iq_scale; });
    real("gp_noise_std", "GP-SARSA observation noise sigma", [](C& c) -> double& { return c.gp.noise_std; });
    real("gp_nu", "dictionary sparsification threshold", [](C& c) -> double& { return c.gp.nu; });
    real("gp_gamma", "discount factor", [](C& c) -> double& { return c.gp.gamma; });
    size("gp_cap", "maximum dictionary size", [](C& c) -> std::size_t& { return c.gp.cap; });
    text("policy_dir", "where run-rl writes and eval-rl reads policies; empty means out_dir", &C::policy_dir);
    text("socket", "Unix socket path of the IQ service", &C::socket);
    real("service_timeout", "seconds to wait for an IQ service reply", [](C& c) -> double& { return c.service_timeout; });

    text("policy_file", "policy for chat; empty means the first seed's policy in policy_dir", &C::policy_file);
    text("transcript", "chat transcript output; empty means <out_dir>/chat-transcript.jsonl", &C::transcript);
    return k;
  }();
  return keys;
}

inline void set_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigMismatchError("unknown config key '" + key + "'");
}

inline void apply_config(ExperimentConfig& cfg, const std::vector<KvEntry>& entries, const std::string& what) {
  for (const auto& e : entries) {
    try {
      set_config_key(cfg, e.key, e.value);
    } catch (const ConfigMismatchError& err) {
      throw ConfigMismatchError(what + ":" + std::to_string(e.line) + ": " + err.what());
    } catch (const Error& err) {
      throw ParseError(what + ":" + std::to_string(e.line) + ": " + err.what());
    }
  }
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& what = "config") {
  ExperimentConfig cfg;
  apply_config(cfg, parse_kv(in, what), what);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg;
  apply_config(cfg, parse_kv_file(path), path);
  return cfg;
}

/// Every key with its current value; parses back to the same configuration.
inline std::string dump_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += "# " + k.doc + "\n" + k.name + " = " + k.get(cfg) + "\n";
  return out;
}

}  // namespace iqrl::app
