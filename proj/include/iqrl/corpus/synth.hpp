#pragma once

// Synthetic annotated corpus. A scripted system-initiative agent talks to the
// simulated user; with probability misunderstanding_rate the user's reply is
// garbled and the agent's next turn is a reprompt. Labels follow IqRule with
// reprompts as the flagged turns.

#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "iqrl/corpus/iq_rule.hpp"
#include "iqrl/corpus/tokenizer.hpp"
#include "iqrl/corpus/types.hpp"
#include "iqrl/dialogue/belief.hpp"
#include "iqrl/env/episode.hpp"
#include "iqrl/env/nlg.hpp"
#include "iqrl/env/user.hpp"

namespace iqrl::corpus {

struct SynthConfig {
  std::size_t n_dialogues = 400;
  double mean_turns = 65.0;
  std::size_t max_turns = 200;
  double mean_tokens = 26.0;
  std::size_t max_tokens = 76;
  double misunderstanding_rate = 0.25;
  std::uint64_t seed = 1;
  // Log-normal shape: with these sigmas the medians sit near 53 turns and
  // 24 tokens for the default means.
  double turns_sigma = 0.639;
  double tokens_sigma = 0.4;

  void validate() const {
    if (mean_turns < 1.0 || static_cast<double>(max_turns) < mean_turns) throw Error("synth: need max_turns >= mean_turns >= 1");
    if (mean_tokens < 1.0 || static_cast<double>(max_tokens) < mean_tokens) throw Error("synth: need max_tokens >= mean_tokens >= 1");
    if (!(misunderstanding_rate >= 0.0 && misunderstanding_rate <= 1.0)) throw Error("synth: misunderstanding_rate outside [0,1]");
    if (turns_sigma < 0.0 || tokens_sigma < 0.0) throw Error("synth: negative sigma");
  }
};

inline const std::vector<std::string>& filler_sentences() {
  static const std::vector<std::string> fillers{
      "You can say start over at any time.",
      "This is the automated information line.",
      "Your call may be recorded for quality purposes.",
      "I can help with schedules and routes.",
      "Let me look at that for you.",
      "One moment please while I check the schedule.",
      "Remember that you can ask for help whenever you want.",
      "Thank you for your patience.",
  };
  return fillers;
}

/// Log-normal draw with the given mean, rounded and clipped to [1, max].
inline std::size_t lognormal_count(Rng& rng, double mean, double sigma, std::size_t max) {
  const double mu = std::log(mean) - sigma * sigma / 2.0;
  const double x = std::exp(mu + sigma * standard_normal(rng));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(x)), 1, max);
}

inline AnnotatedDialogue synthesize_dialogue(const dialogue::DomainSpec& domain, const SynthConfig& cfg, std::size_t index) {
  using dialogue::ActType;
  using dialogue::DialogueAct;
  Rng rng = derive_rng(cfg.seed, "synth:" + std::to_string(index));
  const std::size_t length = lognormal_count(rng, cfg.mean_turns, cfg.turns_sigma, cfg.max_turns);
  const std::size_t slots = domain.slot_count();

  env::UserSimulator user(domain, env::sample_goal(domain, rng));
  dialogue::BeliefState belief = dialogue::BeliefState::fresh(domain);
  std::vector<bool> confirmed(slots, false);
  bool garbled = false, task_done = false;
  const policy::ActionSpace actions(domain);

  auto next_system_act = [&]() -> DialogueAct {
    if (garbled) return DialogueAct::repeat();
    if (task_done) {
      user.reset(env::sample_goal(domain, rng));
      belief = dialogue::BeliefState::fresh(domain);
      confirmed.assign(slots, false);
      task_done = false;
      return DialogueAct::hello();
    }
    for (std::size_t s = 0; s < slots; ++s)
      if (!belief.filled(s)) return DialogueAct::request(s);
    for (std::size_t s = 0; s < slots; ++s)
      if (!confirmed[s]) return DialogueAct::confirm(s, belief.top_value(s).first);
    return actions.ground(actions.inform(), belief, domain);
  };

  AnnotatedDialogue d;
  std::ostringstream id;
  id << "synth-" << std::setw(5) << std::setfill('0') << index;
  d.dialogue_id = id.str();
  std::vector<bool> flagged;
  for (std::size_t t = 0; t < length; ++t) {
    const DialogueAct sys = t == 0 ? DialogueAct::hello() : next_system_act();
    const DialogueAct intended = user.respond(sys);
    garbled = bernoulli(rng, cfg.misunderstanding_rate);
    const DialogueAct heard = garbled ? DialogueAct::garbled() : intended;
    if (!garbled) {
      belief = env::track(std::move(belief), sys, heard);
      if (sys.type == ActType::confirm && heard.type == ActType::affirm) confirmed[*sys.slot] = true;
      if (heard.type == ActType::deny && heard.slot) confirmed[*heard.slot] = false;
      task_done = heard.type == ActType::bye;
    } else {
      belief.last_user_act = ActType::garbled;
    }

    AnnotatedTurn turn;
    turn.turn_index = t;
    turn.system_text = env::nlg(sys, env::Side::system, domain, rng);
    turn.user_text = env::nlg(heard, env::Side::user, domain, rng);
    const std::size_t target = lognormal_count(rng, cfg.mean_tokens, cfg.tokens_sigma, cfg.max_tokens);
    std::size_t count = tokenize(turn.system_text).size() + tokenize(turn.user_text).size();
    const auto& fillers = filler_sentences();
    for (int attempt = 0; attempt < 8 && count < target; ++attempt) {
      const std::string& f = fillers[uniform_index(rng, fillers.size())];
      const std::size_t n = tokenize(f).size();
      if (count + n > target) continue;
      turn.system_text += " " + f;
      count += n;
    }
    d.turns.push_back(std::move(turn));
    flagged.push_back(sys.type == ActType::repeat);
  }
  const std::vector<int> labels = iq_labels(flagged);
  for (std::size_t t = 0; t < d.turns.size(); ++t) d.turns[t].iq_label = labels[t];
  return d;
}

inline Corpus synthesize_corpus(const dialogue::DomainSpec& domain, const SynthConfig& cfg) {
  cfg.validate();
  Corpus corpus;
  corpus.reserve(cfg.n_dialogues);
  for (std::size_t i = 0; i < cfg.n_dialogues; ++i) corpus.push_back(synthesize_dialogue(domain, cfg, i));
  return corpus;
}

struct CorpusStats {
  std::size_t dialogues = 0;
  std::size_t max_turns = 0;
  double mean_turns = 0.0;
  double median_turns = 0.0;
  std::size_t max_tokens = 0;
  double mean_tokens = 0.0;
  double median_tokens = 0.0;
};

/// Shape of the annotated corpus the generator imitates.
inline constexpr CorpusStats kShapeTargets{400, 200, 65.0, 53.0, 76, 26.0, 24.0};

inline double median_of(std::vector<std::size_t> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? static_cast<double>(v[n / 2]) : (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2.0;
}

/// Token counts are per turn, system and user text together.
inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.dialogues = corpus.size();
  std::vector<std::size_t> turns, tokens;
  for (const auto& d : corpus) {
    turns.push_back(d.turns.size());
    for (const auto& t : d.turns) tokens.push_back(tokenize(t.system_text).size() + tokenize(t.user_text).size());
  }
  auto mean = [](const std::vector<std::size_t>& v) {
    double total = 0.0;
    for (auto x : v) total += static_cast<double>(x);
    return v.empty() ? 0.0 : total / static_cast<double>(v.size());
  };
  s.mean_turns = mean(turns);
  s.mean_tokens = mean(tokens);
  s.median_turns = median_of(turns);
  s.median_tokens = median_of(tokens);
  for (auto x : turns) s.max_turns = std::max(s.max_turns, x);
  for (auto x : tokens) s.max_tokens = std::max(s.max_tokens, x);
  return s;
}

}  // namespace iqrl::corpus
