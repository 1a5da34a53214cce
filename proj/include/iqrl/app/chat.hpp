#pragma once

// Text chat between a trained policy and a person at the terminal.

#include <iostream>

#include "iqrl/corpus/tokenizer.hpp"
#include "iqrl/env/episode.hpp"
#include "iqrl/policy/agent.hpp"

namespace iqrl::app {

using dialogue::ActType;
using dialogue::DialogueAct;

/// Maps typed text to a user act. Slot values must appear verbatim as whole
/// words; anything unrecognised is garbled.
class KeywordMatcher {
 public:
  explicit KeywordMatcher(const dialogue::DomainSpec& domain) : domain_(&domain) {
    for (std::size_t s = 0; s < domain.slot_count(); ++s)
      for (std::size_t v = 0; v < domain.slot(s).values.size(); ++v)
        values_.push_back({s, v, corpus::tokenize(domain.slot(s).values[v])});
  }

  /// `last_system` resolves a value that several slots share: the slot it
  /// asked about wins, then the first slot not yet believed filled.
  DialogueAct match(const std::string& text, const dialogue::BeliefState& belief,
                    const std::optional<DialogueAct>& last_system = std::nullopt) const {
    const std::vector<std::string> words = corpus::tokenize(text);
    auto has = [&](std::initializer_list<const char*> keys) {
      for (const auto& w : words)
        for (const char* k : keys)
          if (w == k) return true;
      return false;
    };
    if (has({"bye", "goodbye"})) return DialogueAct::bye();
    const auto value = find_value(words, belief, last_system);
    if (has({"no", "wrong", "nope"})) return value ? DialogueAct::deny(value->first, value->second) : DialogueAct::reject();
    if (value) return DialogueAct::inform_slot(value->first, value->second);
    if (has({"yes", "yeah", "yep", "correct", "right"})) return DialogueAct::affirm();
    if (has({"repeat", "again", "pardon"})) return DialogueAct::repeat();
    return DialogueAct::garbled();
  }

 private:
  struct Entry {
    std::size_t slot, value;
    std::vector<std::string> words;
  };

  static bool contains(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i)
      if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    return false;
  }

  std::optional<std::pair<std::size_t, std::size_t>> find_value(const std::vector<std::string>& words,
                                                                const dialogue::BeliefState& belief,
                                                                const std::optional<DialogueAct>& last) const {
    std::vector<const Entry*> hits;
    std::size_t longest = 0;
    for (const auto& e : values_) {
      if (!contains(words, e.words)) continue;
      if (e.words.size() > longest) {
        hits.clear();
        longest = e.words.size();
      }
      if (e.words.size() == longest) hits.push_back(&e);
    }
    if (hits.empty()) return std::nullopt;
    auto rank = [&](const Entry* e) {
      if (last && last->slot == e->slot && (last->type == ActType::request || last->type == ActType::confirm)) return 0;
      const auto& dist = belief.slots.at(e->slot);
      return *std::max_element(dist.begin(), dist.end() - 1) > 0.5 ? 2 : 1;
    };
    const Entry* best = hits.front();
    for (const Entry* e : hits)
      if (rank(e) < rank(best)) best = e;
    return std::make_pair(best->slot, best->value);
  }

  const dialogue::DomainSpec* domain_;
  std::vector<Entry> values_;
};

struct ChatResult {
  corpus::AnnotatedDialogue transcript;
  std::vector<DialogueAct> system_acts;
  std::vector<DialogueAct> user_acts;
  bool ended_by_bye = false;
};

/// Greedy policy turns against lines read from `in`; stops on "bye", end of
/// input or the turn limit.
inline ChatResult run_chat(const policy::GpSarsa& gp, const dialogue::DomainSpec& domain, std::istream& in,
                           std::ostream& out, std::uint64_t seed, std::size_t max_turns,
                           const std::string& dialogue_id = "chat") {
  policy::check_compatible(gp, domain);
  const policy::ActionSpace actions(domain);
  const KeywordMatcher matcher(domain);
  Rng nlg_rng = derive_rng(seed, "nlg"), policy_rng = derive_rng(seed, "policy");
  dialogue::BeliefState belief = dialogue::BeliefState::fresh(domain);
  ChatResult r;
  r.transcript.dialogue_id = dialogue_id;

  DialogueAct sys = DialogueAct::hello();
  while (r.system_acts.size() < max_turns) {
    const std::string system_text = env::nlg(sys, env::Side::system, domain, nlg_rng);
    out << "system: " << system_text << "\n> " << std::flush;
    std::string line;
    if (!std::getline(in, line)) break;
    const DialogueAct user = matcher.match(line, belief, sys);
    r.transcript.turns.push_back({r.transcript.turns.size(), system_text, line, std::nullopt});
    r.system_acts.push_back(sys);
    r.user_acts.push_back(user);
    if (user.type == ActType::bye) {
      r.ended_by_bye = true;
      break;
    }
    belief = env::track(std::move(belief), sys, user);
    const auto summary = dialogue::summarize(belief, dialogue::db_count(domain, belief.constraints()));
    const std::size_t a = policy::select_action(gp, summary, policy::SelectMode::greedy, actions.executable(belief), policy_rng);
    sys = actions.ground(a, belief, domain);
  }
  out << "\n";
  return r;
}

}  // namespace iqrl::app
