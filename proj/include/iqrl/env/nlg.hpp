#pragma once

// Template surface realisation. Placeholders: {slot} (lexical slot name),
// {value}, {payload}.

#include <map>
#include <string>
#include <vector>

#include "iqrl/dialogue/act.hpp"
#include "iqrl/dialogue/domain.hpp"
#include "iqrl/random.hpp"

namespace iqrl::env {

using dialogue::ActType;
using dialogue::DialogueAct;
using dialogue::DomainSpec;

enum class Side { system, user };

struct TemplateKey {
  Side side;
  ActType type;
  bool bare = false;  // system inform with nothing to offer, or a deny without correction

  auto operator<=>(const TemplateKey&) const = default;
};

using TemplateTable = std::map<TemplateKey, std::vector<std::string>>;

inline const TemplateTable& default_templates() {
  static const TemplateTable table{
      {{Side::system, ActType::hello},
       {"Welcome. How may I help you?", "Hello, how can I help you today?", "Hi there, what are you looking for?"}},
      {{Side::system, ActType::request},
       {"What is the {slot}?", "Please tell me the {slot}.", "Which {slot} would you like?"}},
      {{Side::system, ActType::confirm},
       {"You want {value} as the {slot}, right?", "Did you say {value} for the {slot}?",
        "Just to check, the {slot} is {value}?"}},
      {{Side::system, ActType::inform}, {"I found this: {payload}.", "Here is a match, {payload}.", "There is {payload}."}},
      {{Side::system, ActType::inform, true},
       {"Nothing matches those constraints yet.", "I have no result for that so far.", "There is no match for that."}},
      {{Side::system, ActType::repeat},
       {"I am sorry, I did not catch that. Could you repeat it?", "Sorry, could you say that again?",
        "Pardon me, I did not understand. Please repeat."}},
      {{Side::system, ActType::bye}, {"Thank you for calling, goodbye.", "Goodbye and have a nice day.", "Bye for now."}},
      {{Side::user, ActType::hello}, {"Hello.", "Hi.", "Good evening."}},
      {{Side::user, ActType::inform}, {"{value}.", "The {slot} is {value}.", "I need {value} for the {slot}."}},
      {{Side::user, ActType::affirm}, {"Yes.", "Yes, that is right.", "Correct."}},
      {{Side::user, ActType::deny}, {"No, the {slot} is {value}.", "That is wrong, I said {value}.", "No, I need {value}."}},
      {{Side::user, ActType::deny, true},
       {"No, that is not what I want.", "No, that is not it.", "That is wrong."}},
      {{Side::user, ActType::repeat}, {"What?", "Can you repeat that?", "Pardon?"}},
      {{Side::user, ActType::bye}, {"Thank you, goodbye.", "Great, bye.", "That is all, thanks."}},
      {{Side::user, ActType::garbled},
       {"uh hmm the the", "wait what no hold on", "mm sorry my uh phone", "er can you um"}},
  };
  return table;
}

inline std::string fill_template(std::string text, const std::string& key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

inline std::string nlg(const DialogueAct& act, Side side, const DomainSpec& domain, Rng& rng,
                       const TemplateTable& table = default_templates()) {
  const bool bare = (side == Side::system && act.type == ActType::inform && !act.entity) ||
                    (side == Side::user && act.type == ActType::deny && !act.slot);
  auto it = table.find(TemplateKey{side, act.type, bare});
  if (it == table.end() || it->second.empty()) {
    throw Error(std::string("nlg: no template for ") + (side == Side::system ? "system" : "user") + " act '" +
                std::string(dialogue::act_name(act.type)) + "'");
  }
  std::string text = it->second[uniform_index(rng, it->second.size())];
  if (act.slot) text = fill_template(std::move(text), "{slot}", domain.slot(*act.slot).lexical);
  if (act.slot && act.value) text = fill_template(std::move(text), "{value}", domain.value_name(*act.slot, *act.value));
  if (act.entity) text = fill_template(std::move(text), "{payload}", domain.database().at(*act.entity).payload);
  if (text.find('{') != std::string::npos) {
    throw Error("nlg: act '" + std::string(dialogue::act_name(act.type)) + "' lacks a field its template needs");
  }
  return text;
}

}  // namespace iqrl::env
