#pragma once

// Annotated transcripts. A turn is one system utterance followed by the user's
// reply; the IQ label, when present, belongs to the system utterance.

#include <optional>
#include <string>
#include <vector>

#include "iqrl/error.hpp"

namespace iqrl::corpus {

inline constexpr int kMinIq = 1;
inline constexpr int kMaxIq = 5;

struct AnnotatedTurn {
  std::size_t turn_index = 0;
  std::string system_text;
  std::string user_text;
  std::optional<int> iq_label;

  bool operator==(const AnnotatedTurn&) const = default;
};

struct AnnotatedDialogue {
  std::string dialogue_id;
  std::vector<AnnotatedTurn> turns;

  bool operator==(const AnnotatedDialogue&) const = default;

  bool fully_labeled() const {
    for (const auto& t : turns)
      if (!t.iq_label) return false;
    return !turns.empty();
  }
};

using Corpus = std::vector<AnnotatedDialogue>;

inline void validate(const AnnotatedDialogue& d) {
  if (d.turns.empty()) throw Error("dialogue '" + d.dialogue_id + "' has no turns");
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const AnnotatedTurn& t = d.turns[i];
    if (t.turn_index != i) {
      throw Error("dialogue '" + d.dialogue_id + "': turn indices are not contiguous from 0 (position " +
                  std::to_string(i) + " holds index " + std::to_string(t.turn_index) + ")");
    }
    if (t.iq_label && (*t.iq_label < kMinIq || *t.iq_label > kMaxIq)) {
      throw Error("dialogue '" + d.dialogue_id + "' turn " + std::to_string(i) + ": IQ label " +
                  std::to_string(*t.iq_label) + " outside 1..5");
    }
  }
}

}  // namespace iqrl::corpus
