#pragma once

// Summary actions: request(s) for each slot, confirm(s) for each slot, then
// inform, repeat, bye. Grounding turns a summary action into a full act
// using the current belief.

#include <string>
#include <vector>

#include "iqrl/dialogue/act.hpp"
#include "iqrl/dialogue/belief.hpp"
#include "iqrl/dialogue/domain.hpp"

namespace iqrl::policy {

using dialogue::BeliefState;
using dialogue::DialogueAct;
using dialogue::DomainSpec;

enum class ActionKind { request, confirm, inform, repeat, bye };

class ActionSpace {
 public:
  explicit ActionSpace(std::size_t slot_count) : slots_(slot_count) {}
  explicit ActionSpace(const DomainSpec& domain) : slots_(domain.slot_count()) {}

  std::size_t size() const { return 2 * slots_ + 3; }
  std::size_t slot_count() const { return slots_; }

  std::size_t request(std::size_t s) const { return s; }
  std::size_t confirm(std::size_t s) const { return slots_ + s; }
  std::size_t inform() const { return 2 * slots_; }
  std::size_t repeat() const { return 2 * slots_ + 1; }
  std::size_t bye() const { return 2 * slots_ + 2; }

  ActionKind kind(std::size_t a) const {
    check(a);
    if (a < slots_) return ActionKind::request;
    if (a < 2 * slots_) return ActionKind::confirm;
    return static_cast<ActionKind>(2 + (a - 2 * slots_));
  }
  std::size_t slot(std::size_t a) const { return kind(a) == ActionKind::request ? a : a - slots_; }

  std::string name(std::size_t a, const DomainSpec* domain = nullptr) const {
    auto slot_name = [&](std::size_t s) { return domain ? domain->slot(s).name : std::to_string(s); };
    switch (kind(a)) {
      case ActionKind::request: return "request(" + slot_name(slot(a)) + ")";
      case ActionKind::confirm: return "confirm(" + slot_name(slot(a)) + ")";
      case ActionKind::inform: return "inform";
      case ActionKind::repeat: return "repeat";
      case ActionKind::bye: return "bye";
    }
    return {};
  }

  /// confirm(s) needs some belief in a value of s; inform needs a filled slot.
  std::vector<bool> executable(const BeliefState& belief) const {
    std::vector<bool> mask(size(), true);
    bool any_filled = false;
    for (std::size_t s = 0; s < slots_; ++s) {
      mask[confirm(s)] = belief.top_value(s).second > 0.0;
      any_filled = any_filled || belief.filled(s);
    }
    mask[inform()] = any_filled;
    return mask;
  }

  /// inform offers the first entity matching the filled slots' top values.
  DialogueAct ground(std::size_t a, const BeliefState& belief, const DomainSpec& domain) const {
    switch (kind(a)) {
      case ActionKind::request:
        return DialogueAct::request(slot(a));
      case ActionKind::confirm:
        return DialogueAct::confirm(slot(a), belief.top_value(slot(a)).first);
      case ActionKind::inform: {
        const auto constraints = belief.constraints();
        const auto& db = domain.database();
        for (std::size_t i = 0; i < db.size(); ++i) {
          bool ok = true;
          for (std::size_t s = 0; s < constraints.size() && ok; ++s) ok = !constraints[s] || db[i].values[s] == *constraints[s];
          if (ok) return DialogueAct::inform_entity(i);
        }
        return DialogueAct::inform_entity(std::nullopt);
      }
      case ActionKind::repeat:
        return DialogueAct::repeat();
      case ActionKind::bye:
        return DialogueAct::bye();
    }
    return DialogueAct::bye();
  }

 private:
  void check(std::size_t a) const {
    if (a >= size()) throw Error("action " + std::to_string(a) + " outside an action space of " + std::to_string(size()));
  }

  std::size_t slots_;
};

}  // namespace iqrl::policy
