#pragma once

// Goal-driven, noise-free simulated user.

#include <vector>

#include "iqrl/dialogue/act.hpp"
#include "iqrl/dialogue/domain.hpp"
#include "iqrl/random.hpp"

namespace iqrl::env {

using dialogue::ActType;
using dialogue::DialogueAct;
using dialogue::DomainSpec;

struct UserGoal {
  std::vector<std::size_t> values;  // one per slot

  bool operator==(const UserGoal&) const = default;
};

/// Constraint projection of a uniformly drawn entity, so it always has a match.
inline UserGoal sample_goal(const DomainSpec& domain, Rng& rng) {
  if (domain.db_size() == 0) throw Error("sample_goal: domain '" + domain.name() + "' has an empty database");
  return UserGoal{domain.database()[uniform_index(rng, domain.db_size())].values};
}

inline UserGoal sample_goal(const DomainSpec& domain, std::uint64_t seed) {
  Rng rng = derive_rng(seed, "goal");
  return sample_goal(domain, rng);
}

inline bool satisfies(const DomainSpec& domain, const UserGoal& goal, std::optional<std::size_t> entity) {
  return entity && domain.database().at(*entity).values == goal.values;
}

class UserSimulator {
 public:
  UserSimulator(const DomainSpec& domain, UserGoal goal)
      : domain_(&domain), goal_(std::move(goal)), informed_(domain.slot_count(), false) {}

  const UserGoal& goal() const { return goal_; }
  bool informed(std::size_t slot) const { return informed_.at(slot); }
  const std::optional<DialogueAct>& last_act() const { return last_; }

  /// True when the system act is a visible mistake given this user's state:
  /// a reprompt, a request for a slot already given, a wrong confirmation or
  /// offer, or a goodbye before the task is done.
  bool is_system_error(const DialogueAct& sys) const {
    switch (sys.type) {
      case ActType::repeat:
      case ActType::bye:
        return true;
      case ActType::request:
        return informed_.at(*sys.slot);
      case ActType::confirm:
        return goal_.values.at(*sys.slot) != *sys.value;
      case ActType::inform:
        return !satisfies(*domain_, goal_, sys.entity);
      default:
        return false;
    }
  }

  DialogueAct respond(const DialogueAct& sys) {
    DialogueAct reply = react(sys);
    if (reply.slot) informed_[*reply.slot] = true;
    last_ = reply;
    return reply;
  }

  /// Starts a new task with a fresh goal, keeping nothing from the old one.
  void reset(UserGoal goal) {
    goal_ = std::move(goal);
    informed_.assign(domain_->slot_count(), false);
    last_.reset();
  }

 private:
  std::size_t first_uninformed() const {
    for (std::size_t s = 0; s < informed_.size(); ++s)
      if (!informed_[s]) return s;
    return 0;
  }

  DialogueAct react(const DialogueAct& sys) const {
    switch (sys.type) {
      case ActType::hello: {
        const std::size_t s = first_uninformed();
        return DialogueAct::inform_slot(s, goal_.values[s]);
      }
      case ActType::request:
        return DialogueAct::inform_slot(*sys.slot, goal_.values.at(*sys.slot));
      case ActType::confirm:
        if (goal_.values.at(*sys.slot) == *sys.value) return DialogueAct::affirm();
        return DialogueAct::deny(*sys.slot, goal_.values[*sys.slot]);
      case ActType::inform:
        if (satisfies(*domain_, goal_, sys.entity)) return DialogueAct::bye();
        return DialogueAct::reject();
      case ActType::repeat:
        if (last_) return *last_;
        return react(DialogueAct::hello());
      case ActType::bye:
        return DialogueAct::reject();
      default:
        throw Error("user_respond: system act '" + std::string(dialogue::act_name(sys.type)) + "' is not a system act");
    }
  }

  const DomainSpec* domain_;
  UserGoal goal_;
  std::vector<bool> informed_;
  std::optional<DialogueAct> last_;
};

}  // namespace iqrl::env
