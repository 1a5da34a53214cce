#pragma once

// One simulated dialogue: a fixed system greeting, then policy turns until
// the user says goodbye after a correct offer or the turn limit is hit.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iqrl/corpus/types.hpp"
#include "iqrl/dialogue/belief.hpp"
#include "iqrl/env/estimator.hpp"
#include "iqrl/env/nlg.hpp"
#include "iqrl/env/reward.hpp"
#include "iqrl/env/user.hpp"
#include "iqrl/policy/action_space.hpp"

namespace iqrl::env {

using dialogue::BeliefState;

class DialoguePolicy {
 public:
  virtual ~DialoguePolicy() = default;
  virtual std::size_t action_count() const = 0;
  virtual void begin_episode(bool learning) { (void)learning; }
  virtual std::size_t choose(const std::vector<double>& summary, const std::vector<bool>& mask, Rng& rng) = 0;
  /// Reward for the last chosen action.
  virtual void reward(double r, bool terminal) {
    (void)r;
    (void)terminal;
  }
};

/// Requests every slot once in order, then informs.
class ScriptedPolicy : public DialoguePolicy {
 public:
  explicit ScriptedPolicy(std::size_t slot_count) : actions_(slot_count) {}
  std::size_t action_count() const override { return actions_.size(); }
  void begin_episode(bool) override { step_ = 0; }
  std::size_t choose(const std::vector<double>&, const std::vector<bool>&, Rng&) override {
    const std::size_t s = step_++;
    return s < actions_.slot_count() ? actions_.request(s) : actions_.inform();
  }

 private:
  policy::ActionSpace actions_;
  std::size_t step_ = 0;
};

struct EpisodeResult {
  std::size_t turns = 0;
  bool success = false;
  std::optional<int> final_iq;
  double return_value = 0.0;
  corpus::AnnotatedDialogue transcript;
  std::vector<bool> error_log;
  std::vector<DialogueAct> system_acts;
  std::vector<DialogueAct> user_acts;

  bool operator==(const EpisodeResult&) const = default;
};

/// Belief change caused by a user act, given the system act it answers.
inline BeliefState track(BeliefState belief, const DialogueAct& sys, const DialogueAct& user) {
  if ((user.type == ActType::inform || user.type == ActType::deny) && user.slot && user.value) {
    belief = dialogue::focus_update(std::move(belief), *user.slot, {{*user.value, 1.0}});
  } else if (user.type == ActType::affirm && sys.type == ActType::confirm) {
    belief = dialogue::focus_update(std::move(belief), *sys.slot, {{*sys.value, 1.0}});
  }
  belief.last_user_act = user.type;
  ++belief.turn;
  return belief;
}

struct EpisodeOptions {
  bool learning = false;
  std::string episode_id;  // defaults to "episode-<seed>"
};

inline EpisodeResult run_episode(DialoguePolicy& policy, const DomainSpec& domain, const RewardConfig& cfg,
                                 IqEstimator* estimator, std::uint64_t seed, const EpisodeOptions& opts = {}) {
  const policy::ActionSpace actions(domain);
  if (policy.action_count() != actions.size()) {
    throw Error("run_episode: policy has " + std::to_string(policy.action_count()) + " actions but domain '" +
                domain.name() + "' needs " + std::to_string(actions.size()));
  }
  if (cfg.max_turns < 1) throw Error("run_episode: max_turns must be at least 1");
  if (cfg.kind == RewardKind::iq && !estimator) throw Error("run_episode: IQ reward needs an estimator");

  Rng goal_rng = derive_rng(seed, "goal"), nlg_rng = derive_rng(seed, "nlg"), policy_rng = derive_rng(seed, "policy");
  UserSimulator user(domain, sample_goal(domain, goal_rng));
  BeliefState belief = BeliefState::fresh(domain);
  EpisodeResult result;
  result.transcript.dialogue_id = opts.episode_id.empty() ? "episode-" + std::to_string(seed) : opts.episode_id;

  auto play = [&](const DialogueAct& sys) {
    result.error_log.push_back(user.is_system_error(sys));
    const DialogueAct reply = user.respond(sys);
    corpus::AnnotatedTurn turn;
    turn.turn_index = result.turns++;
    turn.system_text = nlg(sys, Side::system, domain, nlg_rng);
    turn.user_text = nlg(reply, Side::user, domain, nlg_rng);
    result.transcript.turns.push_back(std::move(turn));
    result.system_acts.push_back(sys);
    result.user_acts.push_back(reply);
    belief = track(std::move(belief), sys, reply);
    return reply;
  };

  policy.begin_episode(opts.learning);
  play(DialogueAct::hello());
  while (result.turns < cfg.max_turns) {
    const auto summary = dialogue::summarize(belief, dialogue::db_count(domain, belief.constraints()));
    const std::size_t a = policy.choose(summary, actions.executable(belief), policy_rng);
    const DialogueAct reply = play(actions.ground(a, belief, domain));
    if (reply.type == ActType::bye) {
      result.success = true;
      break;
    }
    if (result.turns < cfg.max_turns) policy.reward(cfg.turn_penalty, false);
  }

  double bonus = terminal_bonus_ts(result.success, cfg);
  if (estimator) result.final_iq = estimator->estimate(result.transcript, result.error_log).iq;
  if (cfg.kind == RewardKind::iq) bonus = terminal_bonus_iq(*result.final_iq, cfg);
  result.return_value = cfg.turn_penalty * static_cast<double>(result.turns) + bonus;
  // The greeting is not a policy decision, so the learner never sees its cost.
  if (result.turns > 1) policy.reward(cfg.turn_penalty + bonus, true);
  return result;
}

}  // namespace iqrl::env
