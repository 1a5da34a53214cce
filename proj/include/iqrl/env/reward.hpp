#pragma once

// Episode returns. Each system turn costs one point; the episode end adds a
// bonus for task success (TS) or for estimated interaction quality (IQ).

#include <string>

#include "iqrl/error.hpp"

namespace iqrl::env {

enum class RewardKind { ts, iq };

struct RewardConfig {
  RewardKind kind = RewardKind::ts;
  double turn_penalty = -1.0;
  double success_bonus = 20.0;
  double iq_scale = 5.0;
  std::size_t max_turns = 25;
};

inline RewardKind parse_reward_kind(const std::string& s) {
  if (s == "ts") return RewardKind::ts;
  if (s == "iq") return RewardKind::iq;
  throw ParseError("reward kind must be ts or iq, got '" + s + "'");
}

inline void require_turns(std::size_t turns) {
  if (turns < 1) throw Error("reward: at least one turn is required");
}

inline double terminal_bonus_ts(bool success, const RewardConfig& cfg = {}) { return success ? cfg.success_bonus : 0.0; }

inline double terminal_bonus_iq(int iq, const RewardConfig& cfg = {}) {
  if (iq < 1 || iq > 5) throw Error("reward_iq: iq " + std::to_string(iq) + " outside 1..5");
  return (iq - 1) * cfg.iq_scale;
}

inline double reward_ts(std::size_t turns, bool success, const RewardConfig& cfg = {}) {
  require_turns(turns);
  return cfg.turn_penalty * static_cast<double>(turns) + terminal_bonus_ts(success, cfg);
}

inline double reward_iq(std::size_t turns, int iq, const RewardConfig& cfg = {}) {
  require_turns(turns);
  return cfg.turn_penalty * static_cast<double>(turns) + terminal_bonus_iq(iq, cfg);
}

}  // namespace iqrl::env
