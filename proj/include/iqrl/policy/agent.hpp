#pragma once

// GP-SARSA as an episode policy: posterior sampling and online updates
// while learning, greedy means otherwise.

#include "iqrl/env/episode.hpp"
#include "iqrl/policy/gpsarsa.hpp"

namespace iqrl::policy {

/// Throws ConfigMismatchError unless `gp` was trained on this domain's shapes.
inline void check_compatible(const GpSarsa& gp, const DomainSpec& domain) {
  const std::size_t dim = dialogue::summary_length(domain.slot_count()), actions = ActionSpace(domain).size();
  if (gp.feature_dim() != dim || gp.action_count() != actions) {
    throw ConfigMismatchError("policy has " + std::to_string(gp.feature_dim()) + " features and " +
                              std::to_string(gp.action_count()) + " actions, domain '" + domain.name() + "' needs " +
                              std::to_string(dim) + " and " + std::to_string(actions));
  }
}

class GpSarsaPolicy : public env::DialoguePolicy {
 public:
  explicit GpSarsaPolicy(GpSarsa gp) : gp_(std::move(gp)) {}
  GpSarsaPolicy(const DomainSpec& domain, GpConfig cfg)
      : gp_(dialogue::summary_length(domain.slot_count()), ActionSpace(domain).size(), cfg) {}

  const GpSarsa& gp() const { return gp_; }
  GpSarsa& gp() { return gp_; }

  std::size_t action_count() const override { return gp_.action_count(); }

  void begin_episode(bool learning) override {
    if (gp_.in_episode()) gp_.abort_episode();
    learning_ = learning;
    pending_.reset();
  }

  std::size_t choose(const std::vector<double>& summary, const std::vector<bool>& mask, Rng& rng) override {
    const std::size_t a = select_action(gp_, summary, learning_ ? SelectMode::sample : SelectMode::greedy, mask, rng);
    if (learning_) {
      GpPoint x{summary, a};
      if (!gp_.in_episode()) {
        gp_.start_episode(x);
      } else {
        if (!pending_) throw Error("GpSarsaPolicy: two choices without a reward in between");
        gp_.observe_step(*pending_, x);
      }
      pending_.reset();
    }
    return a;
  }

  void reward(double r, bool terminal) override {
    if (!learning_) return;
    if (terminal) {
      if (gp_.in_episode()) gp_.observe_step(r, std::nullopt);
      pending_.reset();
    } else {
      pending_ = r;
    }
  }

 private:
  GpSarsa gp_;
  bool learning_ = false;
  std::optional<double> pending_;
};

}  // namespace iqrl::policy
