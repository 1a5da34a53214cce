#pragma once

// Focus belief tracker and the fixed-length belief summary seen by the policy.

#include <cmath>
#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "iqrl/dialogue/act.hpp"
#include "iqrl/dialogue/domain.hpp"

namespace iqrl::dialogue {

/// Per slot: probabilities of each value, the last entry being "none".
struct BeliefState {
  std::vector<std::vector<double>> slots;
  std::optional<ActType> last_user_act;
  std::size_t turn = 0;

  static BeliefState fresh(const DomainSpec& domain) {
    BeliefState b;
    for (const auto& s : domain.slots()) {
      std::vector<double> dist(s.values.size() + 1, 0.0);
      dist.back() = 1.0;
      b.slots.push_back(std::move(dist));
    }
    return b;
  }

  std::size_t value_count(std::size_t slot) const { return slots.at(slot).size() - 1; }

  /// Most probable real value ("none" excluded); ties go to the lowest index.
  std::pair<std::size_t, double> top_value(std::size_t slot) const {
    const auto& d = slots.at(slot);
    std::size_t best = 0;
    for (std::size_t v = 1; v + 1 < d.size(); ++v)
      if (d[v] > d[best]) best = v;
    return {best, d[best]};
  }

  bool filled(std::size_t slot) const { return top_value(slot).second > 0.5; }

  /// Argmax value of each filled slot.
  std::vector<std::optional<std::size_t>> constraints() const {
    std::vector<std::optional<std::size_t>> c(slots.size());
    for (std::size_t s = 0; s < slots.size(); ++s)
      if (filled(s)) c[s] = top_value(s).first;
    return c;
  }

  bool operator==(const BeliefState&) const = default;
};

/// b'(v) = p(v) + (1 - sum p) b(v), with p(none) = 0.
inline BeliefState focus_update(BeliefState belief, std::size_t slot, const std::map<std::size_t, double>& evidence) {
  auto& dist = belief.slots.at(slot);
  double mass = 0.0;
  for (const auto& [v, p] : evidence) {
    if (v + 1 >= dist.size()) throw Error("focus_update: value index " + std::to_string(v) + " out of range");
    if (!(p >= 0.0)) throw Error("focus_update: evidence probabilities must be non-negative");
    mass += p;
  }
  if (mass > 1.0 + 1e-9) throw Error("focus_update: evidence mass " + std::to_string(mass) + " exceeds 1");
  const double q = 1.0 - mass;
  for (double& b : dist) b *= q;
  for (const auto& [v, p] : evidence) dist[v] += p;
  return belief;
}

inline BeliefState focus_update(BeliefState belief, const DomainSpec& domain, const std::string& slot,
                                const std::map<std::string, double>& evidence) {
  const std::size_t s = domain.slot_index(slot);
  std::map<std::size_t, double> ev;
  for (const auto& [value, p] : evidence) ev[domain.value_index(s, value)] += p;
  return focus_update(std::move(belief), s, ev);
}

inline constexpr std::size_t kMatchBuckets = 5;

inline std::size_t summary_length(std::size_t slot_count) { return 4 * slot_count + kMatchBuckets + kActTypeCount; }

/// 0, 1, 2-5, 6-50, more than 50.
inline std::size_t match_bucket(std::size_t count) {
  if (count == 0) return 0;
  if (count == 1) return 1;
  if (count <= 5) return 2;
  if (count <= 50) return 3;
  return 4;
}

/// Per slot [p_max, p_second, normalized entropy, filled], then the match-count
/// bucket one-hot, then the last user act one-hot (all zero before any).
inline std::vector<double> summarize(const BeliefState& belief, std::size_t db_match_count) {
  std::vector<double> out;
  out.reserve(summary_length(belief.slots.size()));
  for (const auto& dist : belief.slots) {
    const std::size_t n = dist.size() - 1;
    double first = 0.0, second = 0.0, entropy = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      const double p = dist[v];
      if (p > first) {
        second = first;
        first = p;
      } else if (p > second) {
        second = p;
      }
    }
    for (double p : dist)
      if (p > 0.0) entropy -= p * std::log(p);
    out.push_back(first);
    out.push_back(second);
    out.push_back(std::clamp(entropy / std::log(static_cast<double>(n) + 1.0), 0.0, 1.0));
    out.push_back(first > 0.5 ? 1.0 : 0.0);
  }
  const std::size_t bucket = match_bucket(db_match_count);
  for (std::size_t i = 0; i < kMatchBuckets; ++i) out.push_back(i == bucket ? 1.0 : 0.0);
  for (std::size_t i = 0; i < kActTypeCount; ++i) {
    out.push_back(belief.last_user_act && static_cast<std::size_t>(*belief.last_user_act) == i ? 1.0 : 0.0);
  }
  return out;
}

}  // namespace iqrl::dialogue
