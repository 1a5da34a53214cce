#pragma once

// Dialogue acts shared by the system, the simulated user and the renderer.

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "iqrl/error.hpp"

namespace iqrl::dialogue {

enum class ActType { hello, request, inform, confirm, affirm, deny, repeat, bye, garbled };

inline constexpr std::size_t kActTypeCount = 9;
inline constexpr std::array<std::string_view, kActTypeCount> kActTypeNames{
    "hello", "request", "inform", "confirm", "affirm", "deny", "repeat", "bye", "garbled"};

inline std::string_view act_name(ActType t) { return kActTypeNames[static_cast<std::size_t>(t)]; }

inline ActType parse_act_type(std::string_view name) {
  for (std::size_t i = 0; i < kActTypeCount; ++i)
    if (kActTypeNames[i] == name) return static_cast<ActType>(i);
  throw ParseError("unknown act type '" + std::string(name) + "'");
}

/// request: slot. confirm: slot + value. System inform: entity. User inform
/// and deny: slot + value (for deny, the corrected value, or nothing when
/// the user only rejects).
struct DialogueAct {
  ActType type = ActType::hello;
  std::optional<std::size_t> slot;
  std::optional<std::size_t> value;
  std::optional<std::size_t> entity;

  bool operator==(const DialogueAct&) const = default;

  static DialogueAct hello() { return {ActType::hello, {}, {}, {}}; }
  static DialogueAct request(std::size_t s) { return {ActType::request, s, {}, {}}; }
  static DialogueAct confirm(std::size_t s, std::size_t v) { return {ActType::confirm, s, v, {}}; }
  static DialogueAct inform_slot(std::size_t s, std::size_t v) { return {ActType::inform, s, v, {}}; }
  /// nullopt entity: the system found nothing to offer.
  static DialogueAct inform_entity(std::optional<std::size_t> e) { return {ActType::inform, {}, {}, e}; }
  static DialogueAct affirm() { return {ActType::affirm, {}, {}, {}}; }
  static DialogueAct deny(std::size_t s, std::size_t v) { return {ActType::deny, s, v, {}}; }
  /// Deny without a correction.
  static DialogueAct reject() { return {ActType::deny, {}, {}, {}}; }
  static DialogueAct repeat() { return {ActType::repeat, {}, {}, {}}; }
  static DialogueAct bye() { return {ActType::bye, {}, {}, {}}; }
  static DialogueAct garbled() { return {ActType::garbled, {}, {}, {}}; }
};

}  // namespace iqrl::dialogue
