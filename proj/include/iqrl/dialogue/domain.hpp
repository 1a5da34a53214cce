#pragma once

// Slot ontologies and the entity database.
//
// Ontology file (JSON):
//   {"name": "...",
//    "slots": [{"name": "origin", "lexical": "departure place", "values": ["...", ...]}, ...],
//    "db": [{"origin": "...", ..., "payload": "..."}, ...]      or
//    "db_gen": {"size": 10000, "seed": 1}}
// "lexical" is optional (defaults to the slot name with '_' read as a space);
// "payload" is optional (defaults to a rendering of the entity's values).

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "iqrl/error.hpp"
#include "iqrl/kv.hpp"
#include "iqrl/random.hpp"

namespace iqrl::dialogue {

struct Slot {
  std::string name;
  std::string lexical;
  std::vector<std::string> values;
};

struct Entity {
  std::vector<std::size_t> values;  // one value index per slot
  std::string payload;

  bool operator==(const Entity&) const = default;
};

class DomainSpec {
 public:
  DomainSpec() = default;
  DomainSpec(std::string name, std::vector<Slot> slots) : name_(std::move(name)), slots_(std::move(slots)) {
    if (slots_.empty()) throw Error("domain '" + name_ + "' has no slots");
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      Slot& slot = slots_[s];
      if (slot.values.empty()) throw Error("domain '" + name_ + "': slot '" + slot.name + "' has no values");
      if (slot.lexical.empty()) {
        slot.lexical = slot.name;
        std::replace(slot.lexical.begin(), slot.lexical.end(), '_', ' ');
      }
      if (!slot_index_.emplace(slot.name, s).second) throw Error("domain '" + name_ + "': duplicate slot '" + slot.name + "'");
      auto& index = value_index_.emplace_back();
      for (std::size_t v = 0; v < slot.values.size(); ++v) {
        if (!index.emplace(slot.values[v], v).second) {
          throw Error("domain '" + name_ + "': slot '" + slot.name + "' repeats value '" + slot.values[v] + "'");
        }
      }
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<Slot>& slots() const { return slots_; }
  std::size_t slot_count() const { return slots_.size(); }
  const Slot& slot(std::size_t s) const { return slots_.at(s); }
  const std::vector<Entity>& database() const { return database_; }
  std::size_t db_size() const { return database_.size(); }

  std::size_t slot_index(const std::string& name) const {
    auto it = slot_index_.find(name);
    if (it == slot_index_.end()) throw Error("domain '" + name_ + "': unknown slot '" + name + "'");
    return it->second;
  }
  std::optional<std::size_t> find_value(std::size_t slot, const std::string& value) const {
    auto it = value_index_.at(slot).find(value);
    if (it == value_index_.at(slot).end()) return std::nullopt;
    return it->second;
  }
  std::size_t value_index(std::size_t slot, const std::string& value) const {
    auto v = find_value(slot, value);
    if (!v) throw Error("domain '" + name_ + "': unknown value '" + value + "' for slot '" + slots_.at(slot).name + "'");
    return *v;
  }
  const std::string& value_name(std::size_t slot, std::size_t value) const { return slots_.at(slot).values.at(value); }

  std::string default_payload(const std::vector<std::size_t>& values) const {
    std::string out;
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      if (s) out += ", ";
      out += slots_[s].lexical + " " + slots_[s].values[values[s]];
    }
    return out;
  }

  void set_database(std::vector<Entity> db) {
    for (std::size_t i = 0; i < db.size(); ++i) {
      if (db[i].values.size() != slots_.size()) throw Error("domain '" + name_ + "': entity " + std::to_string(i) + " has wrong arity");
      for (std::size_t s = 0; s < slots_.size(); ++s) {
        if (db[i].values[s] >= slots_[s].values.size()) {
          throw Error("domain '" + name_ + "': entity " + std::to_string(i) + " value out of range for '" + slots_[s].name + "'");
        }
      }
    }
    database_ = std::move(db);
  }

  /// Product of the value-set sizes, saturating.
  std::uint64_t tuple_space() const {
    std::uint64_t total = 1;
    for (const auto& s : slots_) {
      if (total > UINT64_MAX / s.values.size()) return UINT64_MAX;
      total *= s.values.size();
    }
    return total;
  }

 private:
  std::string name_;
  std::vector<Slot> slots_;
  std::unordered_map<std::string, std::size_t> slot_index_;
  std::vector<std::unordered_map<std::string, std::size_t>> value_index_;
  std::vector<Entity> database_;
};

/// Replaces the database with `size` distinct uniformly drawn tuples.
inline DomainSpec generate_db(DomainSpec spec, std::size_t size, std::uint64_t seed) {
  if (size > spec.tuple_space()) {
    throw Error("generate_db: " + std::to_string(size) + " distinct entities exceed the " +
                std::to_string(spec.tuple_space()) + " possible tuples of '" + spec.name() + "'");
  }
  Rng rng = derive_rng(seed, "db:" + spec.name());
  std::set<std::vector<std::size_t>> seen;
  std::vector<Entity> db;
  db.reserve(size);
  while (db.size() < size) {
    std::vector<std::size_t> values(spec.slot_count());
    for (std::size_t s = 0; s < values.size(); ++s) values[s] = uniform_index(rng, spec.slot(s).values.size());
    if (!seen.insert(values).second) continue;
    std::string payload = spec.default_payload(values);
    db.push_back(Entity{std::move(values), std::move(payload)});
  }
  spec.set_database(std::move(db));
  return spec;
}

/// Indices of entities matching every constraint; nullopt slots are free.
inline std::vector<std::size_t> db_query(const DomainSpec& spec, const std::vector<std::optional<std::size_t>>& constraints) {
  if (constraints.size() != spec.slot_count()) throw Error("db_query: constraint vector has wrong arity");
  std::vector<std::size_t> hits;
  const auto& db = spec.database();
  for (std::size_t i = 0; i < db.size(); ++i) {
    bool ok = true;
    for (std::size_t s = 0; s < constraints.size() && ok; ++s) ok = !constraints[s] || db[i].values[s] == *constraints[s];
    if (ok) hits.push_back(i);
  }
  return hits;
}

inline std::vector<std::size_t> db_query(const DomainSpec& spec, const std::map<std::string, std::string>& constraints) {
  std::vector<std::optional<std::size_t>> c(spec.slot_count());
  for (const auto& [slot, value] : constraints) {
    const std::size_t s = spec.slot_index(slot);
    c[s] = spec.value_index(s, value);
  }
  return db_query(spec, c);
}

inline std::size_t db_count(const DomainSpec& spec, const std::vector<std::optional<std::size_t>>& constraints) {
  std::size_t n = 0;
  for (const Entity& e : spec.database()) {
    bool ok = true;
    for (std::size_t s = 0; s < constraints.size() && ok; ++s) ok = !constraints[s] || e.values[s] == *constraints[s];
    n += ok;
  }
  return n;
}

struct LoadOptions {
  std::optional<std::size_t> db_size;  // overrides db_gen.size
};

inline DomainSpec parse_domain(const std::string& text, const std::string& where, const LoadOptions& opts = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ": " + e.what());
  }
  auto fail = [&](const std::string& at, const std::string& msg) { throw ParseError(where + ": " + at + ": " + msg); };
  if (!j.is_object()) fail("/", "expected an object");
  if (!j.contains("name") || !j["name"].is_string()) fail("/name", "missing string");
  if (!j.contains("slots") || !j["slots"].is_array()) fail("/slots", "missing array");
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < j["slots"].size(); ++i) {
    const auto& js = j["slots"][i];
    const std::string at = "/slots/" + std::to_string(i);
    if (!js.is_object() || !js.contains("name") || !js["name"].is_string()) fail(at + "/name", "missing string");
    if (!js.contains("values") || !js["values"].is_array()) fail(at + "/values", "missing array");
    Slot slot;
    slot.name = js["name"].get<std::string>();
    if (js.contains("lexical")) {
      if (!js["lexical"].is_string()) fail(at + "/lexical", "expected string");
      slot.lexical = js["lexical"].get<std::string>();
    }
    for (std::size_t v = 0; v < js["values"].size(); ++v) {
      if (!js["values"][v].is_string()) fail(at + "/values/" + std::to_string(v), "expected string");
      slot.values.push_back(js["values"][v].get<std::string>());
    }
    slots.push_back(std::move(slot));
  }
  DomainSpec spec;
  try {
    spec = DomainSpec(j["name"].get<std::string>(), std::move(slots));
  } catch (const Error& e) {
    fail("/slots", e.what());
  }
  const bool has_db = j.contains("db"), has_gen = j.contains("db_gen");
  if (has_db == has_gen) fail("/", "exactly one of db or db_gen is required");
  if (has_db) {
    if (!j["db"].is_array()) fail("/db", "expected array");
    std::vector<Entity> db;
    for (std::size_t i = 0; i < j["db"].size(); ++i) {
      const auto& je = j["db"][i];
      const std::string at = "/db/" + std::to_string(i);
      if (!je.is_object()) fail(at, "expected object");
      Entity e;
      for (std::size_t s = 0; s < spec.slot_count(); ++s) {
        const std::string& name = spec.slot(s).name;
        if (!je.contains(name) || !je[name].is_string()) fail(at + "/" + name, "missing string");
        auto v = spec.find_value(s, je[name].get<std::string>());
        if (!v) fail(at + "/" + name, "value '" + je[name].get<std::string>() + "' not in the slot's value set");
        e.values.push_back(*v);
      }
      for (const auto& [key, value] : je.items()) {
        if (key == "payload") continue;
        bool known = false;
        for (const auto& s : spec.slots()) known = known || s.name == key;
        if (!known) fail(at + "/" + key, "unknown slot");
      }
      if (je.contains("payload")) {
        if (!je["payload"].is_string()) fail(at + "/payload", "expected string");
        e.payload = je["payload"].get<std::string>();
      } else {
        e.payload = spec.default_payload(e.values);
      }
      db.push_back(std::move(e));
    }
    spec.set_database(std::move(db));
    return spec;
  }
  const auto& g = j["db_gen"];
  if (!g.is_object() || !g.contains("size") || !g["size"].is_number_unsigned()) fail("/db_gen/size", "expected non-negative integer");
  if (!g.contains("seed") || !g["seed"].is_number_unsigned()) fail("/db_gen/seed", "expected non-negative integer");
  const std::size_t size = opts.db_size.value_or(g["size"].get<std::size_t>());
  try {
    return generate_db(std::move(spec), size, g["seed"].get<std::uint64_t>());
  } catch (const Error& e) {
    fail("/db_gen", e.what());
  }
  return spec;
}

inline DomainSpec load_domain(const std::string& path, const LoadOptions& opts = {}) {
  return parse_domain(read_file(path), path, opts);
}

}  // namespace iqrl::dialogue
