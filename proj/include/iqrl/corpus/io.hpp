#pragma once

// Corpus files.
//
// JSONL: one dialogue per line,
//   {"dialogue_id":"d1","turns":[{"turn_index":0,"system_text":"...","user_text":"...","iq":5}]}
// "iq" is an integer 1..5, or null/absent for an unlabeled turn.
//
// Delimited table: a header row, then one turn per row. A mapping file (kv
// format) names the columns:
//   delimiter    = , | tab | ; | |       (default ,)
//   dialogue_id  = <column>
//   turn_index   = <column>
//   system_text  = <column>
//   user_text    = <column>
//   label        = <column>               (empty cells are unlabeled)
// Fields may be double-quoted; "" inside quotes is a literal quote.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "iqrl/corpus/types.hpp"
#include "iqrl/kv.hpp"

namespace iqrl::corpus {

struct ColumnMapping {
  char delimiter = ',';
  std::string dialogue_id;
  std::string turn_index;
  std::string system_text;
  std::string user_text;
  std::string label;
};

inline ColumnMapping parse_mapping(const std::vector<KvEntry>& entries, const std::string& what) {
  ColumnMapping m;
  std::map<std::string, std::string*> fields{{"dialogue_id", &m.dialogue_id}, {"turn_index", &m.turn_index},
                                             {"system_text", &m.system_text}, {"user_text", &m.user_text},
                                             {"label", &m.label}};
  for (const auto& e : entries) {
    if (e.key == "delimiter") {
      if (e.value == "tab" || e.value == "\\t") {
        m.delimiter = '\t';
      } else if (e.value.size() == 1) {
        m.delimiter = e.value[0];
      } else {
        throw ParseError(what + ":" + std::to_string(e.line) + ": delimiter must be one character or 'tab'");
      }
    } else if (auto it = fields.find(e.key); it != fields.end()) {
      *it->second = e.value;
    } else {
      throw ParseError(what + ":" + std::to_string(e.line) + ": unknown mapping key '" + e.key + "'");
    }
  }
  for (const auto& [key, target] : fields) {
    if (target->empty()) throw ParseError(what + ": mapping does not name the " + key + " column");
  }
  return m;
}

inline ColumnMapping load_mapping(const std::string& path) { return parse_mapping(parse_kv_file(path), path); }

namespace detail {

inline std::optional<long long> parse_integer(const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || end != t.data() + t.size()) return std::nullopt;
  return v;
}

/// Sorts turns, checks contiguity and labels, keeps first-seen dialogue order.
inline Corpus finish(std::vector<std::string> order, std::map<std::string, std::vector<AnnotatedTurn>> turns) {
  Corpus corpus;
  for (auto& id : order) {
    AnnotatedDialogue d{id, std::move(turns[id])};
    std::stable_sort(d.turns.begin(), d.turns.end(),
                     [](const auto& a, const auto& b) { return a.turn_index < b.turn_index; });
    validate(d);
    corpus.push_back(std::move(d));
  }
  return corpus;
}

/// Splits delimited records; quoted fields may span lines. Each record keeps
/// the line number where it started.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> split_table(const std::string& text, char delim,
                                                                                const std::string& what) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, any = false;
  std::size_t line = 1, start_line = 1;
  auto end_record = [&] {
    if (any || !field.empty() || !fields.empty()) {
      fields.push_back(std::move(field));
      rows.emplace_back(start_line, std::move(fields));
    }
    fields.clear();
    field.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = any = true;
    } else if (c == delim) {
      fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      end_record();
      start_line = ++line;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError(what + ":" + std::to_string(start_line) + ": unterminated quoted field");
  end_record();
  return rows;
}

}  // namespace detail

inline nlohmann::ordered_json dialogue_to_json(const AnnotatedDialogue& d) {
  nlohmann::ordered_json j;
  j["dialogue_id"] = d.dialogue_id;
  j["turns"] = nlohmann::ordered_json::array();
  for (const auto& t : d.turns) {
    nlohmann::ordered_json jt;
    jt["turn_index"] = t.turn_index;
    jt["system_text"] = t.system_text;
    jt["user_text"] = t.user_text;
    jt["iq"] = t.iq_label ? nlohmann::ordered_json(*t.iq_label) : nlohmann::ordered_json(nullptr);
    j["turns"].push_back(std::move(jt));
  }
  return j;
}

inline AnnotatedDialogue dialogue_from_json(const nlohmann::json& j, const std::string& where) {
  auto fail = [&](const std::string& msg) { throw ParseError(where + ": " + msg); };
  if (!j.is_object()) fail("expected an object");
  if (!j.contains("dialogue_id") || !j["dialogue_id"].is_string()) fail("missing string field dialogue_id");
  if (!j.contains("turns") || !j["turns"].is_array()) fail("missing array field turns");
  AnnotatedDialogue d;
  d.dialogue_id = j["dialogue_id"].get<std::string>();
  for (std::size_t i = 0; i < j["turns"].size(); ++i) {
    const auto& jt = j["turns"][i];
    const std::string at = "turns[" + std::to_string(i) + "]";
    if (!jt.is_object()) fail(at + " is not an object");
    AnnotatedTurn t;
    if (!jt.contains("turn_index") || !jt["turn_index"].is_number_unsigned()) fail(at + ".turn_index must be a non-negative integer");
    t.turn_index = jt["turn_index"].get<std::size_t>();
    for (const char* key : {"system_text", "user_text"}) {
      if (!jt.contains(key) || !jt[key].is_string()) fail(at + "." + key + " must be a string");
    }
    t.system_text = jt["system_text"].get<std::string>();
    t.user_text = jt["user_text"].get<std::string>();
    if (jt.contains("iq") && !jt["iq"].is_null()) {
      if (!jt["iq"].is_number_integer()) fail(at + ".iq must be an integer or null");
      const auto iq = jt["iq"].get<long long>();
      if (iq < kMinIq || iq > kMaxIq) fail(at + ".iq " + std::to_string(iq) + " outside 1..5");
      t.iq_label = static_cast<int>(iq);
    }
    d.turns.push_back(std::move(t));
  }
  return d;
}

inline void save_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus) out << dialogue_to_json(d).dump() << '\n';
}

inline void save_jsonl(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  save_jsonl(out, corpus);
  if (!out) throw Error("write failed: " + path);
}

inline Corpus load_jsonl(std::istream& in, const std::string& what = "corpus") {
  std::vector<std::string> order;
  std::map<std::string, std::vector<AnnotatedTurn>> turns;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    const std::string where = what + ":" + std::to_string(n);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    AnnotatedDialogue d = dialogue_from_json(j, where);
    if (turns.count(d.dialogue_id)) throw ParseError(where + ": duplicate dialogue_id '" + d.dialogue_id + "'");
    order.push_back(d.dialogue_id);
    turns[d.dialogue_id] = std::move(d.turns);
  }
  return detail::finish(std::move(order), std::move(turns));
}

inline Corpus load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load_jsonl(in, path);
}

/// Rows are numbered from 1 with the header as row 1.
inline Corpus load_table(const std::string& text, const ColumnMapping& m, const std::string& what = "table") {
  auto rows = detail::split_table(text, m.delimiter, what);
  if (rows.empty()) throw ParseError(what + ": empty table, no header row");
  const auto& header = rows[0].second;
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(what + ": missing mapped column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_id = column(m.dialogue_id), c_idx = column(m.turn_index), c_sys = column(m.system_text),
                    c_usr = column(m.user_text), c_lab = column(m.label);
  std::vector<std::string> order;
  std::map<std::string, std::vector<AnnotatedTurn>> turns;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].second;
    const std::string where = what + ": row " + std::to_string(r + 1) + " (line " + std::to_string(rows[r].first) + ")";
    if (f.size() != header.size()) {
      throw ParseError(where + ": " + std::to_string(f.size()) + " fields, header has " + std::to_string(header.size()));
    }
    AnnotatedTurn t;
    const auto idx = detail::parse_integer(f[c_idx]);
    if (!idx || *idx < 0) throw ParseError(where + ": turn index '" + f[c_idx] + "' is not a non-negative integer");
    t.turn_index = static_cast<std::size_t>(*idx);
    t.system_text = f[c_sys];
    t.user_text = f[c_usr];
    if (!trim(f[c_lab]).empty()) {
      const auto label = detail::parse_integer(f[c_lab]);
      if (!label) throw ParseError(where + ": label '" + f[c_lab] + "' is not an integer");
      if (*label < kMinIq || *label > kMaxIq) throw ParseError(where + ": label " + f[c_lab] + " outside 1..5");
      t.iq_label = static_cast<int>(*label);
    }
    if (!turns.count(f[c_id])) order.push_back(f[c_id]);
    turns[f[c_id]].push_back(std::move(t));
  }
  return detail::finish(std::move(order), std::move(turns));
}

/// JSONL when no mapping is given, otherwise a delimited table.
inline Corpus load_corpus(const std::string& path, const std::optional<ColumnMapping>& mapping = std::nullopt) {
  if (!mapping) return load_jsonl(path);
  return load_table(read_file(path), *mapping, path);
}

}  // namespace iqrl::corpus
