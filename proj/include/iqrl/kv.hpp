#pragma once

// Flat "key = value" text files. '#' starts a comment line; blank lines are
// skipped; whitespace around keys and values is trimmed.

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iqrl/error.hpp"

namespace iqrl {

struct KvEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<KvEntry> parse_kv(std::istream& in, const std::string& what) {
  std::vector<KvEntry> entries;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(what + ":" + std::to_string(n) + ": expected key = value");
    KvEntry e{trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)), n};
    if (e.key.empty()) throw ParseError(what + ":" + std::to_string(n) + ": empty key");
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::vector<KvEntry> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_kv(in, path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace iqrl
