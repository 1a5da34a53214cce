#pragma once

// Model files: the parameter container with a header of "key=value" lines
// holding the configuration, then one "vocab=<token>" line per id in order.

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "iqrl/iq/model.hpp"
#include "iqrl/nn/serialize.hpp"

namespace iqrl::iq {

inline constexpr std::string_view kModelFormat = "iqrl-iq-model-1";

inline std::string model_header(const IqModel& model) {
  std::ostringstream h;
  h << "format=" << kModelFormat << '\n';
  for (const auto& [key, value] : model.config.architecture()) h << key << '=' << value << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", model.config.dropout_rate);
  h << "dropout_rate=" << buf << '\n';
  h << "seed=" << model.config.seed << '\n';
  for (const auto& token : model.vocab.tokens()) h << "vocab=" << token << '\n';
  return h.str();
}

inline void save_model(std::ostream& out, const IqModel& model) { nn::write_parameters(out, model.params, model_header(model)); }

inline void save_model(const std::string& path, const IqModel& model) {
  nn::save_parameters(path, model.params, model_header(model));
}

namespace detail {

inline std::size_t header_size(const std::map<std::string, std::string>& kv, const std::string& key, const std::string& what) {
  auto it = kv.find(key);
  if (it == kv.end()) throw CorruptFileError(what + ": model header lacks " + key);
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw CorruptFileError(what + ": model header value for " + key + " is not an integer");
  }
}

inline double header_real(const std::map<std::string, std::string>& kv, const std::string& key, const std::string& what) {
  auto it = kv.find(key);
  if (it == kv.end()) throw CorruptFileError(what + ": model header lacks " + key);
  try {
    return std::stod(it->second);
  } catch (const std::logic_error&) {
    throw CorruptFileError(what + ": model header value for " + key + " is not a number");
  }
}

}  // namespace detail

/// When `expected` is given, every architecture field must agree with it
/// (vocab_size excepted, which the file defines).
inline IqModel read_model(std::istream& in, const std::string& what = "model file",
                          const std::optional<IqModelConfig>& expected = std::nullopt) {
  nn::LoadedParameters loaded = nn::read_parameters(in, what);
  std::map<std::string, std::string> kv;
  std::vector<std::string> tokens;
  std::istringstream lines(loaded.header);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CorruptFileError(what + ": malformed header line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "vocab") {
      tokens.push_back(value);
    } else {
      kv[key] = value;
    }
  }
  if (kv["format"] != kModelFormat) throw VersionMismatchError(what + ": not an " + std::string(kModelFormat) + " file");

  IqModel model;
  IqModelConfig& cfg = model.config;
  cfg.vocab_size = detail::header_size(kv, "vocab_size", what);
  cfg.embedding_dim = detail::header_size(kv, "embedding_dim", what);
  cfg.turn_hidden = detail::header_size(kv, "turn_hidden", what);
  cfg.attention_dim = detail::header_size(kv, "attention_dim", what);
  cfg.dialogue_hidden = detail::header_size(kv, "dialogue_hidden", what);
  cfg.num_classes = detail::header_size(kv, "num_classes", what);
  cfg.max_context_turns = detail::header_size(kv, "max_context_turns", what);
  cfg.attention_scale = detail::header_real(kv, "attention_scale", what);
  cfg.dropout_rate = detail::header_real(kv, "dropout_rate", what);
  cfg.seed = detail::header_size(kv, "seed", what);

  if (expected) {
    IqModelConfig want = *expected;
    want.vocab_size = cfg.vocab_size;
    const auto have = cfg.architecture(), need = want.architecture();
    for (std::size_t i = 0; i < have.size(); ++i) {
      if (have[i].second != need[i].second) {
        throw ConfigMismatchError(what + ": " + have[i].first + " is " + have[i].second + " in the file but " +
                                  need[i].second + " was expected");
      }
    }
  }
  if (tokens.size() != cfg.vocab_size) throw CorruptFileError(what + ": vocabulary length does not match vocab_size");
  try {
    model.vocab = corpus::Vocab(std::move(tokens));
    cfg.validate();
  } catch (const CorruptFileError&) {
    throw;
  } catch (const Error& e) {
    throw CorruptFileError(what + ": " + e.what());
  }

  const ParameterSet reference = init_parameters(cfg);
  if (reference.size() != loaded.params.size()) throw ConfigMismatchError(what + ": parameter set does not match the header");
  for (const auto& [name, tensor] : reference) {
    if (!loaded.params.contains(name)) throw ConfigMismatchError(what + ": missing parameter " + name);
    if (loaded.params.at(name).shape() != tensor.shape()) {
      throw ConfigMismatchError(what + ": parameter " + name + " has shape " +
                                nn::shape_string(loaded.params.at(name).shape()) + ", header implies " +
                                nn::shape_string(tensor.shape()));
    }
  }
  model.params = std::move(loaded.params);
  return model;
}

inline IqModel load_model(const std::string& path, const std::optional<IqModelConfig>& expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_model(in, path, expected);
}

/// Text embeddings: one token and d reals per line, whitespace separated. A
/// leading "<count> <dim>" line is skipped. Rows of in-vocabulary tokens are
/// overwritten; the rest keep their initialisation. Returns the fraction of
/// vocabulary ids (unknown excluded) that were found.
inline double load_pretrained_embeddings(std::istream& in, const corpus::Vocab& vocab, Tensor& table,
                                         const std::string& what = "embeddings") {
  if (table.rank() != 2 || table.rows() != vocab.size()) throw ShapeError(what + ": table does not match vocabulary");
  const std::size_t d = table.cols();
  std::vector<bool> seen(vocab.size(), false);
  std::size_t found = 0;
  std::optional<std::size_t> file_dim;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      try {
        std::size_t pos = 0;
        values.push_back(std::stod(field, &pos));
        if (pos != field.size()) throw std::invalid_argument(field);
      } catch (const std::logic_error&) {
        throw ParseError(what + ":" + std::to_string(n) + ": '" + field + "' is not a number");
      }
    }
    if (n == 1 && values.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos) continue;
    if (!file_dim) file_dim = values.size();
    if (values.size() != *file_dim) {
      throw ParseError(what + ":" + std::to_string(n) + ": " + std::to_string(values.size()) +
                       " values, earlier lines have " + std::to_string(*file_dim));
    }
    if (values.size() != d) {
      throw ConfigMismatchError(what + ":" + std::to_string(n) + ": vectors have " + std::to_string(values.size()) +
                                " dimensions but embedding_dim is " + std::to_string(d));
    }
    const std::size_t id = vocab.id(token);
    if (id == 0 && token != corpus::kUnknownToken) continue;
    std::copy(values.begin(), values.end(), table.data().begin() + static_cast<std::ptrdiff_t>(id * d));
    if (id != 0 && !seen[id]) {
      seen[id] = true;
      ++found;
    }
  }
  const std::size_t known = vocab.size() - 1;
  return known == 0 ? 0.0 : static_cast<double>(found) / static_cast<double>(known);
}

inline double load_pretrained_embeddings(const std::string& path, const corpus::Vocab& vocab, Tensor& table) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return load_pretrained_embeddings(in, vocab, table, path);
}

}  // namespace iqrl::iq
