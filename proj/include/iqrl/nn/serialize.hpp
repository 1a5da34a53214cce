#pragma once

// Parameter container, little-endian throughout:
//
//   bytes 0..7   magic "IQRLPARM"
//   u32          format version (1)
//   u32 + bytes  header text, "key=value\n" lines (may be empty)
//   u64          ParameterSet rng seed
//   u32          parameter count
//   per parameter, in name order:
//     u32 + bytes  name
//     u32          rank, then rank x u64 dimensions
//     f64 x size   values, row-major
//
// Reals are stored as their IEEE-754 bit patterns, so a round trip is exact.

#include <fstream>
#include <sstream>
#include <string>

#include "iqrl/binary_io.hpp"
#include "iqrl/nn/tensor.hpp"

namespace iqrl::nn {

inline constexpr char kParamMagic[9] = "IQRLPARM";
inline constexpr std::uint32_t kParamVersion = 1;

inline void write_parameters(std::ostream& out, const ParameterSet& params, const std::string& header = {}) {
  io::Writer w(out);
  io::write_magic(w, kParamMagic, kParamVersion);
  w.str(header);
  w.u64(params.rng_seed());
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) w.u64(d);
    w.f64s(tensor.storage());
  }
}

struct LoadedParameters {
  std::string header;
  ParameterSet params;
};

inline LoadedParameters read_parameters(std::istream& in, const std::string& what = "parameter file") {
  io::Reader r(in, what);
  io::read_magic(r, kParamMagic, kParamVersion);
  LoadedParameters loaded;
  loaded.header = r.str();
  loaded.params = ParameterSet(r.u64());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(4096);
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw CorruptFileError(what + ": parameter '" + name + "' has invalid rank");
    Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d == 0 || d > (1ULL << 32)) throw CorruptFileError(what + ": parameter '" + name + "' has invalid shape");
      total *= d;
      if (total > (1ULL << 34)) throw CorruptFileError(what + ": parameter '" + name + "' is implausibly large");
    }
    std::vector<double> values = r.f64s(total);
    if (loaded.params.contains(name)) throw CorruptFileError(what + ": duplicate parameter '" + name + "'");
    loaded.params.add(name, Tensor(std::move(shape), std::move(values)));
  }
  r.expect_end();
  return loaded;
}

inline void save_parameters(const std::string& path, const ParameterSet& params, const std::string& header = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_parameters(out, params, header);
  if (!out) throw Error("write to '" + path + "' failed");
}

inline LoadedParameters load_parameters(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_parameters(in, path);
}

}  // namespace iqrl::nn
