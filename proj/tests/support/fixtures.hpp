#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <fmt/format.h>

#include "puma/graph/interpreter.hpp"
#include "puma/isa/assembly.hpp"
#include "puma/isa/container.hpp"
#include "puma/machine_config.hpp"

namespace puma::testing {

/// First general-purpose register of a default-geometry core.
inline int gp(const MachineConfig& m, int k = 0) { return m.general_base() + k; }

inline isa::Container from_listing(const std::string& text) {
  isa::Container c;
  c.segments = isa::assemble_program(text);
  c.metadata["format"] = "puma-program";
  return c;
}

/// Two cores of one tile, each loading what the other stores before storing its own value.
/// Per-core linearization put the load first on both sides.
inline isa::Container cyclic_wait_pair(const MachineConfig& m) {
  return from_listing(fmt::format(R"(.core 0 0
load ${0}, 100, 1
store 200, ${0}, 1, 1
.core 0 1
load ${0}, 200, 1
store 100, ${0}, 1, 1
)",
                                  gp(m)));
}

/// Same exchange in a globally consistent order: each core stores before it loads.
inline isa::Container ordered_pair(const MachineConfig& m) {
  return from_listing(fmt::format(R"(.core 0 0
set ${0}, 11
store 200, ${0}, 1, 1
load ${1}, 100, 1
store 300, ${1}, 0, 1
.core 0 1
set ${0}, 22
store 100, ${0}, 1, 1
load ${1}, 200, 1
store 301, ${1}, 0, 1
)",
                                  gp(m), gp(m, 1)));
}

/// Producer stores value 7 with count k; `loads` consumer cores each load it once and keep a copy at 400 + core.
inline isa::Container counted_store(const MachineConfig& m, int k, int loads) {
  std::string s = fmt::format(".core 0 0\nset ${0}, 7\nstore 100, ${0}, {1}, 1\n", gp(m), k);
  for (int c = 1; c <= loads; ++c) s += fmt::format(".core 0 {0}\nload ${1}, 100, 1\nstore {2}, ${1}, 0, 1\n", c, gp(m), 400 + c);
  return from_listing(s);
}

/// Producer stores 1 then 2 to the same word (count 1 each). The consumer first runs a long MVM,
/// then loads twice and keeps both values at 500 and 501.
inline isa::Container restore_before_consume(const MachineConfig& m) {
  return from_listing(fmt::format(R"(.core 0 0
set ${0}, 1
store 100, ${0}, 1, 1
set ${0}, 2
store 100, ${0}, 1, 1
.core 0 1
mvm 0b1, filter=0, stride=0
load ${0}, 100, 1
store 500, ${0}, 0, 1
load ${0}, 100, 1
store 501, ${0}, 0, 1
)",
                                  gp(m)));
}

/// Tiles 1..sources each send `n` one-word messages carrying (source << 8 | seq) to tile 0;
/// tile 0 receives them all on per-source FIFOs in round-robin order.
inline isa::Container fifo_stream(const MachineConfig& m, int sources, int n) {
  std::string s;
  for (int t = 1; t <= sources; ++t) {
    s += fmt::format(".core {} 0\n", t);
    for (int q = 0; q < n; ++q)
      s += fmt::format("set ${0}, {1}\nstore {2}, ${0}, 1, 1\n", gp(m), t << 8 | q, 10 + q);
    s += fmt::format(".tile {}\n", t);
    for (int q = 0; q < n; ++q) s += fmt::format("send {}, {}, 0, 1\n", 10 + q, t - 1);
  }
  s += ".tile 0\n";
  for (int q = 0; q < n; ++q)
    for (int t = 1; t <= sources; ++t) s += fmt::format("receive {}, {}, 1, 1\n", 1000 + (t - 1) * n + q, t - 1);
  s += ".core 0 0\n";
  for (int q = 0; q < n; ++q)
    for (int t = 1; t <= sources; ++t)
      s += fmt::format("load ${0}, {1}, 1\nstore {2}, ${0}, 0, 1\n", gp(m), 1000 + (t - 1) * n + q, 3000 + (t - 1) * n + q);
  return from_listing(s);
}

/// Weighted single-MVMU core running one MVM over a d x d block.
inline isa::Container single_mvm(const MachineConfig& m, std::uint64_t seed = 1) {
  isa::Container c = from_listing(fmt::format(".core 0 0\nmvm 0b1, filter=0, stride=0\n"));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(-2048, 2047);
  std::vector<std::int16_t> w(static_cast<std::size_t>(m.crossbar_dim * m.crossbar_dim));
  for (auto& v : w) v = static_cast<std::int16_t>(u(rng));
  c.metadata["weights"] = nlohmann::json::array(
      {{{"tile", 0}, {"core", 0}, {"mvmu", 0}, {"rows", m.crossbar_dim}, {"cols", m.crossbar_dim}, {"data", isa::to_hex(w)}}});
  return c;
}

inline bool same_outputs(const graph::TensorMap& a, const graph::TensorMap& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it == b.end() || it->second.size() != v.size() || it->second != v) return false;
  }
  return true;
}

/// Two tiles of two cores, small crossbars so random models spread over several MVMUs.
inline MachineConfig two_by_two() {
  MachineConfig m;
  m.crossbar_dim = 16;
  m.mvmus_per_core = 2;
  m.cores_per_tile = 2;
  m.tiles = 2;
  m.tile_memory_words = 8192;
  return m;
}

}  // namespace puma::testing
