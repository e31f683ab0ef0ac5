#pragma once

#include <map>
#include <utility>
#include <vector>

#include "puma/compiler/ir.hpp"
#include "puma/machine_config.hpp"

namespace puma::compiler {

/// Tile data-memory layout: inputs, constants and outputs get fixed words; communication
/// buffers are packed first-fit over their lifetimes in the global order.
struct MemoryMap {
  std::map<std::pair<int, int>, int> addr;  // (tile, op id) -> word address
  std::map<int, int> next_free;             // tile -> first word after the allocated regions
  std::map<int, int> comm_words;            // tile -> peak words of the communication region

  int at(int tile, int op) const;
};

MemoryMap allocate_memory(const Program& p, const std::vector<int>& order, const MachineConfig& m);

}  // namespace puma::compiler
