#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "puma/graph/model_graph.hpp"
#include "puma/isa/container.hpp"
#include "puma/machine_config.hpp"

namespace puma::compiler {

struct CompileOptions {
  bool coalesce = true;
  bool input_shuffle = true;
  bool naive_partition = false;  // seeded random MVMU placement
  bool naive_order = false;      // FIFO topological order instead of the operand post-order
  bool loop_conv = false;        // emit eligible conv layers as counted loops
  std::uint64_t seed = 1;
};

struct CompileStats {
  int matrix_tiles = 0;
  int tiles_used = 0;
  int cores_used = 0;
  int coalesce_groups = 0;
  int mvm_instructions = 0;
  int loads = 0, stores = 0, sends = 0, receives = 0;  // inserted data-movement ops
  int send_instructions = 0;
  int receive_instructions = 0;
  int fifo_ids = 0;
  int xbar_copies = 0;
  int spill_stores = 0;
  int spill_loads = 0;
  int spill_words = 0;
  int max_live = 0;
  long fill_words = 0;
  long fill_words_full = 0;
  int core_instructions = 0;
  int tile_instructions = 0;
  int max_core_instructions = 0;
  int code_bytes = 0;
  double colocation = 0.0;
  std::map<std::string, int> static_histogram;

  nlohmann::json to_json() const;
};

struct CompiledProgram {
  isa::Container container;
  CompileStats stats;
  std::string plan_dump;
};

/// Full pipeline: tiling, placement, data movement, coalescing, linearization,
/// memory layout, lowering, register allocation and packing. The graph must be frozen.
CompiledProgram compile(const graph::ModelGraph& g, const MachineConfig& m, const CompileOptions& opt = {});

}  // namespace puma::compiler
