#include "puma/compiler/compiler.hpp"

#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "puma/compiler/codegen.hpp"
#include "puma/compiler/data_movement.hpp"
#include "puma/compiler/placement.hpp"
#include "puma/compiler/regalloc.hpp"
#include "puma/compiler/schedule.hpp"
#include "puma/compiler/tiling.hpp"
#include "puma/error.hpp"

namespace puma::compiler {

nlohmann::json CompileStats::to_json() const {
  return {{"matrix_tiles", matrix_tiles},
          {"tiles_used", tiles_used},
          {"cores_used", cores_used},
          {"coalesce_groups", coalesce_groups},
          {"mvm_instructions", mvm_instructions},
          {"loads", loads},
          {"stores", stores},
          {"sends", sends},
          {"receives", receives},
          {"send_instructions", send_instructions},
          {"receive_instructions", receive_instructions},
          {"fifo_ids", fifo_ids},
          {"xbar_copies", xbar_copies},
          {"spill_stores", spill_stores},
          {"spill_loads", spill_loads},
          {"spill_words", spill_words},
          {"max_live", max_live},
          {"fill_words", fill_words},
          {"fill_words_full", fill_words_full},
          {"core_instructions", core_instructions},
          {"tile_instructions", tile_instructions},
          {"max_core_instructions", max_core_instructions},
          {"code_bytes", code_bytes},
          {"colocation", colocation},
          {"static_histogram", static_histogram}};
}

CompiledProgram compile(const graph::ModelGraph& g, const MachineConfig& m, const CompileOptions& opt) {
  m.validate();
  if (!g.frozen()) throw CompileError("graph must be frozen before compilation");
  if (g.frac_bits() != m.frac_bits)
    throw CompileError(fmt::format("graph uses {} fraction bits but the machine is configured for {}", g.frac_bits(), m.frac_bits));

  CompiledProgram out;
  CompileStats& st = out.stats;

  Program p = tile_tensors(g, m.crossbar_dim, opt.loop_conv);
  place(p, m, {opt.naive_partition, opt.seed});
  st.matrix_tiles = static_cast<int>(p.mtiles.size());
  st.colocation = colocation_score(p);

  const MovementStats mv = insert_data_movement(p, m);
  st.loads = mv.loads;
  st.stores = mv.stores;
  st.sends = mv.sends;
  st.receives = mv.receives;
  st.fifo_ids = mv.fifo_ids;

  const Groups groups = opt.coalesce ? coalesce_mvms(p, m.mvmus_per_core) : Groups{};
  st.coalesce_groups = static_cast<int>(groups.size());
  const auto order = linearize(p, groups, opt.naive_order);
  st.max_live = max_live(p, order);
  spdlog::debug("compile {}: {} ops, {} matrix tiles, {} groups", g.name(), p.ops.size(), p.mtiles.size(), groups.size());

  const MemoryMap mm = allocate_memory(p, order, m);
  VCode vc = lower(p, order, groups, mm, m, opt.input_shuffle);
  st.fill_words = vc.stats.fill_words;
  st.fill_words_full = vc.stats.fill_words_full;
  st.mvm_instructions = vc.stats.mvm_instructions;

  std::map<int, int> spill_next(mm.next_free.begin(), mm.next_free.end());
  std::vector<AllocResult> alloc;
  std::vector<SpillRegion> spills;
  for (auto& c : vc.cores) {
    st.xbar_copies += resolve_xbar_out_conflicts(c);
    const int base = spill_next[c.tile];
    AllocResult r = allocate_registers(c, m, base);
    if (!audit_assignments(r.assignments)) throw CompileError("register assignment audit failed");
    spill_next[c.tile] = base + r.spill_words;
    if (spill_next[c.tile] > m.tile_memory_words)
      throw CapacityError(fmt::format("tile {} data memory exhausted by spill regions", c.tile));
    spills.push_back({c.tile, c.core, base, r.spill_words});
    st.spill_stores += r.spill_stores;
    st.spill_loads += r.spill_loads;
    st.spill_words += r.spill_words;
    alloc.push_back(std::move(r));
  }

  out.container = emit_container(p, vc, alloc, spills, mm, m);
  std::set<int> tiles;
  for (const auto& s : out.container.segments) {
    tiles.insert(s.tile);
    const int n = static_cast<int>(s.code.size());
    if (s.is_tile()) {
      st.tile_instructions += n;
    } else {
      ++st.cores_used;
      st.core_instructions += n;
      st.max_core_instructions = std::max(st.max_core_instructions, n);
    }
    for (const auto& i : s.code) {
      ++st.static_histogram[std::string(isa::mnemonic(i.opcode))];
      if (i.opcode == isa::Opcode::Send) ++st.send_instructions;
      if (i.opcode == isa::Opcode::Receive) ++st.receive_instructions;
    }
  }
  st.tiles_used = static_cast<int>(tiles.size());
  st.code_bytes = static_cast<int>((st.core_instructions + st.tile_instructions) * isa::kInstructionBytes);
  out.container.metadata["stats"] = st.to_json();
  out.plan_dump = dump_plan(p);
  return out;
}

}  // namespace puma::compiler
