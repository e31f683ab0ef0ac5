#pragma once

#include <vector>

#include "puma/compiler/vcode.hpp"
#include "puma/machine_config.hpp"

namespace puma::compiler {

/// Copies an XbarOut value into a general register before an MVM overwrites it while
/// the value still has later readers, and renames those readers. Returns copies inserted.
int resolve_xbar_out_conflicts(CoreCode& c);

/// Inclusive instruction-index interval per vreg. Vregs touched inside a loop stay live
/// for the whole loop.
struct LiveRange {
  int start = -1;
  int end = -1;
};
std::vector<LiveRange> compute_liveness(const CoreCode& c);

/// One residency period of a vreg in the general register file.
struct Assignment {
  int vreg = 0;
  int base = 0;  // physical register address
  int width = 0;
  int from = 0;  // output instruction indices, inclusive
  int to = 0;
};

struct AllocResult {
  std::vector<isa::Instruction> code;
  std::vector<char> spill;  // per output instruction: spill load or store
  int spill_stores = 0;
  int spill_loads = 0;
  int spill_words = 0;  // size of the core's spill region
  int peak_registers = 0;
  std::vector<Assignment> assignments;
};

/// Linear scan over general registers with furthest-next-use eviction. Evicted values
/// go to the core's spill region at `spill_base`. Spilling inside a loop is a CompileError.
AllocResult allocate_registers(const CoreCode& c, const MachineConfig& m, int spill_base);

/// True when no two assignments overlap in both time and register addresses.
bool audit_assignments(const std::vector<Assignment>& a);

}  // namespace puma::compiler
