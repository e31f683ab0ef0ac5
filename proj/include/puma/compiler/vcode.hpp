#pragma once

#include <vector>

#include "puma/compiler/ir.hpp"
#include "puma/compiler/memory.hpp"
#include "puma/compiler/schedule.hpp"
#include "puma/isa/assembly.hpp"
#include "puma/machine_config.hpp"

namespace puma::compiler {

/// Virtual register. XbarOut registers are precolored to their MVMU's output range.
struct VReg {
  int width = 0;
  RegClass cls = RegClass::General;
  int mvmu = -1;
};

/// Register operand: element `offset` of `vreg`, or the physical register `offset` when vreg < 0.
struct VOperand {
  int vreg = -1;
  int offset = 0;
  friend bool operator==(const VOperand&, const VOperand&) = default;
};

struct VInst {
  isa::Instruction inst;  // non-register fields; register fields are filled at allocation
  VOperand dest, src1, src2;
  std::vector<int> mvm_defs;  // Mvm: one XbarOut vreg per masked MVMU
  int loop_head = -1;         // first instruction of loop `loop_head`
  int branch_to = -1;         // jmp/brn: loop id whose head is the target
  bool spill = false;
  int origin = -1;  // IR op id
};

struct CoreCode {
  int tile = 0;
  int core = 0;
  std::vector<VReg> vregs;
  std::vector<VInst> insts;
  std::vector<isa::ShufflePattern> shuffles{isa::ShufflePattern{}};
  int loops = 0;

  int new_vreg(int width, RegClass cls = RegClass::General, int mvmu = -1) {
    vregs.push_back({width, cls, mvmu});
    return static_cast<int>(vregs.size() - 1);
  }
};

struct TileCode {
  int tile = 0;
  std::vector<isa::Instruction> insts;
};

struct LoweringStats {
  long fill_words = 0;       // XbarIn words written by fills
  long fill_words_full = 0;  // XbarIn words a full refill would write
  int mvm_instructions = 0;
};

struct VCode {
  std::vector<CoreCode> cores;
  std::vector<TileCode> tiles;
  LoweringStats stats;
};

/// Which register operands an opcode reads and writes.
struct OperandUse {
  bool dest = false, src1 = false, src2 = false;
};
OperandUse operand_use(const isa::Instruction& i);

/// Element counts of each operand of `i`.
int dest_width(const isa::Instruction& i);
int src1_width(const isa::Instruction& i);
int src2_width(const isa::Instruction& i);

/// Widest general-register piece a value is split into; at least four fit in the register file.
int value_piece(const MachineConfig& m);

/// Emits per-core instruction streams over virtual registers, in global order.
/// `input_shuffle` lets MVM fills reuse XbarIn contents through shuffle patterns.
VCode lower(const Program& p, const std::vector<int>& order, const Groups& groups, const MemoryMap& mm,
            const MachineConfig& m, bool input_shuffle);

}  // namespace puma::compiler
