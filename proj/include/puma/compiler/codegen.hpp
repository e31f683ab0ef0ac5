#pragma once

#include <vector>

#include "puma/compiler/ir.hpp"
#include "puma/compiler/memory.hpp"
#include "puma/compiler/regalloc.hpp"
#include "puma/compiler/vcode.hpp"
#include "puma/isa/container.hpp"
#include "puma/machine_config.hpp"

namespace puma::compiler {

struct SpillRegion {
  int tile = 0;
  int core = 0;
  int base = 0;
  int size = 0;
};

/// Packs allocated core code, tile code, weights, memory images and I/O bindings.
/// `alloc[i]` belongs to `vc.cores[i]`.
isa::Container emit_container(const Program& p, const VCode& vc, const std::vector<AllocResult>& alloc,
                              const std::vector<SpillRegion>& spills, const MemoryMap& mm, const MachineConfig& m);

}  // namespace puma::compiler
