#pragma once

#include "puma/compiler/ir.hpp"
#include "puma/machine_config.hpp"

namespace puma::compiler {

struct MovementStats {
  int loads = 0;
  int stores = 0;
  int sends = 0;
  int receives = 0;
  int fifo_ids = 0;  // max ids used at any receiving tile
};

/// Rewrites every edge that crosses a core into store/load and every edge that crosses a tile
/// into store/send/receive/load, then assigns FIFO ids. Requires a placed program.
MovementStats insert_data_movement(Program& p, const MachineConfig& m);

/// Per receiving tile, greedy id assignment over sender groups (sender tile, receiver tile).
/// A later group may reuse an id only when each of its sends depends on every receive of
/// each earlier group holding that id. Returns the max ids used at one tile.
int assign_fifos(Program& p, int fifo_count);

}  // namespace puma::compiler
