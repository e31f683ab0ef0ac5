#pragma once

#include <vector>

#include "puma/compiler/ir.hpp"

namespace puma::compiler {

using Groups = std::vector<std::vector<int>>;

/// Fuses independent MvmTile ops on distinct MVMUs of one core, up to `mvmus_per_core` each.
/// Tiles of the same logical MVM go first, then a traversal-order pass picks the first eligible
/// candidates. Returns only groups with two or more members, members ascending.
Groups coalesce_mvms(const Program& p, int mvmus_per_core);

/// Global order over the whole program with each group as one unit. The default runs several
/// operand-first post-orders from the outputs (operands ranked by register need, depth or id,
/// optionally emitting ready consumers early) and keeps the one with the lowest max_live, the
/// first on ties. `naive` selects FIFO Kahn order instead. Every receive directly follows its send.
std::vector<int> linearize(const Program& p, const Groups& groups = {}, bool naive = false);

/// Peak number of values produced but not yet fully consumed along `order`.
int max_live(const Program& p, const std::vector<int>& order);

/// Checks that `order` is a topological order of `p` that keeps each group contiguous.
bool is_valid_order(const Program& p, const std::vector<int>& order, const Groups& groups = {});

}  // namespace puma::compiler
