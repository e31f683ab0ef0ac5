#pragma once

#include "puma/compiler/ir.hpp"

namespace puma::compiler {

/// Splits every mvm into ceil(n/D) x ceil(m/D) crossbar tiles plus an ascending partial-sum
/// add chain per column block. Matrix tiles are shared by all mvms of the same matrix.
/// With `loop_conv`, conv regions that fit one crossbar become single ConvLoop ops.
Program tile_tensors(const graph::ModelGraph& g, int crossbar_dim, bool loop_conv = false);

/// Drops ops that no output depends on and renumbers the rest, preserving relative order.
void eliminate_dead_ops(Program& p);

/// Replaces gathers of gathers by gathers of the underlying sources.
std::vector<graph::Piece> flatten_pieces(const Program& p, std::vector<int>& args, const std::vector<graph::Piece>& pieces);

}  // namespace puma::compiler
