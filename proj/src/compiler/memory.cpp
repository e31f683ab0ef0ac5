#include "puma/compiler/memory.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma::compiler {

int MemoryMap::at(int tile, int op) const {
  auto it = addr.find({tile, op});
  if (it == addr.end()) throw CompileError(fmt::format("no tile-{} address for op {}", tile, op));
  return it->second;
}

MemoryMap allocate_memory(const Program& p, const std::vector<int>& order, const MachineConfig& m) {
  MemoryMap mm;
  std::vector<int> pos(p.ops.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) pos[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
  const auto cons = p.consumers();
  const Reachability reach(p);
  // Positions of instruction-emitting ops per agent, ascending.
  std::map<Loc, std::vector<int>> agent_ops;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Op& o = p.op(order[k]);
    if (o.kind == OpKind::Input || o.kind == OpKind::Const || o.kind == OpKind::Gather || !o.loc.valid()) continue;
    agent_ops[o.loc].push_back(static_cast<int>(k));
  }

  std::set<int> tiles;
  for (const auto& o : p.ops)
    if (o.loc.valid()) tiles.insert(o.loc.tile);

  for (int tile : tiles) {
    int next = 0;
    auto fixed = [&](OpKind kind) {
      for (const auto& o : p.ops) {
        if (o.kind != kind) continue;
        bool here = o.kind == OpKind::Output && o.loc.tile == tile;
        if (kind == OpKind::Input || kind == OpKind::Const)
          for (int c : cons[static_cast<std::size_t>(o.id)]) here = here || p.op(c).loc.tile == tile;
        if (!here) continue;
        mm.addr[{tile, o.id}] = next;
        next += o.width;
      }
    };
    fixed(OpKind::Input);
    fixed(OpKind::Const);
    fixed(OpKind::Output);

    // A word can take a new value only when its writer runs after the old writer and each reader
    // of the new value runs after every reader of the old one. Loads and sends only wait for valid
    // data, so an empty or stale word would otherwise hand a reader the wrong value.
    struct Occupant {
      int addr, size, end, id;
    };
    std::vector<Occupant> placed;
    const int base = next;
    int peak = base;
    std::vector<int> comm;
    for (const auto& o : p.ops)
      if ((o.kind == OpKind::Store || o.kind == OpKind::Receive) && o.loc.tile == tile) comm.push_back(o.id);
    std::sort(comm.begin(), comm.end(), [&](int a, int b) { return pos[static_cast<std::size_t>(a)] < pos[static_cast<std::size_t>(b)]; });
    // True when `op` runs after every op in `before`: an earlier op on its agent (or `op` itself,
    // when `inclusive`) is one of them or depends on all of them.
    auto guarded = [&](const std::vector<int>& before, int op, bool inclusive) {
      const int at = pos[static_cast<std::size_t>(op)] + (inclusive ? 1 : 0);
      int earliest = at;
      for (int a : before) earliest = std::min(earliest, pos[static_cast<std::size_t>(a)]);
      const auto& seq = agent_ops.at(p.op(op).loc);
      for (auto it = std::lower_bound(seq.begin(), seq.end(), at); it != seq.begin();) {
        const int x_pos = *--it;
        if (x_pos < earliest) break;
        const int x = order[static_cast<std::size_t>(x_pos)];
        bool after_all = true;
        for (int a : before) after_all = after_all && (a == x || reach.reaches(a, x));
        if (after_all) return true;
      }
      return false;
    };
    auto reusable = [&](int old_id, int new_id) {
      const auto& r1 = cons[static_cast<std::size_t>(old_id)];
      if (r1.empty() || !guarded({old_id}, new_id, true)) return false;
      for (int b : cons[static_cast<std::size_t>(new_id)])
        if (!guarded(r1, b, false)) return false;
      return true;
    };
    for (int id : comm) {
      const Op& o = p.op(id);
      const int start = pos[static_cast<std::size_t>(id)];
      int end = start;
      for (int c : cons[static_cast<std::size_t>(id)]) end = std::max(end, pos[static_cast<std::size_t>(c)]);
      int at = base;
      for (bool moved = true; moved;) {
        moved = false;
        for (const auto& q : placed) {
          if (q.addr >= at + o.width || at >= q.addr + q.size) continue;
          if (q.end < start && reusable(q.id, id)) continue;
          at = q.addr + q.size;
          moved = true;
        }
      }
      placed.push_back({at, o.width, end, id});
      mm.addr[{tile, id}] = at;
      peak = std::max(peak, at + o.width);
    }
    mm.comm_words[tile] = peak - base;
    mm.next_free[tile] = peak;
    if (peak > m.tile_memory_words)
      throw CapacityError(fmt::format("tile {} needs {} data-memory words but has {}", tile, peak, m.tile_memory_words));
  }
  return mm;
}

}  // namespace puma::compiler
