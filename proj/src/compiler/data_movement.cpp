#include "puma/compiler/data_movement.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma::compiler {

namespace {

Op derived(const Op& v, OpKind kind, Loc loc, int arg) {
  Op o;
  o.kind = kind;
  o.width = v.width;
  o.args = {arg};
  o.origin = v.origin;
  o.layer = v.layer;
  o.loc = loc;
  return o;
}

void rewire(Program& p, const std::vector<int>& consumers, int from, int to) {
  for (int c : consumers)
    for (int& a : p.op(c).args)
      if (a == from) a = to;
}

}  // namespace

MovementStats insert_data_movement(Program& p, const MachineConfig& m) {
  MovementStats st;
  const auto cons = p.consumers();
  const std::size_t n = p.ops.size();
  for (std::size_t id = 0; id < n; ++id) {
    const Op v = p.ops[id];  // copy, p.ops grows below
    std::map<Loc, std::vector<int>> by_loc;
    for (int c : cons[id]) {
      const Loc l = p.op(c).loc;
      if (!l.valid() || l.core < 0) throw CompileError(fmt::format("op {} consumed by unplaced op {}", v.id, c));
      by_loc[l].push_back(c);
    }
    if (by_loc.empty()) continue;

    if (v.kind == OpKind::Input || v.kind == OpKind::Const) {
      for (const auto& [l, users] : by_loc) {
        const int ld = p.add(derived(v, OpKind::Load, l, v.id));
        rewire(p, users, v.id, ld);
        ++st.loads;
      }
      continue;
    }
    if (!runs_on_core(v.kind) || v.kind == OpKind::Output) continue;

    std::vector<Loc> same_tile;
    std::map<int, std::vector<Loc>> remote;
    for (const auto& [l, users] : by_loc) {
      if (l == v.loc) continue;
      if (l.tile == v.loc.tile) same_tile.push_back(l);
      else remote[l.tile].push_back(l);
    }
    if (same_tile.empty() && remote.empty()) continue;

    Op so = derived(v, OpKind::Store, v.loc, v.id);
    so.count = static_cast<int>(same_tile.size() + remote.size());
    const int store = p.add(std::move(so));
    ++st.stores;
    for (const Loc& l : same_tile) {
      const int ld = p.add(derived(v, OpKind::Load, l, store));
      rewire(p, by_loc[l], v.id, ld);
      ++st.loads;
    }
    for (const auto& [tile, locs] : remote) {
      Op sd = derived(v, OpKind::Send, {v.loc.tile, -1}, store);
      sd.target = tile;
      const int send = p.add(std::move(sd));
      Op rv = derived(v, OpKind::Receive, {tile, -1}, send);
      rv.count = static_cast<int>(locs.size());
      const int recv = p.add(std::move(rv));
      ++st.sends;
      ++st.receives;
      for (const Loc& l : locs) {
        const int ld = p.add(derived(v, OpKind::Load, l, recv));
        rewire(p, by_loc[l], v.id, ld);
        ++st.loads;
      }
    }
  }
  st.fifo_ids = assign_fifos(p, m.fifos);
  return st;
}

int assign_fifos(Program& p, int fifo_count) {
  const auto order = p.topological_order();
  std::vector<int> pos(p.ops.size());
  for (std::size_t k = 0; k < order.size(); ++k) pos[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
  const auto cons = p.consumers();

  struct Group {
    int sender = -1;
    std::vector<int> sends;
    std::vector<int> receives;
    int first = 0;
  };
  std::map<int, std::map<int, Group>> by_receiver;
  for (const auto& o : p.ops) {
    if (o.kind != OpKind::Send) continue;
    Group& g = by_receiver[o.target][o.loc.tile];
    g.sender = o.loc.tile;
    g.sends.push_back(o.id);
    for (int c : cons[static_cast<std::size_t>(o.id)]) g.receives.push_back(c);
  }
  if (by_receiver.empty()) return 0;

  const Reachability reach(p);
  auto compatible = [&](const Group& earlier, const Group& later) {
    for (int r : earlier.receives)
      for (int s : later.sends)
        if (!reach.reaches(r, s)) return false;
    return true;
  };

  int max_ids = 0;
  for (auto& [tile, senders] : by_receiver) {
    std::vector<Group*> groups;
    for (auto& [src, g] : senders) {
      g.first = pos[static_cast<std::size_t>(g.sends.front())];
      for (int s : g.sends) g.first = std::min(g.first, pos[static_cast<std::size_t>(s)]);
      groups.push_back(&g);
    }
    std::sort(groups.begin(), groups.end(), [](const Group* a, const Group* b) {
      return a->first != b->first ? a->first < b->first : a->sender < b->sender;
    });
    std::vector<std::vector<const Group*>> holders;
    for (Group* g : groups) {
      int id = -1;
      for (std::size_t f = 0; f < holders.size() && id < 0; ++f) {
        bool ok = true;
        for (const Group* h : holders[f]) ok = ok && compatible(*h, *g);
        if (ok) id = static_cast<int>(f);
      }
      if (id < 0) {
        id = static_cast<int>(holders.size());
        holders.emplace_back();
      }
      if (id >= fifo_count)
        throw CompileError(fmt::format("tile {} needs more than {} FIFO ids for concurrent senders", tile, fifo_count));
      holders[static_cast<std::size_t>(id)].push_back(g);
      for (int s : g->sends) p.op(s).fifo = id;
      for (int r : g->receives) p.op(r).fifo = id;
    }
    max_ids = std::max(max_ids, static_cast<int>(holders.size()));
  }
  return max_ids;
}

}  // namespace puma::compiler
