#include "puma/compiler/placement.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma::compiler {

AffinityTable::AffinityTable(const Program& p) : n_(p.mtiles.size()), table_(n_ * n_) {
  // Source values each tile reads, looking through gathers.
  std::vector<std::set<int>> sources(n_);
  std::vector<std::vector<int>> users(n_);
  for (const auto& o : p.ops) {
    if (o.kind != OpKind::MvmTile) continue;
    users[static_cast<std::size_t>(o.mtile)].push_back(o.id);
    const Op& x = p.op(o.args[0]);
    if (x.kind == OpKind::Gather) {
      for (const auto& pc : x.pieces) sources[static_cast<std::size_t>(o.mtile)].insert(x.args[static_cast<std::size_t>(pc.operand)] * 65536 + pc.offset / p.crossbar_dim);
    } else {
      sources[static_cast<std::size_t>(o.mtile)].insert(x.id * 65536);
    }
  }
  // Tiles fed by each tile through vector ops only.
  const auto cons = p.consumers();
  std::vector<std::set<int>> feeds(n_);
  for (std::size_t t = 0; t < n_; ++t) {
    std::deque<int> work(users[t].begin(), users[t].end());
    std::set<int> seen(work.begin(), work.end());
    while (!work.empty()) {
      const int v = work.front();
      work.pop_front();
      for (int c : cons[static_cast<std::size_t>(v)]) {
        if (!seen.insert(c).second) continue;
        const Op& co = p.op(c);
        if (co.kind == OpKind::MvmTile) {
          if (static_cast<std::size_t>(co.mtile) != t) feeds[t].insert(co.mtile);
        } else {
          work.push_back(c);
        }
      }
    }
  }
  for (std::size_t a = 0; a < n_; ++a)
    for (std::size_t b = 0; b < n_; ++b) {
      if (a == b) continue;
      auto& e = table_[a * n_ + b];
      const auto& ta = p.mtiles[a];
      const auto& tb = p.mtiles[b];
      e.same_output = ta.matrix == tb.matrix && ta.col_block == tb.col_block;
      for (int s : sources[a])
        if (sources[b].count(s)) {
          e.same_input = 1;
          break;
        }
      e.producer_consumer = feeds[a].count(static_cast<int>(b)) || feeds[b].count(static_cast<int>(a));
    }
}

namespace {

Loc majority(const std::vector<Loc>& locs) {
  std::map<Loc, int> votes;
  for (const auto& l : locs)
    if (l.valid() && l.core >= 0) ++votes[l];
  Loc best;
  int n = 0;
  for (const auto& [l, c] : votes)
    if (c > n) {
      best = l;
      n = c;
    }
  return best;
}

bool feeds_only_mvms(const Program& p, const std::vector<int>& cons) {
  if (cons.empty()) return false;
  for (int c : cons)
    if (p.op(c).kind != OpKind::MvmTile) return false;
  return true;
}

void place_tiles_greedy(Program& p, const MachineConfig& m) {
  const AffinityTable aff(p);
  const int n = static_cast<int>(p.mtiles.size());
  std::vector<char> placed(static_cast<std::size_t>(n), 0);
  std::vector<int> core_members, tile_members;
  int tile = 0, core = 0;
  for (int k = 0; k < n; ++k) {
    if (static_cast<int>(core_members.size()) == m.mvmus_per_core) {
      core_members.clear();
      if (++core == m.cores_per_tile) {
        core = 0;
        ++tile;
        tile_members.clear();
      }
    }
    int best = -1;
    std::pair<TileAffinity, TileAffinity> best_score{};
    for (int t = 0; t < n; ++t) {
      if (placed[static_cast<std::size_t>(t)]) continue;
      std::pair<TileAffinity, TileAffinity> s{};
      for (int c : core_members) s.first += aff(t, c);
      for (int c : tile_members) s.second += aff(t, c);
      if (best < 0 || s > best_score) {
        best = t;
        best_score = s;
      }
    }
    auto& mt = p.mtiles[static_cast<std::size_t>(best)];
    mt.loc = {tile, core};
    mt.mvmu = static_cast<int>(core_members.size());
    placed[static_cast<std::size_t>(best)] = 1;
    core_members.push_back(best);
    tile_members.push_back(best);
  }
}

void place_tiles_random(Program& p, const MachineConfig& m, std::uint64_t seed) {
  const int per_tile = m.cores_per_tile * m.mvmus_per_core;
  const int n = static_cast<int>(p.mtiles.size());
  const int tiles = (n + per_tile - 1) / per_tile;
  std::vector<int> slots(static_cast<std::size_t>(tiles * per_tile));
  std::iota(slots.begin(), slots.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(slots.begin(), slots.end(), rng);
  for (int t = 0; t < n; ++t) {
    const int s = slots[static_cast<std::size_t>(t)];
    auto& mt = p.mtiles[static_cast<std::size_t>(t)];
    mt.loc = {s / per_tile, (s % per_tile) / m.mvmus_per_core};
    mt.mvmu = s % m.mvmus_per_core;
  }
}

}  // namespace

void place(Program& p, const MachineConfig& m, const PlacementOptions& opt) {
  const long capacity = static_cast<long>(m.tiles) * m.cores_per_tile * m.mvmus_per_core;
  if (static_cast<long>(p.mtiles.size()) > capacity)
    throw CapacityError(fmt::format("model needs {} MVMUs but the machine has {}", p.mtiles.size(), capacity));
  for (const auto& t : p.mtiles)
    if (t.data.rows() > m.crossbar_dim || t.data.cols() > m.crossbar_dim)
      throw CompileError("matrix tile exceeds the crossbar dimension");
  if (opt.naive) {
    place_tiles_random(p, m, opt.seed);
  } else {
    place_tiles_greedy(p, m);
  }

  const auto order = p.topological_order();
  const auto cons = p.consumers();
  for (auto& o : p.ops) o.loc = {};
  for (int id : order) {
    Op& o = p.op(id);
    if (o.kind == OpKind::MvmTile || o.kind == OpKind::ConvLoop) {
      o.loc = p.mtiles[static_cast<std::size_t>(o.mtile)].loc;
      continue;
    }
    if (o.kind == OpKind::Input || o.kind == OpKind::Const) continue;
    if (o.kind == OpKind::Gather && feeds_only_mvms(p, cons[static_cast<std::size_t>(id)])) continue;
    std::vector<Loc> locs;
    for (int a : o.args) locs.push_back(p.op(a).loc);
    o.loc = majority(locs);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Op& o = p.op(*it);
    if (o.loc.valid() || o.kind == OpKind::Input || o.kind == OpKind::Const) continue;
    std::vector<Loc> locs;
    for (int c : cons[static_cast<std::size_t>(o.id)]) locs.push_back(p.op(c).loc);
    o.loc = majority(locs);
    if (!o.loc.valid()) o.loc = {0, 0};
  }
  // Ops whose producers were all memory-resident were placed by the backward pass; their
  // consumers placed earlier in the forward pass keep their own producer majority.
}

double colocation_score(const Program& p) {
  const AffinityTable aff(p);
  double score = 0.0;
  for (std::size_t a = 0; a < aff.size(); ++a)
    for (std::size_t b = a + 1; b < aff.size(); ++b) {
      const auto& e = aff(static_cast<int>(a), static_cast<int>(b));
      const double w = 4.0 * e.same_output + 2.0 * e.same_input + 1.0 * e.producer_consumer;
      const auto& la = p.mtiles[a].loc;
      const auto& lb = p.mtiles[b].loc;
      if (la == lb) score += w;
      else if (la.tile == lb.tile) score += 0.25 * w;
    }
  return score;
}

std::string dump_plan(const Program& p) {
  std::string out;
  for (std::size_t t = 0; t < p.mtiles.size(); ++t) {
    const auto& mt = p.mtiles[t];
    out += fmt::format("mtile {} matrix={} block=({},{}) {}x{} -> tile {} core {} mvmu {}\n", t, mt.matrix, mt.row_block,
                       mt.col_block, mt.data.rows(), mt.data.cols(), mt.loc.tile, mt.loc.core, mt.mvmu);
  }
  for (const auto& o : p.ops) {
    out += fmt::format("op {} {} w={} layer={}", o.id, to_string(o.kind), o.width, o.layer);
    if (o.loc.valid()) out += fmt::format(" @({},{})", o.loc.tile, o.loc.core);
    if (!o.args.empty()) {
      out += " args=";
      for (std::size_t k = 0; k < o.args.size(); ++k) out += (k ? "," : "") + std::to_string(o.args[k]);
    }
    if (o.kind == OpKind::Store || o.kind == OpKind::Receive) out += fmt::format(" count={}", o.count);
    if (o.kind == OpKind::Send) out += fmt::format(" target={} fifo={}", o.target, o.fifo);
    if (o.kind == OpKind::Receive) out += fmt::format(" fifo={}", o.fifo);
    if (o.origin >= 0) out += fmt::format(" node={}", o.origin);
    out += '\n';
  }
  return out;
}

}  // namespace puma::compiler
