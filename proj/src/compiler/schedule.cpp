#include "puma/compiler/schedule.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>

#include "puma/error.hpp"

namespace puma::compiler {

namespace {

/// The program with each group contracted to one unit.
struct Quotient {
  std::vector<int> unit_of;
  std::vector<std::vector<int>> members;
  std::vector<std::vector<int>> preds;
  std::vector<std::vector<int>> succs;

  Quotient(const Program& p, const Groups& groups) : unit_of(p.ops.size(), -1) {
    for (const auto& g : groups) {
      for (int id : g) unit_of[static_cast<std::size_t>(id)] = static_cast<int>(members.size());
      members.push_back(g);
    }
    for (const auto& o : p.ops)
      if (unit_of[static_cast<std::size_t>(o.id)] < 0) {
        unit_of[static_cast<std::size_t>(o.id)] = static_cast<int>(members.size());
        members.push_back({o.id});
      }
    std::vector<std::set<int>> pr(members.size()), sc(members.size());
    for (const auto& o : p.ops) {
      const int u = unit_of[static_cast<std::size_t>(o.id)];
      for (int a : o.args) {
        const int w = unit_of[static_cast<std::size_t>(a)];
        if (w == u) continue;
        pr[static_cast<std::size_t>(u)].insert(w);
        sc[static_cast<std::size_t>(w)].insert(u);
      }
    }
    for (std::size_t u = 0; u < members.size(); ++u) {
      preds.emplace_back(pr[u].begin(), pr[u].end());
      succs.emplace_back(sc[u].begin(), sc[u].end());
    }
  }

  std::size_t size() const { return members.size(); }
  int min_id(int u) const { return members[static_cast<std::size_t>(u)].front(); }

  std::vector<int> kahn() const {
    std::vector<int> indeg(size());
    for (std::size_t u = 0; u < size(); ++u) indeg[u] = static_cast<int>(preds[u].size());
    std::vector<int> ready;
    for (std::size_t u = 0; u < size(); ++u)
      if (indeg[u] == 0) ready.push_back(static_cast<int>(u));
    auto by_id = [&](int a, int b) { return min_id(a) < min_id(b); };
    std::sort(ready.begin(), ready.end(), by_id);
    std::deque<int> queue(ready.begin(), ready.end());
    std::vector<int> order;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      order.push_back(u);
      std::vector<int> next;
      for (int s : succs[static_cast<std::size_t>(u)])
        if (--indeg[static_cast<std::size_t>(s)] == 0) next.push_back(s);
      std::sort(next.begin(), next.end(), by_id);
      queue.insert(queue.end(), next.begin(), next.end());
    }
    if (order.size() != size()) throw CompileError("dependence cycle in program graph");
    return order;
  }

  enum class Key { Need, Height, Id };

  /// Operand-first traversal; `key` ranks operands (larger first, then lowest id) and sinks start
  /// in id order or, with `needy_sinks`, neediest first. With `eager` 1, a consumer that becomes
  /// ready is emitted at once when it frees at least as many live values as it creates; with 2,
  /// every consumer that becomes ready is.
  std::vector<int> post_order(Key key = Key::Need, bool needy_sinks = false, int eager = 0) const {
    const auto topo = kahn();
    // Values needed to evaluate each unit's operand tree, operands taken neediest first.
    std::vector<int> need(size(), 1);
    for (int u : topo) {
      std::vector<int> ns;
      for (int q : preds[static_cast<std::size_t>(u)]) ns.push_back(need[static_cast<std::size_t>(q)]);
      std::sort(ns.rbegin(), ns.rend());
      for (std::size_t k = 0; k < ns.size(); ++k)
        need[static_cast<std::size_t>(u)] = std::max(need[static_cast<std::size_t>(u)], ns[k] + static_cast<int>(k));
    }
    std::vector<int> height(size(), 0);
    for (int u : topo)
      for (int q : preds[static_cast<std::size_t>(u)])
        height[static_cast<std::size_t>(u)] = std::max(height[static_cast<std::size_t>(u)], height[static_cast<std::size_t>(q)] + 1);
    const std::vector<int>& rank = key == Key::Height ? height : need;
    std::vector<char> seen(size(), 0), emitted(size(), 0);
    std::vector<int> remaining(size());
    for (std::size_t u = 0; u < size(); ++u) remaining[u] = static_cast<int>(succs[u].size());
    std::vector<int> order;
    order.reserve(size());
    std::function<void(int)> emit = [&](int u) {
      emitted[static_cast<std::size_t>(u)] = seen[static_cast<std::size_t>(u)] = 1;
      order.push_back(u);
      for (int q : preds[static_cast<std::size_t>(u)]) --remaining[static_cast<std::size_t>(q)];
      if (!eager) return;
      for (int s : succs[static_cast<std::size_t>(u)]) {
        if (emitted[static_cast<std::size_t>(s)]) continue;
        int freed = 0;
        bool ready = true;
        for (int q : preds[static_cast<std::size_t>(s)]) {
          ready = ready && emitted[static_cast<std::size_t>(q)];
          freed += remaining[static_cast<std::size_t>(q)] == 1;
        }
        // A value read only by sinks that become ready with it dies at once.
        bool transient = true;
        for (int t : succs[static_cast<std::size_t>(s)]) {
          transient = transient && succs[static_cast<std::size_t>(t)].empty();
          for (int q : preds[static_cast<std::size_t>(t)]) transient = transient && (q == s || emitted[static_cast<std::size_t>(q)]);
        }
        const int created = transient ? 0 : 1;
        if (ready && (eager > 1 || freed >= created)) emit(s);
      }
    };
    // Iterative DFS over operands; frames hold the sorted operand list and a cursor.
    struct Frame {
      int unit;
      std::vector<int> ops;
      std::size_t next = 0;
    };
    auto sorted_preds = [&](int u) {
      auto v = preds[static_cast<std::size_t>(u)];
      std::sort(v.begin(), v.end(), [&](int a, int b) {
        const int ha = key == Key::Id ? 0 : rank[static_cast<std::size_t>(a)];
        const int hb = key == Key::Id ? 0 : rank[static_cast<std::size_t>(b)];
        return ha != hb ? ha > hb : min_id(a) < min_id(b);
      });
      return v;
    };
    auto visit = [&](int root) {
      std::vector<Frame> stack;
      seen[static_cast<std::size_t>(root)] = 1;
      stack.push_back({root, sorted_preds(root)});
      while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.ops.size()) {
          const int q = f.ops[f.next++];
          if (seen[static_cast<std::size_t>(q)]) continue;
          seen[static_cast<std::size_t>(q)] = 1;
          stack.push_back({q, sorted_preds(q)});
          continue;
        }
        const int u = f.unit;
        stack.pop_back();
        if (!emitted[static_cast<std::size_t>(u)]) emit(u);
      }
    };
    std::vector<int> sinks;
    for (std::size_t u = 0; u < size(); ++u)
      if (succs[u].empty()) sinks.push_back(static_cast<int>(u));
    std::sort(sinks.begin(), sinks.end(), [&](int a, int b) {
      if (needy_sinks && need[static_cast<std::size_t>(a)] != need[static_cast<std::size_t>(b)])
        return need[static_cast<std::size_t>(a)] > need[static_cast<std::size_t>(b)];
      return min_id(a) < min_id(b);
    });
    for (int s : sinks)
      if (!seen[static_cast<std::size_t>(s)]) visit(s);
    return order;
  }

  /// Bit rows of transitive successors per unit.
  std::vector<std::vector<std::uint64_t>> reach() const {
    const std::size_t words = (size() + 63) / 64;
    std::vector<std::vector<std::uint64_t>> r(size(), std::vector<std::uint64_t>(words, 0));
    const auto topo = kahn();
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      auto& row = r[static_cast<std::size_t>(*it)];
      for (int s : succs[static_cast<std::size_t>(*it)]) {
        row[static_cast<std::size_t>(s) / 64] |= std::uint64_t{1} << (s % 64);
        for (std::size_t w = 0; w < words; ++w) row[w] |= r[static_cast<std::size_t>(s)][w];
      }
    }
    return r;
  }
};

bool bit(const std::vector<std::uint64_t>& row, int k) { return row[static_cast<std::size_t>(k) / 64] >> (k % 64) & 1; }

}  // namespace

Groups coalesce_mvms(const Program& p, int mvmus_per_core) {
  std::vector<std::vector<int>> groups;  // current groups, including singletons of MvmTile ops
  std::vector<int> group_of(p.ops.size(), -1);
  for (const auto& o : p.ops)
    if (o.kind == OpKind::MvmTile) {
      group_of[static_cast<std::size_t>(o.id)] = static_cast<int>(groups.size());
      groups.push_back({o.id});
    }
  if (mvmus_per_core < 2 || groups.size() < 2) return {};

  auto multi = [&]() {
    Groups out;
    for (const auto& g : groups)
      if (g.size() > 1) out.push_back(g);
    return out;
  };
  auto mvmu_set = [&](const std::vector<int>& g) {
    std::set<int> s;
    for (int id : g) s.insert(p.mtiles[static_cast<std::size_t>(p.op(id).mtile)].mvmu);
    return s;
  };
  // Tries to merge group b into group a; returns whether it did.
  auto try_fuse = [&](int a, int b, const Quotient& q, const std::vector<std::vector<std::uint64_t>>& r) {
    if (a == b || groups[static_cast<std::size_t>(a)].empty() || groups[static_cast<std::size_t>(b)].empty()) return false;
    const auto& ga = groups[static_cast<std::size_t>(a)];
    const auto& gb = groups[static_cast<std::size_t>(b)];
    if (static_cast<int>(ga.size() + gb.size()) > mvmus_per_core) return false;
    if (p.op(ga.front()).loc != p.op(gb.front()).loc) return false;
    const auto ma = mvmu_set(ga), mb = mvmu_set(gb);
    for (int x : mb)
      if (ma.count(x)) return false;
    const int ua = q.unit_of[static_cast<std::size_t>(ga.front())];
    const int ub = q.unit_of[static_cast<std::size_t>(gb.front())];
    if (bit(r[static_cast<std::size_t>(ua)], ub) || bit(r[static_cast<std::size_t>(ub)], ua)) return false;
    auto& dst = groups[static_cast<std::size_t>(a)];
    for (int id : gb) {
      dst.push_back(id);
      group_of[static_cast<std::size_t>(id)] = a;
    }
    std::sort(dst.begin(), dst.end());
    groups[static_cast<std::size_t>(b)].clear();
    return true;
  };

  // Tiles of one logical MVM on one core.
  std::map<std::pair<int, Loc>, std::vector<int>> same_mvm;
  for (const auto& o : p.ops)
    if (o.kind == OpKind::MvmTile) same_mvm[{o.origin, o.loc}].push_back(o.id);
  for (const auto& [key, ids] : same_mvm) {
    if (ids.size() < 2) continue;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const int a = group_of[static_cast<std::size_t>(ids[i])];
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        const int b = group_of[static_cast<std::size_t>(ids[j])];
        if (a == b) continue;
        const Quotient q(p, multi());
        if (try_fuse(a, b, q, q.reach())) continue;
      }
    }
  }

  // Traversal-order pass.
  {
    Quotient q(p, multi());
    auto r = q.reach();
    std::vector<int> seq;
    for (int u : q.post_order())
      if (p.op(q.min_id(u)).kind == OpKind::MvmTile) seq.push_back(group_of[static_cast<std::size_t>(q.min_id(u))]);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const int a = seq[i];
      for (std::size_t j = i + 1; j < seq.size(); ++j) {
        if (static_cast<int>(groups[static_cast<std::size_t>(a)].size()) >= mvmus_per_core) break;
        if (try_fuse(a, seq[j], q, r)) {
          q = Quotient(p, multi());
          r = q.reach();
        }
      }
    }
  }
  Groups out = multi();
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> linearize(const Program& p, const Groups& groups, bool naive) {
  const Quotient q(p, groups);
  std::map<int, int> receive_of;
  const auto cons = p.consumers();
  for (const auto& o : p.ops)
    if (o.kind == OpKind::Send)
      for (int c : cons[static_cast<std::size_t>(o.id)]) receive_of[o.id] = c;
  auto expand = [&](const std::vector<int>& units) {
    std::vector<int> order;
    order.reserve(p.ops.size());
    for (int u : units)
      for (int id : q.members[static_cast<std::size_t>(u)]) {
        const OpKind k = p.op(id).kind;
        if (k == OpKind::Receive) continue;
        order.push_back(id);
        if (k == OpKind::Send) order.push_back(receive_of.at(id));
      }
    if (order.size() != p.ops.size()) throw CompileError("linearization lost ops");
    return order;
  };
  if (naive) return expand(q.kahn());

  // Several operand-first traversals; the one with the fewest simultaneously live values wins.
  std::vector<int> best;
  int best_live = 0;
  for (const int eager : {1, 2, 0})
    for (const auto key : {Quotient::Key::Need, Quotient::Key::Height, Quotient::Key::Id})
      for (const bool needy : {false, true}) {
        auto order = expand(q.post_order(key, needy, eager));
        const int live = max_live(p, order);
        if (best.empty() || live < best_live) {
          best = std::move(order);
          best_live = live;
        }
      }
  return best;
}

int max_live(const Program& p, const std::vector<int>& order) {
  std::vector<int> pos(p.ops.size(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) pos[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
  std::vector<int> delta(order.size() + 1, 0);
  const auto cons = p.consumers();
  for (const auto& o : p.ops) {
    const auto& cs = cons[static_cast<std::size_t>(o.id)];
    if (cs.empty()) continue;
    int last = 0;
    for (int c : cs) last = std::max(last, pos[static_cast<std::size_t>(c)]);
    // live over [pos(o), last)
    ++delta[static_cast<std::size_t>(pos[static_cast<std::size_t>(o.id)])];
    --delta[static_cast<std::size_t>(last)];
  }
  int cur = 0, best = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cur += delta[k];
    best = std::max(best, cur);
  }
  return best;
}

bool is_valid_order(const Program& p, const std::vector<int>& order, const Groups& groups) {
  if (order.size() != p.ops.size()) return false;
  std::vector<int> pos(p.ops.size(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int id = order[k];
    if (id < 0 || static_cast<std::size_t>(id) >= p.ops.size() || pos[static_cast<std::size_t>(id)] >= 0) return false;
    pos[static_cast<std::size_t>(id)] = static_cast<int>(k);
  }
  for (const auto& o : p.ops)
    for (int a : o.args)
      if (pos[static_cast<std::size_t>(a)] >= pos[static_cast<std::size_t>(o.id)]) return false;
  for (const auto& g : groups) {
    int lo = pos[static_cast<std::size_t>(g.front())], hi = lo;
    for (int id : g) {
      lo = std::min(lo, pos[static_cast<std::size_t>(id)]);
      hi = std::max(hi, pos[static_cast<std::size_t>(id)]);
    }
    if (hi - lo + 1 != static_cast<int>(g.size())) return false;
  }
  return true;
}

}  // namespace puma::compiler
