#include "puma/compiler/regalloc.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma::compiler {

using isa::Instruction;
using isa::Opcode;

namespace {

struct Access {
  VOperand* op;
  int width;
  bool write;
};

std::vector<Access> accesses(VInst& v) {
  std::vector<Access> out;
  if (v.inst.opcode == Opcode::Mvm) return out;
  const OperandUse u = operand_use(v.inst);
  if (u.src1) out.push_back({&v.src1, src1_width(v.inst), false});
  if (u.src2) out.push_back({&v.src2, src2_width(v.inst), false});
  if (u.dest) out.push_back({&v.dest, dest_width(v.inst), true});
  return out;
}

/// (head, end) instruction indices per loop id.
std::map<int, std::pair<int, int>> loop_spans(const std::vector<VInst>& insts) {
  std::map<int, std::pair<int, int>> spans;
  for (std::size_t i = 0; i < insts.size(); ++i) {
    if (insts[i].loop_head >= 0) spans[insts[i].loop_head].first = static_cast<int>(i);
    if (insts[i].branch_to >= 0) spans[insts[i].branch_to].second = static_cast<int>(i);
  }
  return spans;
}

constexpr int kChunk = isa::kMaxVecWidth;

}  // namespace

int resolve_xbar_out_conflicts(CoreCode& c) {
  std::vector<std::vector<int>> reads(c.vregs.size());
  for (std::size_t i = 0; i < c.insts.size(); ++i)
    for (const auto& a : accesses(c.insts[i]))
      if (!a.write && a.op->vreg >= 0) reads[static_cast<std::size_t>(a.op->vreg)].push_back(static_cast<int>(i));
  auto read_in = [&](int v, int lo, int hi) {  // any read in [lo, hi)
    const auto& r = reads[static_cast<std::size_t>(v)];
    auto it = std::lower_bound(r.begin(), r.end(), lo);
    return it != r.end() && *it < hi;
  };

  std::vector<VInst> out;
  std::map<int, int> alias;
  std::map<int, int> resident;  // mvmu -> vreg
  int head_out = -1, head_in = -1;
  int copies = 0;
  const int n = static_cast<int>(c.insts.size());
  for (int i = 0; i < n; ++i) {
    VInst v = c.insts[static_cast<std::size_t>(i)];
    for (auto& a : accesses(v))
      if (!a.write && a.op->vreg >= 0)
        if (auto it = alias.find(a.op->vreg); it != alias.end()) a.op->vreg = it->second;
    if (v.loop_head >= 0) {
      head_out = static_cast<int>(out.size());
      head_in = i;
    }
    if (v.inst.opcode == Opcode::Mvm) {
      for (int d : v.mvm_defs) {
        const int mvmu = c.vregs[static_cast<std::size_t>(d)].mvmu;
        auto it = resident.find(mvmu);
        if (it != resident.end() && it->second != d && read_in(it->second, i + 1, n)) {
          const int old = it->second;
          const int w = c.vregs[static_cast<std::size_t>(old)].width;
          const int g = c.new_vreg(w);
          std::vector<VInst> cp;
          for (int k = 0; k < w; k += kChunk) {
            VInst x;
            x.inst = Instruction::copy(0, 0, std::min(kChunk, w - k));
            x.dest = {g, k};
            x.src1 = {old, k};
            x.origin = v.origin;
            cp.push_back(std::move(x));
          }
          if (head_out >= 0) {
            if (read_in(old, head_in, i)) throw CompileError("XbarOut value read inside the loop that overwrites it");
            out.insert(out.begin() + head_out, cp.begin(), cp.end());
            head_out += static_cast<int>(cp.size());
          } else {
            out.insert(out.end(), cp.begin(), cp.end());
          }
          copies += static_cast<int>(cp.size());
          alias[old] = g;
          reads.emplace_back();
        }
        resident[mvmu] = d;
      }
    }
    const bool closes = v.branch_to >= 0;
    out.push_back(std::move(v));
    if (closes) head_out = head_in = -1;
  }
  c.insts = std::move(out);
  return copies;
}

std::vector<LiveRange> compute_liveness(const CoreCode& c) {
  std::vector<LiveRange> r(c.vregs.size());
  auto touch = [&](int v, int i) {
    if (v < 0) return;
    auto& lr = r[static_cast<std::size_t>(v)];
    if (lr.start < 0) lr.start = i;
    lr.end = std::max(lr.end, i);
  };
  for (std::size_t i = 0; i < c.insts.size(); ++i) {
    VInst v = c.insts[i];
    for (const auto& a : accesses(v)) touch(a.op->vreg, static_cast<int>(i));
    for (int d : v.mvm_defs) touch(d, static_cast<int>(i));
  }
  for (const auto& [id, span] : loop_spans(c.insts)) {
    const auto [h, e] = span;
    for (int i = h; i <= e; ++i) {
      VInst v = c.insts[static_cast<std::size_t>(i)];
      std::vector<int> vs(v.mvm_defs);
      for (const auto& a : accesses(v)) vs.push_back(a.op->vreg);
      for (int x : vs) {
        if (x < 0) continue;
        auto& lr = r[static_cast<std::size_t>(x)];
        lr.start = std::min(lr.start, h);
        lr.end = std::max(lr.end, e);
      }
    }
  }
  return r;
}

namespace {

/// First-fit allocator over [base, base + size). With a nonzero quantum, blocks no wider than it
/// never straddle a quantum boundary and wider blocks start on one.
class Blocks {
 public:
  Blocks(int base, int size, int quantum = 0) : base_(base), size_(size), quantum_(quantum) {}
  int find(int width) const {
    int at = align(base_, width);
    for (const auto& [b, w] : used_) {
      if (b - at >= width) break;
      at = align(std::max(at, b + w), width);
    }
    return at + width <= base_ + size_ ? at : -1;
  }
  void take(int b, int w) {
    used_[b] = w;
    peak_ = std::max(peak_, b + w - base_);
  }
  void release(int b) { used_.erase(b); }
  int peak() const { return peak_; }
  int in_use() const {
    int s = 0;
    for (const auto& [b, w] : used_) s += w;
    return s;
  }

 private:
  int align(int at, int width) const {
    if (quantum_ <= 0) return at;
    const int rel = at - base_;
    const int slot_end = (rel / quantum_ + 1) * quantum_;
    if (width > quantum_) return rel % quantum_ == 0 ? at : base_ + slot_end;
    return rel + width > slot_end ? base_ + slot_end : at;
  }

  int base_, size_, quantum_;
  int peak_ = 0;
  std::map<int, int> used_;
};

class Allocator {
 public:
  Allocator(const CoreCode& c, const MachineConfig& m, int spill_base)
      : c_(c), m_(m), rs_(m), regs_(rs_.general_base(), rs_.general, value_piece(m)), slots_(spill_base, m.tile_memory_words - spill_base),
        spill_base_(spill_base), live_(compute_liveness(c)), state_(c.vregs.size()) {
    touches_.resize(c.vregs.size());
    for (std::size_t i = 0; i < c.insts.size(); ++i) {
      VInst v = c.insts[i];
      for (const auto& a : accesses(v))
        if (a.op->vreg >= 0) touches_[static_cast<std::size_t>(a.op->vreg)].push_back(static_cast<int>(i));
    }
    spans_ = loop_spans(c.insts);
  }

  AllocResult run() {
    const int n = static_cast<int>(c_.insts.size());
    std::map<int, int> head_pos;  // output index of each loop head
    int loop_end = -1;
    for (int i = 0; i < n; ++i) {
      VInst v = c_.insts[static_cast<std::size_t>(i)];
      std::set<int> lock;
      for (const auto& a : accesses(v))
        if (is_general(a.op->vreg)) lock.insert(a.op->vreg);

      if (v.loop_head >= 0) {
        const auto [h, e] = spans_.at(v.loop_head);
        std::set<int> body;
        for (int k = h; k <= e; ++k) {
          VInst b = c_.insts[static_cast<std::size_t>(k)];
          for (const auto& a : accesses(b))
            if (is_general(a.op->vreg) && state_[static_cast<std::size_t>(a.op->vreg)].written) body.insert(a.op->vreg);
        }
        for (int x : body) ensure_resident(x, i, body, true);
        loop_end = e;
        head_pos[v.loop_head] = -1;
      }
      const bool in_loop = loop_end >= 0;

      for (const auto& a : accesses(v)) {
        const int x = a.op->vreg;
        if (!is_general(x)) continue;
        ensure_resident(x, i, lock, !a.write || state_[static_cast<std::size_t>(x)].written, in_loop);
      }

      Instruction inst = v.inst;
      const OperandUse u = operand_use(inst);
      if (u.dest) inst.dest = static_cast<std::uint16_t>(phys(v.dest));
      if (u.src1) inst.src1 = static_cast<std::uint16_t>(phys(v.src1));
      if (u.src2) inst.src2 = static_cast<std::uint16_t>(phys(v.src2));
      if (v.loop_head >= 0) head_pos[v.loop_head] = static_cast<int>(out_.code.size());
      if (v.branch_to >= 0) {
        inst.pc = static_cast<std::uint16_t>(head_pos.at(v.branch_to));
        loop_end = -1;
      }
      emit(inst, false);

      for (const auto& a : accesses(v))
        if (a.write && is_general(a.op->vreg)) {
          auto& s = state_[static_cast<std::size_t>(a.op->vreg)];
          s.written = true;
          s.in_slot = false;
        }
      std::set<int> seen;
      for (const auto& a : accesses(v)) {
        const int x = a.op->vreg;
        if (!is_general(x) || !seen.insert(x).second) continue;
        if (live_[static_cast<std::size_t>(x)].end <= i) retire(x);
      }
    }
    for (auto& s : state_)
      if (s.resident) out_.assignments[static_cast<std::size_t>(s.assignment)].to = static_cast<int>(out_.code.size()) - 1;
    out_.spill_words = slots_.peak();
    return std::move(out_);
  }

 private:
  struct State {
    bool resident = false;
    bool written = false;
    bool in_slot = false;
    int base = -1;
    int slot = -1;
    int assignment = -1;
  };

  bool is_general(int v) const { return v >= 0 && c_.vregs[static_cast<std::size_t>(v)].cls == RegClass::General; }

  int phys(const VOperand& o) const {
    if (o.vreg < 0) return o.offset;
    const VReg& r = c_.vregs[static_cast<std::size_t>(o.vreg)];
    if (r.cls == RegClass::XbarOut) return rs_.xbar_out(r.mvmu) + o.offset;
    const auto& s = state_[static_cast<std::size_t>(o.vreg)];
    if (!s.resident) throw CompileError("register allocation used a non-resident value");
    return s.base + o.offset;
  }

  void emit(const Instruction& i, bool spill) {
    out_.code.push_back(i);
    out_.spill.push_back(spill ? 1 : 0);
  }

  int next_touch(int v, int after) const {
    const auto& t = touches_[static_cast<std::size_t>(v)];
    auto it = std::upper_bound(t.begin(), t.end(), after);
    return it == t.end() ? std::numeric_limits<int>::max() : *it;
  }

  void ensure_resident(int x, int i, const std::set<int>& lock, bool need_value, bool in_loop = false) {
    auto& s = state_[static_cast<std::size_t>(x)];
    if (s.resident) return;
    const int w = c_.vregs[static_cast<std::size_t>(x)].width;
    if (w > rs_.general) throw CapacityError(fmt::format("a {}-element value exceeds the {} general registers", w, rs_.general));
    int at = regs_.find(w);
    while (at < 0) {
      if (in_loop) throw CompileError("register pressure inside a loop body requires spilling");
      evict(pick_victim(i, lock, w));
      at = regs_.find(w);
    }
    regs_.take(at, w);
    s.resident = true;
    s.base = at;
    s.assignment = static_cast<int>(out_.assignments.size());
    out_.assignments.push_back({x, at, w, static_cast<int>(out_.code.size()), static_cast<int>(out_.code.size())});
    out_.peak_registers = std::max(out_.peak_registers, regs_.in_use());
    if (need_value && s.written) {
      if (s.slot < 0) throw CompileError("reload of a value that was never spilled");
      for (int k = 0; k < w; k += kChunk) {
        emit(Instruction::load(at + k, s.slot + k, std::min(kChunk, w - k)), true);
        ++out_.spill_loads;
      }
    }
  }

  int pick_victim(int i, const std::set<int>& lock, int need) const {
    int best = -1, best_next = -1;
    for (std::size_t v = 0; v < state_.size(); ++v) {
      if (!state_[v].resident || lock.count(static_cast<int>(v))) continue;
      const int nx = next_touch(static_cast<int>(v), i - 1);
      if (nx > best_next) {
        best_next = nx;
        best = static_cast<int>(v);
      }
    }
    if (best < 0) {
      std::string held;
      for (int v : lock)
        if (state_[static_cast<std::size_t>(v)].resident)
          held += fmt::format(" {}@{}", c_.vregs[static_cast<std::size_t>(v)].width, state_[static_cast<std::size_t>(v)].base);
      throw CapacityError(fmt::format("general registers cannot hold the operands of one instruction (need {}, held{})", need, held));
    }
    return best;
  }

  void evict(int x) {
    auto& s = state_[static_cast<std::size_t>(x)];
    const int w = c_.vregs[static_cast<std::size_t>(x)].width;
    if (s.written && !s.in_slot) {
      if (s.slot < 0) {
        s.slot = slots_.find(w);
        if (s.slot < 0) throw CapacityError("tile memory exhausted by register spills");
        slots_.take(s.slot, w);
      }
      for (int k = 0; k < w; k += kChunk) {
        emit(Instruction::store(s.slot + k, s.base + k, 0, std::min(kChunk, w - k)), true);
        ++out_.spill_stores;
      }
      s.in_slot = true;
    }
    release(x);
  }

  void release(int x) {
    auto& s = state_[static_cast<std::size_t>(x)];
    regs_.release(s.base);
    out_.assignments[static_cast<std::size_t>(s.assignment)].to = static_cast<int>(out_.code.size()) - 1;
    s.resident = false;
    s.assignment = -1;
  }

  void retire(int x) {
    auto& s = state_[static_cast<std::size_t>(x)];
    if (s.resident) release(x);
    if (s.slot >= 0) slots_.release(s.slot);
    s.slot = -1;
  }

  const CoreCode& c_;
  const MachineConfig& m_;
  RegisterSpace rs_;
  Blocks regs_;
  Blocks slots_;
  int spill_base_;
  std::vector<LiveRange> live_;
  std::vector<State> state_;
  std::vector<std::vector<int>> touches_;
  std::map<int, std::pair<int, int>> spans_;
  AllocResult out_;
};

}  // namespace

AllocResult allocate_registers(const CoreCode& c, const MachineConfig& m, int spill_base) {
  return Allocator(c, m, spill_base).run();
}

bool audit_assignments(const std::vector<Assignment>& a) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (a[i].vreg == a[j].vreg) continue;
      const bool time = a[i].from <= a[j].to && a[j].from <= a[i].to;
      const bool space = a[i].base < a[j].base + a[j].width && a[j].base < a[i].base + a[i].width;
      if (time && space) return false;
    }
  return true;
}

}  // namespace puma::compiler
