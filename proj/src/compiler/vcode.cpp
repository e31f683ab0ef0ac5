#include "puma/compiler/vcode.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "puma/error.hpp"
#include "puma/isa/semantics.hpp"

namespace puma::compiler {

using isa::Instruction;
using isa::Opcode;

OperandUse operand_use(const Instruction& i) {
  switch (i.opcode) {
    case Opcode::Alu: return {true, true, !isa::is_unary(i.alu_op())};
    case Opcode::AluImm: return {true, true, false};
    case Opcode::AluInt: return {true, true, true};
    case Opcode::Set: return {true, false, false};
    case Opcode::Copy: return {true, true, false};
    case Opcode::Load: return {true, false, false};
    case Opcode::Store: return {false, true, false};
    case Opcode::Brn: return {false, true, true};
    default: return {};
  }
}

int dest_width(const Instruction& i) {
  switch (i.opcode) {
    case Opcode::AluInt:
    case Opcode::Set: return 1;
    default: return i.vec_width;
  }
}

int src1_width(const Instruction& i) {
  switch (i.opcode) {
    case Opcode::AluInt:
    case Opcode::Brn: return 1;
    case Opcode::AluImm: return isa::alu_source_width(i.alu_op(), i.vec_width, static_cast<std::int16_t>(i.imm));
    default: return i.vec_width;
  }
}

int src2_width(const Instruction& i) {
  switch (i.opcode) {
    case Opcode::AluInt:
    case Opcode::Brn: return 1;
    default: return i.vec_width;
  }
}

namespace {

constexpr int kChunk = isa::kMaxVecWidth;
constexpr int kImmMin = -(1 << (isa::kAluImmBits - 1));
constexpr int kImmMax = (1 << (isa::kAluImmBits - 1)) - 1;

struct Seg {
  VOperand at;
  int length = 0;
};

VOperand shifted(VOperand v, int by) {
  v.offset += by;
  return v;
}

class Lowerer {
 public:
  Lowerer(const Program& p, const Groups& groups, const MemoryMap& mm, const MachineConfig& m, bool shuffle)
      : p_(p), mm_(mm), m_(m), shuffle_(shuffle), piece_(value_piece(m)),
        vals_(p.ops.size()), cons_(p.consumers()) {
    for (const auto& g : groups)
      for (int id : g) group_of_[id] = &g;
    materialize_.assign(p.ops.size(), 0);
    for (const auto& o : p.ops) {
      if (o.kind != OpKind::Gather) continue;
      if (o.pieces.size() == 1) continue;
      for (int c : cons_[static_cast<std::size_t>(o.id)])
        if (p.op(c).kind != OpKind::MvmTile) materialize_[static_cast<std::size_t>(o.id)] = 1;
    }
  }

  VCode run(const std::vector<int>& order) {
    std::set<int> done;
    for (int id : order) {
      if (done.count(id)) continue;
      const Op& o = p_.op(id);
      if (o.kind == OpKind::MvmTile) {
        std::vector<int> members{id};
        if (auto it = group_of_.find(id); it != group_of_.end()) members = *it->second;
        for (int mid : members) done.insert(mid);
        mvm(members);
        continue;
      }
      done.insert(id);
      lower(o);
    }
    VCode out;
    for (auto& [loc, c] : cores_) out.cores.push_back(std::move(c));
    for (auto& [t, c] : tiles_) out.tiles.push_back(std::move(c));
    out.stats = stats_;
    return out;
  }

 private:
  CoreCode& core(Loc l) {
    auto [it, fresh] = cores_.try_emplace(l);
    if (fresh) {
      it->second.tile = l.tile;
      it->second.core = l.core;
      slots_[l].assign(static_cast<std::size_t>(m_.mvmus_per_core),
                       std::vector<VOperand>(static_cast<std::size_t>(m_.crossbar_dim), VOperand{-2, 0}));
    }
    return it->second;
  }

  TileCode& tile(int t) {
    auto [it, fresh] = tiles_.try_emplace(t);
    if (fresh) it->second.tile = t;
    return it->second;
  }

  void emit(CoreCode& c, Instruction inst, VOperand d, VOperand s1, VOperand s2, int origin) {
    for (const VOperand& s : {s1, s2}) fetch(c, s.vreg);
    VInst v;
    v.inst = inst;
    v.dest = d;
    v.src1 = s1;
    v.src2 = s2;
    v.origin = origin;
    c.insts.push_back(std::move(v));
  }

  /// Emits the load of a deferred host-data piece before its first reader.
  void fetch(CoreCode& c, int vreg) {
    auto it = pending_.find({c.tile, c.core, vreg});
    if (it == pending_.end()) return;
    const auto [addr, width, origin] = it->second;
    pending_.erase(it);
    emit(c, Instruction::load(0, addr, width), {vreg, 0}, {}, {}, origin);
  }

  /// Register segments holding the value of `id` on its core.
  std::vector<Seg> resolve(int id) const {
    const Op& o = p_.op(id);
    if (o.kind == OpKind::Gather && !materialize_[static_cast<std::size_t>(id)]) {
      std::vector<Seg> out;
      for (const auto& pc : o.pieces) {
        int skip = pc.offset, need = pc.length;
        for (const Seg& s : resolve(o.args[static_cast<std::size_t>(pc.operand)])) {
          if (need == 0) break;
          if (skip >= s.length) {
            skip -= s.length;
            continue;
          }
          const int take = std::min(need, s.length - skip);
          out.push_back({shifted(s.at, skip), take});
          need -= take;
          skip = 0;
        }
      }
      return out;
    }
    const auto& v = vals_[static_cast<std::size_t>(id)];
    if (v.empty()) throw CompileError(fmt::format("op {} has no register value on its core", id));
    return v;
  }

  /// Location of element `off` and how many elements follow it contiguously.
  static std::pair<VOperand, int> locate(const std::vector<Seg>& segs, int off) {
    for (const Seg& s : segs) {
      if (off < s.length) return {shifted(s.at, off), s.length - off};
      off -= s.length;
    }
    throw CompileError("operand offset past the end of its value");
  }

  /// General-register value split into pieces no wider than piece_.
  std::vector<Seg> make_value(CoreCode& c, int width) {
    std::vector<Seg> out;
    for (int k = 0; k < width; k += piece_) {
      const int w = std::min(piece_, width - k);
      out.push_back({{c.new_vreg(w), 0}, w});
    }
    return out;
  }

  const std::vector<Seg>& define(CoreCode& c, const Op& o) {
    auto& v = vals_[static_cast<std::size_t>(o.id)];
    v = make_value(c, o.width);
    return v;
  }

  void copy_segs(CoreCode& c, const std::vector<Seg>& dst, int doff, const std::vector<Seg>& src, int soff, int len,
                 int origin) {
    for (int k = 0; k < len;) {
      const auto [d, dn] = locate(dst, doff + k);
      const auto [s, sn] = locate(src, soff + k);
      const int w = std::min({kChunk, len - k, dn, sn});
      emit(c, Instruction::copy(0, 0, w), d, s, {}, origin);
      k += w;
    }
  }

  /// A single register operand holding the whole value, copying into a fresh register when it is split.
  VOperand whole(CoreCode& c, int id, int origin) {
    const auto segs = resolve(id);
    if (segs.size() == 1) return segs.front().at;
    const int width = p_.op(id).width;
    const std::vector<Seg> dst{{{c.new_vreg(width), 0}, width}};
    copy_segs(c, dst, 0, segs, 0, width, origin);
    return dst.front().at;
  }

  void lower(const Op& o) {
    switch (o.kind) {
      case OpKind::Input:
      case OpKind::Const: return;
      case OpKind::Alu:
      case OpKind::AluImm: return alu(o);
      case OpKind::Gather: {
        if (!materialize_[static_cast<std::size_t>(o.id)]) return;
        CoreCode& c = here(o);
        const auto dst = define(c, o);
        int at = 0;
        for (const auto& pc : o.pieces) {
          copy_segs(c, dst, at, resolve(o.args[static_cast<std::size_t>(pc.operand)]), pc.offset, pc.length, o.id);
          at += pc.length;
        }
        return;
      }
      case OpKind::Load: {
        CoreCode& c = here(o);
        const int addr = mm_.at(o.loc.tile, o.args[0]);
        const auto& dst = define(c, o);
        const OpKind src = p_.op(o.args[0]).kind;
        if (src == OpKind::Input || src == OpKind::Const) {
          // Host data never changes, so each piece is read only when first needed.
          int k = 0;
          for (const Seg& sg : dst) {
            pending_[{c.tile, c.core, sg.at.vreg}] = {addr + k, sg.length, o.id};
            k += sg.length;
          }
          return;
        }
        for (int k = 0; k < o.width;) {
          const auto [d, dn] = locate(dst, k);
          const int w = std::min({kChunk, o.width - k, dn});
          emit(c, Instruction::load(0, addr + k, w), d, {}, {}, o.id);
          k += w;
        }
        return;
      }
      case OpKind::Store:
      case OpKind::Output: {
        CoreCode& c = here(o);
        const auto src = resolve(o.args[0]);
        const int addr = mm_.at(o.loc.tile, o.id);
        const int count = o.kind == OpKind::Store ? o.count : 0;
        for (int k = 0; k < o.width;) {
          const auto [a, an] = locate(src, k);
          const int w = std::min({kChunk, o.width - k, an});
          emit(c, Instruction::store(addr + k, 0, count, w), {}, a, {}, o.id);
          k += w;
        }
        return;
      }
      case OpKind::Send: {
        TileCode& t = tile(o.loc.tile);
        const int addr = mm_.at(o.loc.tile, o.args[0]);
        for (int k = 0; k < o.width; k += kChunk)
          t.insts.push_back(Instruction::send(addr + k, o.fifo, o.target, std::min(kChunk, o.width - k)));
        return;
      }
      case OpKind::Receive: {
        TileCode& t = tile(o.loc.tile);
        const int addr = mm_.at(o.loc.tile, o.id);
        for (int k = 0; k < o.width; k += kChunk)
          t.insts.push_back(Instruction::receive(addr + k, o.fifo, o.count, std::min(kChunk, o.width - k)));
        return;
      }
      case OpKind::ConvLoop: return conv_loop(o);
      case OpKind::MvmTile: return;
    }
  }

  CoreCode& here(const Op& o) {
    if (!o.loc.valid() || o.loc.core < 0) throw CompileError(fmt::format("op {} is not placed on a core", o.id));
    return core(o.loc);
  }

  void alu(const Op& o) {
    CoreCode& c = here(o);
    const auto a = resolve(o.args[0]);
    const bool binary = o.kind == OpKind::Alu && !isa::is_unary(o.alu);
    std::vector<Seg> b;
    if (binary) b = resolve(o.args[1]);
    bool vector_imm = false;
    if (o.kind == OpKind::AluImm && (o.imm < kImmMin || o.imm > kImmMax)) {
      // Immediate too wide for the field: broadcast it into a register vector.
      b = make_value(c, o.width);
      emit(c, Instruction::set(0, static_cast<std::uint16_t>(o.imm)), b.front().at, {}, {}, o.id);
      for (int have = 1; have < o.width; have *= 2) copy_segs(c, b, have, b, 0, std::min(have, o.width - have), o.id);
      vector_imm = true;
    }
    const auto& d = define(c, o);
    const int stride = o.alu == isa::AluOp::Subsample ? std::max<int>(o.imm, 1) : 1;
    for (int k = 0; k < o.width;) {
      const auto [dv, dn] = locate(d, k);
      const auto [av, an] = locate(a, k * stride);
      int w = std::min({kChunk, o.width - k, dn, (an - 1) / stride + 1});
      VOperand bv{};
      if (binary || vector_imm) {
        const auto [bo, bn] = locate(b, k);
        bv = bo;
        w = std::min(w, bn);
      }
      if (o.kind == OpKind::AluImm && !vector_imm) emit(c, Instruction::alu_imm(o.alu, 0, 0, o.imm, w), dv, av, {}, o.id);
      else emit(c, Instruction::alu(o.alu, 0, 0, 0, w), dv, av, bv, o.id);
      k += w;
    }
  }

  void mvm(const std::vector<int>& members) {
    const Op& lead = p_.op(members.front());
    CoreCode& c = here(lead);
    auto& slots = slots_[lead.loc];

    struct Member {
      const Op* op;
      int mvmu;
      int rows;
      std::vector<VOperand> want;
    };
    std::vector<Member> ms;
    for (int id : members) {
      const Op& o = p_.op(id);
      const auto& mt = p_.mtiles[static_cast<std::size_t>(o.mtile)];
      Member mb{&o, mt.mvmu, static_cast<int>(mt.data.rows()), {}};
      for (const Seg& s : resolve(o.args[0]))
        for (int k = 0; k < s.length; ++k) mb.want.push_back(shifted(s.at, k));
      if (static_cast<int>(mb.want.size()) != mb.rows) throw CompileError(fmt::format("mvm {} input length mismatch", id));
      ms.push_back(std::move(mb));
    }

    // Choose the rotation that keeps the most XbarIn contents in place.
    int best_s = 0, best_score = -1;
    std::uint8_t pattern = 0;
    if (shuffle_) {
      bool same_len = true;
      for (const auto& mb : ms) same_len = same_len && mb.rows == ms.front().rows;
      const int len = ms.front().rows;
      const int candidates = same_len ? len : 1;
      for (int s = 0; s < candidates; ++s) {
        if (s != 0) {
          const isa::ShufflePattern pat{static_cast<std::uint16_t>(len), static_cast<std::uint16_t>(s)};
          const bool known = std::find(c.shuffles.begin(), c.shuffles.end(), pat) != c.shuffles.end();
          if (!known && static_cast<int>(c.shuffles.size()) >= isa::kMaxShufflePatterns) continue;
        }
        int score = 0;
        for (const auto& mb : ms)
          for (int r = 0; r < mb.rows; ++r)
            score += slots[static_cast<std::size_t>(mb.mvmu)][static_cast<std::size_t>((r + s) % mb.rows)] == mb.want[static_cast<std::size_t>(r)];
        if (score > best_score) {
          best_score = score;
          best_s = s;
        }
      }
      if (best_s != 0)
        pattern = static_cast<std::uint8_t>(isa::intern_shuffle(
            c.shuffles, {static_cast<std::uint16_t>(ms.front().rows), static_cast<std::uint16_t>(best_s)}));
    }

    for (const auto& mb : ms) {
      auto& sl = slots[static_cast<std::size_t>(mb.mvmu)];
      const int base = mb.mvmu * m_.crossbar_dim;
      stats_.fill_words_full += mb.rows;
      int r = 0;
      while (r < mb.rows) {
        const int slot = (r + best_s) % mb.rows;
        if (shuffle_ && sl[static_cast<std::size_t>(slot)] == mb.want[static_cast<std::size_t>(r)]) {
          ++r;
          continue;
        }
        int n = 1;
        while (r + n < mb.rows && n < kChunk) {
          const int ns = (r + n + best_s) % mb.rows;
          const VOperand& prev = mb.want[static_cast<std::size_t>(r + n - 1)];
          const VOperand& cur = mb.want[static_cast<std::size_t>(r + n)];
          if (ns != slot + n || cur.vreg != prev.vreg || cur.offset != prev.offset + 1) break;
          if (shuffle_ && sl[static_cast<std::size_t>(ns)] == cur) break;
          ++n;
        }
        emit(c, Instruction::copy(0, 0, n), {-1, base + slot}, mb.want[static_cast<std::size_t>(r)], {}, mb.op->id);
        for (int k = 0; k < n; ++k) sl[static_cast<std::size_t>(slot + k)] = mb.want[static_cast<std::size_t>(r + k)];
        stats_.fill_words += n;
        r += n;
      }
    }

    std::uint16_t mask = 0;
    VInst v;
    for (const auto& mb : ms) mask = static_cast<std::uint16_t>(mask | (1u << mb.mvmu));
    v.inst = Instruction::mvm(mask, pattern);
    v.origin = lead.id;
    for (const auto& mb : ms) {
      const int out = c.new_vreg(mb.op->width, RegClass::XbarOut, mb.mvmu);
      vals_[static_cast<std::size_t>(mb.op->id)] = {{{out, 0}, mb.op->width}};
      v.mvm_defs.push_back(out);
    }
    c.insts.push_back(std::move(v));
    ++stats_.mvm_instructions;
  }

  void conv_loop(const Op& o) {
    const auto& r = p_.conv_regions.at(static_cast<std::size_t>(o.conv));
    CoreCode& c = here(o);
    const int mvmu = p_.mtiles[static_cast<std::size_t>(o.mtile)].mvmu;
    const int run = r.kernel_w * r.channels;
    const int img_len = r.height * r.width * r.channels;
    const int p_last = (r.out_h() - 1) * r.stride * r.width + (r.out_w() - 1) * r.stride;
    const int iters = p_last / r.stride + 1;
    const int nm = r.filters;
    if (iters > 32767) throw CompileError("conv loop trip count exceeds the counter range");

    const int img = c.new_vreg(img_len);
    const std::vector<Seg> img_v{{{img, 0}, img_len}};
    copy_segs(c, img_v, 0, resolve(o.args[0]), 0, img_len, o.id);
    const VOperand bias = whole(c, o.args[1], o.id);
    const int out = c.new_vreg(iters * nm);
    const std::vector<Seg> out_v{{{out, 0}, iters * nm}};
    const int cnt = c.new_vreg(1), lim = c.new_vreg(1), one = c.new_vreg(1);
    emit(c, Instruction::set(0, 0), {cnt, 0}, {}, {}, o.id);
    emit(c, Instruction::set(0, iters), {lim, 0}, {}, {}, o.id);
    emit(c, Instruction::set(0, 1), {one, 0}, {}, {}, o.id);

    const int loop = c.loops++;
    const std::size_t head = c.insts.size();
    const int base = mvmu * m_.crossbar_dim;
    for (int i = 0; i < r.kernel_h; ++i)
      emit(c, Instruction::copy(0, 0, run), {-1, base + i * run}, {img, i * r.width * r.channels}, {}, o.id);
    c.insts[head].loop_head = loop;
    VInst mv;
    mv.inst = Instruction::mvm(static_cast<std::uint16_t>(1u << mvmu), 0);
    mv.origin = o.id;
    const int xo = c.new_vreg(nm, RegClass::XbarOut, mvmu);
    mv.mvm_defs = {xo};
    c.insts.push_back(std::move(mv));
    if (iters > 1) copy_segs(c, out_v, 0, out_v, nm, (iters - 1) * nm, o.id);
    const VOperand tail{out, (iters - 1) * nm};
    emit(c, Instruction::alu(isa::AluOp::Add, 0, 0, 0, nm), tail, {xo, 0}, bias, o.id);
    if (r.act != graph::ActFn::None)
      emit(c, Instruction::alu(graph::act_alu_op(r.act), 0, 0, 0, nm), tail, tail, {}, o.id);
    const int shift = r.stride * r.channels;
    if (img_len > shift) copy_segs(c, img_v, 0, img_v, shift, img_len - shift, o.id);
    emit(c, Instruction::alu_int(isa::AluIntOp::Add, 0, 0, 0), {cnt, 0}, {cnt, 0}, {one, 0}, o.id);
    emit(c, Instruction::brn(isa::BrnOp::Lt, 0, 0, 0), {}, {cnt, 0}, {lim, 0}, o.id);
    c.insts.back().branch_to = loop;

    // XbarIn was overwritten by the loop body.
    for (auto& s : slots_[o.loc][static_cast<std::size_t>(mvmu)]) s = VOperand{-2, 0};

    const auto& res = define(c, o);
    const int row = r.out_w() * nm;
    for (int oy = 0; oy < r.out_h(); ++oy) copy_segs(c, res, oy * row, out_v, oy * r.width * nm, row, o.id);
  }

  const Program& p_;
  const MemoryMap& mm_;
  const MachineConfig& m_;
  bool shuffle_;
  int piece_;
  std::vector<std::vector<Seg>> vals_;
  std::vector<std::vector<int>> cons_;
  std::vector<char> materialize_;
  std::map<int, const std::vector<int>*> group_of_;
  std::map<Loc, CoreCode> cores_;
  std::map<int, TileCode> tiles_;
  std::map<Loc, std::vector<std::vector<VOperand>>> slots_;
  std::map<std::tuple<int, int, int>, std::tuple<int, int, int>> pending_;  // (tile, core, vreg) -> (addr, width, origin)
  LoweringStats stats_;
};

}  // namespace

int value_piece(const MachineConfig& m) { return std::clamp(m.general_register_count() / 4, 1, isa::kMaxVecWidth); }

VCode lower(const Program& p, const std::vector<int>& order, const Groups& groups, const MemoryMap& mm,
            const MachineConfig& m, bool input_shuffle) {
  return Lowerer(p, groups, mm, m, input_shuffle).run(order);
}

}  // namespace puma::compiler
