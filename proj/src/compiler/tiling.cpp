#include "puma/compiler/tiling.hpp"

#include <set>
#include <tuple>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma::compiler {

using graph::NodeKind;
using graph::Piece;

std::vector<Piece> flatten_pieces(const Program& p, std::vector<int>& args, const std::vector<Piece>& pieces) {
  std::vector<int> out_args;
  std::vector<Piece> out;
  auto arg_index = [&](int op) {
    for (std::size_t k = 0; k < out_args.size(); ++k)
      if (out_args[k] == op) return static_cast<int>(k);
    out_args.push_back(op);
    return static_cast<int>(out_args.size() - 1);
  };
  auto emit = [&](int op, int offset, int length) {
    const int a = arg_index(op);
    if (!out.empty() && out.back().operand == a && out.back().offset + out.back().length == offset) {
      out.back().length += length;
    } else {
      out.push_back({a, offset, length});
    }
  };
  for (const auto& pc : pieces) {
    const Op& src = p.op(args.at(static_cast<std::size_t>(pc.operand)));
    if (src.kind != OpKind::Gather) {
      emit(src.id, pc.offset, pc.length);
      continue;
    }
    // Walk the inner gather's pieces over [pc.offset, pc.offset + pc.length).
    int pos = 0;
    for (const auto& inner : src.pieces) {
      const int lo = std::max(pos, pc.offset);
      const int hi = std::min(pos + inner.length, pc.offset + pc.length);
      if (lo < hi) emit(src.args[static_cast<std::size_t>(inner.operand)], inner.offset + (lo - pos), hi - lo);
      pos += inner.length;
    }
  }
  args = std::move(out_args);
  return out;
}

namespace {

class Tiler {
 public:
  Tiler(const graph::ModelGraph& g, int dim) : g_(g), dim_(dim), map_(g.nodes().size(), -1) {
    p_.name = g.name();
    p_.frac_bits = g.frac_bits();
    p_.crossbar_dim = dim;
  }

  Program run(bool loop_conv) {
    std::set<int> interior;
    std::map<int, std::size_t> region_at_output;
    if (loop_conv) {
      const auto cons = g_.consumers();
      for (std::size_t k = 0; k < g_.conv_regions().size(); ++k) {
        const auto& r = g_.conv_regions()[k];
        if (!loop_eligible(r, cons)) continue;
        for (int id = r.bias + 1; id < r.output; ++id) interior.insert(id);
        region_at_output[r.output] = k;
      }
    }
    for (const auto& n : g_.nodes()) {
      if (interior.count(n.id)) continue;
      if (auto it = region_at_output.find(n.id); it != region_at_output.end()) {
        map_[static_cast<std::size_t>(n.id)] = conv_loop(g_.conv_regions()[it->second], n);
        continue;
      }
      map_[static_cast<std::size_t>(n.id)] = lower(n);
    }
    return std::move(p_);
  }

 private:
  int mapped(int node) const {
    const int v = map_.at(static_cast<std::size_t>(node));
    if (v < 0) throw CompileError(fmt::format("node {} used before it was lowered", node));
    return v;
  }

  Op base(const graph::Node& n, OpKind kind, int width) const {
    Op o;
    o.kind = kind;
    o.width = width;
    o.origin = n.id;
    o.layer = n.layer;
    return o;
  }

  int gather(const graph::Node& n, std::vector<int> args, const std::vector<Piece>& pieces) {
    auto flat = flatten_pieces(p_, args, pieces);
    int width = 0;
    for (const auto& pc : flat) width += pc.length;
    if (flat.size() == 1 && args.size() == 1 && flat[0].offset == 0 && p_.op(args[0]).width == width) return args[0];
    Op o = base(n, OpKind::Gather, width);
    o.args = std::move(args);
    o.pieces = std::move(flat);
    return p_.add(std::move(o));
  }

  int matrix_tile(int matrix, int rb, int cb) {
    const auto key = std::make_tuple(matrix, rb, cb);
    if (auto it = tiles_.find(key); it != tiles_.end()) return it->second;
    const num::RawMatrix& w = g_.matrix_data(matrix);
    const Eigen::Index r0 = static_cast<Eigen::Index>(rb) * dim_, c0 = static_cast<Eigen::Index>(cb) * dim_;
    MatrixTile t;
    t.matrix = matrix;
    t.row_block = rb;
    t.col_block = cb;
    t.data = w.block(r0, c0, std::min<Eigen::Index>(dim_, w.rows() - r0), std::min<Eigen::Index>(dim_, w.cols() - c0));
    p_.mtiles.push_back(std::move(t));
    const int idx = static_cast<int>(p_.mtiles.size() - 1);
    tiles_[key] = idx;
    return idx;
  }

  int lower(const graph::Node& n) {
    switch (n.kind) {
      case NodeKind::Input: {
        Op o = base(n, OpKind::Input, n.size);
        o.name = n.name;
        return p_.add(std::move(o));
      }
      case NodeKind::ConstVector: {
        Op o = base(n, OpKind::Const, n.size);
        o.name = n.name;
        const int id = p_.add(std::move(o));
        p_.const_data[id] = g_.vector_data(n.id);
        return id;
      }
      case NodeKind::ConstMatrix: return -1;
      case NodeKind::Mvm: return mvm(n);
      case NodeKind::Alu: {
        Op o = base(n, OpKind::Alu, n.size);
        o.alu = n.alu_op;
        for (int a : n.operands) o.args.push_back(mapped(a));
        return p_.add(std::move(o));
      }
      case NodeKind::AluImm: {
        Op o = base(n, OpKind::AluImm, n.size);
        o.alu = n.alu_op;
        o.imm = n.imm;
        o.args = {mapped(n.operands[0])};
        return p_.add(std::move(o));
      }
      case NodeKind::Act: {
        Op o = base(n, OpKind::Alu, n.size);
        o.alu = graph::act_alu_op(n.act);
        o.args = {mapped(n.operands[0])};
        return p_.add(std::move(o));
      }
      case NodeKind::Gather: {
        std::vector<int> args;
        for (int a : n.operands) args.push_back(mapped(a));
        return gather(n, args, n.pieces);
      }
      case NodeKind::Output: {
        Op o = base(n, OpKind::Output, n.size);
        o.name = n.name;
        o.args = {mapped(n.operands[0])};
        return p_.add(std::move(o));
      }
    }
    return -1;
  }

  int mvm(const graph::Node& n) {
    const graph::Node& wn = g_.node(n.operands[0]);
    const int x = mapped(n.operands[1]);
    const int nrb = (wn.rows + dim_ - 1) / dim_;
    const int ncb = (wn.size + dim_ - 1) / dim_;
    std::vector<int> parts;
    std::vector<int> inputs;
    for (int rb = 0; rb < nrb; ++rb) {
      const int len = std::min(dim_, wn.rows - rb * dim_);
      inputs.push_back(nrb == 1 ? x : gather(n, {x}, {{0, rb * dim_, len}}));
    }
    for (int cb = 0; cb < ncb; ++cb) {
      int acc = -1;
      for (int rb = 0; rb < nrb; ++rb) {
        const int t = matrix_tile(wn.id, rb, cb);
        Op o = base(n, OpKind::MvmTile, static_cast<int>(p_.mtiles[static_cast<std::size_t>(t)].data.cols()));
        o.mtile = t;
        o.args = {inputs[static_cast<std::size_t>(rb)]};
        const int tile_op = p_.add(std::move(o));
        if (acc < 0) {
          acc = tile_op;
        } else {
          Op add = base(n, OpKind::Alu, p_.op(tile_op).width);
          add.alu = isa::AluOp::Add;
          add.args = {acc, tile_op};
          acc = p_.add(std::move(add));
        }
      }
      parts.push_back(acc);
    }
    if (parts.size() == 1) return parts[0];
    std::vector<Piece> pieces;
    for (std::size_t k = 0; k < parts.size(); ++k) pieces.push_back({static_cast<int>(k), 0, p_.op(parts[k]).width});
    return gather(n, parts, pieces);
  }

  bool loop_eligible(const graph::ConvRegion& r, const std::vector<std::vector<int>>& cons) const {
    if (r.kernel_h * r.kernel_w * r.channels > dim_ || r.filters > dim_) return false;
    if (r.width % r.stride != 0) return false;
    if (!(r.matrix < r.bias && r.bias < r.output)) return false;
    for (int id = r.bias + 1; id < r.output; ++id)
      for (int c : cons[static_cast<std::size_t>(id)])
        if (c > r.output) return false;
    for (int c : cons[static_cast<std::size_t>(r.matrix)])
      if (c <= r.bias || c > r.output) return false;
    return true;
  }

  int conv_loop(const graph::ConvRegion& r, const graph::Node& out) {
    p_.conv_regions.push_back(r);
    Op o = base(out, OpKind::ConvLoop, r.out_h() * r.out_w() * r.filters);
    o.conv = static_cast<int>(p_.conv_regions.size() - 1);
    o.mtile = matrix_tile(r.matrix, 0, 0);
    o.args = {mapped(r.input), mapped(r.bias)};
    return p_.add(std::move(o));
  }

  const graph::ModelGraph& g_;
  int dim_;
  Program p_;
  std::vector<int> map_;
  std::map<std::tuple<int, int, int>, int> tiles_;
};

}  // namespace

Program tile_tensors(const graph::ModelGraph& g, int crossbar_dim, bool loop_conv) {
  if (crossbar_dim < 1) throw CompileError("crossbar dimension must be positive");
  g.validate();
  Program p = Tiler(g, crossbar_dim).run(loop_conv);
  eliminate_dead_ops(p);
  return p;
}

void eliminate_dead_ops(Program& p) {
  std::vector<char> live(p.ops.size(), 0);
  for (auto it = p.ops.rbegin(); it != p.ops.rend(); ++it) {
    if (it->kind == OpKind::Output) live[static_cast<std::size_t>(it->id)] = 1;
  }
  // Ops are appended after their arguments, so one reverse sweep suffices.
  for (auto it = p.ops.rbegin(); it != p.ops.rend(); ++it)
    if (live[static_cast<std::size_t>(it->id)])
      for (int a : it->args) live[static_cast<std::size_t>(a)] = 1;
  std::vector<int> remap(p.ops.size(), -1);
  std::vector<Op> kept;
  std::map<int, num::RawVector> consts;
  for (auto& o : p.ops) {
    if (!live[static_cast<std::size_t>(o.id)]) continue;
    const int nid = static_cast<int>(kept.size());
    remap[static_cast<std::size_t>(o.id)] = nid;
    if (auto it = p.const_data.find(o.id); it != p.const_data.end()) consts[nid] = it->second;
    o.id = nid;
    for (int& a : o.args) a = remap[static_cast<std::size_t>(a)];
    kept.push_back(std::move(o));
  }
  p.ops = std::move(kept);
  p.const_data = std::move(consts);
  // Drop matrix tiles nothing uses any more.
  std::vector<int> tmap(p.mtiles.size(), -1);
  std::vector<MatrixTile> tiles;
  for (auto& o : p.ops) {
    if (o.mtile < 0) continue;
    auto& slot = tmap[static_cast<std::size_t>(o.mtile)];
    if (slot < 0) {
      slot = static_cast<int>(tiles.size());
      tiles.push_back(p.mtiles[static_cast<std::size_t>(o.mtile)]);
    }
    o.mtile = slot;
  }
  p.mtiles = std::move(tiles);
}

}  // namespace puma::compiler
