#include "puma/compiler/codegen.hpp"

#include <set>

namespace puma::compiler {

namespace {

std::vector<std::int16_t> row_major(const num::RawMatrix& w) {
  std::vector<std::int16_t> out;
  out.reserve(static_cast<std::size_t>(w.size()));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) out.push_back(w(r, c));
  return out;
}

}  // namespace

isa::Container emit_container(const Program& p, const VCode& vc, const std::vector<AllocResult>& alloc,
                              const std::vector<SpillRegion>& spills, const MemoryMap& mm, const MachineConfig& m) {
  using nlohmann::json;
  isa::Container out;
  std::set<int> tiles;
  for (std::size_t i = 0; i < vc.cores.size(); ++i) {
    const auto& c = vc.cores[i];
    out.segments.push_back({c.tile, c.core, alloc[i].code, c.shuffles});
    tiles.insert(c.tile);
  }
  for (const auto& t : vc.tiles) {
    out.segments.push_back({t.tile, isa::kTileSegment, t.insts, {}});
    tiles.insert(t.tile);
  }

  json& md = out.metadata;
  md["format"] = "puma-program";
  md["name"] = p.name;
  md["frac_bits"] = p.frac_bits;
  md["geometry"] = {{"crossbar_dim", m.crossbar_dim},
                    {"mvmus_per_core", m.mvmus_per_core},
                    {"cores_per_tile", m.cores_per_tile},
                    {"tiles", tiles.empty() ? 0 : *tiles.rbegin() + 1},
                    {"general_registers", m.general_register_count()}};

  json weights = json::array();
  for (const auto& t : p.mtiles) {
    const auto data = row_major(t.data);
    weights.push_back({{"tile", t.loc.tile},
                       {"core", t.loc.core},
                       {"mvmu", t.mvmu},
                       {"rows", t.data.rows()},
                       {"cols", t.data.cols()},
                       {"data", isa::to_hex(data)}});
  }
  md["weights"] = std::move(weights);

  json memory = json::array();
  for (const auto& [id, v] : p.const_data)
    for (int tile : tiles)
      if (auto it = mm.addr.find({tile, id}); it != mm.addr.end())
        memory.push_back({{"tile", tile}, {"addr", it->second}, {"data", isa::to_hex({v.data(), static_cast<std::size_t>(v.size())})}});
  md["memory"] = std::move(memory);

  json inputs = json::array(), outputs = json::array();
  for (const auto& o : p.ops) {
    if (o.kind == OpKind::Input) {
      json bind = json::array();
      for (int tile : tiles)
        if (auto it = mm.addr.find({tile, o.id}); it != mm.addr.end()) bind.push_back({{"tile", tile}, {"addr", it->second}});
      inputs.push_back({{"name", o.name}, {"width", o.width}, {"bindings", bind}});
    } else if (o.kind == OpKind::Output) {
      outputs.push_back({{"name", o.name}, {"width", o.width}, {"tile", o.loc.tile}, {"addr", mm.at(o.loc.tile, o.id)}});
    }
  }
  md["inputs"] = std::move(inputs);
  md["outputs"] = std::move(outputs);

  json sp = json::array();
  for (const auto& s : spills)
    if (s.size > 0) sp.push_back({{"tile", s.tile}, {"core", s.core}, {"base", s.base}, {"size", s.size}});
  md["spill_regions"] = std::move(sp);
  return out;
}

}  // namespace puma::compiler
