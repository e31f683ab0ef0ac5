#include "puma/graph/serialize.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "puma/error.hpp"
#include "puma/isa/container.hpp"

namespace puma::graph {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

NodeKind kind_from_string(const std::string& s) {
  for (int k = 0; k <= static_cast<int>(NodeKind::Output); ++k)
    if (to_string(static_cast<NodeKind>(k)) == s) return static_cast<NodeKind>(k);
  throw FormatError("unknown node kind '" + s + "'");
}

std::string hex_of(const num::RawVector& v) { return isa::to_hex({v.data(), static_cast<std::size_t>(v.size())}); }

}  // namespace

std::string to_text(const ModelGraph& g) {
  json j;
  j["format"] = "puma-graph";
  j["version"] = kGraphFormatVersion;
  j["name"] = g.name();
  j["frac_bits"] = g.frac_bits();
  json nodes = json::array();
  for (const auto& n : g.nodes()) {
    json e;
    e["id"] = n.id;
    e["kind"] = std::string(to_string(n.kind));
    if (!n.name.empty()) e["name"] = n.name;
    e["size"] = n.size;
    e["layer"] = n.layer;
    if (!n.operands.empty()) e["operands"] = n.operands;
    switch (n.kind) {
      case NodeKind::ConstMatrix: {
        const num::RawMatrix& m = g.matrix_data(n.id);
        e["rows"] = n.rows;
        // column-major, matching Eigen storage
        e["data"] = isa::to_hex({m.data(), static_cast<std::size_t>(m.size())});
        break;
      }
      case NodeKind::ConstVector: e["data"] = hex_of(g.vector_data(n.id)); break;
      case NodeKind::Alu: e["op"] = std::string(isa::to_string(n.alu_op)); break;
      case NodeKind::AluImm:
        e["op"] = std::string(isa::to_string(n.alu_op));
        e["imm"] = n.imm;
        break;
      case NodeKind::Act: e["act"] = std::string(to_string(n.act)); break;
      case NodeKind::Gather: {
        json ps = json::array();
        for (const auto& p : n.pieces) ps.push_back({p.operand, p.offset, p.length});
        e["pieces"] = ps;
        break;
      }
      default: break;
    }
    nodes.push_back(e);
  }
  j["nodes"] = nodes;
  json regions = json::array();
  for (const auto& r : g.conv_regions()) {
    regions.push_back({{"input", r.input}, {"matrix", r.matrix}, {"bias", r.bias}, {"output", r.output},
                       {"height", r.height}, {"width", r.width}, {"channels", r.channels},
                       {"kernel_h", r.kernel_h}, {"kernel_w", r.kernel_w}, {"stride", r.stride},
                       {"filters", r.filters}, {"act", std::string(to_string(r.act))}});
  }
  j["conv_regions"] = regions;
  return j.dump(1);
}

ModelGraph from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("graph file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "puma-graph") throw FormatError("not a graph file");
    if (j.at("version").get<int>() != kGraphFormatVersion)
      throw FormatError(fmt::format("unsupported graph format version {}", j.at("version").get<int>()));
    ModelGraph g(j.at("name").get<std::string>(), j.at("frac_bits").get<int>());
    for (const auto& e : j.at("nodes")) {
      Node n;
      n.kind = kind_from_string(e.at("kind").get<std::string>());
      n.name = e.value("name", "");
      n.size = e.at("size").get<int>();
      n.layer = e.value("layer", 0);
      n.operands = e.value("operands", std::vector<int>{});
      if (e.contains("op")) {
        auto op = isa::alu_op_from_string(e.at("op").get<std::string>());
        if (!op) throw FormatError("unknown alu op " + e.at("op").dump());
        n.alu_op = *op;
      }
      if (e.contains("imm")) n.imm = e.at("imm").get<std::int16_t>();
      if (e.contains("act")) {
        auto f = act_from_string(e.at("act").get<std::string>());
        if (!f) throw FormatError("unknown activation " + e.at("act").dump());
        n.act = *f;
      }
      if (e.contains("pieces"))
        for (const auto& p : e.at("pieces")) n.pieces.push_back({p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>()});
      if (n.kind == NodeKind::ConstMatrix) n.rows = e.at("rows").get<int>();
      const int expect = static_cast<int>(g.nodes().size());
      if (e.at("id").get<int>() != expect) throw FormatError(fmt::format("node ids must be dense; expected {}", expect));
      const int id = g.append(n);
      if (n.kind == NodeKind::ConstMatrix) {
        const auto data = isa::from_hex(e.at("data").get<std::string>());
        if (data.size() != static_cast<std::size_t>(n.rows) * n.size) throw FormatError("matrix payload size mismatch");
        g.set_matrix_data(id, Eigen::Map<const num::RawMatrix>(data.data(), n.rows, n.size));
      } else if (n.kind == NodeKind::ConstVector) {
        const auto data = isa::from_hex(e.at("data").get<std::string>());
        if (data.size() != static_cast<std::size_t>(n.size)) throw FormatError("vector payload size mismatch");
        g.set_vector_data(id, Eigen::Map<const num::RawVector>(data.data(), n.size));
      }
    }
    for (const auto& r : j.value("conv_regions", json::array())) {
      ConvRegion c;
      c.input = r.at("input");
      c.matrix = r.at("matrix");
      c.bias = r.at("bias");
      c.output = r.at("output");
      c.height = r.at("height");
      c.width = r.at("width");
      c.channels = r.at("channels");
      c.kernel_h = r.at("kernel_h");
      c.kernel_w = r.at("kernel_w");
      c.stride = r.at("stride");
      c.filters = r.at("filters");
      auto f = act_from_string(r.at("act").get<std::string>());
      if (!f) throw FormatError("unknown activation in conv region");
      c.act = *f;
      g.add_conv_region(c);
    }
    g.validate();
    g.freeze();
    return g;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed graph file: ") + e.what());
  }
}

void save_graph(const ModelGraph& g, const std::string& path) { write_file(path, to_text(g)); }
ModelGraph load_graph(const std::string& path) { return from_text(read_file(path)); }

std::string tensors_to_text(const TensorMap& t) {
  json j = json::object();
  for (const auto& [name, v] : t) j[name] = hex_of(v);
  return j.dump(1);
}

TensorMap tensors_from_text(const std::string& text, int frac_bits) {
  TensorMap out;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw FormatError("tensor file must hold a JSON object");
    for (const auto& [name, v] : j.items()) {
      if (v.is_string()) {
        const auto raw = isa::from_hex(v.get<std::string>());
        out[name] = Eigen::Map<const num::RawVector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
      } else if (v.is_array()) {
        num::RawVector r(static_cast<Eigen::Index>(v.size()));
        for (std::size_t k = 0; k < v.size(); ++k) r(static_cast<Eigen::Index>(k)) = num::quantize_raw(v[k].get<double>(), frac_bits);
        out[name] = r;
      } else {
        throw FormatError("tensor '" + name + "' must be a hex string or an array of numbers");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed tensor file: ") + e.what());
  }
  return out;
}

TensorMap load_tensors(const std::string& path, int frac_bits) { return tensors_from_text(read_file(path), frac_bits); }
void save_tensors(const TensorMap& t, const std::string& path) { write_file(path, tensors_to_text(t)); }

}  // namespace puma::graph
