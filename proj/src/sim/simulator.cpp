#include "puma/sim/simulator.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "puma/error.hpp"
#include "puma/isa/semantics.hpp"

namespace puma::sim {

using isa::AluOp;
using isa::Instruction;
using isa::Opcode;

nlohmann::json RunReport::to_json() const {
  nlohmann::json outs = nlohmann::json::object();
  for (const auto& [k, v] : outputs) outs[k] = std::vector<std::int16_t>(v.data(), v.data() + v.size());
  return {{"latency_ns", latency_ns},
          {"energy_nj", energy_nj},
          {"energy_breakdown_nj", energy_breakdown_nj},
          {"mvm_active_ns", mvm_active_ns},
          {"unit_busy_ns", unit_busy_ns},
          {"mvmu_activations", mvmu_activations},
          {"rom_switches", rom_switches},
          {"register_accesses", register_accesses},
          {"spill_accesses", spill_accesses},
          {"spill_percent", spill_percent},
          {"saturations", saturations},
          {"steps", steps},
          {"dynamic_histogram", dynamic_histogram},
          {"static_histogram", static_histogram},
          {"blocked_ns", blocked_ns},
          {"outputs", outs}};
}

namespace {

struct Message {
  int source = 0;
  std::int64_t arrival = 0;
  std::vector<std::int16_t> data;
};

struct Region {
  int base = 0;
  int size = 0;
  bool contains(int a) const { return a >= base && a < base + size; }
};

struct Binding {
  std::string name;
  int width = 0;
  std::vector<std::pair<int, int>> places;  // (tile, addr)
};

enum class Step { Done, Blocked, Halted };

}  // namespace

struct Simulator::Impl {
  struct Core {
    int tile = 0;
    int core = 0;
    RegisterFile rf;
    std::vector<std::optional<num::SlicedMatrix>> units;
    std::vector<isa::ShufflePattern> shuffles;
    std::optional<Region> spill;
    Core(int t, int c, int regs, const num::LutSet* luts, int mvmus)
        : tile(t), core(c), rf(regs, luts), units(static_cast<std::size_t>(mvmus)) {}
  };

  struct Agent {
    int tile = 0;
    int core = isa::kTileSegment;  // index into cores when a core agent
    int core_index = -1;
    std::vector<Instruction> code;
    std::size_t pc = 0;
    std::int64_t time = 0;
    std::int64_t ready = 0;  // time the current instruction was first attempted
    bool attempted = false;
    bool started = false;
    bool halted = false;
    bool blocked = false;
    int wait_tile = 0;
    std::string reason;
    std::int64_t blocked_cycles = 0;
    std::string label() const {
      return core == isa::kTileSegment ? fmt::format("t{}.ctl", tile) : fmt::format("t{}.c{}", tile, core);
    }
  };

  struct TileState {
    std::vector<MemoryEntry> mem;
    std::vector<std::deque<Message>> fifos;
  };

  MachineConfig m;
  RegisterSpace rs;
  num::LutSet luts;
  int frac_bits;
  std::vector<Core> cores;
  std::vector<Agent> agents;
  std::map<int, TileState> tiles;
  std::vector<Binding> inputs, outputs;
  std::vector<std::pair<std::pair<int, int>, std::vector<std::int16_t>>> images;
  std::map<std::string, long> static_hist;
  bool loaded = false;

  // Per-run state.
  std::int64_t bus_free = 0;
  std::map<std::tuple<int, int, int>, std::int64_t> last_arrival;
  std::vector<std::pair<std::int64_t, std::int64_t>> mvm_busy;
  std::mt19937_64 rng;
  int jitter = 0;
  RunReport rep;
  double e_vfu = 0, e_sfu = 0, e_rf = 0, e_ctl = 0, e_imem = 0, e_tctl = 0, e_timem = 0, e_mem = 0, e_rbuf = 0,
         e_net = 0;
  std::int64_t vfu_cycles = 0, sfu_cycles = 0, mem_words = 0, net_cycles = 0;

  Impl(const MachineConfig& cfg)
      : m(cfg), rs(cfg), luts(cfg.frac_bits, cfg.lut_index_bits), frac_bits(cfg.frac_bits) {}

  double ns(std::int64_t cycles) const { return static_cast<double>(cycles) * m.cycle_ns(); }

  TileState& tile(int t) {
    auto it = tiles.find(t);
    if (it == tiles.end()) throw SimulationError(fmt::format("tile {} is not part of the loaded program", t));
    return it->second;
  }

  Core& core_at(int t, int c) {
    for (auto& k : cores)
      if (k.tile == t && k.core == c) return k;
    throw SimulationError(fmt::format("core {} of tile {} is not part of the loaded program", c, t));
  }

  void install(const isa::Container& c) {
    const auto& md = c.metadata;
    frac_bits = md.value("frac_bits", m.frac_bits);
    if (frac_bits != m.frac_bits)
      throw SimulationError(fmt::format("geometry mismatch: program uses {} fraction bits, machine {}", frac_bits, m.frac_bits));
    if (md.contains("geometry")) {
      const auto& g = md["geometry"];
      auto check = [&](const char* key, int want) {
        if (g.contains(key) && g[key].get<int>() != want)
          throw SimulationError(fmt::format("geometry mismatch: program {} = {}, machine {}", key, g[key].get<int>(), want));
      };
      check("crossbar_dim", m.crossbar_dim);
      check("mvmus_per_core", m.mvmus_per_core);
      check("general_registers", m.general_register_count());
      if (g.contains("cores_per_tile") && g["cores_per_tile"].get<int>() > m.cores_per_tile)
        throw SimulationError("geometry mismatch: program needs more cores per tile than the machine has");
      if (g.contains("tiles") && g["tiles"].get<int>() > m.tiles)
        throw SimulationError("geometry mismatch: program needs more tiles than the machine has");
    }

    const int core_cap = m.core_imem_bytes / static_cast<int>(isa::kInstructionBytes);
    const int tile_cap = m.tile_imem_bytes / static_cast<int>(isa::kInstructionBytes);
    for (const auto& s : c.segments) {
      if (s.tile < 0 || s.tile >= m.tiles) throw SimulationError(fmt::format("segment tile {} outside the machine", s.tile));
      tiles[s.tile];
      Agent a;
      a.tile = s.tile;
      a.core = s.core;
      a.code = s.code;
      const int n = static_cast<int>(s.code.size());
      for (const auto& i : s.code) ++static_hist[std::string(isa::mnemonic(i.opcode))];
      if (s.is_tile()) {
        if (n > tile_cap)
          throw CapacityError(fmt::format("tile {} control code has {} instructions, capacity {}", s.tile, n, tile_cap));
        for (const auto& i : s.code)
          if (i.opcode != Opcode::Send && i.opcode != Opcode::Receive && i.opcode != Opcode::Jmp)
            throw SimulationError(fmt::format("tile {} control code holds a core instruction ({})", s.tile, isa::mnemonic(i.opcode)));
      } else {
        if (s.core < 0 || s.core >= m.cores_per_tile)
          throw SimulationError(fmt::format("segment core {} outside the tile", s.core));
        if (n > core_cap)
          throw CapacityError(fmt::format("core {} of tile {} has {} instructions, capacity {}", s.core, s.tile, n, core_cap));
        for (const auto& i : s.code)
          if (i.is_tile_op())
            throw SimulationError(fmt::format("core {} of tile {} holds a tile instruction", s.core, s.tile));
        cores.emplace_back(s.tile, s.core, rs.size(), &luts, m.mvmus_per_core);
        cores.back().shuffles = s.shuffles;
        if (cores.back().shuffles.empty()) cores.back().shuffles.push_back({});
        a.core_index = static_cast<int>(cores.size()) - 1;
      }
      agents.push_back(std::move(a));
    }

    if (md.contains("weights")) {
      for (const auto& w : md["weights"]) {
        Core& k = core_at(w["tile"], w["core"]);
        const int u = w["mvmu"];
        if (u < 0 || u >= m.mvmus_per_core) throw SimulationError(fmt::format("weight block names MVMU {}", u));
        const int rows = w["rows"], cols = w["cols"];
        if (rows > m.crossbar_dim || cols > m.crossbar_dim)
          throw SimulationError("geometry mismatch: weight block exceeds the crossbar");
        const auto data = isa::from_hex(w["data"].get<std::string>());
        if (static_cast<int>(data.size()) != rows * cols) throw FormatError("weight block size does not match its shape");
        num::RawMatrix raw(rows, cols);
        for (int r = 0; r < rows; ++r)
          for (int col = 0; col < cols; ++col) raw(r, col) = data[static_cast<std::size_t>(r * cols + col)];
        num::SlicedMatrix sm = num::slice_weights(raw, m.bits_per_device, m.crossbar_dim);
        if (m.noise_sigma > 0.0) {
          const std::uint64_t seed = m.noise_seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(k.tile) * 1000003ull +
                                     static_cast<std::uint64_t>(k.core) * 1009ull + static_cast<std::uint64_t>(u);
          sm = num::apply_write_noise(sm, m.noise_sigma, seed);
        }
        k.units[static_cast<std::size_t>(u)] = std::move(sm);
      }
    }
    if (md.contains("memory"))
      for (const auto& e : md["memory"]) images.push_back({{e["tile"], e["addr"]}, isa::from_hex(e["data"].get<std::string>())});
    if (md.contains("inputs"))
      for (const auto& e : md["inputs"]) {
        Binding b{e["name"], e["width"], {}};
        for (const auto& p : e["bindings"]) b.places.push_back({p["tile"], p["addr"]});
        inputs.push_back(std::move(b));
      }
    if (md.contains("outputs"))
      for (const auto& e : md["outputs"]) outputs.push_back({e["name"], e["width"], {{e["tile"], e["addr"]}}});
    if (md.contains("spill_regions"))
      for (const auto& e : md["spill_regions"]) core_at(e["tile"], e["core"]).spill = Region{e["base"], e["size"]};
    loaded = true;
  }

  void reset(const SimOptions& opt) {
    for (auto& [t, ts] : tiles) {
      ts.mem.assign(static_cast<std::size_t>(m.tile_memory_words), MemoryEntry{});
      ts.fifos.assign(static_cast<std::size_t>(m.fifos), {});
    }
    for (auto& k : cores) k.rf = RegisterFile(rs.size(), &luts);
    for (auto& a : agents) {
      a.pc = 0;
      a.time = a.ready = 0;
      a.attempted = a.started = a.blocked = false;
      a.halted = a.code.empty();
      a.reason.clear();
      a.blocked_cycles = 0;
    }
    bus_free = 0;
    last_arrival.clear();
    mvm_busy.clear();
    rng.seed(opt.seed);
    jitter = opt.link_jitter_cycles;
    rep = RunReport{};
    e_vfu = e_sfu = e_rf = e_ctl = e_imem = e_tctl = e_timem = e_mem = e_rbuf = e_net = 0;
    vfu_cycles = sfu_cycles = mem_words = net_cycles = 0;
  }

  void host_write(int t, int addr, const std::vector<std::int16_t>& v) {
    auto& mem = tile(t).mem;
    if (addr < 0 || addr + static_cast<int>(v.size()) > static_cast<int>(mem.size()))
      throw SimulationError(fmt::format("host image at tile {} address {} exceeds data memory", t, addr));
    for (std::size_t k = 0; k < v.size(); ++k) mem[static_cast<std::size_t>(addr) + k] = {v[k], true, 0, 0, 0};
  }

  // Register access with class checks.
  void check_regs(int addr, int n, bool mvm_side, bool write) const {
    if (n <= 0) return;
    if (!rs.contains(addr) || !rs.contains(addr + n - 1))
      throw SimulationError(fmt::format("register range [{}, {}) outside the register file", addr, addr + n));
    if (mvm_side) return;
    for (int r = addr; r < addr + n; ++r) {
      const RegClass c = rs.classify(r);
      if (!write && c == RegClass::XbarIn)
        throw ClassAccessError(fmt::format("register {} is an MVMU input and only the MVM unit may read it", r));
      if (write && c == RegClass::XbarOut)
        throw ClassAccessError(fmt::format("register {} is an MVMU output and only the MVM unit may write it", r));
    }
  }

  std::vector<std::int16_t> read_regs(Core& k, int addr, int n) {
    check_regs(addr, n, false, false);
    std::vector<std::int16_t> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = k.rf.read(addr + i);
    rep.register_accesses += n;
    return v;
  }

  void write_regs(Core& k, int addr, const std::vector<std::int16_t>& v) {
    check_regs(addr, static_cast<int>(v.size()), false, true);
    for (std::size_t i = 0; i < v.size(); ++i) k.rf.write(addr + static_cast<int>(i), v[i]);
    rep.register_accesses += static_cast<long>(v.size());
  }

  MemoryEntry* mem_range(int t, int addr, int w) {
    auto& mem = tile(t).mem;
    if (addr < 0 || addr + w > static_cast<int>(mem.size()))
      throw SimulationError(fmt::format("memory range [{}, {}) outside tile {} data memory", addr, addr + w, t));
    return mem.data() + addr;
  }

  void wake(int t, std::int64_t now) {
    for (auto& a : agents)
      if (a.blocked && a.wait_tile == t) {
        a.blocked = false;
        a.time = std::max(a.time, now);
      }
  }

  Step block(Agent& a, int t, std::string why) {
    a.blocked = true;
    a.wait_tile = t;
    a.reason = std::move(why);
    return Step::Blocked;
  }

  // Readers: all entries valid; start no earlier than the latest ready_at.
  std::optional<std::int64_t> read_ready(MemoryEntry* e, int w) {
    std::int64_t t = 0;
    for (int k = 0; k < w; ++k) {
      if (!e[k].valid) return std::nullopt;
      t = std::max(t, e[k].ready_at);
    }
    return t;
  }

  void consume(MemoryEntry* e, int w, std::int64_t end) {
    for (int k = 0; k < w; ++k) {
      if (e[k].count == 0) continue;
      if (--e[k].count == 0) {
        e[k].valid = false;
        e[k].free_at = end;
      }
    }
  }

  // Writers: no live entry; start no earlier than the latest free_at.
  std::optional<std::int64_t> write_ready(MemoryEntry* e, int w) {
    std::int64_t t = 0;
    for (int k = 0; k < w; ++k) {
      if (e[k].valid && e[k].count > 0) return std::nullopt;
      t = std::max(t, e[k].free_at);
    }
    return t;
  }

  void produce(MemoryEntry* e, const std::vector<std::int16_t>& v, int count, std::int64_t end) {
    for (std::size_t k = 0; k < v.size(); ++k) e[k] = {v[k], true, static_cast<std::uint16_t>(count), end, e[k].free_at};
  }

  void finish(Agent& a, std::int64_t start, std::int64_t cycles) {
    a.blocked_cycles += start - a.ready;
    a.time = start + cycles;
    a.attempted = false;
    const bool tile_agent = a.core == isa::kTileSegment;
    (tile_agent ? e_tctl : e_ctl) += ns(cycles) * (tile_agent ? m.tile_control_mw : m.control_mw);
    (tile_agent ? e_timem : e_imem) += m.cycle_ns() * (tile_agent ? m.tile_imem_mw : m.imem_mw);
    ++rep.steps;
    ++rep.dynamic_histogram[std::string(isa::mnemonic(a.code[a.pc].opcode))];
  }

  void count_spill(Core& k, int addr, int w) {
    if (!k.spill) return;
    for (int i = addr; i < addr + w; ++i)
      if (k.spill->contains(i)) ++rep.spill_accesses;
  }

  void mem_energy(int words) {
    mem_words += words;
    e_mem += ns(words) * (m.tile_data_memory_mw + m.tile_attribute_memory_mw + m.tile_memory_bus_mw);
  }

  Step exec_tile(Agent& a) {
    const Instruction& i = a.code[a.pc];
    const int w = i.vec_width;
    const std::int64_t t0 = a.time;
    switch (i.opcode) {
      case Opcode::Send: {
        MemoryEntry* e = mem_range(a.tile, i.addr, w);
        const auto rd = read_ready(e, w);
        if (!rd) return block(a, a.tile, fmt::format("send waits for valid data at [{}, {})", i.addr, i.addr + w));
        if (i.target >= m.tiles || i.fifo >= m.fifos) throw SimulationError("send names a tile or FIFO outside the machine");
        auto& dst = tile(i.target);
        auto& q = dst.fifos[i.fifo];
        if (static_cast<int>(q.size()) >= m.fifo_depth)
          return block(a, i.target, fmt::format("send waits for space in FIFO {} of tile {}", i.fifo, i.target));
        const std::int64_t start = std::max(t0, *rd);
        const std::int64_t cycles = m.issue_cycles + w;
        const std::int64_t end = start + cycles;
        Message msg{a.tile, 0, {}};
        msg.data.reserve(static_cast<std::size_t>(w));
        for (int k = 0; k < w; ++k) msg.data.push_back(e[k].value);
        consume(e, w, end);
        mem_energy(w);
        const std::int64_t flits = (static_cast<std::int64_t>(w) * 16 + m.flit_bits - 1) / m.flit_bits;
        const std::int64_t xfer = flits * m.link_cycles_per_flit;
        const std::int64_t go = std::max(end, bus_free);
        bus_free = go + xfer;
        std::int64_t arrival = go + xfer + m.link_hop_cycles;
        if (jitter > 0) arrival += std::uniform_int_distribution<int>(0, jitter)(rng);
        auto& last = last_arrival[{a.tile, static_cast<int>(i.target), static_cast<int>(i.fifo)}];
        arrival = std::max(arrival, last);
        last = arrival;
        msg.arrival = arrival;
        net_cycles += xfer;
        e_net += ns(xfer) * m.network_mw / m.network_tiles_sharing;
        q.push_back(std::move(msg));
        finish(a, start, cycles);
        ++a.pc;
        wake(a.tile, start);
        wake(i.target, start);
        return Step::Done;
      }
      case Opcode::Receive: {
        if (i.fifo >= m.fifos) throw SimulationError("receive names a FIFO outside the machine");
        auto& q = tile(a.tile).fifos[i.fifo];
        if (q.empty()) return block(a, a.tile, fmt::format("receive waits on empty FIFO {}", i.fifo));
        MemoryEntry* e = mem_range(a.tile, i.addr, w);
        const auto wr = write_ready(e, w);
        if (!wr) return block(a, a.tile, fmt::format("receive waits for [{}, {}) to be consumed", i.addr, i.addr + w));
        Message msg = std::move(q.front());
        q.pop_front();
        if (static_cast<int>(msg.data.size()) != w)
          throw SimulationError(fmt::format("receive of width {} got a message of width {}", w, msg.data.size()));
        const std::int64_t start = std::max({t0, *wr, msg.arrival});
        const std::int64_t cycles = m.issue_cycles + w;
        const std::int64_t end = start + cycles;
        produce(e, msg.data, i.count, end);
        mem_energy(w);
        e_rbuf += ns(w) * m.receive_buffer_mw;
        rep.deliveries.push_back({a.tile, i.fifo, msg.source, start, std::move(msg.data)});
        finish(a, start, cycles);
        ++a.pc;
        wake(a.tile, start);
        wake(msg.source, start);
        return Step::Done;
      }
      case Opcode::Jmp: {
        finish(a, t0, m.issue_cycles);
        a.pc = i.pc;
        return Step::Done;
      }
      default: throw SimulationError("core instruction reached a tile control unit");
    }
  }

  std::int64_t vfu(std::int64_t w) {
    const std::int64_t c = (w + m.vfu_lanes - 1) / m.vfu_lanes;
    vfu_cycles += c;
    e_vfu += ns(c) * m.vfu_mw * m.vfu_lanes;
    return c;
  }

  std::int64_t sfu() {
    ++sfu_cycles;
    e_sfu += m.cycle_ns() * m.sfu_mw;
    return 1;
  }

  void count_alu_saturation(AluOp op, const std::vector<std::int16_t>& a, const std::vector<std::int16_t>& b, bool scalar) {
    if (op != AluOp::Add && op != AluOp::Sub && op != AluOp::Mul) return;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const std::int64_t x = a[k], y = scalar ? b[0] : b[k];
      std::int64_t wide;
      if (op == AluOp::Add) wide = x + y;
      else if (op == AluOp::Sub) wide = x - y;
      else wide = num::round_shift(x * y, frac_bits);
      if (wide > num::kRawMax || wide < num::kRawMin) ++rep.saturations;
    }
  }

  Step exec_core(Agent& a) {
    const Instruction& i = a.code[a.pc];
    Core& k = cores[static_cast<std::size_t>(a.core_index)];
    const int w = i.vec_width;
    const std::int64_t t0 = a.time;
    std::size_t next = a.pc + 1;
    switch (i.opcode) {
      case Opcode::Mvm: {
        if (i.mask == 0) throw SimulationError("MVM with an empty mask");
        if (i.mask >> m.mvmus_per_core) throw SimulationError("MVM mask selects an MVMU the core does not have");
        if (i.subop >= k.shuffles.size()) throw SimulationError(fmt::format("MVM names shuffle pattern {} which is not installed", i.subop));
        const isa::ShufflePattern pat = k.shuffles[i.subop];
        for (int u = 0; u < m.mvmus_per_core; ++u) {
          if (!(i.mask >> u & 1)) continue;
          const auto& sm = k.units[static_cast<std::size_t>(u)];
          const int rows = sm ? static_cast<int>(sm->rows()) : 0, cols = sm ? static_cast<int>(sm->cols()) : 0;
          num::RawVector x(rows);
          for (int r = 0; r < rows; ++r) {
            const int slot = r < pat.filter ? (r + pat.stride) % pat.filter : r;
            x(r) = k.rf.read(rs.xbar_in(u) + slot);
          }
          if (sm) {
            const num::RawVector y = num::crossbar_mvm(*sm, x, m.adc_bits, frac_bits);
            for (int col = 0; col < cols; ++col) {
              k.rf.write(rs.xbar_out(u) + col, y(col));
              if (y(col) == num::kRawMax || y(col) == num::kRawMin) ++rep.saturations;
            }
          }
          rep.register_accesses += rows + cols;
          ++rep.mvmu_activations;
        }
        const std::int64_t start = t0;
        mvm_busy.push_back({start + m.issue_cycles, start + m.issue_cycles + m.mvm_cycles});
        finish(a, start, m.issue_cycles + m.mvm_cycles);
        break;
      }
      case Opcode::Alu:
      case Opcode::AluImm: {
        const AluOp op = i.alu_op();
        if (static_cast<int>(op) >= isa::kAluOpCount) throw SimulationError("unknown ALU operation");
        const bool imm = i.opcode == Opcode::AluImm;
        std::vector<std::int16_t> b;
        if (imm) b = {static_cast<std::int16_t>(i.imm)};
        else if (!isa::is_unary(op)) b = read_regs(k, i.src2, op == AluOp::Subsample ? 1 : w);
        const std::int16_t stride = op == AluOp::Subsample ? (b.empty() ? std::int16_t{1} : b[0]) : std::int16_t{1};
        const auto src = read_regs(k, i.src1, isa::alu_source_width(op, w, stride));
        std::vector<std::int16_t> out(static_cast<std::size_t>(w));
        std::int64_t cycles = m.issue_cycles + vfu(w);
        if (isa::uses_rom(op)) {
          const num::LutFunction fn = op == AluOp::Sigmoid ? num::LutFunction::Sigmoid
                                      : op == AluOp::Tanh  ? num::LutFunction::Tanh
                                      : op == AluOp::Log   ? num::LutFunction::Log
                                                           : num::LutFunction::Exp;
          k.rf.rom_lookup(fn, src.data(), out.data(), w);
          cycles += m.rom_switch_cycles;
          ++rep.rom_switches;
        } else {
          isa::alu_vector(op, src, b, imm || op == AluOp::Subsample, out, frac_bits, luts);
          count_alu_saturation(op, src, b, imm);
        }
        write_regs(k, i.dest, out);
        finish(a, t0, cycles);
        break;
      }
      case Opcode::AluInt: {
        const auto x = read_regs(k, i.src1, 1), y = read_regs(k, i.src2, 1);
        write_regs(k, i.dest, {isa::alu_int(i.alu_int_op(), x[0], y[0])});
        finish(a, t0, m.issue_cycles + sfu());
        break;
      }
      case Opcode::Set: {
        write_regs(k, i.dest, {static_cast<std::int16_t>(static_cast<std::uint16_t>(i.imm))});
        finish(a, t0, m.issue_cycles + sfu());
        break;
      }
      case Opcode::Copy: {
        const auto v = read_regs(k, i.src1, w);
        write_regs(k, i.dest, v);
        finish(a, t0, m.issue_cycles + w);
        break;
      }
      case Opcode::Load: {
        check_regs(i.dest, w, false, true);
        MemoryEntry* e = mem_range(a.tile, i.addr, w);
        const auto rd = read_ready(e, w);
        if (!rd) return block(a, a.tile, fmt::format("load waits for valid data at [{}, {})", i.addr, i.addr + w));
        const std::int64_t start = std::max(t0, *rd);
        const std::int64_t cycles = m.issue_cycles + w;
        std::vector<std::int16_t> v;
        v.reserve(static_cast<std::size_t>(w));
        for (int j = 0; j < w; ++j) v.push_back(e[j].value);
        consume(e, w, start + cycles);
        write_regs(k, i.dest, v);
        mem_energy(w);
        count_spill(k, i.addr, w);
        finish(a, start, cycles);
        wake(a.tile, start);
        break;
      }
      case Opcode::Store: {
        check_regs(i.src1, w, false, false);
        MemoryEntry* e = mem_range(a.tile, i.addr, w);
        const auto wr = write_ready(e, w);
        if (!wr) return block(a, a.tile, fmt::format("store waits for [{}, {}) to be consumed", i.addr, i.addr + w));
        const std::int64_t start = std::max(t0, *wr);
        const std::int64_t cycles = m.issue_cycles + w;
        produce(e, read_regs(k, i.src1, w), i.count, start + cycles);
        mem_energy(w);
        count_spill(k, i.addr, w);
        finish(a, start, cycles);
        wake(a.tile, start);
        break;
      }
      case Opcode::Jmp:
        finish(a, t0, m.issue_cycles + sfu());
        next = i.pc;
        break;
      case Opcode::Brn: {
        const auto x = read_regs(k, i.src1, 1), y = read_regs(k, i.src2, 1);
        finish(a, t0, m.issue_cycles + sfu());
        if (isa::branch_taken(i.brn_op(), x[0], y[0])) next = i.pc;
        break;
      }
      default: throw SimulationError("tile instruction reached a core");
    }
    a.pc = next;
    return Step::Done;
  }

  std::string diagnose() const {
    std::string out;
    for (const auto& a : agents) {
      if (a.halted) continue;
      out += fmt::format("  {} pc {} `{}` at {} ns: {}\n", a.label(), a.pc,
                         a.pc < a.code.size() ? isa::format_instruction(a.code[a.pc]) : std::string("<end>"), ns(a.time),
                         a.blocked ? a.reason : std::string("runnable"));
    }
    return out;
  }

  RunReport run(const graph::TensorMap& in, const SimOptions& opt) {
    if (!loaded) throw SimulationError("no program loaded");
    reset(opt);
    for (const auto& [where, data] : images) host_write(where.first, where.second, data);
    for (const auto& b : inputs) {
      auto it = in.find(b.name);
      if (it == in.end()) throw ShapeError(fmt::format("missing input '{}'", b.name));
      if (it->second.size() != b.width)
        throw ShapeError(fmt::format("input '{}' has {} elements, expected {}", b.name, it->second.size(), b.width));
      const std::vector<std::int16_t> v(it->second.data(), it->second.data() + it->second.size());
      for (const auto& [t, addr] : b.places) host_write(t, addr, v);
    }

    std::vector<std::size_t> ready;
    while (true) {
      ready.clear();
      std::int64_t tmin = 0;
      bool live = false;
      for (std::size_t j = 0; j < agents.size(); ++j) {
        const Agent& a = agents[j];
        if (a.halted) continue;
        live = true;
        if (a.blocked) continue;
        if (ready.empty() || a.time < tmin) {
          ready.assign(1, j);
          tmin = a.time;
        } else if (a.time == tmin) {
          ready.push_back(j);
        }
      }
      if (!live) break;
      if (ready.empty()) throw DeadlockError("deadlock: every live agent is blocked", diagnose(), false);
      if (rep.steps >= opt.step_limit)
        throw DeadlockError(fmt::format("step limit of {} instructions reached", opt.step_limit), diagnose(), true);
      std::size_t pick = ready.front();
      if (opt.seed != 0 && ready.size() > 1)
        pick = ready[std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(rng)];
      Agent& a = agents[pick];
      if (!a.started) {
        a.started = true;
        a.time += m.pipeline_fill_cycles;
      }
      if (!a.attempted) {
        a.attempted = true;
        a.ready = a.time;
      }
      const Step s = a.core == isa::kTileSegment ? exec_tile(a) : exec_core(a);
      if (s == Step::Done && a.pc >= a.code.size()) a.halted = true;
    }
    return assemble_report();
  }

  RunReport assemble_report() {
    std::int64_t end = 0;
    for (const auto& a : agents) {
      end = std::max(end, a.time);
      rep.blocked_ns[a.label()] += ns(a.blocked_cycles);
    }
    for (const auto& b : outputs) {
      const auto [t, addr] = b.places.front();
      const MemoryEntry* e = mem_range(t, addr, b.width);
      num::RawVector v(b.width);
      for (int k = 0; k < b.width; ++k) {
        if (!e[k].valid) throw SimulationError(fmt::format("output '{}' was not written", b.name));
        v(k) = e[k].value;
      }
      rep.outputs[b.name] = v;
    }
    std::sort(mvm_busy.begin(), mvm_busy.end());
    std::int64_t active = 0, cur_s = -1, cur_e = -1;
    for (const auto& [s, e] : mvm_busy) {
      if (s > cur_e) {
        active += cur_e - cur_s;
        cur_s = s;
        cur_e = e;
      } else {
        cur_e = std::max(cur_e, e);
      }
    }
    active += cur_e - cur_s;
    rep.latency_ns = ns(end);
    rep.mvm_active_ns = ns(active);
    e_rf = static_cast<double>(rep.register_accesses) * m.cycle_ns() * m.register_file_mw;
    auto& br = rep.energy_breakdown_nj;
    br["mvmu"] = static_cast<double>(rep.mvmu_activations) * m.mvmu_activation_nj;
    br["vfu"] = e_vfu / 1000.0;
    br["sfu"] = e_sfu / 1000.0;
    br["register_file"] = e_rf / 1000.0;
    br["core_control"] = e_ctl / 1000.0;
    br["core_imem"] = e_imem / 1000.0;
    br["tile_control"] = e_tctl / 1000.0;
    br["tile_imem"] = e_timem / 1000.0;
    br["tile_memory"] = e_mem / 1000.0;
    br["receive_buffer"] = e_rbuf / 1000.0;
    br["network"] = e_net / 1000.0;
    rep.energy_nj = 0;
    for (const auto& [key, v] : br) rep.energy_nj += v;
    rep.unit_busy_ns["mvmu"] = ns(static_cast<std::int64_t>(rep.mvmu_activations) * m.mvm_cycles);
    rep.unit_busy_ns["vfu"] = ns(vfu_cycles);
    rep.unit_busy_ns["sfu"] = ns(sfu_cycles);
    rep.unit_busy_ns["tile_memory"] = ns(mem_words);
    rep.unit_busy_ns["network"] = ns(net_cycles);
    rep.spill_percent = rep.register_accesses > 0 ? 100.0 * static_cast<double>(rep.spill_accesses) / static_cast<double>(rep.register_accesses) : 0.0;
    rep.static_histogram = static_hist;
    spdlog::debug("run: {} steps, {:.1f} ns, {:.3f} nJ", rep.steps, rep.latency_ns, rep.energy_nj);
    return rep;
  }
};

Simulator::Simulator(MachineConfig m) : m_(std::move(m)) {
  m_.validate();
  impl_ = std::make_unique<Impl>(m_);
}
Simulator::~Simulator() = default;
Simulator::Simulator(Simulator&&) noexcept = default;
Simulator& Simulator::operator=(Simulator&&) noexcept = default;

void Simulator::load(const isa::Container& c) {
  impl_ = std::make_unique<Impl>(m_);
  impl_->install(c);
}

RunReport Simulator::run(const graph::TensorMap& inputs, const SimOptions& opt) { return impl_->run(inputs, opt); }

const MemoryEntry& Simulator::memory(int tile, int addr) const {
  auto& mem = impl_->tile(tile).mem;
  if (addr < 0 || addr >= static_cast<int>(mem.size())) throw SimulationError("memory address out of range");
  return mem[static_cast<std::size_t>(addr)];
}

std::int16_t Simulator::reg(int tile, int core, int addr) const { return impl_->core_at(tile, core).rf.read(addr); }

const num::SlicedMatrix* Simulator::mvmu(int tile, int core, int unit) const {
  const auto& k = impl_->core_at(tile, core);
  if (unit < 0 || unit >= static_cast<int>(k.units.size()) || !k.units[static_cast<std::size_t>(unit)]) return nullptr;
  return &*k.units[static_cast<std::size_t>(unit)];
}

}  // namespace puma::sim
