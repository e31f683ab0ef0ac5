// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include <fmt/format.h>

#include "../support/fixtures.hpp"
#include "puma/compiler/compiler.hpp"
#include "puma/compiler/placement.hpp"
#include "puma/compiler/schedule.hpp"
#include "puma/compiler/tiling.hpp"
#include "puma/error.hpp"
#include "puma/graph/interpreter.hpp"
#include "puma/isa/codec.hpp"
#include "puma/metrics/models.hpp"
#include "puma/metrics/sweep.hpp"
#include "puma/numerics/crossbar.hpp"
#include "puma/numerics/lut.hpp"
#include "puma/sim/simulator.hpp"

using namespace puma;
namespace t = puma::testing;

namespace {

// Pinned tolerances.
constexpr double kMaxSecondsPerModel = 60.0;
constexpr double kMvmNs = 2304.0;
constexpr double kMvmNj = 43.97;
constexpr double kCoalesceRatio = 0.50;
constexpr double kCoalesceTol = 0.02;
constexpr int kRandomModels = 100;
constexpr int kFifoTrials = 1000;
constexpr int kCodecTrials = 100000;
constexpr int kRandomDags = 1000;
constexpr double kAccuracyDrop = 0.10;  // a configuration "loses accuracy" once it falls this far below clean

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct RunResult {
  compiler::CompiledProgram prog;
  sim::RunReport report;
};

RunResult compile_and_run(const graph::ModelGraph& g, const graph::TensorMap& in, const MachineConfig& m,
                          const compiler::CompileOptions& opt = {}) {
  RunResult r{compiler::compile(g, m, opt), {}};
  sim::Simulator s(m);
  s.load(r.prog.container);
  r.report = s.run(in);
  return r;
}

graph::TensorMap reference(const graph::ModelGraph& g, const graph::TensorMap& in, const MachineConfig& m) {
  return graph::Interpreter(m.crossbar_dim, m.lut_index_bits).evaluate(g, in);
}

Outcome functional_equivalence() {
  const MachineConfig m;
  std::string failed;
  double worst = 0.0;
  int models = 0, matched = 0;
  auto check = [&](const std::string& label, const metrics::ExampleModel& e, const compiler::CompileOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = compile_and_run(e.graph, e.inputs, m, opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    worst = std::max(worst, secs);
    ++models;
    if (!t::same_outputs(r.report.outputs, reference(e.graph, e.inputs, m)) || secs >= kMaxSecondsPerModel) failed += " " + label;
    else ++matched;
  };
  for (const auto& name : metrics::example_names()) check(name, metrics::make_example(name), {});
  compiler::CompileOptions loop;
  loop.loop_conv = true;
  check("conv8x8/loop", metrics::conv_example(), loop);
  return {failed.empty(), fmt::format("{}/{} models bit-exact, slowest {:.2f} s{}", matched, models, worst,
                                      failed.empty() ? "" : "; mismatched:" + failed)};
}

Outcome mvm_anchor() {
  const MachineConfig m;
  sim::Simulator s(m);
  s.load(t::single_mvm(m));
  const auto r = s.run({});
  const double ns = r.mvm_active_ns, nj = r.energy_breakdown_nj.at("mvmu");
  return {ns == kMvmNs && nj == kMvmNj && r.mvmu_activations == 1,
          fmt::format("MVMU busy {} ns, MVMU energy {} nJ, activations {}", ns, nj, r.mvmu_activations)};
}

Outcome coalescing() {
  const MachineConfig m;
  compiler::CompileOptions off;
  off.coalesce = false;
  const auto pair = metrics::coalesce_pair_example();
  const auto on_r = compile_and_run(pair.graph, pair.inputs, m);
  const auto off_r = compile_and_run(pair.graph, pair.inputs, m, off);
  const double ratio = on_r.report.mvm_active_ns / off_r.report.mvm_active_ns;
  const auto cnn = metrics::cnn_example();
  const auto cnn_on = compile_and_run(cnn.graph, cnn.inputs, m);
  const auto cnn_off = compile_and_run(cnn.graph, cnn.inputs, m, off);
  const double cnn_ratio = cnn_on.report.latency_ns / cnn_off.report.latency_ns;
  return {std::abs(ratio - kCoalesceRatio) <= kCoalesceTol && cnn_ratio < 1.0,
          fmt::format("pair MVM-phase ratio {:.3f}, small CNN latency ratio {:.3f}", ratio, cnn_ratio)};
}

Outcome spills() {
  const MachineConfig m;
  std::string detail;
  bool ok = true;
  for (const char* name : {"mlp4", "mlp128", "mlp256", "lstm8", "lstm128"}) {
    const auto e = metrics::make_example(name);
    const auto r = compile_and_run(e.graph, e.inputs, m);
    ok = ok && r.report.spill_percent == 0.0;
    detail += fmt::format("{} {:.2f}% ", name, r.report.spill_percent);
  }
  for (const char* name : {"conv8x8", "cnn_small"}) {
    const auto e = metrics::make_example(name);
    const auto r = compile_and_run(e.graph, e.inputs, m);
    ok = ok && r.report.spill_percent >= 0.0 && t::same_outputs(r.report.outputs, reference(e.graph, e.inputs, m));
    detail += fmt::format("{} {:.2f}% ", name, r.report.spill_percent);
  }
  // Conv under register pressure still matches.
  MachineConfig tight = m;
  tight.general_registers = 160;
  const auto conv = metrics::conv_example();
  const auto r = compile_and_run(conv.graph, conv.inputs, tight);
  ok = ok && t::same_outputs(r.report.outputs, reference(conv.graph, conv.inputs, tight));
  detail += fmt::format("conv8x8@160regs {:.2f}%", r.report.spill_percent);
  return {ok, detail};
}

Outcome deadlock_freedom() {
  const MachineConfig m = t::two_by_two();
  int ok = 0, multi_tile = 0;
  std::string bad;
  for (int k = 0; k < kRandomModels; ++k) {
    const auto g = metrics::random_model(static_cast<std::uint64_t>(k) + 1, m.crossbar_dim);
    const auto in = metrics::random_inputs(g, static_cast<std::uint64_t>(k) + 1000);
    compiler::CompileOptions opt;
    opt.naive_partition = k % 2 == 1;
    opt.seed = static_cast<std::uint64_t>(k) + 7;
    try {
      const auto prog = compiler::compile(g, m, opt);
      multi_tile += prog.stats.tiles_used > 1;
      sim::Simulator s(m);
      s.load(prog.container);
      sim::SimOptions so;
      so.step_limit = 1'000'000;
      so.seed = static_cast<std::uint64_t>(k) + 1;
      const auto r = s.run(in, so);
      if (t::same_outputs(r.outputs, reference(g, in, m))) ++ok;
      else bad += fmt::format(" {}(mismatch)", k);
    } catch (const std::exception& e) {
      bad += fmt::format(" {}({})", k, e.what());
    }
  }
  bool diagnosed = false;
  std::string diag;
  const MachineConfig d;
  try {
    sim::Simulator s(d);
    s.load(t::cyclic_wait_pair(d));
    s.run({});
  } catch (const DeadlockError& e) {
    diag = e.diagnosis();
    diagnosed = diag.find("t0.c0") != std::string::npos && diag.find("t0.c1") != std::string::npos &&
                diag.find("load waits") != std::string::npos;
  }
  return {ok == kRandomModels && diagnosed,
          fmt::format("{}/{} random models terminated and matched ({} span both tiles); counterexample {}{}", ok,
                      kRandomModels, multi_tile, diagnosed ? "deadlocked with both cores listed" : "NOT diagnosed", bad)};
}

Outcome synchronization() {
  const MachineConfig m;
  bool ok = true;
  std::string detail;
  for (int k = 1; k <= 3; ++k) {
    sim::Simulator s(m);
    s.load(t::counted_store(m, k, k));
    s.run({});
    const auto& e = s.memory(0, 100);
    bool copies = true;
    for (int c = 1; c <= k; ++c) copies = copies && s.memory(0, 400 + c).value == 7;
    ok = ok && !e.valid && copies;
    detail += fmt::format("count {} -> {} after {} loads; ", k, e.valid ? "valid" : "invalid", k);
    // One extra consumer has nothing left to read.
    sim::Simulator extra(m);
    extra.load(t::counted_store(m, k, k + 1));
    bool blocked = false;
    try {
      extra.run({});
    } catch (const DeadlockError&) {
      blocked = true;
    }
    ok = ok && blocked;
  }
  sim::Simulator s(m);
  s.load(t::restore_before_consume(m));
  s.run({});
  const bool order = s.memory(0, 500).value == 1 && s.memory(0, 501).value == 2;
  ok = ok && order;
  detail += fmt::format("re-store blocked until consumed: loads saw {} then {}", s.memory(0, 500).value, s.memory(0, 501).value);
  return {ok, detail};
}

Outcome fifo_ordering() {
  MachineConfig m;
  constexpr int kSources = 3, kMessages = 6;
  const auto prog = t::fifo_stream(m, kSources, kMessages);
  int good = 0;
  for (int trial = 0; trial < kFifoTrials; ++trial) {
    sim::Simulator s(m);
    s.load(prog);
    sim::SimOptions o;
    o.seed = static_cast<std::uint64_t>(trial) + 1;
    o.link_jitter_cycles = 40;
    const auto r = s.run({}, o);
    std::map<int, int> next;
    bool ok = static_cast<int>(r.deliveries.size()) == kSources * kMessages;
    for (const auto& d : r.deliveries) {
      const int src = d.data[0] >> 8, seq = d.data[0] & 0xFF;
      ok = ok && src == d.source && seq == next[src]++;
    }
    good += ok;
  }
  return {good == kFifoTrials, fmt::format("{}/{} seeded interleavings kept per-source order", good, kFifoTrials)};
}

Outcome oracles() {
  long slice_bad = 0;
  for (int bits : {1, 2, 4}) {
    num::RawMatrix w(256, 256);
    for (int k = 0; k < 65536; ++k) w(k / 256, k % 256) = static_cast<std::int16_t>(k - 32768);
    num::RawMatrix back(256, 256);
    for (int rb = 0; rb < 2; ++rb)
      for (int cb = 0; cb < 2; ++cb)
        back.block(rb * 128, cb * 128, 128, 128) = num::reconstruct(num::slice_weights(w.block(rb * 128, cb * 128, 128, 128), bits));
    slice_bad += (back.array() != w.array()).count();
  }
  long lut_bad = 0;
  const num::LutSet luts;
  for (auto f : {num::LutFunction::Sigmoid, num::LutFunction::Tanh, num::LutFunction::Log, num::LutFunction::Exp}) {
    const auto& tab = luts[f];
    for (int x = -32768; x < 32768; ++x) {
      const auto raw = static_cast<std::int16_t>(x);
      if (!num::lut_in_domain(f, raw)) continue;
      const double err = std::abs(num::to_real(tab.eval(raw)) - num::lut_target(f, raw, tab.frac_bits()));
      lut_bad += err > tab.error_bound();
    }
  }
  return {slice_bad == 0 && lut_bad == 0,
          fmt::format("slice round trip mismatches {} (3 x 2^16 values); LUT points beyond bound {}", slice_bad, lut_bad)};
}

isa::Instruction random_instruction(std::mt19937_64& rng) {
  auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const auto reg = [&] { return u(0, (1 << isa::kRegBits) - 1); };
  const auto width = [&] { return u(1, isa::kMaxVecWidth); };
  using isa::Instruction;
  switch (u(1, isa::kOpcodeCount)) {
    case 1: return Instruction::mvm(static_cast<std::uint16_t>(u(1, (1 << isa::kMaskBits) - 1)), static_cast<std::uint8_t>(u(0, isa::kMaxShufflePatterns - 1)));
    case 2: return Instruction::alu(static_cast<isa::AluOp>(u(0, isa::kAluOpCount - 1)), reg(), reg(), reg(), width());
    case 3: return Instruction::alu_imm(static_cast<isa::AluOp>(u(0, isa::kAluOpCount - 1)), reg(), reg(), u(-(1 << (isa::kAluImmBits - 1)), (1 << (isa::kAluImmBits - 1)) - 1), width());
    case 4: return Instruction::alu_int(static_cast<isa::AluIntOp>(u(0, isa::kAluIntOpCount - 1)), reg(), reg(), reg());
    case 5: return Instruction::set(reg(), u(0, (1 << isa::kSetImmBits) - 1));
    case 6: return Instruction::copy(reg(), reg(), width());
    case 7: return Instruction::load(reg(), u(0, 0xFFFF), width());
    case 8: return Instruction::store(u(0, 0xFFFF), reg(), u(0, 255), width());
    case 9: return Instruction::send(u(0, 0xFFFF), u(0, 255), u(0, (1 << isa::kTargetBits) - 1), width());
    case 10: return Instruction::receive(u(0, 0xFFFF), u(0, 255), u(0, 255), width());
    case 11: return Instruction::jmp(u(0, 0xFFFF));
    default: return Instruction::brn(static_cast<isa::BrnOp>(u(0, isa::kBrnOpCount - 1)), reg(), reg(), u(0, 0xFFFF));
  }
}

Outcome codec() {
  std::mt19937_64 rng(2024);
  int bad = 0;
  for (int k = 0; k < kCodecTrials; ++k) {
    const auto i = random_instruction(rng);
    const auto w = isa::encode(i);
    bad += !(isa::decode(w) == i);
  }
  const std::string listing = R"(mvm 0b11, filter=0, stride=0
alu add, $600, $512, $540, 16
alu relu, $600, $512, 16
alui mul, $600, $512, -2048, 4
aluint sub, $700, $701, $702
set $700, 65535
copy $0, $600, 128
load $512, 1024, 32
store 1024, $512, 3, 32
jmp 0
brn lt, $700, $701, 5
)";
  const std::string tile_listing = "send 64, 2, 7, 16\nreceive 64, 2, 1, 16\n";
  const auto code = isa::assemble(listing);
  const auto tcode = isa::assemble(tile_listing);
  std::set<std::string> seen;
  for (const auto& c : {code, tcode})
    for (const auto& i : c) seen.insert(std::string(isa::mnemonic(i.opcode)));
  const bool text_ok = isa::disassemble(code) == listing && isa::disassemble(tcode) == tile_listing &&
                       static_cast<int>(seen.size()) == isa::kOpcodeCount;
  return {bad == 0 && text_ok, fmt::format("{} of {} random instructions failed round trip; {} mnemonics re-assembled to themselves: {}",
                                           bad, kCodecTrials, seen.size(), text_ok ? "yes" : "no")};
}

Outcome design_space() {
  const MachineConfig m;
  const auto vk = metrics::vector_kernel_example();
  std::vector<double> lat;
  for (int lanes : {1, 2, 4}) lat.push_back(metrics::evaluate(vk, metrics::apply_axis(m, "vfu_lanes", lanes)).latency_ns);
  const bool lanes_ok = lat[1] < lat[0] && lat[2] < lat[1];

  const auto lstm = metrics::lstm_example(128);
  std::vector<int> stores;
  std::string regs;
  for (int r : {512, 384, 256, 192}) {
    stores.push_back(compiler::compile(lstm.graph, metrics::apply_axis(m, "register_size", r)).stats.spill_stores);
    regs += fmt::format(" {}:{}", r, stores.back());
  }
  bool spill_ok = stores[0] == 0;
  for (std::size_t k = 1; k < stores.size(); ++k) spill_ok = spill_ok && stores[k] > stores[k - 1];
  return {lanes_ok && spill_ok, fmt::format("vector kernel latency {:.0f}/{:.0f}/{:.0f} ns at 1/2/4 lanes; lstm128 spill stores by registers{}",
                                            lat[0], lat[1], lat[2], regs)};
}

Outcome noise_directionality() {
  const auto model = metrics::classifier_example(3, 64);
  MachineConfig base;
  metrics::SweepOptions opt;
  opt.noise_trials = 3;
  opt.threads = 4;
  const std::vector<double> sigmas{0.0, 0.002, 0.004, 0.006, 0.008, 0.01, 0.0125, 0.015, 0.02, 0.025, 0.03, 0.04, 0.05};
  auto first_drop = [&](int bits, std::vector<double>& acc) {
    const auto pts = metrics::sweep("noise_sigma", sigmas, model, metrics::apply_axis(base, "bits_per_device", bits), opt);
    for (const auto& p : pts) acc.push_back(p.accuracy);
    for (std::size_t k = 1; k < pts.size(); ++k)
      if (pts[k].accuracy < pts[0].accuracy - kAccuracyDrop) return sigmas[k];
    return 1.0;
  };
  std::vector<double> a2, a4;
  const double s2 = first_drop(2, a2), s4 = first_drop(4, a4);
  return {s4 < s2 && a2[0] > 0.8, fmt::format("clean accuracy {:.3f}; drop appears at sigma {} with 4 bits/device, {} with 2 bits/device",
                                               a2[0], s4, s2)};
}

int order_live(const graph::ModelGraph& g, int dim, bool naive) {
  compiler::Program p = compiler::tile_tensors(g, dim);
  MachineConfig m;
  m.crossbar_dim = dim;
  compiler::place(p, m);
  return compiler::max_live(p, compiler::linearize(p, {}, naive));
}

Outcome rpo_quality() {
  graph::ModelGraph d("diamond");
  auto a = d.input("a", 8);
  auto b = d.act(graph::ActFn::Relu, a);
  auto c = d.act(graph::ActFn::Tanh, a);
  d.output("d", d.alu(isa::AluOp::Add, b, c));
  d.freeze();
  const int diamond = order_live(d, 16, false), diamond_naive = order_live(d, 16, true);
  int worse = 0, better = 0;
  std::string examples;
  for (int k = 0; k < kRandomDags; ++k) {
    const auto g = metrics::random_model(static_cast<std::uint64_t>(k) + 5000, 16, 40, 8);
    const int rpo = order_live(g, 16, false), naive = order_live(g, 16, true);
    if (rpo > naive) {
      ++worse;
      if (worse <= 5) examples += fmt::format(" dag{}:{}>{}", k, rpo, naive);
    }
    better += rpo < naive;
  }
  return {diamond == 2 && diamond <= diamond_naive && worse == 0,
          fmt::format("diamond max-live {} (naive {}); random DAGs: {} strictly lower, {} higher{}", diamond, diamond_naive,
                      better, worse, examples)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"functional equivalence", functional_equivalence},
      {"MVM numeric anchor", mvm_anchor},
      {"coalescing", coalescing},
      {"spills", spills},
      {"deadlock freedom", deadlock_freedom},
      {"synchronization semantics", synchronization},
      {"FIFO ordering", fifo_ordering},
      {"slicing and LUT oracles", oracles},
      {"ISA codec", codec},
      {"design-space directionality", design_space},
      {"noise and precision directionality", noise_directionality},
      {"RPO quality", rpo_quality},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failures += !o.pass;
    std::cout << fmt::format("{} {:>2} {}: {}", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail) << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
