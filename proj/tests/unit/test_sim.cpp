#include <map>

#include <gtest/gtest.h>

#include "puma/compiler/compiler.hpp"
#include "puma/error.hpp"
#include "puma/graph/interpreter.hpp"
#include "puma/metrics/models.hpp"
#include "puma/numerics/fixed.hpp"
#include "puma/sim/simulator.hpp"
#include "../support/fixtures.hpp"

using namespace puma;
namespace t = puma::testing;

namespace {

sim::RunReport run(const isa::Container& c, const MachineConfig& m = {}, const sim::SimOptions& o = {}) {
  sim::Simulator s(m);
  s.load(c);
  return s.run({}, o);
}

}  // namespace

TEST(Memory, CountedStoreConsumedByExactlyCountLoads) {
  const MachineConfig m;
  sim::Simulator s(m);
  s.load(t::counted_store(m, 2, 2));
  s.run({});
  EXPECT_FALSE(s.memory(0, 100).valid);
  EXPECT_EQ(s.memory(0, 401).value, 7);
  EXPECT_EQ(s.memory(0, 402).value, 7);
  EXPECT_TRUE(s.memory(0, 401).valid);
  EXPECT_EQ(s.memory(0, 401).count, 0);
}

TEST(Memory, ExtraConsumerBlocks) {
  const MachineConfig m;
  try {
    run(t::counted_store(m, 1, 2), m);
    FAIL();
  } catch (const DeadlockError& e) {
    EXPECT_FALSE(e.step_limit_exceeded());
    EXPECT_NE(e.diagnosis().find("load waits"), std::string::npos);
  }
}

TEST(Memory, StoreWaitsUntilPreviousValueConsumed) {
  const MachineConfig m;
  sim::Simulator s(m);
  s.load(t::restore_before_consume(m));
  s.run({});
  EXPECT_EQ(s.memory(0, 500).value, 1);
  EXPECT_EQ(s.memory(0, 501).value, 2);
}

TEST(Deadlock, CyclicWaitIsDiagnosed) {
  const MachineConfig m;
  try {
    run(t::cyclic_wait_pair(m), m);
    FAIL();
  } catch (const DeadlockError& e) {
    EXPECT_NE(e.diagnosis().find("t0.c0"), std::string::npos);
    EXPECT_NE(e.diagnosis().find("t0.c1"), std::string::npos);
  }
}

TEST(Deadlock, ConsistentOrderCompletes) {
  const MachineConfig m;
  sim::Simulator s(m);
  s.load(t::ordered_pair(m));
  s.run({});
  EXPECT_EQ(s.memory(0, 300).value, 22);
  EXPECT_EQ(s.memory(0, 301).value, 11);
}

TEST(Deadlock, StepLimit) {
  sim::SimOptions o;
  o.step_limit = 1000;
  try {
    run(t::from_listing(".core 0 0\njmp 0\n"), {}, o);
    FAIL();
  } catch (const DeadlockError& e) {
    EXPECT_TRUE(e.step_limit_exceeded());
  }
}

TEST(Fifo, PerSourceOrderUnderJitter) {
  const MachineConfig m;
  constexpr int kSources = 3, kMessages = 5;
  const auto prog = t::fifo_stream(m, kSources, kMessages);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    sim::SimOptions o;
    o.seed = seed;
    o.link_jitter_cycles = 30;
    sim::Simulator s(m);
    s.load(prog);
    const auto r = s.run({}, o);
    ASSERT_EQ(static_cast<int>(r.deliveries.size()), kSources * kMessages);
    std::map<int, int> next;
    std::int64_t last = 0;
    for (const auto& d : r.deliveries) {
      ASSERT_EQ(d.data.size(), 1u);
      EXPECT_EQ(d.data[0] >> 8, d.source);
      EXPECT_EQ(d.data[0] & 0xFF, next[d.source]++);
      EXPECT_EQ(d.fifo, d.source - 1);
      EXPECT_GE(d.time, last);
      last = d.time;
    }
    for (int src = 1; src <= kSources; ++src)
      for (int q = 0; q < kMessages; ++q) EXPECT_EQ(s.memory(0, 3000 + (src - 1) * kMessages + q).value, src << 8 | q);
  }
}

TEST(Core, SaturatingAluCountsSaturations) {
  const MachineConfig m;
  sim::Simulator s(m);
  s.load(t::from_listing(fmt::format(".core 0 0\nset ${0}, 30000\nset ${1}, 30000\nalu add, ${2}, ${0}, ${1}, 1\n",
                                     t::gp(m), t::gp(m, 1), t::gp(m, 2))));
  const auto r = s.run({});
  EXPECT_EQ(s.reg(0, 0, t::gp(m, 2)), num::kRawMax);
  EXPECT_GE(r.saturations, 1);
}

TEST(Core, MvmMatchesIdealProduct) {
  const MachineConfig m;
  const auto base = t::single_mvm(m, 4);
  std::string text = ".core 0 0\n";
  for (int r = 0; r < 4; ++r) text += fmt::format("set ${}, {}\n", r, 1024 * (r + 1));
  text += "mvm 0b1, filter=0, stride=0\n";
  auto c = t::from_listing(text);
  c.metadata["weights"] = base.metadata["weights"];
  sim::Simulator s(m);
  s.load(c);
  s.run({});

  const auto w = isa::from_hex(base.metadata["weights"][0]["data"].get<std::string>());
  const int d = m.crossbar_dim;
  num::RawMatrix wm(d, d);
  for (int r = 0; r < d; ++r)
    for (int col = 0; col < d; ++col) wm(r, col) = w[static_cast<std::size_t>(r * d + col)];
  num::RawVector x = num::RawVector::Zero(d);
  for (int r = 0; r < 4; ++r) x(r) = static_cast<std::int16_t>(1024 * (r + 1));
  const num::RawVector y = num::ideal_mvm(wm, x, m.frac_bits);
  for (int col = 0; col < d; ++col) ASSERT_EQ(s.reg(0, 0, m.xbar_out_base() + col), y(col)) << col;
}

TEST(Core, SingleMvmTimingAndEnergy) {
  const MachineConfig m;
  const auto r = run(t::single_mvm(m), m);
  EXPECT_DOUBLE_EQ(r.mvm_active_ns, 2304.0);
  EXPECT_DOUBLE_EQ(r.energy_breakdown_nj.at("mvmu"), 43.97);
  EXPECT_EQ(r.mvmu_activations, 1);
  EXPECT_GE(r.latency_ns, 2304.0);
  double sum = 0.0;
  for (const auto& [k, v] : r.energy_breakdown_nj) sum += v;
  EXPECT_NEAR(sum, r.energy_nj, 1e-9);
  EXPECT_EQ(r.dynamic_histogram.at("mvm"), 1);
}

TEST(Core, ClassRestrictedRegisters) {
  const MachineConfig m;
  isa::Container read_in = t::from_listing(fmt::format(".core 0 0\ncopy ${}, $0, 1\n", t::gp(m)));
  EXPECT_THROW(run(read_in, m), ClassAccessError);
  isa::Container write_out = t::from_listing(fmt::format(".core 0 0\nset ${}, 1\n", m.xbar_out_base()));
  EXPECT_THROW(run(write_out, m), ClassAccessError);
  isa::Container write_in = t::from_listing(".core 0 0\nset $0, 1\n");
  EXPECT_NO_THROW(run(write_in, m));
}

TEST(Core, RejectsBadMvmMask) {
  const MachineConfig m;
  EXPECT_THROW(run(t::from_listing(".core 0 0\nmvm 0b100, filter=0, stride=0\n"), m), SimulationError);
}

TEST(Load, InstructionMemoryCapacity) {
  const MachineConfig m;
  const int cap = m.core_imem_bytes / static_cast<int>(isa::kInstructionBytes);
  std::string text = ".core 0 0\n";
  for (int k = 0; k <= cap; ++k) text += fmt::format("set ${}, {}\n", t::gp(m), k);
  sim::Simulator s(m);
  EXPECT_THROW(s.load(t::from_listing(text)), CapacityError);
}

TEST(Load, GeometryMismatch) {
  const auto e = metrics::mlp_example(64);
  const MachineConfig m;
  const auto prog = compiler::compile(e.graph, m);
  MachineConfig other = m;
  other.crossbar_dim = 64;
  sim::Simulator s(other);
  EXPECT_THROW(s.load(prog.container), SimulationError);
}

TEST(Run, RepeatableAndChecksInputs) {
  const auto e = metrics::mlp_example(128);
  const MachineConfig m;
  const auto prog = compiler::compile(e.graph, m);
  sim::Simulator s(m);
  s.load(prog.container);
  const auto a = s.run(e.inputs);
  const auto b = s.run(e.inputs);
  EXPECT_EQ(a.outputs, b.outputs);
  EXPECT_EQ(a.latency_ns, b.latency_ns);
  EXPECT_EQ(a.outputs, graph::Interpreter().evaluate(e.graph, e.inputs));
  EXPECT_THROW(s.run({}), ShapeError);
  sim::SimOptions o;
  o.seed = 5;
  EXPECT_EQ(s.run(e.inputs, o).outputs, a.outputs);
}

TEST(Run, WriteNoisePerturbsOutputs) {
  const auto e = metrics::mlp_example(128);
  MachineConfig m;
  const auto prog = compiler::compile(e.graph, m);
  auto outputs = [&](double sigma) {
    MachineConfig n = m;
    n.noise_sigma = sigma;
    sim::Simulator s(n);
    s.load(prog.container);
    return s.run(e.inputs).outputs;
  };
  const auto clean = outputs(0.0);
  EXPECT_EQ(clean, graph::Interpreter().evaluate(e.graph, e.inputs));
  EXPECT_NE(outputs(0.05), clean);
  EXPECT_EQ(outputs(0.05), outputs(0.05));
}

TEST(Run, WiderVfuIsNotSlower) {
  const auto e = metrics::lstm_example(32);
  MachineConfig narrow, wide;
  wide.vfu_lanes = 4;
  const auto pa = compiler::compile(e.graph, narrow), pb = compiler::compile(e.graph, wide);
  sim::Simulator a(narrow), b(wide);
  a.load(pa.container);
  b.load(pb.container);
  const auto ra = a.run(e.inputs), rb = b.run(e.inputs);
  EXPECT_EQ(ra.outputs, rb.outputs);
  EXPECT_LT(rb.latency_ns, ra.latency_ns);
}
