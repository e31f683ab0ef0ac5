#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "puma/compiler/compiler.hpp"
#include "puma/compiler/data_movement.hpp"
#include "puma/compiler/placement.hpp"
#include "puma/compiler/regalloc.hpp"
#include "puma/compiler/schedule.hpp"
#include "puma/compiler/tiling.hpp"
#include "puma/error.hpp"
#include "puma/graph/interpreter.hpp"
#include "puma/metrics/models.hpp"
#include "puma/sim/simulator.hpp"
#include "../support/fixtures.hpp"

using namespace puma;
using namespace puma::compiler;

namespace {

graph::TensorMap simulate(const CompiledProgram& p, const graph::TensorMap& in, const MachineConfig& m) {
  sim::Simulator s(m);
  s.load(p.container);
  return s.run(in).outputs;
}

MachineConfig small_tiles() {
  MachineConfig m;
  m.mvmus_per_core = 2;
  m.cores_per_tile = 2;
  return m;
}

graph::ModelGraph diamond() {
  graph::ModelGraph d("diamond");
  auto a = d.input("a", 8);
  d.output("d", d.alu(isa::AluOp::Add, d.act(graph::ActFn::Relu, a), d.act(graph::ActFn::Tanh, a)));
  d.freeze();
  return d;
}

}  // namespace

TEST(Tiling, BlockCountsAndEquivalence) {
  const auto e = metrics::mlp_example(200);
  const Program p = tile_tensors(e.graph, 128);
  int mtiles = 0;
  for (const auto& o : p.ops) mtiles += o.kind == OpKind::MvmTile;
  EXPECT_EQ(mtiles, 2 * (2 * 2));
  EXPECT_EQ(p.evaluate(e.inputs), graph::Interpreter(128).evaluate(e.graph, e.inputs));
}

TEST(Tiling, DeadOpsRemoved) {
  graph::ModelGraph g;
  auto x = g.input("x", 4);
  g.act(graph::ActFn::Relu, x);  // unused
  g.output("y", g.act(graph::ActFn::Tanh, x));
  g.freeze();
  Program p = tile_tensors(g, 128);
  ASSERT_EQ(p.ops.size(), 3u);  // input, tanh, output
  for (const auto& o : p.ops) EXPECT_NE(o.alu, isa::AluOp::Relu);
  eliminate_dead_ops(p);
  EXPECT_EQ(p.ops.size(), 3u);
  for (std::size_t k = 0; k < p.ops.size(); ++k) EXPECT_EQ(p.ops[k].id, static_cast<int>(k));
}

TEST(Placement, BeatsRandomColocation) {
  const auto e = metrics::mlp_example(512);
  const MachineConfig m = small_tiles();
  Program base = tile_tensors(e.graph, m.crossbar_dim);
  Program good = base;
  place(good, m);
  const double greedy = colocation_score(good);
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Program r = base;
    place(r, m, {true, seed});
    wins += greedy >= colocation_score(r);
  }
  EXPECT_EQ(wins, 100);
}

TEST(Placement, NaivePartitionNeedsMoreTraffic) {
  const auto e = metrics::mlp_example(512);
  const MachineConfig m = small_tiles();
  const auto good = compile(e.graph, m);
  long naive_sends = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CompileOptions o;
    o.naive_partition = true;
    o.seed = seed;
    const auto r = compile(e.graph, m, o);
    naive_sends += r.stats.sends;
    EXPECT_EQ(simulate(r, e.inputs, m), graph::Interpreter().evaluate(e.graph, e.inputs));
  }
  EXPECT_GT(naive_sends, 10L * good.stats.sends);
}

TEST(Placement, CapacityError) {
  MachineConfig m;
  m.tiles = 1;
  m.cores_per_tile = 1;
  m.mvmus_per_core = 2;
  const auto e = metrics::mlp_example(256);  // eight crossbar tiles
  EXPECT_THROW(compile(e.graph, m), CapacityError);
}

TEST(Coalescing, GroupsAndAblation) {
  const auto e = metrics::coalesce_pair_example();
  const MachineConfig m;
  const auto on = compile(e.graph, m);
  CompileOptions off_opt;
  off_opt.coalesce = false;
  const auto off = compile(e.graph, m, off_opt);
  EXPECT_EQ(on.stats.coalesce_groups, 1);
  EXPECT_EQ(on.stats.mvm_instructions, 1);
  EXPECT_EQ(off.stats.coalesce_groups, 0);
  EXPECT_EQ(off.stats.mvm_instructions, 2);
  EXPECT_EQ(simulate(on, e.inputs, m), simulate(off, e.inputs, m));
}

TEST(Coalescing, GroupsAreIndependentAndDistinctUnits) {
  const auto e = metrics::cnn_example();
  const MachineConfig m;
  Program p = tile_tensors(e.graph, m.crossbar_dim);
  place(p, m);
  const auto groups = coalesce_mvms(p, m.mvmus_per_core);
  ASSERT_FALSE(groups.empty());
  const Reachability reach(p);
  for (const auto& g : groups) {
    EXPECT_LE(static_cast<int>(g.size()), m.mvmus_per_core);
    std::set<int> units;
    for (int a : g) {
      units.insert(p.mtiles[static_cast<std::size_t>(p.op(a).mtile)].mvmu);
      EXPECT_EQ(p.op(a).loc, p.op(g.front()).loc);
      for (int b : g) EXPECT_FALSE(reach.reaches(a, b));
    }
    EXPECT_EQ(units.size(), g.size());
  }
  EXPECT_TRUE(is_valid_order(p, linearize(p, groups), groups));
}

TEST(Schedule, DiamondKeepsTwoLive) {
  const auto d = diamond();
  Program p = tile_tensors(d, 16);
  place(p, MachineConfig{});
  const auto order = linearize(p);
  EXPECT_TRUE(is_valid_order(p, order));
  EXPECT_EQ(max_live(p, order), 2);
}

TEST(Schedule, OrdersAreTopologicalAndReceivesFollowSends) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto g = metrics::random_model(seed, 16);
    const MachineConfig m = puma::testing::two_by_two();
    Program p = tile_tensors(g, m.crossbar_dim);
    place(p, m, {seed % 2 == 0, seed});
    insert_data_movement(p, m);
    for (bool naive : {false, true}) {
      const auto groups = coalesce_mvms(p, m.mvmus_per_core);
      const auto order = linearize(p, groups, naive);
      ASSERT_TRUE(is_valid_order(p, order, groups));
      for (std::size_t k = 0; k < order.size(); ++k)
        if (p.op(order[k]).kind == OpKind::Send) {
          ASSERT_LT(k + 1, order.size());
          EXPECT_EQ(p.op(order[k + 1]).kind, OpKind::Receive);
          EXPECT_EQ(p.op(order[k + 1]).args[0], order[k]);
        }
    }
  }
}

TEST(Schedule, RejectsCycles) {
  Program p;
  Op a;
  a.kind = OpKind::Alu;
  a.width = 1;
  a.args = {1};
  p.add(a);
  a.args = {0};
  p.add(a);
  EXPECT_THROW(p.topological_order(), CompileError);
}

TEST(Fifo, IdsWithinBudget) {
  const MachineConfig m = puma::testing::two_by_two();
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto g = metrics::random_model(seed, m.crossbar_dim);
    CompileOptions o;
    o.naive_partition = true;
    o.seed = seed;
    const auto r = compile(g, m, o);
    EXPECT_LE(r.stats.fifo_ids, m.fifos);
    EXPECT_EQ(r.stats.sends, r.stats.receives);
  }
}

TEST(RegAlloc, NoSpillsWhenValuesFit) {
  for (const char* name : {"mlp4", "mlp128", "lstm8"}) {
    const auto r = compile(metrics::make_example(name).graph, MachineConfig{});
    EXPECT_EQ(r.stats.spill_stores, 0) << name;
    EXPECT_EQ(r.stats.spill_loads, 0) << name;
  }
}

TEST(RegAlloc, SpillsMonotoneInRegisterSize) {
  const auto e = metrics::lstm_example(128);
  int prev = -1;
  for (int regs : {512, 448, 384, 320, 256, 224, 192}) {
    MachineConfig m;
    m.general_registers = regs;
    const auto r = compile(e.graph, m);
    EXPECT_GE(r.stats.spill_stores, prev) << regs;
    prev = r.stats.spill_stores;
    EXPECT_EQ(simulate(r, e.inputs, m), graph::Interpreter().evaluate(e.graph, e.inputs)) << regs;
  }
  EXPECT_GT(prev, 0);
}

TEST(RegAlloc, WindowPressureSpillsToMemory) {
  const auto e = metrics::conv_example();
  MachineConfig m;
  m.general_registers = 160;
  const auto r = compile(e.graph, m);
  EXPECT_GT(r.stats.spill_stores, 0);
  EXPECT_EQ(simulate(r, e.inputs, m), graph::Interpreter().evaluate(e.graph, e.inputs));
}

TEST(RegAlloc, XbarOutConflictCopiesBeforeOverwrite) {
  CoreCode c;
  const int a = c.new_vreg(4, RegClass::XbarOut, 0);
  const int b = c.new_vreg(4, RegClass::XbarOut, 0);
  const int g = c.new_vreg(4);
  VInst m1, m2, use;
  m1.inst = isa::Instruction::mvm(1);
  m1.mvm_defs = {a};
  m2.inst = isa::Instruction::mvm(1);
  m2.mvm_defs = {b};
  use.inst = isa::Instruction::alu(isa::AluOp::Add, 0, 0, 0, 4);
  use.dest = {g, 0};
  use.src1 = {a, 0};
  use.src2 = {b, 0};
  c.insts = {m1, m2, use};
  EXPECT_EQ(resolve_xbar_out_conflicts(c), 1);
  ASSERT_EQ(c.insts.size(), 4u);
  EXPECT_EQ(c.insts[1].inst.opcode, isa::Opcode::Copy);
  EXPECT_NE(c.insts[3].src1.vreg, a);
  const auto alloc = allocate_registers(c, MachineConfig{}, 0);
  EXPECT_TRUE(audit_assignments(alloc.assignments));
}

TEST(Lowering, LoopConvMatchesUnrolled) {
  const auto e = metrics::conv_example();
  const MachineConfig m;
  CompileOptions loop;
  loop.loop_conv = true;
  const auto a = compile(e.graph, m), b = compile(e.graph, m, loop);
  EXPECT_LT(b.stats.core_instructions, a.stats.core_instructions);
  EXPECT_EQ(simulate(a, e.inputs, m), simulate(b, e.inputs, m));
  EXPECT_GT(b.stats.static_histogram.at("brn"), 0);
}

TEST(Lowering, InputShuffleSavesFills) {
  const auto e = metrics::conv_example();
  const MachineConfig m;
  CompileOptions off;
  off.input_shuffle = false;
  const auto a = compile(e.graph, m), b = compile(e.graph, m, off);
  EXPECT_LT(a.stats.fill_words, b.stats.fill_words);
  EXPECT_EQ(b.stats.fill_words, b.stats.fill_words_full);
  EXPECT_EQ(simulate(a, e.inputs, m), simulate(b, e.inputs, m));
}

TEST(Compiler, Deterministic) {
  const auto e = metrics::cnn_example();
  const MachineConfig m;
  EXPECT_EQ(isa::write_container(compile(e.graph, m).container), isa::write_container(compile(e.graph, m).container));
}

TEST(Compiler, RequiresFrozenGraph) {
  graph::ModelGraph g;
  g.output("y", g.input("x", 2));
  EXPECT_THROW(compile(g, MachineConfig{}), Error);
}
