#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "puma/error.hpp"
#include "puma/graph/serialize.hpp"
#include "puma/metrics/models.hpp"
#include "puma/metrics/report.hpp"
#include "puma/metrics/sweep.hpp"
#include "../support/fixtures.hpp"

using namespace puma;
namespace fs = std::filesystem;

namespace {

int cli(const std::string& args, const std::string& cwd = "") {
  const std::string cd = cwd.empty() ? "" : "cd '" + cwd + "' && ";
  const std::string cmd = cd + std::string(PUMA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / fmt::format("puma_cli_{}", ::testing::UnitTest::GetInstance()->random_seed() ^ std::rand());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST(Report, HistogramsReconcile) {
  const auto e = metrics::mlp_example(128);
  const MachineConfig m;
  const auto prog = compiler::compile(e.graph, m);
  sim::Simulator s(m);
  s.load(prog.container);
  const auto r = s.run(e.inputs);
  EXPECT_TRUE(metrics::histograms_reconcile(r, prog.container));
  EXPECT_EQ(metrics::program_length(prog.container), prog.stats.core_instructions + prog.stats.tile_instructions);
  const std::string text = metrics::format_run_report(r);
  EXPECT_NE(text.find("mvmu"), std::string::npos);
  EXPECT_FALSE(metrics::format_compile_report(prog.stats).empty());
  EXPECT_FALSE(metrics::format_program_report(prog.container).empty());
}

TEST(Sweep, SinglePointMatchesDirectRun) {
  const auto e = metrics::mlp_example(128);
  const MachineConfig m;
  const auto pt = metrics::evaluate(e, m);
  const auto prog = compiler::compile(e.graph, m);
  sim::Simulator s(m);
  s.load(prog.container);
  const auto r = s.run(e.inputs);
  EXPECT_DOUBLE_EQ(pt.latency_ns, r.latency_ns);
  EXPECT_DOUBLE_EQ(pt.energy_nj, r.energy_nj);
  EXPECT_DOUBLE_EQ(pt.accuracy, 1.0);
}

TEST(Sweep, ThreadedMatchesSerial) {
  const auto e = metrics::mlp_example(64);
  metrics::SweepOptions one, four;
  four.threads = 4;
  const std::vector<double> lanes{1, 2, 4, 8};
  const auto a = metrics::sweep("vfu_lanes", lanes, e, MachineConfig{}, one);
  const auto b = metrics::sweep("vfu_lanes", lanes, e, MachineConfig{}, four);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(metrics::to_csv(a), metrics::to_csv(b));
  EXPECT_EQ(metrics::to_csv(a).rfind("parameter,value,latency_ns,energy_nj,accuracy", 0), 0u);
  for (std::size_t k = 1; k < a.size(); ++k) EXPECT_LE(a[k].latency_ns, a[k - 1].latency_ns);
}

TEST(Sweep, AxisValidation) {
  const MachineConfig base;
  for (double b : {1.0, 2.0, 4.0}) EXPECT_EQ(metrics::apply_axis(base, "bits_per_device", b).bits_per_device, static_cast<int>(b));
  EXPECT_THROW(metrics::apply_axis(base, "bits_per_device", 3), Error);
  EXPECT_THROW(metrics::apply_axis(base, "no_such_axis", 1), Error);
  EXPECT_EQ(metrics::apply_axis(base, "register_size", 300).general_registers, 300);
  EXPECT_DOUBLE_EQ(metrics::apply_axis(base, "noise_sigma", 0.02).noise_sigma, 0.02);
  EXPECT_EQ(metrics::sweep_axes().size(), 6u);
}

TEST(Models, ExamplesAreWellFormed) {
  for (const auto& name : metrics::example_names()) {
    const auto e = metrics::make_example(name);
    EXPECT_TRUE(e.graph.frozen()) << name;
    EXPECT_FALSE(e.inputs.empty()) << name;
  }
  EXPECT_THROW(metrics::make_example("nope"), Error);
  EXPECT_EQ(graph::to_text(metrics::random_model(3, 16)), graph::to_text(metrics::random_model(3, 16)));
}

TEST_F(Cli, CompileRunReportDisasm) {
  ASSERT_EQ(cli(fmt::format("example mlp4 --out {}", dir_.string())), 0);
  ASSERT_TRUE(fs::exists(at("mlp4.json")));
  ASSERT_EQ(cli(fmt::format("compile {} -o {}", at("mlp4.json"), at("mlp4.puma"))), 0);
  EXPECT_EQ(cli(fmt::format("run {} -i {} --out {}", at("mlp4.puma"), at("mlp4.inputs.json"), dir_.string())), 0);
  EXPECT_NE(slurp(dir_ / "report.json").find("latency_ns"), std::string::npos);
  EXPECT_FALSE(slurp(dir_ / "outputs.json").empty());
  EXPECT_EQ(cli("report " + at("mlp4.puma")), 0);
  EXPECT_EQ(cli("disasm " + at("mlp4.puma")), 0);
  EXPECT_EQ(cli("example list"), 0);
}

TEST_F(Cli, WritesOnlyWhereAsked) {
  ASSERT_EQ(cli(fmt::format("example mlp4 --out {}", at("models"))), 0);
  ASSERT_EQ(cli(fmt::format("compile mlp4 -o {}", at("mlp4.puma"))), 0);
  fs::create_directories(dir_ / "cwd");
  EXPECT_EQ(cli(fmt::format("run {} -i {}", at("mlp4.puma"), at("models/mlp4.inputs.json")), at("cwd")), 0);
  EXPECT_EQ(cli("sweep --axis vfu_lanes --values 1 --model mlp4", at("cwd")), 0);
  EXPECT_TRUE(fs::is_empty(dir_ / "cwd"));
}

TEST_F(Cli, ExitCodes) {
  write(dir_ / "junk.puma", "not a container");
  write(dir_ / "empty.json", "{}");
  EXPECT_EQ(cli(fmt::format("run {} -i {}", at("junk.puma"), at("empty.json"))), 2);
  EXPECT_EQ(cli("compile " + at("missing.json") + " -o " + at("x.puma")), 2);

  const MachineConfig m;
  const auto cyclic = isa::disassemble_program(puma::testing::cyclic_wait_pair(m).segments);
  write(dir_ / "cyclic.s", cyclic);
  ASSERT_EQ(cli(fmt::format("asm {} -o {}", at("cyclic.s"), at("cyclic.puma"))), 0);
  EXPECT_EQ(cli(fmt::format("run {} -i {}", at("cyclic.puma"), at("empty.json"))), 3);

  write(dir_ / "sat.s", fmt::format(".core 0 0\nset ${0}, 30000\nalu add, ${0}, ${0}, ${0}, 1\n", m.general_base()));
  ASSERT_EQ(cli(fmt::format("asm {} -o {}", at("sat.s"), at("sat.puma"))), 0);
  EXPECT_EQ(cli(fmt::format("run {} -i {}", at("sat.puma"), at("empty.json"))), 4);
}

TEST_F(Cli, SweepWritesCsv) {
  ASSERT_EQ(cli(fmt::format("sweep --axis vfu_lanes --values 1,2 --model mlp4 --out {}", at("s.csv"))), 0);
  const std::string csv = slurp(dir_ / "s.csv");
  EXPECT_EQ(csv.rfind("parameter,value", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(cli("sweep --axis bogus --values 1 --model mlp4"), 2);
}
