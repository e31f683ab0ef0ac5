// Command-line front end: compile, run, report, sweep, asm, disasm, example.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "puma/compiler/compiler.hpp"
#include "puma/error.hpp"
#include "puma/graph/serialize.hpp"
#include "puma/isa/assembly.hpp"
#include "puma/isa/container.hpp"
#include "puma/metrics/models.hpp"
#include "puma/metrics/report.hpp"
#include "puma/metrics/sweep.hpp"
#include "puma/sim/simulator.hpp"

namespace fs = std::filesystem;
using namespace puma;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 2;
constexpr int kExitDeadlock = 3;
constexpr int kExitSaturation = 4;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot open '{}'", path));
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write '{}'", path.string()));
  f << text;
}

void configure_logging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("PUMA_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  std::uint64_t step_limit = sim::SimOptions{}.step_limit;
  std::string out;
  bool no_coalesce = false, no_shuffle = false, naive_partition = false, naive_order = false, loop_conv = false;

  MachineConfig machine() const { return config.empty() ? MachineConfig{} : MachineConfig::from_file(config); }
  compiler::CompileOptions compile() const {
    compiler::CompileOptions o;
    o.coalesce = !no_coalesce;
    o.input_shuffle = !no_shuffle;
    o.naive_partition = naive_partition;
    o.naive_order = naive_order;
    o.loop_conv = loop_conv;
    o.seed = seed;
    return o;
  }
  sim::SimOptions sim() const {
    sim::SimOptions o;
    o.step_limit = step_limit;
    return o;
  }
};

void add_machine_flags(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "machine config file (key = value lines)");
  app->add_option("--seed", c.seed, "seed for randomized choices");
}

void add_compile_flags(CLI::App* app, Common& c) {
  app->add_flag("--no-coalesce", c.no_coalesce, "keep every MVM in its own instruction");
  app->add_flag("--no-input-shuffle", c.no_shuffle, "always refill MVMU inputs in full");
  app->add_flag("--naive-partition", c.naive_partition, "random MVMU placement");
  app->add_flag("--naive-order", c.naive_order, "FIFO topological order instead of the operand post-order");
  app->add_flag("--loop-conv", c.loop_conv, "emit eligible conv layers as counted loops");
}

graph::ModelGraph load_model(const std::string& source) {
  for (const auto& n : metrics::example_names())
    if (source == n) return metrics::make_example(n).graph;
  auto g = graph::load_graph(source);
  g.freeze();
  return g;
}

metrics::ExampleModel load_example_or_file(const std::string& source, std::uint64_t seed) {
  for (const auto& n : metrics::example_names())
    if (source == n) return metrics::make_example(n, seed);
  metrics::ExampleModel e{load_model(source), {}, {}, {}};
  e.inputs = metrics::random_inputs(e.graph, seed);
  return e;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(fmt::format("bad sweep value '{}'", item));
    }
  }
  if (out.empty()) throw Error("no sweep values given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"PUMA toolchain: compiler, simulator and design-space sweeps"};
  app.require_subcommand(1);
  Common c;

  std::string model, program, inputs_path, asm_path, axis, values, example, example_dir = ".";

  auto* compile = app.add_subcommand("compile", "compile a model graph to a program container");
  compile->add_option("model", model, "graph file or example name")->required();
  compile->add_option("-o,--out", c.out, "output container path")->required();
  add_machine_flags(compile, c);
  add_compile_flags(compile, c);

  auto* run = app.add_subcommand("run", "simulate a program container");
  run->add_option("program", program, "container path")->required();
  run->add_option("-i,--inputs", inputs_path, "tensor file (JSON)")->required();
  run->add_option("--out", c.out, "directory for outputs.json and report.json");
  run->add_option("--step-limit", c.step_limit, "maximum executed instructions");
  bool json_report = false;
  run->add_flag("--json", json_report, "print the report as JSON");
  add_machine_flags(run, c);

  auto* report = app.add_subcommand("report", "static summary of a program container");
  report->add_option("program", program, "container path")->required();

  auto* sweep = app.add_subcommand("sweep", "design-space sweep over one machine parameter");
  sweep->add_option("--axis", axis, "vfu_lanes, mvmus_per_core, crossbar_dim, register_size, noise_sigma or bits_per_device")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--model", model, "graph file or example name")->required();
  sweep->add_option("--out", c.out, "CSV output path (stdout when absent)");
  sweep->add_option("--step-limit", c.step_limit, "maximum executed instructions per run");
  int threads = 1, trials = 1;
  sweep->add_option("--threads", threads, "points evaluated concurrently");
  sweep->add_option("--noise-trials", trials, "noise seeds averaged per point");
  add_machine_flags(sweep, c);
  add_compile_flags(sweep, c);

  auto* assemble = app.add_subcommand("asm", "assemble a listing into a container");
  assemble->add_option("listing", asm_path, "assembly with .tile/.core directives")->required();
  assemble->add_option("-o,--out", c.out, "output container path")->required();

  auto* disasm = app.add_subcommand("disasm", "print the listing of a container");
  disasm->add_option("program", program, "container path")->required();

  auto* ex = app.add_subcommand("example", "write a shipped example model and sample inputs");
  ex->add_option("name", example, "example name, or 'list'")->required();
  ex->add_option("--out", example_dir, "output directory")->capture_default_str();
  ex->add_option("--seed", c.seed, "weight and input seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compile) {
      const auto g = load_model(model);
      const auto prog = compiler::compile(g, c.machine(), c.compile());
      isa::save_container(prog.container, c.out);
      std::cout << metrics::format_compile_report(prog.stats);
      spdlog::debug("placement\n{}", prog.plan_dump);
    } else if (*run) {
      const MachineConfig m = c.machine();
      const auto container = isa::load_container(program);
      const auto inputs = graph::load_tensors(inputs_path, m.frac_bits);
      if (container.metadata.contains("inputs"))
        for (const auto& in : container.metadata["inputs"])
          if (!inputs.count(in["name"].get<std::string>()))
            throw ShapeError(fmt::format("missing input '{}'", in["name"].get<std::string>()));
      sim::Simulator s(m);
      s.load(container);
      const auto r = s.run(inputs, c.sim());
      if (json_report) std::cout << r.to_json().dump(2) << "\n";
      else std::cout << metrics::format_run_report(r);
      if (!c.out.empty()) {
        write_file(fs::path(c.out) / "outputs.json", graph::tensors_to_text(r.outputs));
        write_file(fs::path(c.out) / "report.json", r.to_json().dump(2));
      }
      if (r.saturations > 0) {
        spdlog::warn("{} saturated results", r.saturations);
        return kExitSaturation;
      }
    } else if (*report) {
      std::cout << metrics::format_program_report(isa::load_container(program));
    } else if (*sweep) {
      metrics::SweepOptions o;
      o.compile = c.compile();
      o.sim = c.sim();
      o.threads = threads;
      o.noise_trials = trials;
      const auto pts = metrics::sweep(axis, parse_values(values), load_example_or_file(model, c.seed), c.machine(), o);
      const std::string csv = metrics::to_csv(pts);
      if (c.out.empty()) std::cout << csv;
      else write_file(c.out, csv);
    } else if (*assemble) {
      isa::Container k;
      k.segments = isa::assemble_program(read_file(asm_path));
      k.metadata["format"] = "puma-program";
      k.metadata["name"] = fs::path(asm_path).stem().string();
      isa::save_container(k, c.out);
    } else if (*disasm) {
      std::cout << isa::disassemble_program(isa::load_container(program).segments);
    } else if (*ex) {
      if (example == "list") {
        for (const auto& n : metrics::example_names()) std::cout << n << "\n";
        return kExitOk;
      }
      const auto e = metrics::make_example(example, c.seed);
      fs::create_directories(example_dir);
      graph::save_graph(e.graph, (fs::path(example_dir) / (example + ".json")).string());
      graph::save_tensors(e.inputs, (fs::path(example_dir) / (example + ".inputs.json")).string());
    }
  } catch (const DeadlockError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDeadlock;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}
