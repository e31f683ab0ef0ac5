#include "puma/metrics/sweep.hpp"

#include <cmath>
#include <future>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "puma/error.hpp"

namespace puma::metrics {

const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"vfu_lanes", "mvmus_per_core", "crossbar_dim", "register_size", "noise_sigma", "bits_per_device"};
  return axes;
}

MachineConfig apply_axis(MachineConfig m, const std::string& axis, double value) {
  const int iv = static_cast<int>(std::lround(value));
  if (axis == "vfu_lanes") m.vfu_lanes = iv;
  else if (axis == "mvmus_per_core") m.mvmus_per_core = iv;
  else if (axis == "crossbar_dim") m.crossbar_dim = iv;
  else if (axis == "register_size") m.general_registers = iv;
  else if (axis == "noise_sigma") m.noise_sigma = value;
  else if (axis == "bits_per_device") {
    if (iv != 1 && iv != 2 && iv != 4) throw Error("bits_per_device sweeps over 1, 2 or 4");
    m.bits_per_device = iv;
  } else {
    throw Error(fmt::format("unknown sweep axis '{}'", axis));
  }
  m.validate();
  return m;
}

SweepPoint evaluate(const ExampleModel& model, const MachineConfig& m, const SweepOptions& opt) {
  const auto prog = compiler::compile(model.graph, m, opt.compile);
  SweepPoint p;
  p.spill_stores = prog.stats.spill_stores;
  p.mvm_instructions = prog.stats.mvm_instructions;

  const int trials = m.noise_sigma > 0.0 ? std::max(1, opt.noise_trials) : 1;
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    MachineConfig mt = m;
    mt.noise_seed = m.noise_seed + static_cast<std::uint64_t>(t) * 7919u;
    sim::Simulator s(mt);
    s.load(prog.container);
    const auto first = s.run(model.inputs, opt.sim);
    if (t == 0) {
      p.latency_ns = first.latency_ns;
      p.energy_nj = first.energy_nj;
      p.spill_accesses = first.spill_accesses;
    }
    if (!model.test_set.empty()) {
      int correct = 0;
      for (const auto& smp : model.test_set)
        correct += argmax(s.run(smp.inputs, opt.sim).outputs.at(model.output)) == smp.label;
      acc += static_cast<double>(correct) / static_cast<double>(model.test_set.size());
    } else {
      const auto ref = graph::Interpreter(m.crossbar_dim, m.lut_index_bits).evaluate(model.graph, model.inputs);
      long same = 0, total = 0;
      for (const auto& [name, v] : ref) {
        const auto& got = first.outputs.at(name);
        for (Eigen::Index k = 0; k < v.size(); ++k) same += got(k) == v(k);
        total += v.size();
      }
      acc += total ? static_cast<double>(same) / static_cast<double>(total) : 1.0;
    }
  }
  p.accuracy = acc / trials;
  return p;
}

std::vector<SweepPoint> sweep(const std::string& axis, const std::vector<double>& values, const ExampleModel& model,
                              const MachineConfig& base, const SweepOptions& opt) {
  std::vector<MachineConfig> configs;
  for (double v : values) configs.push_back(apply_axis(base, axis, v));
  std::vector<SweepPoint> out(values.size());
  const std::size_t width = static_cast<std::size_t>(std::max(1, opt.threads));
  for (std::size_t lo = 0; lo < values.size(); lo += width) {
    std::vector<std::future<SweepPoint>> jobs;
    for (std::size_t k = lo; k < std::min(values.size(), lo + width); ++k)
      jobs.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                [&, k] { return evaluate(model, configs[k], opt); }));
    for (std::size_t k = lo; k < lo + jobs.size(); ++k) {
      out[k] = jobs[k - lo].get();
      out[k].parameter = axis;
      out[k].value = values[k];
      spdlog::debug("sweep {}={}: {:.1f} ns, {:.3f} nJ, accuracy {:.3f}", axis, values[k], out[k].latency_ns,
                   out[k].energy_nj, out[k].accuracy);
    }
  }
  return out;
}

std::string to_csv(const std::vector<SweepPoint>& points) {
  std::string out = "parameter,value,latency_ns,energy_nj,accuracy\n";
  for (const auto& p : points) out += fmt::format("{},{},{:.3f},{:.6f},{:.6f}\n", p.parameter, p.value, p.latency_ns, p.energy_nj, p.accuracy);
  return out;
}

}  // namespace puma::metrics
