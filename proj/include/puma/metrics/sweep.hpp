#pragma once

#include <string>
#include <vector>

#include "puma/compiler/compiler.hpp"
#include "puma/machine_config.hpp"
#include "puma/metrics/models.hpp"
#include "puma/sim/simulator.hpp"

namespace puma::metrics {

struct SweepPoint {
  std::string parameter;
  double value = 0.0;
  double latency_ns = 0.0;
  double energy_nj = 0.0;
  double accuracy = 0.0;  // classification accuracy, or fraction of outputs matching the interpreter
  long spill_accesses = 0;
  int spill_stores = 0;
  long mvm_instructions = 0;
};

struct SweepOptions {
  compiler::CompileOptions compile;
  sim::SimOptions sim;
  int threads = 1;
  int noise_trials = 1;  // accuracy averaged over this many noise seeds
};

/// vfu_lanes, mvmus_per_core, crossbar_dim, register_size, noise_sigma, bits_per_device.
const std::vector<std::string>& sweep_axes();

/// Copy of `base` with one axis set. Throws puma::Error for unknown axes or invalid values.
MachineConfig apply_axis(MachineConfig base, const std::string& axis, double value);

/// One compile and simulation of `model` on `m`.
SweepPoint evaluate(const ExampleModel& model, const MachineConfig& m, const SweepOptions& opt = {});

/// One point per value; points run concurrently when opt.threads > 1.
std::vector<SweepPoint> sweep(const std::string& axis, const std::vector<double>& values, const ExampleModel& model,
                              const MachineConfig& base, const SweepOptions& opt = {});

/// Header parameter,value,latency_ns,energy_nj,accuracy then one row per point.
std::string to_csv(const std::vector<SweepPoint>& points);

}  // namespace puma::metrics
