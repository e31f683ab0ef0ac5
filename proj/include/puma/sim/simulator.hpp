#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "puma/graph/interpreter.hpp"
#include "puma/isa/container.hpp"
#include "puma/machine_config.hpp"
#include "puma/numerics/crossbar.hpp"
#include "puma/sim/register_file.hpp"

namespace puma::sim {

struct SimOptions {
  std::uint64_t step_limit = 50'000'000;
  std::uint64_t seed = 0;    // nonzero: random tie-break among agents ready at the same time
  int link_jitter_cycles = 0;  // nonzero: seeded extra link delay, order per source kept
};

struct Delivery {
  int tile = 0;
  int fifo = 0;
  int source = 0;  // sending tile
  std::int64_t time = 0;
  std::vector<std::int16_t> data;
};

struct RunReport {
  graph::TensorMap outputs;
  double latency_ns = 0.0;
  double energy_nj = 0.0;
  std::map<std::string, double> energy_breakdown_nj;
  double mvm_active_ns = 0.0;  // time at least one MVMU is busy
  std::map<std::string, double> unit_busy_ns;
  long mvmu_activations = 0;
  long rom_switches = 0;
  long register_accesses = 0;
  long spill_accesses = 0;
  double spill_percent = 0.0;
  long saturations = 0;
  std::uint64_t steps = 0;
  std::map<std::string, long> dynamic_histogram;
  std::map<std::string, long> static_histogram;
  std::map<std::string, double> blocked_ns;  // per agent, "t<tile>.c<core>" or "t<tile>.ctl"
  std::vector<Delivery> deliveries;  // every executed receive, in simulated order

  nlohmann::json to_json() const;
};

/// Attributes of one tile data-memory word.
struct MemoryEntry {
  std::int16_t value = 0;
  bool valid = false;
  std::uint16_t count = 0;  // 0 with valid set: persistent, reads never consume it
  std::int64_t ready_at = 0;
  std::int64_t free_at = 0;
};

/// Discrete-event model of cores, tile control units, shared memories and FIFOs.
class Simulator {
 public:
  explicit Simulator(MachineConfig m);
  ~Simulator();
  Simulator(Simulator&&) noexcept;
  Simulator& operator=(Simulator&&) noexcept;

  /// Installs code, weights (sliced, with write noise when configured) and shuffle tables.
  void load(const isa::Container& c);

  /// Fresh memories and registers each call; installed weights persist.
  RunReport run(const graph::TensorMap& inputs, const SimOptions& opt = {});

  /// Words of tile data memory after the last run.
  const MemoryEntry& memory(int tile, int addr) const;
  /// Register value of a core after the last run.
  std::int16_t reg(int tile, int core, int addr) const;
  /// Installed crossbar planes of one MVMU, if configured.
  const num::SlicedMatrix* mvmu(int tile, int core, int unit) const;

  const MachineConfig& config() const { return m_; }

 private:
  struct Impl;
  MachineConfig m_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace puma::sim
