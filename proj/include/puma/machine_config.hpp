#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace puma {

/// Hardware parameters. Defaults follow the 32nm tile table at 1 GHz.
struct MachineConfig {
  // Geometry
  int crossbar_dim = 128;
  int mvmus_per_core = 2;
  int cores_per_tile = 8;
  int tiles = 138;
  int vfu_lanes = 1;
  int general_registers = 0;  // 0 selects 2 * crossbar_dim * mvmus_per_core
  int tile_memory_words = 32768;
  int fifos = 16;
  int fifo_depth = 2;
  int core_imem_bytes = 4096;
  int tile_imem_bytes = 8192;

  // Numerics
  int frac_bits = 12;
  int bits_per_device = 2;
  int adc_bits = 0;  // 0 = ideal converter
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 1;
  int lut_index_bits = 8;

  // Timing, in cycles of a clock_ghz clock
  double clock_ghz = 1.0;
  int mvm_cycles = 2304;
  int issue_cycles = 1;
  int pipeline_fill_cycles = 2;
  int rom_switch_cycles = 2;
  int link_hop_cycles = 4;
  int link_cycles_per_flit = 1;
  int flit_bits = 32;

  // Energy. Power figures in mW, so mW x ns = pJ.
  double mvmu_activation_nj = 43.97;
  double vfu_mw = 1.90;
  double sfu_mw = 0.055;
  double register_file_mw = 0.477;
  double control_mw = 0.25;
  double imem_mw = 1.52;
  double tile_control_mw = 0.5;
  double tile_imem_mw = 1.91;
  double tile_data_memory_mw = 17.66;
  double tile_attribute_memory_mw = 2.77;
  double tile_memory_bus_mw = 7.0;
  double receive_buffer_mw = 9.14;
  double network_mw = 570.63;
  int network_tiles_sharing = 138;

  int general_register_count() const {
    return general_registers > 0 ? general_registers : 2 * crossbar_dim * mvmus_per_core;
  }
  int xbar_in_base() const { return 0; }
  int xbar_out_base() const { return crossbar_dim * mvmus_per_core; }
  int general_base() const { return 2 * crossbar_dim * mvmus_per_core; }
  int register_count() const { return general_base() + general_register_count(); }
  double cycle_ns() const { return 1.0 / clock_ghz; }

  /// Throws puma::Error when a field is out of range.
  void validate() const;

  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;
  static MachineConfig from_text(const std::string& text);
  static MachineConfig from_file(const std::string& path);
};

bool operator==(const MachineConfig& a, const MachineConfig& b);

enum class RegClass : std::uint8_t { XbarIn, XbarOut, General };

/// Address-space partition for one core's register file.
struct RegisterSpace {
  int dim;
  int mvmus;
  int general;

  explicit RegisterSpace(const MachineConfig& c)
      : dim(c.crossbar_dim), mvmus(c.mvmus_per_core), general(c.general_register_count()) {}
  RegisterSpace(int d, int m, int g) : dim(d), mvmus(m), general(g) {}

  int size() const { return 2 * dim * mvmus + general; }
  int xbar_in(int mvmu) const { return mvmu * dim; }
  int xbar_out(int mvmu) const { return dim * mvmus + mvmu * dim; }
  int general_base() const { return 2 * dim * mvmus; }
  RegClass classify(int addr) const;
  bool contains(int addr) const { return addr >= 0 && addr < size(); }
};

}  // namespace puma
