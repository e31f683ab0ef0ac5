#include "puma/machine_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma {

namespace {

using Field = std::variant<int MachineConfig::*, double MachineConfig::*, std::uint64_t MachineConfig::*>;

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"crossbar_dim", &MachineConfig::crossbar_dim},
      {"mvmus_per_core", &MachineConfig::mvmus_per_core},
      {"cores_per_tile", &MachineConfig::cores_per_tile},
      {"tiles", &MachineConfig::tiles},
      {"vfu_lanes", &MachineConfig::vfu_lanes},
      {"general_registers", &MachineConfig::general_registers},
      {"tile_memory_words", &MachineConfig::tile_memory_words},
      {"fifos", &MachineConfig::fifos},
      {"fifo_depth", &MachineConfig::fifo_depth},
      {"core_imem_bytes", &MachineConfig::core_imem_bytes},
      {"tile_imem_bytes", &MachineConfig::tile_imem_bytes},
      {"frac_bits", &MachineConfig::frac_bits},
      {"bits_per_device", &MachineConfig::bits_per_device},
      {"adc_bits", &MachineConfig::adc_bits},
      {"noise_sigma", &MachineConfig::noise_sigma},
      {"noise_seed", &MachineConfig::noise_seed},
      {"lut_index_bits", &MachineConfig::lut_index_bits},
      {"clock_ghz", &MachineConfig::clock_ghz},
      {"mvm_cycles", &MachineConfig::mvm_cycles},
      {"issue_cycles", &MachineConfig::issue_cycles},
      {"pipeline_fill_cycles", &MachineConfig::pipeline_fill_cycles},
      {"rom_switch_cycles", &MachineConfig::rom_switch_cycles},
      {"link_hop_cycles", &MachineConfig::link_hop_cycles},
      {"link_cycles_per_flit", &MachineConfig::link_cycles_per_flit},
      {"flit_bits", &MachineConfig::flit_bits},
      {"mvmu_activation_nj", &MachineConfig::mvmu_activation_nj},
      {"vfu_mw", &MachineConfig::vfu_mw},
      {"sfu_mw", &MachineConfig::sfu_mw},
      {"register_file_mw", &MachineConfig::register_file_mw},
      {"control_mw", &MachineConfig::control_mw},
      {"imem_mw", &MachineConfig::imem_mw},
      {"tile_control_mw", &MachineConfig::tile_control_mw},
      {"tile_imem_mw", &MachineConfig::tile_imem_mw},
      {"tile_data_memory_mw", &MachineConfig::tile_data_memory_mw},
      {"tile_attribute_memory_mw", &MachineConfig::tile_attribute_memory_mw},
      {"tile_memory_bus_mw", &MachineConfig::tile_memory_bus_mw},
      {"receive_buffer_mw", &MachineConfig::receive_buffer_mw},
      {"network_mw", &MachineConfig::network_mw},
      {"network_tiles_sharing", &MachineConfig::network_tiles_sharing},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error(fmt::format("config key '{}': bad value '{}'", key, text));
  return v;
}

}  // namespace

void MachineConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name != key) continue;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(this->*member)>;
          this->*member = parse_number<T>(key, value);
        },
        field);
    return;
  }
  throw Error(fmt::format("unknown config key '{}'", key));
}

std::map<std::string, std::string> MachineConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, field] : fields())
    std::visit([&](auto member) { out[name] = fmt::format("{}", this->*member); }, field);
  return out;
}

std::string MachineConfig::to_text() const {
  std::string out;
  for (const auto& [name, field] : fields())
    std::visit([&](auto member) { out += fmt::format("{}={}\n", name, this->*member); }, field);
  return out;
}

MachineConfig MachineConfig::from_text(const std::string& text) {
  MachineConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(fmt::format("config line {}: expected key=value", lineno));
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

MachineConfig MachineConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void MachineConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("invalid machine config: ") + what);
  };
  require(crossbar_dim >= 1 && crossbar_dim <= 1024, "crossbar_dim must lie in [1, 1024]");
  require(mvmus_per_core >= 1 && mvmus_per_core <= 12, "mvmus_per_core must lie in [1, 12]");
  require(cores_per_tile >= 1 && cores_per_tile <= 254, "cores_per_tile must lie in [1, 254]");
  require(tiles >= 1 && tiles <= 4096, "tiles must lie in [1, 4096]");
  require(vfu_lanes >= 1, "vfu_lanes must be positive");
  require(general_registers >= 0, "general_registers must be nonnegative");
  require(register_count() <= 4096, "register space exceeds the 12-bit operand field");
  require(tile_memory_words >= 1 && tile_memory_words <= 65536, "tile_memory_words must lie in [1, 65536]");
  require(fifos >= 1 && fifos <= 256, "fifos must lie in [1, 256]");
  require(fifo_depth >= 1, "fifo_depth must be positive");
  require(frac_bits >= 0 && frac_bits <= 15, "frac_bits must lie in [0, 15]");
  require(bits_per_device >= 1 && bits_per_device <= 8, "bits_per_device must lie in [1, 8]");
  require(adc_bits >= 0 && adc_bits <= 32, "adc_bits must lie in [0, 32]");
  require(noise_sigma >= 0.0, "noise_sigma must be nonnegative");
  require(clock_ghz > 0.0, "clock_ghz must be positive");
  require(flit_bits >= 1, "flit_bits must be positive");
  require(lut_index_bits >= 1 && lut_index_bits <= 16, "lut_index_bits must lie in [1, 16]");
}

bool operator==(const MachineConfig& a, const MachineConfig& b) { return a.to_map() == b.to_map(); }

RegClass RegisterSpace::classify(int addr) const {
  if (addr < dim * mvmus) return RegClass::XbarIn;
  if (addr < 2 * dim * mvmus) return RegClass::XbarOut;
  return RegClass::General;
}

}  // namespace puma
