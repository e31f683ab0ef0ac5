#include "puma/sim/register_file.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma::sim {

RegisterFile::RegisterFile(int size, const num::LutSet* luts) : ram_(static_cast<std::size_t>(size), 0), luts_(luts) {}

std::int16_t RegisterFile::read(int addr) const {
  if (addr < 0 || addr >= size()) throw SimulationError(fmt::format("register {} out of range", addr));
  return ram_[static_cast<std::size_t>(addr)];
}

void RegisterFile::write(int addr, std::int16_t v) {
  if (addr < 0 || addr >= size()) throw SimulationError(fmt::format("register {} out of range", addr));
  ram_[static_cast<std::size_t>(addr)] = v;
}

void RegisterFile::clear() { std::fill(ram_.begin(), ram_.end(), 0); }

void RegisterFile::rom_lookup(num::LutFunction fn, const std::int16_t* in, std::int16_t* out, int n) {
  if (!luts_) throw SimulationError("register file has no ROM tables");
  // Operands are latched before the array changes mode.
  std::vector<std::int16_t> args(in, in + n);
  buffer_ = ram_;
  std::fill(ram_.begin(), ram_.end(), static_cast<std::int16_t>(-1));
  std::fill(ram_.begin(), ram_.end(), 0);
  ++mode_switches_;
  const num::LutTable& t = (*luts_)[fn];
  for (int k = 0; k < n; ++k) out[k] = t.entries()[t.bin_of(args[static_cast<std::size_t>(k)])];
  rom_reads_ += n;
  ram_ = buffer_;
}

}  // namespace puma::sim
