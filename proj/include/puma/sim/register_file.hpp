#pragma once

#include <cstdint>
#include <vector>

#include "puma/numerics/lut.hpp"

namespace puma::sim {

/// Core register file whose array doubles as a ROM holding the transcendental tables.
/// A ROM access buffers the RAM contents, drives the array to all ones then all zeros,
/// reads the ROM row and restores the buffered RAM.
class RegisterFile {
 public:
  RegisterFile(int size, const num::LutSet* luts);

  int size() const { return static_cast<int>(ram_.size()); }
  std::int16_t read(int addr) const;
  void write(int addr, std::int16_t v);
  void clear();

  /// Enters ROM mode, evaluates `fn` on each input, and returns to RAM mode.
  void rom_lookup(num::LutFunction fn, const std::int16_t* in, std::int16_t* out, int n);

  long mode_switches() const { return mode_switches_; }
  long rom_reads() const { return rom_reads_; }

 private:
  std::vector<std::int16_t> ram_;
  std::vector<std::int16_t> buffer_;
  const num::LutSet* luts_;
  long mode_switches_ = 0;
  long rom_reads_ = 0;
};

}  // namespace puma::sim
