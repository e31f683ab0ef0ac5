#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "puma/isa/instruction.hpp"

namespace puma::isa {

/// XbarIn re-routing: physical slot of logical row r is (r + stride) mod filter.
/// Pattern 0 is always the identity (filter = 0).
struct ShufflePattern {
  std::uint16_t filter = 0;
  std::uint16_t stride = 0;
  friend bool operator==(const ShufflePattern&, const ShufflePattern&) = default;
};

inline constexpr int kTileSegment = -1;

/// Instruction stream of one core, or of a tile control unit when core == kTileSegment.
struct Segment {
  int tile = 0;
  int core = kTileSegment;
  std::vector<Instruction> code;
  std::vector<ShufflePattern> shuffles;  // index = MVM shuffle id; entry 0 is identity

  bool is_tile() const { return core == kTileSegment; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Returns the id of `p` in `table`, appending it when absent. Throws past 32 entries.
int intern_shuffle(std::vector<ShufflePattern>& table, ShufflePattern p);

std::string format_instruction(const Instruction& i, const std::vector<ShufflePattern>* shuffles = nullptr);
std::string disassemble(const std::vector<Instruction>& code, const std::vector<ShufflePattern>* shuffles = nullptr);

/// Parses instructions only. MVM filter/stride operands are interned into `shuffles` when given;
/// without a table only the identity pattern is accepted.
std::vector<Instruction> assemble(std::string_view text, std::vector<ShufflePattern>* shuffles = nullptr);

/// Full listing with `.tile` / `.core` / `.shuffle` directives.
std::string disassemble_program(const std::vector<Segment>& segments);
std::vector<Segment> assemble_program(std::string_view text);

}  // namespace puma::isa
