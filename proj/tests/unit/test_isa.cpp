#include <random>

#include <gtest/gtest.h>

#include "puma/error.hpp"
#include "puma/isa/assembly.hpp"
#include "puma/isa/codec.hpp"
#include "puma/isa/container.hpp"

using namespace puma;
using namespace puma::isa;

TEST(Codec, EveryLayoutFitsInOneWord) {
  for (int op = 1; op <= kOpcodeCount; ++op) {
    int bits = 0;
    for (const auto& f : layout(static_cast<Opcode>(op))) bits += f.bits;
    EXPECT_LE(bits, 56) << mnemonic(static_cast<Opcode>(op));
  }
}

TEST(Codec, OpcodeInLowBitsLittleEndian) {
  const Word w = encode(Instruction::jmp(0));
  EXPECT_EQ(w[0] & 0x0F, static_cast<int>(Opcode::Jmp));
  for (std::size_t b = 1; b < w.size(); ++b) EXPECT_EQ(w[b], 0);
}

TEST(Codec, RoundTripsFieldExtremes) {
  const std::vector<Instruction> cases{
      Instruction::mvm(0xFFF, 31),
      Instruction::alu(AluOp::Max, 4095, 4095, 4095, 256),
      Instruction::alu_imm(AluOp::Mul, 0, 1, -8192, 1),
      Instruction::alu_imm(AluOp::Add, 0, 1, 8191, 256),
      Instruction::alu_int(AluIntOp::Ne, 1, 2, 3),
      Instruction::set(7, 65535),
      Instruction::copy(0, 4095, 256),
      Instruction::load(512, 65535, 128),
      Instruction::store(65535, 512, 255, 1),
      Instruction::send(0, 255, 4095, 256),
      Instruction::receive(65535, 0, 255, 256),
      Instruction::jmp(65535),
      Instruction::brn(BrnOp::Gt, 4, 5, 65535),
  };
  for (const auto& i : cases) EXPECT_EQ(decode(encode(i)), i) << format_instruction(i);
  const auto bytes = encode_all(cases);
  EXPECT_EQ(bytes.size(), cases.size() * kInstructionBytes);
  EXPECT_EQ(decode_all(bytes), cases);
}

TEST(Codec, RejectsUnencodableFields) {
  EXPECT_THROW(encode(Instruction::alu_imm(AluOp::Add, 0, 0, 8192, 4)), CodecError);
  EXPECT_THROW(encode(Instruction::copy(4096, 0, 4)), CodecError);
  Instruction wide = Instruction::copy(0, 0, 4);
  wide.vec_width = 257;
  EXPECT_THROW(encode(wide), CodecError);
  Instruction stray = Instruction::jmp(3);
  stray.dest = 9;  // jmp carries no destination
  EXPECT_THROW(encode(stray), CodecError);
}

TEST(Codec, RejectsMalformedBytes) {
  Word w{};
  EXPECT_THROW(decode(w), CodecError);  // opcode 0
  w = encode(Instruction::jmp(1));
  w[6] = 0x80;  // bit past the jmp fields
  EXPECT_THROW(decode(w), CodecError);
  const std::vector<std::uint8_t> short_stream(10, 0);
  try {
    decode_all(short_stream, 100);
    FAIL();
  } catch (const CodecError& e) {
    EXPECT_EQ(e.byte_offset(), 110u);
  }
}

TEST(Assembly, ListingRoundTrip) {
  const std::string text =
      "set $700, 3\n"
      "alu sub, $512, $513, $514, 8\n"
      "alui shr, $512, $512, 2, 8\n"
      "alu sigmoid, $520, $512, 8\n"
      "brn ne, $700, $701, 0\n";
  EXPECT_EQ(disassemble(assemble(text)), text);
}

TEST(Assembly, CommentsAndBlankLines) {
  const auto code = assemble("  # setup\n\nset $1, 2   # two\njmp 0\n");
  ASSERT_EQ(code.size(), 2u);
  EXPECT_EQ(code[0], Instruction::set(1, 2));
}

TEST(Assembly, ReportsLineAndColumn) {
  try {
    assemble("set $1, 2\nfrob $1\n");
    FAIL();
  } catch (const AssemblyError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_GE(e.column(), 1);
  }
  EXPECT_THROW(assemble("alu bogus, $1, $2, $3, 4\n"), AssemblyError);
  EXPECT_THROW(assemble("copy $1, $2\n"), AssemblyError);
}

TEST(Assembly, ShufflePatternsInterned) {
  std::vector<ShufflePattern> table;
  const auto code = assemble("mvm 0b1, filter=9, stride=3\nmvm 0b1, filter=9, stride=3\nmvm 0b1, filter=0, stride=0\n", &table);
  ASSERT_EQ(code.size(), 3u);
  EXPECT_EQ(code[0].subop, code[1].subop);
  EXPECT_NE(code[0].subop, 0);
  EXPECT_EQ(code[2].subop, 0);
  EXPECT_EQ(table[code[0].subop], (ShufflePattern{9, 3}));
}

TEST(Assembly, ProgramSegments) {
  const std::string text = ".tile 0\nsend 0, 1, 1, 4\n.core 0 0\nset $512, 1\n.core 1 0\njmp 0\n";
  const auto segs = assemble_program(text);
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_TRUE(segs[0].is_tile());
  EXPECT_EQ(assemble_program(disassemble_program(segs)), segs);
}

TEST(Container, RoundTripWithMetadata) {
  Container c;
  c.segments = assemble_program(".core 0 0\nset $512, 5\nstore 0, $512, 0, 1\n.tile 0\nreceive 4, 0, 1, 4\n");
  c.metadata["format"] = "puma-program";
  c.metadata["numbers"] = {1, 2, 3};
  const auto bytes = write_container(c);
  ASSERT_GE(bytes.size(), 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PUMA");
  const Container d = read_container(bytes);
  EXPECT_EQ(d.segments, c.segments);
  EXPECT_EQ(d.metadata, c.metadata);
}

TEST(Container, RejectsCorruption) {
  Container c;
  c.segments = assemble_program(".core 0 0\njmp 0\n");
  auto bytes = write_container(c);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(read_container(bad), FormatError);
  bad = bytes;
  bad.resize(bad.size() - 3);
  EXPECT_THROW(read_container(bad), Error);
}

TEST(Container, TileOpsOnlyInTileSegments) {
  Container c;
  Segment s;
  s.tile = 0;
  s.core = 0;
  s.code = {Instruction::send(0, 0, 1, 4)};
  c.segments = {s};
  EXPECT_THROW(read_container(write_container(c)), FormatError);
}

TEST(Container, HexTensorRoundTrip) {
  std::mt19937 rng(1);
  std::vector<std::int16_t> v(333);
  for (auto& x : v) x = static_cast<std::int16_t>(rng());
  EXPECT_EQ(from_hex(to_hex(v)), v);
  EXPECT_EQ(to_hex(std::vector<std::int16_t>{-1, 1}), "ffff0001");
  EXPECT_THROW(from_hex("abc"), FormatError);
  EXPECT_THROW(from_hex("zzzz"), FormatError);
}
