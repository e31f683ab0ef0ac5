#include "puma/isa/assembly.hpp"

#include <charconv>
#include <optional>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma::isa {

int intern_shuffle(std::vector<ShufflePattern>& table, ShufflePattern p) {
  if (table.empty()) table.push_back({});
  if (p.filter == 0) return 0;
  for (std::size_t k = 1; k < table.size(); ++k)
    if (table[k] == p) return static_cast<int>(k);
  if (table.size() >= static_cast<std::size_t>(kMaxShufflePatterns))
    throw CapacityError(fmt::format("more than {} shuffle patterns on one core", kMaxShufflePatterns - 1));
  table.push_back(p);
  return static_cast<int>(table.size() - 1);
}

std::string format_instruction(const Instruction& i, const std::vector<ShufflePattern>* shuffles) {
  const auto m = mnemonic(i.opcode);
  switch (i.opcode) {
    case Opcode::Mvm: {
      std::string mask = "0b";
      int top = 0;
      for (int b = 0; b < kMaskBits; ++b)
        if (i.mask >> b & 1) top = b;
      for (int b = top; b >= 0; --b) mask += (i.mask >> b & 1) ? '1' : '0';
      if (shuffles && i.subop < shuffles->size()) {
        const auto& p = (*shuffles)[i.subop];
        return fmt::format("mvm {}, filter={}, stride={}", mask, p.filter, p.stride);
      }
      if (i.subop == 0) return fmt::format("mvm {}, filter=0, stride=0", mask);
      return fmt::format("mvm {}, shuffle={}", mask, i.subop);
    }
    case Opcode::Alu:
      if (is_unary(i.alu_op()))
        return fmt::format("alu {}, ${}, ${}, {}", to_string(i.alu_op()), i.dest, i.src1, i.vec_width);
      return fmt::format("alu {}, ${}, ${}, ${}, {}", to_string(i.alu_op()), i.dest, i.src1, i.src2, i.vec_width);
    case Opcode::AluImm:
      return fmt::format("alui {}, ${}, ${}, {}, {}", to_string(i.alu_op()), i.dest, i.src1, i.imm, i.vec_width);
    case Opcode::AluInt:
      return fmt::format("aluint {}, ${}, ${}, ${}", to_string(i.alu_int_op()), i.dest, i.src1, i.src2);
    case Opcode::Set: return fmt::format("set ${}, {}", i.dest, i.imm);
    case Opcode::Copy: return fmt::format("copy ${}, ${}, {}", i.dest, i.src1, i.vec_width);
    case Opcode::Load: return fmt::format("load ${}, {}, {}", i.dest, i.addr, i.vec_width);
    case Opcode::Store: return fmt::format("store {}, ${}, {}, {}", i.addr, i.src1, i.count, i.vec_width);
    case Opcode::Send: return fmt::format("send {}, {}, {}, {}", i.addr, i.fifo, i.target, i.vec_width);
    case Opcode::Receive: return fmt::format("receive {}, {}, {}, {}", i.addr, i.fifo, i.count, i.vec_width);
    case Opcode::Jmp: return fmt::format("jmp {}", i.pc);
    case Opcode::Brn: return fmt::format("brn {}, ${}, ${}, {}", to_string(i.brn_op()), i.src1, i.src2, i.pc);
  }
  return std::string(m);
}

std::string disassemble(const std::vector<Instruction>& code, const std::vector<ShufflePattern>* shuffles) {
  std::string out;
  for (const auto& i : code) {
    out += format_instruction(i, shuffles);
    out += '\n';
  }
  return out;
}

namespace {

struct Token {
  std::string_view text;
  int column;  // 1-based
};

std::string_view trim(std::string_view s, int& col) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
    ++col;
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

class LineParser {
 public:
  LineParser(std::string_view line, int lineno) : lineno_(lineno) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    int col = 1;
    line = trim(line, col);
    const auto sp = line.find_first_of(" \t");
    head_ = {line.substr(0, sp), col};
    if (sp == std::string_view::npos) return;
    int c = col + static_cast<int>(sp);
    std::string_view rest = line.substr(sp);
    while (true) {
      const auto comma = rest.find(',');
      int tc = c;
      std::string_view piece = trim(rest.substr(0, comma), tc);
      if (piece.empty()) throw AssemblyError("empty operand", lineno_, tc);
      args_.push_back({piece, tc});
      if (comma == std::string_view::npos) break;
      c += static_cast<int>(comma) + 1;
      rest = rest.substr(comma + 1);
    }
  }

  bool blank() const { return head_.text.empty(); }
  const Token& head() const { return head_; }
  std::size_t arity() const { return args_.size(); }
  const Token& arg(std::size_t k) const { return args_.at(k); }

  [[noreturn]] void fail(const std::string& what, int column) const { throw AssemblyError(what, lineno_, column); }

  void expect_arity(std::size_t n) const {
    if (args_.size() != n)
      fail(fmt::format("'{}' expects {} operands, got {}", head_.text, n, args_.size()), head_.column);
  }

  std::int64_t integer(const Token& t, std::string_view text) const {
    bool neg = false;
    if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
      neg = text.front() == '-';
      text.remove_prefix(1);
    }
    int base = 10;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
      base = 16;
      text.remove_prefix(2);
    } else if (text.size() > 2 && text[0] == '0' && (text[1] == 'b' || text[1] == 'B')) {
      base = 2;
      text.remove_prefix(2);
    }
    std::int64_t v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v, base);
    if (text.empty() || ec != std::errc() || ptr != end) fail(fmt::format("bad integer literal '{}'", t.text), t.column);
    return neg ? -v : v;
  }

  std::int64_t integer(std::size_t k) const { return integer(arg(k), arg(k).text); }

  std::int64_t ranged(std::size_t k, std::int64_t lo, std::int64_t hi) const {
    const auto v = integer(k);
    if (v < lo || v > hi) fail(fmt::format("value {} outside [{}, {}]", v, lo, hi), arg(k).column);
    return v;
  }

  int reg(std::size_t k) const {
    const Token& t = arg(k);
    if (t.text.size() < 2 || t.text.front() != '$') fail(fmt::format("expected register, got '{}'", t.text), t.column);
    const auto v = integer(t, t.text.substr(1));
    if (v < 0 || v >= (1 << kRegBits)) fail(fmt::format("register {} out of range", v), t.column);
    return static_cast<int>(v);
  }

  int width(std::size_t k) const { return static_cast<int>(ranged(k, 1, kMaxVecWidth)); }

  // key=value operand
  std::int64_t keyed(std::size_t k, std::string_view key) const {
    const Token& t = arg(k);
    const auto eq = t.text.find('=');
    int col = t.column;
    if (eq == std::string_view::npos || trim(t.text.substr(0, eq), col) != key)
      fail(fmt::format("expected '{}=<n>'", key), t.column);
    return integer(t, t.text.substr(eq + 1));
  }

  std::string_view key_of(std::size_t k) const {
    const auto& t = arg(k).text;
    const auto eq = t.find('=');
    return eq == std::string_view::npos ? std::string_view{} : t.substr(0, eq);
  }

 private:
  int lineno_;
  Token head_;
  std::vector<Token> args_;
};

Instruction parse_instruction(const LineParser& p, std::vector<ShufflePattern>* shuffles) {
  const auto op = opcode_from_mnemonic(p.head().text);
  if (!op) p.fail(fmt::format("unknown mnemonic '{}'", p.head().text), p.head().column);
  switch (*op) {
    case Opcode::Mvm: {
      if (p.arity() != 2 && p.arity() != 3) p.expect_arity(3);
      const auto mask = static_cast<std::uint16_t>(p.ranged(0, 1, (1 << kMaskBits) - 1));
      if (p.arity() == 2) {
        const auto id = p.keyed(1, "shuffle");
        if (id < 0 || id >= kMaxShufflePatterns) p.fail("shuffle id out of range", p.arg(1).column);
        return Instruction::mvm(mask, static_cast<std::uint8_t>(id));
      }
      const auto filter = p.keyed(1, "filter");
      const auto stride = p.keyed(2, "stride");
      if (filter < 0 || filter > 0xFFFF || stride < 0 || stride > 0xFFFF || (filter > 0 && stride >= filter))
        p.fail("invalid filter/stride pair", p.arg(1).column);
      ShufflePattern pat{static_cast<std::uint16_t>(filter), static_cast<std::uint16_t>(filter ? stride : 0)};
      if (filter == 0 && stride != 0) p.fail("identity pattern has stride 0", p.arg(2).column);
      if (pat.filter == 0) return Instruction::mvm(mask, 0);
      if (!shuffles) p.fail("shuffle pattern outside a core segment", p.arg(1).column);
      try {
        return Instruction::mvm(mask, static_cast<std::uint8_t>(intern_shuffle(*shuffles, pat)));
      } catch (const CapacityError& e) {
        p.fail(e.what(), p.arg(1).column);
      }
    }
    case Opcode::Alu: {
      if (p.arity() < 1) p.expect_arity(5);
      const auto aop = alu_op_from_string(p.arg(0).text);
      if (!aop) p.fail(fmt::format("unknown alu operation '{}'", p.arg(0).text), p.arg(0).column);
      if (is_unary(*aop)) {
        p.expect_arity(4);
        return Instruction::alu(*aop, p.reg(1), p.reg(2), 0, p.width(3));
      }
      p.expect_arity(5);
      return Instruction::alu(*aop, p.reg(1), p.reg(2), p.reg(3), p.width(4));
    }
    case Opcode::AluImm: {
      p.expect_arity(5);
      const auto aop = alu_op_from_string(p.arg(0).text);
      if (!aop) p.fail(fmt::format("unknown alu operation '{}'", p.arg(0).text), p.arg(0).column);
      const int half = 1 << (kAluImmBits - 1);
      return Instruction::alu_imm(*aop, p.reg(1), p.reg(2), static_cast<int>(p.ranged(3, -half, half - 1)), p.width(4));
    }
    case Opcode::AluInt: {
      p.expect_arity(4);
      const auto iop = alu_int_op_from_string(p.arg(0).text);
      if (!iop) p.fail(fmt::format("unknown aluint operation '{}'", p.arg(0).text), p.arg(0).column);
      return Instruction::alu_int(*iop, p.reg(1), p.reg(2), p.reg(3));
    }
    case Opcode::Set:
      p.expect_arity(2);
      return Instruction::set(p.reg(0), static_cast<int>(p.ranged(1, 0, (1 << kSetImmBits) - 1)));
    case Opcode::Copy:
      p.expect_arity(3);
      return Instruction::copy(p.reg(0), p.reg(1), p.width(2));
    case Opcode::Load:
      p.expect_arity(3);
      return Instruction::load(p.reg(0), static_cast<int>(p.ranged(1, 0, (1 << kAddrBits) - 1)), p.width(2));
    case Opcode::Store:
      p.expect_arity(4);
      return Instruction::store(static_cast<int>(p.ranged(0, 0, (1 << kAddrBits) - 1)), p.reg(1),
                                static_cast<int>(p.ranged(2, 0, (1 << kCountBits) - 1)), p.width(3));
    case Opcode::Send:
      p.expect_arity(4);
      return Instruction::send(static_cast<int>(p.ranged(0, 0, (1 << kAddrBits) - 1)),
                               static_cast<int>(p.ranged(1, 0, (1 << kFifoBits) - 1)),
                               static_cast<int>(p.ranged(2, 0, (1 << kTargetBits) - 1)), p.width(3));
    case Opcode::Receive:
      p.expect_arity(4);
      return Instruction::receive(static_cast<int>(p.ranged(0, 0, (1 << kAddrBits) - 1)),
                                  static_cast<int>(p.ranged(1, 0, (1 << kFifoBits) - 1)),
                                  static_cast<int>(p.ranged(2, 0, (1 << kCountBits) - 1)), p.width(3));
    case Opcode::Jmp:
      p.expect_arity(1);
      return Instruction::jmp(static_cast<int>(p.ranged(0, 0, (1 << kPcBits) - 1)));
    case Opcode::Brn: {
      p.expect_arity(4);
      const auto bop = brn_op_from_string(p.arg(0).text);
      if (!bop) p.fail(fmt::format("unknown branch condition '{}'", p.arg(0).text), p.arg(0).column);
      return Instruction::brn(*bop, p.reg(1), p.reg(2), static_cast<int>(p.ranged(3, 0, (1 << kPcBits) - 1)));
    }
  }
  p.fail("unreachable", 1);
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  int lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    fn(text.substr(0, nl), lineno);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

}  // namespace

std::vector<Instruction> assemble(std::string_view text, std::vector<ShufflePattern>* shuffles) {
  std::vector<Instruction> out;
  for_each_line(text, [&](std::string_view line, int lineno) {
    LineParser p(line, lineno);
    if (p.blank()) return;
    if (p.head().text.front() == '.') p.fail("directive outside a program listing", p.head().column);
    out.push_back(parse_instruction(p, shuffles));
  });
  return out;
}

std::string disassemble_program(const std::vector<Segment>& segments) {
  std::string out;
  for (const auto& s : segments) {
    if (s.is_tile()) {
      out += fmt::format(".tile {}\n", s.tile);
    } else {
      out += fmt::format(".core {} {}\n", s.tile, s.core);
    }
    for (std::size_t k = 1; k < s.shuffles.size(); ++k)
      out += fmt::format(".shuffle {} filter={} stride={}\n", k, s.shuffles[k].filter, s.shuffles[k].stride);
    out += disassemble(s.code, s.is_tile() ? nullptr : &s.shuffles);
  }
  return out;
}

std::vector<Segment> assemble_program(std::string_view text) {
  std::vector<Segment> out;
  for_each_line(text, [&](std::string_view line, int lineno) {
    // Directives separate operands with spaces; rewrite them as commas for the shared tokenizer.
    std::string norm(line);
    if (auto hash = norm.find('#'); hash != std::string::npos) norm.resize(hash);
    const auto first = norm.find_first_not_of(" \t");
    if (first != std::string::npos && norm[first] == '.') {
      const auto sp = norm.find_first_of(" \t", first);
      if (sp != std::string::npos) {
        bool lead = true;
        for (std::size_t k = sp; k < norm.size(); ++k) {
          if (norm[k] == ' ' || norm[k] == '\t') {
            if (!lead && k + 1 < norm.size() && norm[k + 1] != ' ' && norm[k + 1] != '\t') norm[k] = ',';
          } else {
            lead = false;
          }
        }
      }
    }
    LineParser p(norm, lineno);
    if (p.blank()) return;
    const auto head = p.head().text;
    if (head == ".tile") {
      p.expect_arity(1);
      out.push_back(Segment{static_cast<int>(p.ranged(0, 0, 0xFFFF)), kTileSegment, {}, {}});
    } else if (head == ".core") {
      p.expect_arity(2);
      out.push_back(Segment{static_cast<int>(p.ranged(0, 0, 0xFFFF)), static_cast<int>(p.ranged(1, 0, 254)), {}, {ShufflePattern{}}});
    } else if (head == ".shuffle") {
      if (out.empty() || out.back().is_tile()) p.fail(".shuffle outside a core segment", p.head().column);
      p.expect_arity(3);
      auto& table = out.back().shuffles;
      const auto id = p.ranged(0, 1, kMaxShufflePatterns - 1);
      if (static_cast<std::size_t>(id) != table.size()) p.fail("shuffle ids must be dense and ascending", p.arg(0).column);
      const auto filter = p.keyed(1, "filter");
      const auto stride = p.keyed(2, "stride");
      if (filter < 1 || filter > 0xFFFF || stride < 0 || stride >= filter) p.fail("invalid filter/stride pair", p.arg(1).column);
      table.push_back({static_cast<std::uint16_t>(filter), static_cast<std::uint16_t>(stride)});
    } else if (head.front() == '.') {
      p.fail(fmt::format("unknown directive '{}'", head), p.head().column);
    } else {
      if (out.empty()) p.fail("instruction before any .tile/.core directive", p.head().column);
      auto& seg = out.back();
      const Instruction i = parse_instruction(p, seg.is_tile() ? nullptr : &seg.shuffles);
      if (seg.is_tile() != i.is_tile_op())
        p.fail(fmt::format("'{}' is not valid in a {} segment", head, seg.is_tile() ? "tile" : "core"), p.head().column);
      seg.code.push_back(i);
    }
  });
  return out;
}

}  // namespace puma::isa
