#include "puma/isa/container.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "puma/error.hpp"
#include "puma/isa/codec.hpp"

namespace puma::isa {

namespace {

constexpr char kMagic[4] = {'P', 'U', 'M', 'A'};

void put(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int b = 0; b < bytes; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::uint64_t take(int n, const char* what) {
    if (pos_ + n > bytes_.size()) throw FormatError(fmt::format("truncated container reading {} at byte {}", what, pos_));
    std::uint64_t v = 0;
    for (int b = 0; b < n; ++b) v |= std::uint64_t{bytes_[pos_ + b]} << (8 * b);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> block(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) throw FormatError(fmt::format("truncated container reading {} at byte {}", what, pos_));
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string segment_key(const Segment& s) { return fmt::format("{}.{}", s.tile, s.core); }

}  // namespace

std::vector<std::uint8_t> write_container(const Container& c) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kContainerVersion);
  put(out, c.segments.size(), 4);
  nlohmann::json meta = c.metadata;
  nlohmann::json shuffles = nlohmann::json::object();
  for (const auto& s : c.segments) {
    put(out, static_cast<std::uint64_t>(s.tile), 2);
    out.push_back(s.is_tile() ? kTileMarker : static_cast<std::uint8_t>(s.core));
    put(out, s.code.size(), 4);
    const auto bytes = encode_all(s.code);
    out.insert(out.end(), bytes.begin(), bytes.end());
    if (!s.is_tile() && s.shuffles.size() > 1) {
      auto& list = shuffles[segment_key(s)];
      for (std::size_t k = 1; k < s.shuffles.size(); ++k) list.push_back({s.shuffles[k].filter, s.shuffles[k].stride});
    }
  }
  meta["shuffles"] = shuffles;
  const std::string blob = meta.dump();
  put(out, blob.size(), 4);
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

Container read_container(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.block(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) throw FormatError("not a program container (bad magic)");
  const auto version = r.take(1, "version");
  if (version != kContainerVersion) throw FormatError(fmt::format("unsupported container version {}", version));
  const auto nseg = r.take(4, "segment count");
  Container c;
  for (std::uint64_t k = 0; k < nseg; ++k) {
    Segment s;
    s.tile = static_cast<int>(r.take(2, "segment tile"));
    const auto core = r.take(1, "segment core");
    s.core = core == kTileMarker ? kTileSegment : static_cast<int>(core);
    const auto count = r.take(4, "instruction count");
    const std::size_t at = r.pos();
    s.code = decode_all(r.block(count * kInstructionBytes, "instructions"), at);
    if (!s.is_tile()) s.shuffles.push_back({});
    for (const auto& i : s.code)
      if (s.is_tile() != i.is_tile_op())
        throw FormatError(fmt::format("segment {}: '{}' is not valid in this segment kind", segment_key(s), mnemonic(i.opcode)));
    c.segments.push_back(std::move(s));
  }
  const auto len = r.take(4, "metadata length");
  const auto blob = r.block(len, "metadata");
  if (!r.done()) throw FormatError("trailing bytes after container metadata");
  try {
    c.metadata = nlohmann::json::parse(blob.begin(), blob.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed container metadata: ") + e.what());
  }
  if (c.metadata.contains("shuffles")) {
    for (auto& s : c.segments) {
      if (s.is_tile()) continue;
      const auto key = segment_key(s);
      if (!c.metadata["shuffles"].contains(key)) continue;
      for (const auto& p : c.metadata["shuffles"][key])
        s.shuffles.push_back({p.at(0).get<std::uint16_t>(), p.at(1).get<std::uint16_t>()});
    }
    c.metadata.erase("shuffles");
  }
  return c;
}

void save_container(const Container& c, const std::string& path) {
  const auto bytes = write_container(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Container load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return read_container(bytes);
}

std::string to_hex(std::span<const std::int16_t> values) {
  std::string out;
  out.reserve(values.size() * 4);
  for (auto v : values) out += fmt::format("{:04x}", static_cast<std::uint16_t>(v));
  return out;
}

std::vector<std::int16_t> from_hex(const std::string& text) {
  if (text.size() % 4 != 0) throw FormatError("hex tensor length is not a multiple of 4");
  std::vector<std::int16_t> out;
  out.reserve(text.size() / 4);
  for (std::size_t k = 0; k < text.size(); k += 4) {
    std::uint16_t v = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const char ch = text[k + j];
      int d;
      if (ch >= '0' && ch <= '9') d = ch - '0';
      else if (ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
      else if (ch >= 'A' && ch <= 'F') d = ch - 'A' + 10;
      else throw FormatError(fmt::format("bad hex digit '{}'", ch));
      v = static_cast<std::uint16_t>(v << 4 | d);
    }
    out.push_back(static_cast<std::int16_t>(v));
  }
  return out;
}

}  // namespace puma::isa
