#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "puma/isa/assembly.hpp"

namespace puma::isa {

inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::uint8_t kTileMarker = 0xFF;

/// Binary program image: code segments plus a JSON metadata blob
/// (weights, shuffle tables, memory images, I/O bindings).
struct Container {
  std::vector<Segment> segments;
  nlohmann::json metadata = nlohmann::json::object();
};

std::vector<std::uint8_t> write_container(const Container& c);
Container read_container(std::span<const std::uint8_t> bytes);

void save_container(const Container& c, const std::string& path);
Container load_container(const std::string& path);

std::string to_hex(std::span<const std::int16_t> values);
std::vector<std::int16_t> from_hex(const std::string& text);

}  // namespace puma::isa
