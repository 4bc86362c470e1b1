#pragma once

#include "dix/attribution.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dix {

// DIXM container: magic "DIXM", u16 LE version, u32 LE height and width,
// row-major 32-bit LE float payload, length-prefixed UTF-8 provenance digest.
inline constexpr std::uint16_t kMapFileVersion = 1;

std::vector<unsigned char> encode_map(const ExplanationMap& map);
ExplanationMap decode_map(const std::vector<unsigned char>& bytes);

void write_map(const std::string& path, const ExplanationMap& map);
ExplanationMap read_map(const std::string& path);

} // namespace dix
