#pragma once

#include <cstdint>
#include <string>

namespace dix {

std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                      std::uint64_t seed = 1469598103934665603ULL);
std::string fnv1a64_hex(const std::string& text);

} // namespace dix
