#include "dix/digest.hpp"

#include <sstream>

namespace dix {

std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fnv1a64_hex(const std::string& text) {
    std::ostringstream oss;
    oss << std::hex << fnv1a64(text.data(), text.size());
    return oss.str();
}

} // namespace dix
