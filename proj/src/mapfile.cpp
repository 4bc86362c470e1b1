#include "dix/mapfile.hpp"

#include "dix/errors.hpp"

#include <cstring>
#include <fstream>

namespace dix {

namespace {

constexpr char kMagic[4] = {'D', 'I', 'X', 'M'};

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<unsigned char>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32(out, bits);
}

struct Reader {
    const std::vector<unsigned char>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > bytes.size())
            throw format_error(std::string("truncated map file: ") + what + " needs " +
                               std::to_string(n) + " bytes at offset " + std::to_string(pos) +
                               " but only " + std::to_string(bytes.size() - pos) + " remain");
    }
    std::uint16_t u16() {
        need(2, "u16");
        const std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
};

} // namespace

std::vector<unsigned char> encode_map(const ExplanationMap& map) {
    if (map.values.rank() != 2)
        throw addressing_error("map file payload must be a 2-D grid, got " +
                               map.values.shape_string());
    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kMapFileVersion);
    put_u32(out, static_cast<std::uint32_t>(map.values.dim(0)));
    put_u32(out, static_cast<std::uint32_t>(map.values.dim(1)));
    for (std::size_t i = 0; i < map.values.size(); ++i)
        put_f32(out, static_cast<float>(map.values[i]));
    const std::string digest = map.provenance.digest();
    put_u32(out, static_cast<std::uint32_t>(digest.size()));
    out.insert(out.end(), digest.begin(), digest.end());
    return out;
}

ExplanationMap decode_map(const std::vector<unsigned char>& bytes) {
    Reader r{bytes};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw format_error("bad magic at offset 0: expected \"DIXM\"");
    r.pos = 4;
    const std::uint16_t version = r.u16();
    if (version == 0) throw format_error("unsupported map file version 0 (offset 4)");
    if (version > kMapFileVersion)
        throw format_error("unsupported map file version " + std::to_string(version) +
                           " (offset 4); this build reads up to " +
                           std::to_string(kMapFileVersion));
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    const std::size_t payload = static_cast<std::size_t>(h) * w * 4;
    if (r.pos + payload > bytes.size())
        throw format_error("truncated payload: expected " + std::to_string(payload) +
                           " bytes for " + std::to_string(h) + "x" + std::to_string(w) +
                           " floats at offset " + std::to_string(r.pos) + ", found " +
                           std::to_string(bytes.size() - r.pos));
    ExplanationMap map;
    map.values = Tensor({h, w});
    for (std::size_t i = 0; i < map.values.size(); ++i) map.values[i] = r.f32();
    const std::uint32_t digest_len = r.u32();
    r.need(digest_len, "digest");
    map.provenance.digest_override.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos),
                                          bytes.begin() +
                                              static_cast<std::ptrdiff_t>(r.pos + digest_len));
    r.pos += digest_len;
    if (r.pos != bytes.size())
        throw format_error("trailing garbage: " + std::to_string(bytes.size() - r.pos) +
                           " unexpected bytes at offset " + std::to_string(r.pos));
    return map;
}

void write_map(const std::string& path, const ExplanationMap& map) {
    const auto bytes = encode_map(map);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw format_error("short write to '" + path + "'");
}

ExplanationMap read_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open '" + path + "' for reading");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return decode_map(bytes);
}

} // namespace dix
