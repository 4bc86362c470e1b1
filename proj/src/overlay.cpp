#include "dix/overlay.hpp"

#include "dix/errors.hpp"
#include "dix/image.hpp"

#include <algorithm>
#include <cstdio>

namespace dix {

namespace {

constexpr double kMaxAlpha = 0.6;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

void jet(double v, double rgb[3]) {
    rgb[0] = clamp01(1.5 - std::abs(4.0 * v - 3.0));
    rgb[1] = clamp01(1.5 - std::abs(4.0 * v - 2.0));
    rgb[2] = clamp01(1.5 - std::abs(4.0 * v - 1.0));
}

} // namespace

std::vector<unsigned char> render_overlay(const Tensor& image, const ExplanationMap& map) {
    if (image.rank() != 3 || map.values.rank() != 2 || map.values.dim(0) != image.dim(1) ||
        map.values.dim(1) != image.dim(2))
        throw addressing_error("overlay: map " + map.values.shape_string() +
                               " does not match image " + image.shape_string() +
                               " (no implicit resize)");
    for (std::size_t i = 0; i < map.values.size(); ++i)
        if (map.values[i] < 0.0 || map.values[i] > 1.0)
            throw configuration_error("overlay needs a normalized map; call normalize_map first");

    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor blended({3, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double v = map.values.at(y, x);
            const double alpha = kMaxAlpha * v;
            double rgb[3];
            jet(v, rgb);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double base = image.at(c == 3 ? ch : 0, y, x);
                blended.at(ch, y, x) = (1.0 - alpha) * base + alpha * rgb[ch];
            }
        }
    char alpha_text[32];
    std::snprintf(alpha_text, sizeof(alpha_text), "%.2f*value", kMaxAlpha);
    return encode_png(blended, {{"dix:colormap", "jet"}, {"dix:alpha", alpha_text}});
}

void write_overlay(const std::string& path, const Tensor& image, const ExplanationMap& map) {
    const auto bytes = render_overlay(image, map);
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw format_error("cannot open '" + path + "' for writing");
    const std::size_t written = std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    if (written != bytes.size()) throw format_error("short write to '" + path + "'");
}

} // namespace dix
