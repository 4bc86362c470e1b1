#include "dix/image.hpp"

#include "dix/errors.hpp"

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace dix {

namespace {

void check_image(const Tensor& image) {
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
        throw addressing_error("expected a (C,H,W) image with 1 or 3 channels, got " +
                               image.shape_string());
}

unsigned char quantize(double v) {
    const double clamped = std::min(1.0, std::max(0.0, v));
    return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

} // namespace

Tensor gaussian_blur(const Tensor& image, double sigma) {
    check_image(image);
    if (sigma <= 0.0) return image;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : kernel) v /= sum;

    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    auto clamp_idx = [](long v, std::size_t bound) {
        return static_cast<std::size_t>(std::min<long>(std::max<long>(v, 0),
                                                       static_cast<long>(bound) - 1));
    };
    Tensor horizontal(image.shape());
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    acc += kernel[static_cast<std::size_t>(k + radius)] *
                           image.at(ch, y, clamp_idx(static_cast<long>(x) + k, w));
                horizontal.at(ch, y, x) = acc;
            }
    Tensor out(image.shape());
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    acc += kernel[static_cast<std::size_t>(k + radius)] *
                           horizontal.at(ch, clamp_idx(static_cast<long>(y) + k, h), x);
                out.at(ch, y, x) = acc;
            }
    return out;
}

std::vector<unsigned char> quantize_bytes(const Tensor& image) {
    check_image(image);
    std::vector<unsigned char> bytes(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) bytes[i] = quantize(image[i]);
    return bytes;
}

std::size_t compressed_byte_size(const std::vector<unsigned char>& bytes) {
    uLongf bound = compressBound(static_cast<uLong>(bytes.size()));
    std::vector<unsigned char> out(bound);
    const int rc = compress2(out.data(), &bound, bytes.data(), static_cast<uLong>(bytes.size()),
                             9);
    if (rc != Z_OK) throw numerical_error("zlib compression failed with code " + std::to_string(rc));
    return static_cast<std::size_t>(bound);
}

std::string compressor_id() { return std::string("zlib-") + ZLIB_VERSION + "-l9"; }

namespace {

struct PngWriteSink {
    std::vector<unsigned char>* out;
};

void png_sink_write(png_structp png, png_bytep data, png_size_t n) {
    auto* sink = static_cast<PngWriteSink*>(png_get_io_ptr(png));
    sink->out->insert(sink->out->end(), data, data + n);
}

void png_sink_flush(png_structp) {}

} // namespace

std::vector<unsigned char> encode_png(const Tensor& image, const TextChunks& text) {
    check_image(image);
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw format_error("libpng write struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw format_error("libpng info struct allocation failed");
    }
    std::vector<unsigned char> out;
    PngWriteSink sink{&out};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw format_error("libpng encode failed");
    }
    png_set_write_fn(png, &sink, png_sink_write, png_sink_flush);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

    std::vector<png_text> chunks(text.size());
    std::vector<std::string> keys, values;
    keys.reserve(text.size());
    values.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        keys.push_back(text[i].first);
        values.push_back(text[i].second);
        std::memset(&chunks[i], 0, sizeof(png_text));
        chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
        chunks[i].key = keys.back().data();
        chunks[i].text = values.back().data();
        chunks[i].text_length = values.back().size();
    }
    if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));

    png_write_info(png, info);
    std::vector<unsigned char> row(w * c);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch) row[x * c + ch] = quantize(image.at(ch, y, x));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png(const std::string& path, const Tensor& image, const TextChunks& text) {
    const auto bytes = encode_png(image, text);
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw format_error("cannot open '" + path + "' for writing");
    const std::size_t written = std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    if (written != bytes.size()) throw format_error("short write to '" + path + "'");
}

Tensor read_png(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw format_error("cannot open '" + path + "' for reading");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(f);
        throw format_error("libpng read struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(f);
        throw format_error("'" + path + "' is not a decodable PNG");
    }
    png_init_io(png, f);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const std::size_t w = png_get_image_width(png, info);
    const std::size_t h = png_get_image_height(png, info);
    const std::size_t c = png_get_channels(png, info);
    if (c != 1 && c != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(f);
        throw format_error("'" + path + "' decodes to " + std::to_string(c) +
                           " channels; expected 1 or 3");
    }
    std::vector<unsigned char> row(w * c);
    Tensor image({c, h, w});
    for (std::size_t y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
                image.at(ch, y, x) = row[x * c + ch] / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(f);
    return image;
}

} // namespace dix
