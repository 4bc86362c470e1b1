#pragma once

#include "dix/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace dix {

// Images are (C,H,W) tensors with values in [0,1]; C is 1 or 3.

// Separable Gaussian low-pass, kernel truncated at radius ceil(3*sigma),
// clamped edges.
Tensor gaussian_blur(const Tensor& image, double sigma);

// 8-bit quantization, row-major per channel; the byte stream fed to the
// information-level compressor.
std::vector<unsigned char> quantize_bytes(const Tensor& image);

// zlib-deflated size of a byte stream at the pinned level.
std::size_t compressed_byte_size(const std::vector<unsigned char>& bytes);

// e.g. "zlib-1.2.11-l9"; recorded in config digests.
std::string compressor_id();

// --- PNG IO ---
using TextChunks = std::vector<std::pair<std::string, std::string>>;

std::vector<unsigned char> encode_png(const Tensor& image, const TextChunks& text = {});
void write_png(const std::string& path, const Tensor& image, const TextChunks& text = {});
Tensor read_png(const std::string& path);

} // namespace dix
