#pragma once

#include "dix/attribution.hpp"
#include "dix/tensor.hpp"

#include <vector>

namespace dix {

// Heat overlay: jet colormap blended over the image with per-pixel alpha
// 0.6 * map value, so zero heat leaves pixels untouched. The PNG carries
// "dix:colormap" and "dix:alpha" text chunks. Map dimensions must equal the
// image's; there is no implicit resize here.
std::vector<unsigned char> render_overlay(const Tensor& image, const ExplanationMap& map);

void write_overlay(const std::string& path, const Tensor& image, const ExplanationMap& map);

} // namespace dix
