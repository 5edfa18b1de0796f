#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "swum/metrics.hpp"

namespace swum {

/// Class k colour: hue k * 137.50776 degrees, saturation 0.85, value 1.
std::array<std::uint8_t, 3> class_color(int k);

/// Binary PPM (P6) of the channel-mean grey image with every pixel of class
/// k >= 1 blended towards class_color(k) at `alpha`.
std::string render_overlay(const Tensor& image, const LabelMap& labels, double alpha = 0.5);

void write_overlay(const std::filesystem::path& path, const Tensor& image, const LabelMap& labels,
                   double alpha = 0.5);

}  // namespace swum
