#include "swum/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace swum {

std::array<std::uint8_t, 3> class_color(int k) {
  const double h = std::fmod(k * 137.50776, 360.0) / 60.0, s = 0.85, v = 1.0;
  const double c = v * s, x = c * (1 - std::abs(std::fmod(h, 2.0) - 1)), m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  auto q = [&](double u) { return static_cast<std::uint8_t>(std::lround((u + m) * 255.0)); };
  return {q(r), q(g), q(b)};
}

std::string render_overlay(const Tensor& image, const LabelMap& labels, double alpha) {
  if (image.ndim() != 3) throw DimensionError("overlay image must be [C,H,W], got " + shape_str(image.shape()));
  const std::int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  if (labels.h != H || labels.w != W)
    throw DimensionError("overlay labels " + std::to_string(labels.h) + "x" + std::to_string(labels.w) +
                         " do not match image " + std::to_string(H) + "x" + std::to_string(W));
  std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(3 * H * W));
  for (std::int64_t i = 0; i < H * W; ++i) {
    double g = 0;
    for (std::int64_t c = 0; c < C; ++c) g += image.at(c * H * W + i);
    g = std::clamp(g / static_cast<double>(C), 0.0, 1.0) * 255.0;
    const int k = labels.data[i];
    for (int ch = 0; ch < 3; ++ch) {
      const double v = k >= 1 ? (1 - alpha) * g + alpha * class_color(k)[ch] : g;
      out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(v))));
    }
  }
  return out;
}

void write_overlay(const std::filesystem::path& path, const Tensor& image, const LabelMap& labels, double alpha) {
  const std::string bytes = render_overlay(image, labels, alpha);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing " + path.string());
}

}  // namespace swum
