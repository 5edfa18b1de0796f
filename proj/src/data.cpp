#include "swum/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "swum/layers.hpp"
#include "swum/ntf.hpp"

namespace swum {

using nlohmann::json;

json DatasetManifest::to_json() const {
  return {{"name", name},
          {"num_classes", num_classes},
          {"channels", channels},
          {"size", {height, width}},
          {"seed", seed},
          {"count", count()},
          {"splits", {{"train", train}, {"test", test}}}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.num_classes = j.at("num_classes").get<int>();
    m.channels = j.at("channels").get<int>();
    const auto sz = j.at("size").get<std::vector<std::int64_t>>();
    if (sz.size() != 2) throw DataError("manifest size must be [H, W]");
    m.height = sz[0];
    m.width = sz[1];
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train = j.at("splits").at("train").get<std::vector<std::string>>();
    m.test = j.at("splits").at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dataset manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void DatasetManifest::validate() const {
  if (num_classes < 1 || num_classes > 255) throw DataError("manifest num_classes must be in [1, 255]");
  if (channels < 1) throw DataError("manifest channels must be >= 1");
  if (height < 1 || width < 1) throw DataError("manifest size must be positive");
  std::set<std::string> seen;
  for (const auto* split : {&train, &test})
    for (const auto& s : *split)
      if (!seen.insert(s).second) throw DataError("stem '" + s + "' appears twice across splits");
}

namespace {

double frac(double x) { return x - std::floor(x); }

// Mean intensity of class k in channel c; background is darker than all.
double class_intensity(int k, int c, int K) {
  const double base = K > 1 ? static_cast<double>(k) / (K - 1) : 0.0;
  return 0.3 + 0.65 * frac(base * 0.999 + 0.37 * c);
}

struct Shape2D {
  bool ribbon;
  double cy, cx, a, b, angle;  // ellipse: semi-axes a, b; ribbon: amplitude a, half-width b
  double wavelength, phase;

  // Signed depth in pixels, > 0 inside.
  double depth(double y, double x) const {
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double u = (x - cx) * ca + (y - cy) * sa;
    const double v = -(x - cx) * sa + (y - cy) * ca;
    if (!ribbon) {
      const double r = std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
      return (1.0 - r) * std::min(a, b);
    }
    const double centre = a * std::sin(2 * std::numbers::pi * u / wavelength + phase);
    return b - std::abs(v - centre);
  }
};

Shape2D random_shape(std::mt19937_64& rng, bool ribbon, double size) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Shape2D s{};
  s.ribbon = ribbon;
  s.cy = size * (0.2 + 0.6 * U(rng));
  s.cx = size * (0.2 + 0.6 * U(rng));
  s.angle = std::numbers::pi * U(rng);
  if (ribbon) {
    s.a = size * (0.04 + 0.08 * U(rng));
    s.b = size * (0.04 + 0.03 * U(rng));
    s.wavelength = size * (0.5 + 0.5 * U(rng));
    s.phase = 2 * std::numbers::pi * U(rng);
  } else {
    s.a = size * (0.1 + 0.12 * U(rng));
    s.b = size * (0.08 + 0.1 * U(rng));
  }
  return s;
}

std::string stem_of(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%04d", i);
  return buf;
}

}  // namespace

SegSample make_sample(const GenOptions& opt, int index) {
  const std::int64_t H = opt.size, W = opt.size;
  const int K = opt.num_classes, C = opt.channels;
  std::mt19937_64 rng(child_seed(opt.seed, "sample-" + std::to_string(index)));
  std::uniform_real_distribution<double> U(0.0, 1.0);

  Tensor image = Tensor::zeros({C, H, W}, DType::f32);
  Tensor mask = Tensor::zeros({H, W}, DType::u8);
  auto img = image.data<float>();
  auto msk = mask.data<std::uint8_t>();

  std::vector<double> acc(static_cast<std::size_t>(C * H * W));
  const double gy = 0.08 * (U(rng) - 0.5), gx = 0.08 * (U(rng) - 0.5);
  for (int c = 0; c < C; ++c)
    for (std::int64_t i = 0; i < H; ++i)
      for (std::int64_t j = 0; j < W; ++j)
        acc[(c * H + i) * W + j] = 0.1 + 0.03 * c + gy * i / H + gx * j / W;

  for (int k = 1; k < K; ++k) {
    const int shapes = U(rng) < 0.5 ? 1 : 2;
    for (int n = 0; n < shapes; ++n) {
      const Shape2D s = random_shape(rng, (k + n) % 2 == 0, static_cast<double>(opt.size));
      for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
          const double d = s.depth(i + 0.5, j + 0.5);
          if (d > 0) msk[i * W + j] = static_cast<std::uint8_t>(k);
          const double alpha = 1.0 / (1.0 + std::exp(-d / 0.75));
          for (int c = 0; c < C; ++c) {
            double& v = acc[(c * H + i) * W + j];
            v = (1 - alpha) * v + alpha * class_intensity(k, c, K);
          }
        }
    }
  }
  std::normal_distribution<double> noise(0.0, 0.03);
  for (std::size_t i = 0; i < acc.size(); ++i) img[i] = static_cast<float>(std::clamp(acc[i] + noise(rng), 0.0, 1.0));
  return {stem_of(index), image, mask};
}

DatasetManifest gen_data(const GenOptions& opt, const std::filesystem::path& out_dir) {
  if (opt.num_classes < 1 || opt.num_classes > 255) throw ConfigError("num_classes must be in [1, 255]");
  if (opt.channels < 1) throw ConfigError("channels must be >= 1");
  if (opt.count < 1) throw ConfigError("count must be >= 1");
  if (opt.size < 32 || opt.size % 32) throw ConfigError("size must be a positive multiple of 32");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  std::filesystem::create_directories(out_dir / "masks", ec);
  if (ec) throw DataError("cannot create dataset directory " + out_dir.string() + ": " + ec.message());

  DatasetManifest m;
  m.name = opt.name;
  m.num_classes = opt.num_classes;
  m.channels = opt.channels;
  m.height = m.width = opt.size;
  m.seed = opt.seed;
  const int n_test = static_cast<int>(std::floor(opt.count * opt.test_fraction));
  for (int i = 0; i < opt.count; ++i) {
    const SegSample s = make_sample(opt, i);
    ntf::save(out_dir / "images" / (s.stem + ".ntf"), s.image);
    ntf::save(out_dir / "masks" / (s.stem + ".ntf"), s.mask);
    (i < opt.count - n_test ? m.train : m.test).push_back(s.stem);
  }
  std::ofstream os(out_dir / "manifest.json");
  if (!os) throw DataError("cannot write " + (out_dir / "manifest.json").string());
  os << m.to_json().dump(2) << "\n";
  return m;
}

Split split_from_name(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "all") return Split::all;
  throw ConfigError("unknown split '" + std::string(s) + "' (train, test or all)");
}

Dataset load_dataset(const std::filesystem::path& dir, Split split) {
  const auto mpath = dir / "manifest.json";
  std::ifstream is(mpath);
  if (!is) throw DataError("dataset manifest not found: " + mpath.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw DataError("dataset manifest is not valid JSON: " + std::string(e.what()));
  }
  Dataset ds;
  ds.manifest = DatasetManifest::from_json(j);
  std::vector<std::string> stems;
  if (split != Split::test) stems = ds.manifest.train;
  if (split != Split::train) stems.insert(stems.end(), ds.manifest.test.begin(), ds.manifest.test.end());
  if (stems.empty()) throw DataError("dataset split is empty");
  const auto& m = ds.manifest;
  for (const auto& stem : stems) {
    const auto ip = dir / "images" / (stem + ".ntf"), mp = dir / "masks" / (stem + ".ntf");
    if (!std::filesystem::exists(ip)) throw DataError("missing image file for stem " + stem + ": " + ip.string());
    if (!std::filesystem::exists(mp)) throw DataError("missing mask file for stem " + stem + ": " + mp.string());
    SegSample s{stem, ntf::load(ip), ntf::load(mp)};
    if (s.image.shape() != Shape{m.channels, m.height, m.width})
      throw DataError("image " + stem + " has shape " + shape_str(s.image.shape()) + ", manifest says " +
                      shape_str({m.channels, m.height, m.width}));
    if (s.mask.dtype() != DType::u8 || s.mask.shape() != Shape{m.height, m.width})
      throw DataError("mask " + stem + " must be u8 " + shape_str({m.height, m.width}));
    for (auto v : s.mask.data<std::uint8_t>())
      if (v >= m.num_classes) throw DataError("mask " + stem + " has label " + std::to_string(v) + " >= K");
    if (s.image.dtype() != DType::f32) s.image = s.image.to(DType::f32);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::pair<Tensor, Tensor> make_batch(const std::vector<SegSample>& samples, const std::vector<std::size_t>& idx,
                                     DType dtype) {
  if (idx.empty()) throw DataError("empty batch");
  const Shape is = samples.at(idx[0]).image.shape();
  const std::int64_t B = static_cast<std::int64_t>(idx.size()), C = is[0], H = is[1], W = is[2];
  Tensor x = Tensor::zeros({B, C, H, W}, dtype);
  Tensor t = Tensor::zeros({B, H, W}, DType::u8);
  auto tv = t.data<std::uint8_t>();
  dispatch_float(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto xv = x.data<T>();
    for (std::int64_t b = 0; b < B; ++b) {
      const auto& s = samples.at(idx[b]);
      if (s.image.shape() != is) throw DataError("batch mixes image sizes");
      const auto src = s.image.data<float>();
      for (std::int64_t i = 0; i < C * H * W; ++i) xv[b * C * H * W + i] = static_cast<T>(src[i]);
      const auto ms = s.mask.data<std::uint8_t>();
      std::copy(ms.begin(), ms.end(), tv.begin() + b * H * W);
    }
  });
  return {x, t};
}

}  // namespace swum
