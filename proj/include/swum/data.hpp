#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "swum/tensor.hpp"

namespace swum {

/// Directory layout: manifest.json, images/<stem>.ntf (f32 [C,H,W] in
/// [0,1]), masks/<stem>.ntf (u8 [H,W], labels < K).
struct DatasetManifest {
  std::string name;
  int num_classes = 0;
  int channels = 0;
  std::int64_t height = 0, width = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> train, test;

  std::size_t count() const { return train.size() + test.size(); }
  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);  // DataError
  void validate() const;                                      // DataError
};

struct SegSample {
  std::string stem;
  Tensor image;  // [C,H,W] f32
  Tensor mask;   // [H,W] u8
};

struct GenOptions {
  int num_classes = 3;
  int channels = 1;
  int count = 16;
  std::int64_t size = 64;
  std::uint64_t seed = 1;
  std::string name = "synthetic";
  double test_fraction = 0.25;
};

/// Procedural scenes: soft-edged ellipses and sinusoidal ribbons, one or two
/// shapes per foreground class, painted in class order over a shaded
/// background with additive noise. Masks are the exact hard regions.
/// Deterministic in the options.
SegSample make_sample(const GenOptions& opt, int index);

/// Writes a dataset to `out_dir` and returns its manifest.
DatasetManifest gen_data(const GenOptions& opt, const std::filesystem::path& out_dir);

enum class Split { train, test, all };
Split split_from_name(std::string_view s);

struct Dataset {
  DatasetManifest manifest;
  std::vector<SegSample> samples;
};

/// Loads and checks a split. Missing files raise DataError naming the stem.
Dataset load_dataset(const std::filesystem::path& dir, Split split);

/// Stacks samples[idx] into images [B,C,H,W] (dtype) and targets [B,H,W] u8.
std::pair<Tensor, Tensor> make_batch(const std::vector<SegSample>& samples, const std::vector<std::size_t>& idx,
                                     DType dtype = DType::f32);

}  // namespace swum
