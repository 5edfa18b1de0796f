#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "swum/data.hpp"
#include "swum/metrics.hpp"
#include "swum/model.hpp"

namespace swum {

struct TrainConfig {
  int epochs = 1;
  int iters_per_epoch = 250;
  double base_lr = 1e-4;
  double weight_decay = 0.05;
  int freeze_epochs = 10;
  std::vector<double> ds_weights;  // empty: default_ds_weights(#heads)
  int batch_size = 2;
  std::uint64_t seed = 0;
  double nsd_tau = 2.0;
  bool instance_mode = false;
  int eval_every = 1;  // epochs; 0 disables per-epoch evaluation

  void validate() const;  // ConfigError
};

struct EpochLog {
  int epoch = 0;
  double lr = 0;  // at the first iteration of the epoch
  double train_loss = 0;
  double mean_dsc = -1, mean_nsd = -1;  // -1 when not evaluated
  std::size_t frozen = 0;  // tensors held fixed during the epoch

  nlohmann::json to_json() const;
};

/// Single forward per sample, no test-time augmentation; scores the
/// full-resolution head.
MetricReport evaluate(const Network& net, const std::vector<SegSample>& samples, double tau = 2.0,
                      bool instance_mode = false);

/// Names frozen at `epoch`: all of `pretrained` before freeze_epochs,
/// nothing afterwards. Unknown names raise ConfigError.
std::set<std::string> freeze_schedule(const Network& net, const std::set<std::string>& pretrained, int epoch,
                                      int freeze_epochs);

/// AdamW + cosine decay over epochs * iters_per_epoch iterations with the
/// deep-supervised Dice + CE loss. Deterministic in (net, data, cfg).
/// A non-finite loss raises NumericError with the iteration and loss value.
std::vector<EpochLog> train_loop(Network& net, const std::vector<SegSample>& data, const TrainConfig& cfg,
                                 const std::set<std::string>& pretrained = {},
                                 const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace swum
