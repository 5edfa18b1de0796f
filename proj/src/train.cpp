#include "swum/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "swum/autograd.hpp"
#include "swum/losses.hpp"
#include "swum/optim.hpp"

namespace swum {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (iters_per_epoch < 1) throw ConfigError("iters_per_epoch must be >= 1");
  if (!(base_lr >= 0)) throw ConfigError("base_lr must be >= 0");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
  if (freeze_epochs < 0) throw ConfigError("freeze_epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(nsd_tau > 0)) throw ConfigError("nsd_tau must be > 0");
}

nlohmann::json EpochLog::to_json() const {
  nlohmann::json j = {{"epoch", epoch}, {"lr", lr}, {"train_loss", train_loss}, {"frozen", frozen}};
  j["mean_dsc"] = mean_dsc >= 0 ? nlohmann::json(mean_dsc) : nlohmann::json(nullptr);
  j["mean_nsd"] = mean_nsd >= 0 ? nlohmann::json(mean_nsd) : nlohmann::json(nullptr);
  return j;
}

MetricReport evaluate(const Network& net, const std::vector<SegSample>& samples, double tau, bool instance_mode) {
  MetricAccumulator acc(static_cast<int>(net.config().num_classes), tau, instance_mode);
  NoGradGuard ng;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto [x, t] = make_batch(samples, {i}, net.dtype());
    const auto heads = net.forward(x);
    const auto pred = argmax_labels(heads[0]);
    acc.add(pred[0], LabelMap::from_tensor(samples[i].mask));
  }
  return acc.report();
}

std::set<std::string> freeze_schedule(const Network& net, const std::set<std::string>& pretrained, int epoch,
                                      int freeze_epochs) {
  std::vector<std::string> unknown;
  for (const auto& n : pretrained)
    if (!net.params().contains(n)) unknown.push_back(n);
  if (!unknown.empty()) {
    std::string msg = "pretrained manifest names " + std::to_string(unknown.size()) + " tensors the network lacks:";
    for (const auto& n : unknown) msg += " " + n;
    throw ConfigError(msg);
  }
  return epoch < freeze_epochs ? pretrained : std::set<std::string>{};
}

std::vector<EpochLog> train_loop(Network& net, const std::vector<SegSample>& data, const TrainConfig& cfg,
                                 const std::set<std::string>& pretrained,
                                 const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (data.empty()) throw DataError("training set is empty");
  freeze_schedule(net, pretrained, 0, cfg.freeze_epochs);  // name check up front

  AdamWOptions ao;
  ao.weight_decay = cfg.weight_decay;
  AdamW opt(net.params().items(), ao);
  std::mt19937_64 rng(child_seed(cfg.seed, "batches"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a shuffle on first use
  auto next_batch = [&] {
    std::vector<std::size_t> idx;
    while (static_cast<int>(idx.size()) < cfg.batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    return idx;
  };

  const std::int64_t T = static_cast<std::int64_t>(cfg.epochs) * cfg.iters_per_epoch;
  std::vector<EpochLog> log;
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto frozen = freeze_schedule(net, pretrained, e, cfg.freeze_epochs);
    EpochLog rec;
    rec.epoch = e;
    rec.frozen = frozen.size();
    double loss_sum = 0;
    for (int it = 0; it < cfg.iters_per_epoch; ++it) {
      const std::int64_t step = static_cast<std::int64_t>(e) * cfg.iters_per_epoch + it;
      const double lr = cosine_lr(cfg.base_lr, step, T);
      if (it == 0) rec.lr = lr;
      const auto [x, t] = make_batch(data, next_batch(), net.dtype());
      const auto heads = net.forward(x);
      const auto w = cfg.ds_weights.empty() ? default_ds_weights(heads.size()) : cfg.ds_weights;
      const Tensor loss = deep_supervised_loss(heads, t, w);
      const double lv = loss.item();
      if (!std::isfinite(lv))
        throw NumericError("non-finite loss " + std::to_string(lv) + " at epoch " + std::to_string(e) +
                           ", iteration " + std::to_string(it));
      backward(loss);
      opt.step(lr, frozen);
      opt.zero_grad();
      loss_sum += lv;
    }
    rec.train_loss = loss_sum / cfg.iters_per_epoch;
    if (cfg.eval_every > 0 && ((e + 1) % cfg.eval_every == 0 || e + 1 == cfg.epochs)) {
      const auto rep = evaluate(net, data, cfg.nsd_tau, cfg.instance_mode);
      rec.mean_dsc = rep.mean_dsc;
      rec.mean_nsd = rep.mean_nsd;
    }
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

}  // namespace swum
