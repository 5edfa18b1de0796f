// swum: train, evaluate and inspect Mamba U-Net segmenters on CPU.
//
// Exit codes: 0 ok, 1 other failure, 2 bad configuration or arguments,
// 3 bad data or checkpoint, 4 numeric failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "swum/autograd.hpp"
#include "swum/bench.hpp"
#include "swum/checkpoint.hpp"
#include "swum/cost.hpp"
#include "swum/data.hpp"
#include "swum/gradcheck.hpp"
#include "swum/ntf.hpp"
#include "swum/overlay.hpp"
#include "swum/train.hpp"

using namespace swum;

namespace {

struct ModelArgs {
  std::string config_path;
  std::string preset = "tiny";
  std::string variant = "umamba";

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "model config JSON (overrides --preset/--variant)");
    app->add_option("--preset", preset, "abdomen_mri | endoscopy | microscopy | tiny");
    app->add_option("--variant", variant, "umamba | umamba_dagger");
  }
  ModelConfig resolve() const {
    ModelConfig cfg = config_path.empty() ? ModelConfig::preset(preset, variant_from_name(variant))
                                          : ModelConfig::load(config_path);
    cfg.validate();
    return cfg;
  }
};

void print_header(const std::string& cmd, const nlohmann::json& fields) {
  std::cerr << "# swum " << cmd << " " << fields.dump() << "\n";
}

void check_matches(const ModelConfig& cfg, const DatasetManifest& m) {
  if (cfg.num_classes != m.num_classes || cfg.input_channels != m.channels)
    throw ConfigError("model expects " + std::to_string(cfg.input_channels) + " channels / " +
                      std::to_string(cfg.num_classes) + " classes but dataset '" + m.name + "' has " +
                      std::to_string(m.channels) + " / " + std::to_string(m.num_classes));
  cfg.check_input(m.height, m.width);
}

int run_count(const ModelArgs& ma, const std::string& size, bool json) {
  const ModelConfig cfg = ma.resolve();
  std::int64_t h = cfg.input_h, w = cfg.input_w;
  if (!size.empty()) {
    long long a = 0, b = 0;
    char sep = 0;
    if (std::sscanf(size.c_str(), "%lld%c%lld", &a, &sep, &b) != 3 || sep != 'x')
      throw ConfigError("--size must look like HxW, got '" + size + "'");
    h = a, w = b;
  }
  print_header("count", {{"model", cfg.to_json()}, {"input", {h, w}}});
  const CostReport rep = count_cost(cfg, h, w);
  std::cout << (json ? rep.to_json().dump(1) + "\n" : rep.table());
  return 0;
}

int run_gen(const GenOptions& opt, const std::string& out) {
  print_header("gen-data", {{"classes", opt.num_classes}, {"channels", opt.channels}, {"count", opt.count},
                            {"size", opt.size}, {"seed", opt.seed}, {"out", out}});
  const auto m = gen_data(opt, out);
  std::cout << "wrote " << m.count() << " samples (" << m.train.size() << " train, " << m.test.size()
            << " test) to " << out << "\n";
  return 0;
}

struct TrainArgs {
  ModelArgs model;
  TrainConfig tc;
  std::string data, out, log, pretrained, resume;
  std::uint64_t init_seed = 0;
};

int run_train(TrainArgs& a) {
  ModelConfig cfg = a.resume.empty() ? a.model.resolve() : ModelConfig{};
  std::optional<Network> net;
  if (!a.resume.empty()) {
    net.emplace(network_from_checkpoint(load_checkpoint(a.resume)));
    cfg = net->config();
  } else {
    net.emplace(cfg, child_seed(a.init_seed, "network"));
  }
  const Dataset ds = load_dataset(a.data, Split::train);
  check_matches(cfg, ds.manifest);
  a.tc.validate();

  std::set<std::string> frozen;
  if (!a.pretrained.empty()) {
    const auto rep = selective_init(*net, load_checkpoint(a.pretrained));
    frozen.insert(rep.initialized.begin(), rep.initialized.end());
    std::cerr << "# initialized " << rep.initialized.size() << " tensors from " << a.pretrained << ", "
              << rep.skipped.size() << " left at scratch values\n";
  }
  print_header("train", {{"model", cfg.to_json()},
                         {"params", count_params(cfg).total_params},
                         {"data", a.data},
                         {"train_samples", ds.samples.size()},
                         {"epochs", a.tc.epochs},
                         {"iters_per_epoch", a.tc.iters_per_epoch},
                         {"base_lr", a.tc.base_lr},
                         {"batch_size", a.tc.batch_size},
                         {"freeze_epochs", a.tc.freeze_epochs},
                         {"seed", a.tc.seed},
                         {"pretrained", a.pretrained.empty() ? nlohmann::json(nullptr) : nlohmann::json(a.pretrained)}});

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw DataError("cannot open log " + a.log);
  }
  train_loop(*net, ds.samples, a.tc, frozen, [&](const EpochLog& e) {
    const std::string line = e.to_json().dump();
    std::cout << line << "\n" << std::flush;
    if (log) log << line << "\n" << std::flush;
  });
  if (!a.out.empty()) {
    save_checkpoint(a.out, checkpoint_of(*net));
    std::cerr << "# saved " << a.out << "\n";
  }
  return 0;
}

int run_eval(const std::string& data, const std::string& ckpt, const std::string& split, double tau, bool instance,
             bool json) {
  const Network net = network_from_checkpoint(load_checkpoint(ckpt));
  const Dataset ds = load_dataset(data, split_from_name(split));
  check_matches(net.config(), ds.manifest);
  print_header("eval", {{"checkpoint", ckpt}, {"data", data}, {"split", split}, {"samples", ds.samples.size()},
                        {"tau", tau}, {"instance", instance}});
  const MetricReport rep = evaluate(net, ds.samples, tau, instance);
  std::cout << (json ? rep.to_json().dump(1) + "\n" : rep.table());
  return 0;
}

int run_overlay(const std::string& data, const std::string& ckpt, const std::string& stem, const std::string& image,
                const std::string& out, double alpha) {
  const Network net = network_from_checkpoint(load_checkpoint(ckpt));
  print_header("overlay", {{"checkpoint", ckpt}, {"data", data}, {"stem", stem}, {"image", image}, {"alpha", alpha}});
  if (!image.empty()) {
    SegSample s{image, ntf::load(image), {}};
    if (s.image.ndim() != 3) throw DataError("image " + image + " must be [C,H,W], got " + shape_str(s.image.shape()));
    s.mask = Tensor::zeros({s.image.dim(1), s.image.dim(2)}, DType::u8);
    NoGradGuard ng;
    const auto [x, t] = make_batch({s}, {0}, net.dtype());
    write_overlay(out, s.image, argmax_labels(net.forward(x)[0])[0], alpha);
    std::cout << "wrote " << out << "\n";
    return 0;
  }
  if (data.empty() || stem.empty()) throw ConfigError("overlay needs --image or both --data and --stem");
  const Dataset ds = load_dataset(data, Split::all);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].stem != stem) continue;
    NoGradGuard ng;
    const auto [x, t] = make_batch(ds.samples, {i}, net.dtype());
    const auto pred = argmax_labels(net.forward(x)[0]);
    write_overlay(out, ds.samples[i].image, pred[0], alpha);
    std::cout << "wrote " << out << "\n";
    return 0;
  }
  throw DataError("no sample with stem '" + stem + "' in " + data);
}

int run_bench(const BenchOptions& opt, bool json) {
  print_header("bench-scan", BenchReport{opt, {}}.to_json()["options"]);
  const BenchReport rep = bench_scan(opt);
  if (json) {
    std::cout << rep.to_json().dump(1) << "\n";
    return 0;
  }
  std::cout << rep.table();
  for (const char* m : {"s6_sequential", "s6_parallel", "ss2d", "attention"})
    std::cout << m << " mean doubling ratio " << rep.mean_ratio(m) << ", max " << rep.max_ratio(m) << "\n";
  return 0;
}

int run_gradcheck(std::uint64_t seed, bool network) {
  print_header("gradcheck", {{"seed", seed}, {"network", network}});
  bool ok = true;
  auto show = [&](const GradcheckResult& r) {
    std::printf("%-28s checked %-4lld max rel err %.3e  %s\n", r.name.c_str(), static_cast<long long>(r.checked),
                r.max_rel_err, r.passed() ? "ok" : "FAIL");
    ok = ok && r.passed();
  };
  for (const auto& r : run_op_suite(seed)) show(r);
  if (network)
    for (auto v : {Variant::umamba, Variant::dagger}) show(run_network_check(v, seed));
  return ok ? 0 : 4;
}

int run_surrogate(const ModelArgs& ma, std::uint64_t seed, const std::string& out) {
  const ModelConfig cfg = ma.resolve();
  print_header("surrogate", {{"model", cfg.to_json()}, {"seed", seed}, {"out", out}});
  const Checkpoint ck = make_surrogate_pretrained(cfg, seed);
  save_checkpoint(out, ck);
  std::cout << "wrote " << ck.tensors.size() << " designated tensors to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swum: Mamba U-Net segmentation on CPU"};
  app.require_subcommand(1);

  ModelArgs count_model;
  std::string count_size;
  bool count_json = false;
  auto* count = app.add_subcommand("count", "parameter and multiply-accumulate counts");
  count_model.attach(count);
  count->add_option("--size,--input-size", count_size, "input HxW (default: the config's)");
  count->add_flag("--json", count_json);

  GenOptions gen;
  std::string gen_out;
  auto* gend = app.add_subcommand("gen-data", "write a procedural segmentation dataset");
  gend->add_option("--out", gen_out)->required();
  gend->add_option("--classes", gen.num_classes);
  gend->add_option("--channels", gen.channels);
  gend->add_option("--count", gen.count);
  gend->add_option("--size", gen.size);
  gend->add_option("--seed", gen.seed);
  gend->add_option("--name", gen.name);
  gend->add_option("--test-fraction", gen.test_fraction);

  TrainArgs ta;
  std::vector<double> ds_weights;
  auto* train = app.add_subcommand("train", "train a network on a dataset");
  ta.model.attach(train);
  train->add_option("--data", ta.data)->required();
  train->add_option("--out", ta.out, "checkpoint to write");
  train->add_option("--log", ta.log, "JSONL epoch log");
  train->add_option("--pretrained", ta.pretrained, "checkpoint for selective encoder init");
  train->add_option("--resume", ta.resume, "continue from a full checkpoint");
  train->add_option("--epochs", ta.tc.epochs);
  train->add_option("--iters", ta.tc.iters_per_epoch, "iterations per epoch");
  train->add_option("--lr", ta.tc.base_lr);
  train->add_option("--weight-decay", ta.tc.weight_decay);
  train->add_option("--freeze-epochs", ta.tc.freeze_epochs);
  train->add_option("--batch", ta.tc.batch_size);
  train->add_option("--ds-weights", ds_weights, "deep supervision weights, final head first");
  train->add_option("--seed", ta.tc.seed, "batch order seed");
  train->add_option("--init-seed", ta.init_seed, "parameter init seed");
  train->add_option("--tau", ta.tc.nsd_tau);
  train->add_option("--eval-every", ta.tc.eval_every);
  train->add_flag("--instance", ta.tc.instance_mode);

  std::string ev_data, ev_ckpt, ev_split = "test";
  double ev_tau = 2.0;
  bool ev_instance = false, ev_json = false;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset split");
  eval->add_option("--data", ev_data)->required();
  eval->add_option("--checkpoint", ev_ckpt)->required();
  eval->add_option("--split", ev_split, "train | test | all");
  eval->add_option("--tau", ev_tau);
  eval->add_flag("--instance", ev_instance);
  eval->add_flag("--json", ev_json);

  std::string ov_data, ov_ckpt, ov_stem, ov_image, ov_out;
  double ov_alpha = 0.5;
  auto* ov = app.add_subcommand("overlay", "write a PPM of a prediction over its image");
  ov->add_option("--data", ov_data);
  ov->add_option("--checkpoint", ov_ckpt)->required();
  ov->add_option("--stem", ov_stem);
  ov->add_option("--image", ov_image, "NTF image [C,H,W] instead of a dataset sample");
  ov->add_option("--out", ov_out)->required();
  ov->add_option("--alpha", ov_alpha);

  BenchOptions bo;
  bool bench_json = false;
  auto* bench = app.add_subcommand("bench-scan", "time S6, SS2D and an attention reference over doubling lengths");
  bench->add_option("--min-log2", bo.min_log2);
  bench->add_option("--max-log2", bo.max_log2);
  bench->add_option("--lengths", bo.lengths, "explicit sequence lengths (overrides the log2 range)");
  bench->add_option("--attention-max-log2", bo.attention_max_log2);
  bench->add_option("--d-inner", bo.d_inner);
  bench->add_option("--d-state", bo.d_state);
  bench->add_option("--reps", bo.reps);
  bench->add_flag("--json", bench_json);

  std::uint64_t gc_seed = 0;
  bool gc_network = false;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  gc->add_option("--seed", gc_seed);
  gc->add_flag("--network", gc_network, "also check the tiny networks end to end");

  ModelArgs sur_model;
  std::uint64_t sur_seed = 0;
  std::string sur_out;
  auto* sur = app.add_subcommand("surrogate", "write a stand-in pretrained encoder checkpoint");
  sur_model.attach(sur);
  sur->add_option("--seed", sur_seed);
  sur->add_option("--out", sur_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*count) return run_count(count_model, count_size, count_json);
    if (*gend) return run_gen(gen, gen_out);
    if (*train) {
      ta.tc.ds_weights = ds_weights;
      return run_train(ta);
    }
    if (*eval) return run_eval(ev_data, ev_ckpt, ev_split, ev_tau, ev_instance, ev_json);
    if (*ov) return run_overlay(ov_data, ov_ckpt, ov_stem, ov_image, ov_out, ov_alpha);
    if (*bench) return run_bench(bo, bench_json);
    if (*gc) return run_gradcheck(gc_seed, gc_network);
    if (*sur) return run_surrogate(sur_model, sur_seed, sur_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
