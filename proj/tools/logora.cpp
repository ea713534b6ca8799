// logora: train, evaluate, synthesize and inspect LogoRA models.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration or checkpoint
// error, 3 dataset error. Diagnostics go to stderr; machine-readable output
// is JSON (stdout, summary.json, metrics.ndjson) or CSV.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "logora/data.hpp"
#include "logora/errors.hpp"
#include "logora/model.hpp"
#include "logora/run_config.hpp"
#include "logora/trainer.hpp"

namespace fs = std::filesystem;
using namespace logora;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDataset = 3;

struct CliFailure {
  int exit_code;
  std::string message;
};

// Runs `f`, reporting any library error with the exit code of the stage it came from.
template <typename F>
auto stage(int exit_code, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw CliFailure{exit_code, e.what()};
  } catch (const fs::filesystem_error& e) {
    throw CliFailure{exit_code, e.what()};
  }
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBadConfig:
      return kExitConfig;
    case ErrorCode::kEmptyDataset:
    case ErrorCode::kMissingLabels:
    case ErrorCode::kMetaMismatch:
    case ErrorCode::kLabelOutOfRange:
      return kExitDataset;
    default:
      return kExitRuntime;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliFailure{kExitRuntime, "cannot write " + path.string()};
  out << text;
}

std::string epoch_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%03zu.lgra", epoch);
  return buf;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, source, target, target_test, out, ablate;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool keep_checkpoints = true;
};

int cmd_train(const TrainArgs& args) {
  RunConfig cfg = stage(kExitConfig, [&] { return load_run_config(args.config); });
  stage(kExitConfig, [&] {
    if (args.seed) cfg.train.seed = *args.seed;
    if (args.epochs) cfg.train.epochs = *args.epochs;
    apply_ablation(cfg.train.weights, args.ablate);
    cfg.train.validate_schedule();
  });
  if (!args.source.empty()) cfg.source = args.source;
  if (!args.target.empty()) cfg.target = args.target;
  if (!args.target_test.empty()) cfg.target_test = args.target_test;
  if (!cfg.source || !cfg.target)
    throw CliFailure{kExitConfig, "both a source and a target dataset are required (flags or config)"};

  const Dataset source = stage(kExitDataset, [&] { return load_dataset(*cfg.source); });
  const Dataset target = stage(kExitDataset, [&] { return load_dataset(*cfg.target); });
  std::optional<Dataset> target_test;
  if (cfg.target_test) target_test = stage(kExitDataset, [&] { return load_dataset(*cfg.target_test); });
  stage(kExitDataset, [&] {
    LOGORA_CHECK(source.fully_labeled(), ErrorCode::kMissingLabels, "every source sample needs a label");
    LOGORA_CHECK(!source.empty() && !target.empty(), ErrorCode::kEmptyDataset, "source and target must be non-empty");
    const auto& a = source.meta();
    const Dataset* test_ptr = target_test ? &*target_test : nullptr;
    for (const Dataset* other : {&target, test_ptr}) {
      if (other == nullptr) continue;
      const auto& b = other->meta();
      LOGORA_CHECK(a.length == b.length && a.channels == b.channels && a.num_classes == b.num_classes,
                   ErrorCode::kMetaMismatch, "source and target datasets disagree on T, d or C");
    }
    if (target_test)
      LOGORA_CHECK(target_test->fully_labeled(), ErrorCode::kMissingLabels, "target_test must be fully labeled");
  });
  stage(kExitDataset, [&] { bind_dataset_shape(cfg, source.meta()); });

  const fs::path out = args.out;
  fs::create_directories(out);
  if (args.keep_checkpoints) fs::create_directories(out / "checkpoints");
  write_text(out / "config.cfg", format_run_config(cfg));

  LogoraModel model(cfg.train.model, cfg.train.seed);
  Trainer trainer(model, cfg.train);
  std::ofstream metrics(out / "metrics.ndjson", std::ios::binary | std::ios::trunc);
  for (std::size_t e = 0; e < cfg.train.epochs; ++e) {
    EpochMetrics m = trainer.train_epoch(source, target);
    if (target_test) m.target_accuracy = evaluate(model, *target_test).accuracy;
    trainer.history().back() = m;
    metrics << m.to_json() << '\n';
    metrics.flush();
    if (args.keep_checkpoints) model.save(out / "checkpoints" / epoch_name(m.epoch));
    std::cerr << "epoch " << m.epoch << "/" << cfg.train.epochs << " cls " << m.loss_cls << " source_acc "
              << m.source_accuracy;
    if (m.target_accuracy) std::cerr << " target_acc " << *m.target_accuracy;
    std::cerr << '\n';
  }
  model.save(out / "model.lgra");

  nlohmann::ordered_json summary;
  summary["epochs"] = cfg.train.epochs;
  summary["seed"] = cfg.train.seed;
  summary["parameters"] = model.params().parameter_count();
  summary["source_accuracy"] = evaluate(model, source).accuracy;
  if (target.fully_labeled())
    summary["target_accuracy"] = evaluate(model, target).accuracy;
  else
    summary["target_accuracy"] = nullptr;
  if (target_test)
    summary["target_test_accuracy"] = evaluate(model, *target_test).accuracy;
  else
    summary["target_test_accuracy"] = nullptr;
  const auto& last = trainer.history().back();
  summary["final_losses"] = {{"cls", last.loss_cls},
                             {"domain", last.loss_domain},
                             {"margin", last.loss_margin},
                             {"dtw", last.loss_dtw},
                             {"center", last.loss_center}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, const std::string& data, long shift) {
  LogoraModel model = stage(kExitConfig, [&] { return LogoraModel::load(checkpoint); });
  Dataset ds = stage(kExitDataset, [&] { return load_dataset(data); });
  const EvalResult r = stage(kExitDataset, [&] {
    const auto& meta = ds.meta();
    LOGORA_CHECK(meta.length == model.config().series_length && meta.channels == model.config().channels,
                 ErrorCode::kMetaMismatch, "dataset shape does not match the checkpoint's model");
    if (shift != 0) ds = circular_shift(ds, shift);
    return evaluate(model, ds);
  });
  std::cout << r.to_json() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_export_attention(const std::string& checkpoint, const std::string& data, std::size_t index,
                         const std::string& out_dir) {
  LogoraModel model = stage(kExitConfig, [&] { return LogoraModel::load(checkpoint); });
  const Dataset ds = stage(kExitDataset, [&] { return load_dataset(data); });
  stage(kExitDataset, [&] {
    LOGORA_CHECK(index < ds.size(), ErrorCode::kOutOfRange,
                 "sample index " + std::to_string(index) + " outside [0, " + std::to_string(ds.size()) + ")");
    const auto& meta = ds.meta();
    LOGORA_CHECK(meta.length == model.config().series_length && meta.channels == model.config().channels,
                 ErrorCode::kMetaMismatch, "dataset shape does not match the checkpoint's model");
  });
  const std::size_t idx[] = {index};
  const ForwardOutput fwd = model.forward(ds.batch(idx), false);
  const fs::path out = out_dir;
  fs::create_directories(out);
  std::string means = "kernel,position,mean_weight\n";
  const auto& kernels = model.config().kernel_sizes;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    const Tensor& w = fwd.fusion.cross_weights[i];  // [1, M, l]
    const std::size_t rows = w.dim(1), cols = w.dim(2);
    const auto v = w.data();
    std::string csv;
    std::vector<double> col_mean(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%s%.17g", c ? "," : "", v[r * cols + c]);
        csv += buf;
        col_mean[c] += v[r * cols + c] / static_cast<double>(rows);
      }
      csv += '\n';
    }
    write_text(out / ("attention_k" + std::to_string(kernels[i]) + ".csv"), csv);
    for (std::size_t c = 0; c < cols; ++c) {
      char buf[80];
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g\n", kernels[i], c, col_mean[c]);
      means += buf;
    }
  }
  write_text(out / "attention_means.csv", means);
  nlohmann::ordered_json info;
  info["sample_index"] = index;
  info["label"] = ds.samples()[index].label;
  info["num_patches"] = model.config().num_patches();
  info["kernels"] = kernels;
  info["local_lengths"] = model.config().local_lengths();
  std::cout << info.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_synth(SynthConfig cfg, const std::string& out_dir, std::uint64_t test_seed_offset) {
  stage(kExitConfig, [&] { cfg.validate(); });
  const fs::path out = out_dir;
  auto [source, target] = synthesize_uda_pair(cfg);
  SynthConfig test_cfg = cfg;
  test_cfg.seed = cfg.seed + test_seed_offset;
  auto test_pair = synthesize_uda_pair(test_cfg);
  stage(kExitRuntime, [&] {
    save_dataset(source, out / "source");
    save_dataset(target, out / "target");
    save_dataset(test_pair.second, out / "target_test");
  });
  nlohmann::ordered_json info;
  info["source"] = (out / "source").string();
  info["target"] = (out / "target").string();
  info["target_test"] = (out / "target_test").string();
  info["samples_per_domain"] = source.size();
  info["template_oracle_source_accuracy"] = template_oracle_accuracy(cfg, source);
  std::cout << info.dump() << '\n';
  return 0;
}

int cmd_convert(const std::string& index, const std::string& domain, std::size_t classes, const std::string& out) {
  const Domain d = stage(kExitConfig, [&] { return parse_domain(domain); });
  const Dataset ds = stage(kExitDataset, [&] { return convert_csv(index, d, classes); });
  stage(kExitRuntime, [&] { save_dataset(ds, out); });
  nlohmann::ordered_json info;
  info["samples"] = ds.size();
  info["T"] = ds.meta().length;
  info["d"] = ds.meta().channels;
  info["C"] = ds.meta().num_classes;
  std::cout << info.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LogoRA unsupervised domain adaptation for time-series classification"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train on a labeled source and unlabeled target dataset");
  train_cmd->add_option("--config", train.config, "run config file (key = value)")->required();
  train_cmd->add_option("--source", train.source, "source dataset directory (overrides config)");
  train_cmd->add_option("--target", train.target, "target dataset directory (overrides config)");
  train_cmd->add_option("--eval", train.target_test, "labeled target test set, evaluated every epoch");
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_option("--seed", train.seed, "override the config seed");
  train_cmd->add_option("--epochs", train.epochs, "override the config epoch count");
  train_cmd->add_option("--ablate", train.ablate, "comma list of weights to zero: domain,margin,dtw,center");
  train_cmd->add_flag("!--no-checkpoints", train.keep_checkpoints, "skip per-epoch checkpoints");

  std::string checkpoint, data, out;
  long shift = 0;
  std::size_t sample_index = 0;
  auto* eval_cmd = app.add_subcommand("eval", "accuracy and confusion matrix of a checkpoint on a labeled dataset");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--data", data)->required();
  eval_cmd->add_option("--shift", shift, "circularly shift every series by this many steps first");

  auto* attn_cmd = app.add_subcommand("export-attention", "dump cross-attention maps for one sample as CSV");
  attn_cmd->add_option("--checkpoint", checkpoint)->required();
  attn_cmd->add_option("--data", data)->required();
  attn_cmd->add_option("--sample-index", sample_index)->required();
  attn_cmd->add_option("--out", out)->required();

  SynthConfig synth;
  std::uint64_t test_offset = 1000;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic source/target/target_test triple");
  synth_cmd->add_option("--out", out)->required();
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--length", synth.length);
  synth_cmd->add_option("--channels", synth.channels);
  synth_cmd->add_option("--classes", synth.num_classes);
  synth_cmd->add_option("--samples-per-class", synth.samples_per_class);
  synth_cmd->add_option("--motif-length", synth.motif_length);
  synth_cmd->add_option("--shift-range", synth.shift_range);
  synth_cmd->add_option("--target-scale", synth.target_scale);
  synth_cmd->add_option("--target-offset", synth.target_offset);
  synth_cmd->add_option("--noise", synth.noise_sigma);
  synth_cmd->add_option("--test-seed-offset", test_offset, "target_test is generated with seed + offset");

  std::string index, domain = "source";
  std::size_t classes = 0;
  auto* convert_cmd = app.add_subcommand("convert", "ingest a CSV index (file,label rows) into the binary format");
  convert_cmd->add_option("--index", index)->required();
  convert_cmd->add_option("--domain", domain, "source or target");
  convert_cmd->add_option("--classes", classes, "class count (default: max label + 1)");
  convert_cmd->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(checkpoint, data, shift);
    if (*attn_cmd) return cmd_export_attention(checkpoint, data, sample_index, out);
    if (*synth_cmd) return cmd_synth(synth, out, test_offset);
    if (*convert_cmd) return cmd_convert(index, domain, classes, out);
  } catch (const CliFailure& f) {
    std::cerr << "logora: " << f.message << '\n';
    return f.exit_code;
  } catch (const Error& e) {
    std::cerr << "logora: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "logora: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
