// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: train | eval | predict | ablate.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "ldseg/checkpoint.hpp"
#include "ldseg/config.hpp"
#include "ldseg/data.hpp"
#include "ldseg/errors.hpp"
#include "ldseg/image_io.hpp"
#include "ldseg/metrics.hpp"
#include "ldseg/seg_core.hpp"
#include "ldseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace ldseg;

namespace {

struct CliOverrides {
  std::string config_path;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::optional<std::int64_t> seed;
  std::optional<double> threshold;
  bool no_dk = false;
  bool no_esa = false;
  bool no_lca = false;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> input_size;
  std::optional<std::string> split;
  std::optional<bool> augment;
};

void add_common_flags(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "flat key=value config file");
  cmd->add_option("--data", o.data, "dataset directory or synth:N");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  cmd->add_option("--seed", o.seed, "global seed");
  cmd->add_option("--threshold", o.threshold, "binarization threshold");
  cmd->add_flag("--no-dk", o.no_dk, "disable the dynamic kernel (static head)");
  cmd->add_flag("--no-esa", o.no_esa, "disable efficient self-attention");
  cmd->add_flag("--no-lca", o.no_lca, "disable lesion-aware cross-attention");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--batch-size", o.batch_size, "batch size");
  cmd->add_option("--input-size", o.input_size, "square model input size");
  cmd->add_option("--split", o.split, "train,val,test ratios");
  cmd->add_option("--augment", o.augment, "enable/disable augmentation");
}

RunConfig assemble(const CliOverrides& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = RunConfig::from_file(o.config_path);
  if (!o.data.empty()) cfg.data = o.data;
  if (!o.out.empty()) cfg.out = o.out;
  if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
  if (o.seed) cfg.model.seed = static_cast<std::uint64_t>(*o.seed);
  if (o.threshold) cfg.threshold = *o.threshold;
  if (o.no_dk) cfg.model.use_dk = false;
  if (o.no_esa) cfg.model.use_esa = false;
  if (o.no_lca) cfg.model.use_lca = false;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.batch_size) cfg.train.batch_size = *o.batch_size;
  if (o.input_size) cfg.apply_kv("input_size", std::to_string(*o.input_size));
  if (o.split) cfg.apply_kv("split", *o.split);
  if (o.augment) cfg.train.augment = *o.augment;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

SplitResult load_and_split(const RunConfig& cfg) {
  auto samples = load_dataset(cfg.data, cfg.model.input_h, cfg.model.seed);
  return split(std::move(samples), cfg.split_spec());
}

void emit_report(const RunConfig& cfg, const MetricsReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "report.csv", report_csv(report, cfg.echo()));
  write_text(out_dir / "report.txt", report_text(report));
}

int cmd_train(const CliOverrides& o) {
  RunConfig cfg = assemble(o);
  auto splits = load_and_split(cfg);
  LdnetModel model(cfg.model);
  Trainer trainer(model, cfg);
  if (!cfg.checkpoint.empty()) {
    trainer.resume_from(load_checkpoint(cfg.checkpoint));
    std::cout << "resumed from " << cfg.checkpoint << " at epoch " << trainer.start_epoch()
              << "\n";
  }
  TrainResult result = trainer.run(splits.train, splits.val, cfg.out, &std::cout);
  std::cout << "final train dice: " << std::setprecision(17) << result.final_train_dice << "\n";
  if (!result.best_checkpoint.empty()) {
    std::cout << "best checkpoint: " << result.best_checkpoint << "\n";
  }
  if (!result.final_checkpoint.empty()) {
    std::cout << "final checkpoint: " << result.final_checkpoint << "\n";
  }
  return 0;
}

LdnetModel model_from_checkpoint(const RunConfig& cfg, const Checkpoint& ckpt, bool have_config) {
  // Without an explicit config the checkpoint's embedded echo is authoritative.
  ModelConfig mc = cfg.model;
  if (!have_config) {
    RunConfig embedded = RunConfig::from_text(ckpt.config_echo);
    mc = embedded.model;
  }
  LdnetModel model(mc);
  restore_model(ckpt, model);
  return model;
}

int cmd_eval(const CliOverrides& o, const std::string& use_split) {
  RunConfig cfg = assemble(o);
  if (cfg.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
  Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  LdnetModel model = model_from_checkpoint(cfg, ckpt, !o.config_path.empty());

  std::vector<Sample> samples;
  if (use_split == "all") {
    samples = load_dataset(cfg.data, model.config().input_h, cfg.model.seed);
  } else {
    auto splits = load_and_split(cfg);
    if (use_split == "train") samples = splits.train;
    else if (use_split == "val") samples = splits.val;
    else if (use_split == "test") samples = splits.test;
    else throw ConfigError("eval: bad --use-split '" + use_split + "'");
    if (samples.empty()) throw DataError("eval: split '" + use_split + "' is empty");
  }

  MetricsReport report = evaluate_dataset(model, samples, cfg.threshold);
  emit_report(cfg, report, cfg.out);
  std::cout << report_text(report);
  return 0;
}

int cmd_predict(const CliOverrides& o, const std::string& image_path) {
  RunConfig cfg = assemble(o);
  if (cfg.checkpoint.empty()) throw ConfigError("predict: --checkpoint is required");
  Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  LdnetModel model = model_from_checkpoint(cfg, ckpt, !o.config_path.empty());

  Tensor image = load_image_rgb(image_path);
  Tensor prob = predict_probability(model, image, image.dim(1), image.dim(2));
  Tensor mask = binarize(prob, cfg.threshold);

  fs::create_directories(cfg.out);
  const std::string stem = fs::path(image_path).stem().string();
  const fs::path prob_path = fs::path(cfg.out) / (stem + "_prob.png");
  const fs::path overlay_path = fs::path(cfg.out) / (stem + "_overlay.png");
  save_gray_png(prob_path.string(), prob);
  save_rgb_png(overlay_path.string(), overlay_contour(image, mask));

  std::ostringstream note;
  std::istringstream echo(cfg.echo());
  std::string line;
  while (std::getline(echo, line)) note << "# " << line << "\n";
  note << "image = " << image_path << "\n";
  note << "probability_map = " << prob_path.string() << "\n";
  note << "overlay = " << overlay_path.string() << "\n";
  write_text(fs::path(cfg.out) / (stem + "_predict.txt"), note.str());

  std::cout << "wrote " << prob_path.string() << " and " << overlay_path.string() << "\n";
  return 0;
}

int cmd_ablate(const CliOverrides& o) {
  RunConfig base = assemble(o);
  struct Variant {
    const char* name;
    bool dk, esa, lca;
  };
  const Variant variants[] = {
      {"Baseline", false, false, false},
      {"Baseline+DK", true, false, false},
      {"Baseline+DK+ESAs", true, true, false},
      {"Ours", true, true, true},
  };

  auto samples = load_dataset(base.data, base.model.input_h, base.model.seed);
  auto splits = split(std::move(samples), base.split_spec());
  const std::vector<Sample>& eval_set = splits.test.empty() ? splits.train : splits.test;

  std::ostringstream csv, txt;
  csv << "variant,params";
  for (const auto& name : metric_names()) csv << "," << name;
  csv << "\n";
  txt << std::left << std::setw(20) << "variant" << std::right << std::setw(10) << "params";
  for (const auto& name : metric_names()) txt << std::setw(9) << name;
  txt << "\n";

  std::size_t prev_params = 0;
  for (const auto& variant : variants) {
    RunConfig cfg = base;
    cfg.model.use_dk = variant.dk;
    cfg.model.use_esa = variant.esa;
    cfg.model.use_lca = variant.lca;
    cfg.out = (fs::path(base.out) / variant.name).string();

    LdnetModel model(cfg.model);
    const std::size_t n_params = model.params().parameter_count();
    std::cout << variant.name << ": " << n_params << " parameters, training...\n";
    if (n_params <= prev_params) {
      std::cerr << "[warn] parameter count did not increase for " << variant.name << "\n";
    }
    prev_params = n_params;

    Trainer trainer(model, cfg);
    trainer.run(splits.train, splits.val, cfg.out, nullptr);
    MetricsReport report = evaluate_dataset(model, eval_set, cfg.threshold);

    csv << variant.name << "," << n_params;
    txt << std::left << std::setw(20) << variant.name << std::right << std::setw(10) << n_params;
    const MetricsRow& r = report.aggregate;
    for (double v : {r.recall, r.specificity, r.precision, r.dice, r.iou_polyp, r.iou_background,
                     r.mean_iou, r.accuracy}) {
      csv << "," << std::setprecision(17) << v;
      txt << std::setw(9) << std::fixed << std::setprecision(4) << v;
      txt.unsetf(std::ios::fixed);
    }
    csv << "\n";
    txt << "\n";
  }

  fs::create_directories(base.out);
  std::ostringstream with_echo;
  std::istringstream echo(base.echo());
  std::string line;
  while (std::getline(echo, line)) with_echo << "# " << line << "\n";
  with_echo << csv.str();
  write_text(fs::path(base.out) / "ablation.csv", with_echo.str());
  write_text(fs::path(base.out) / "ablation.txt", txt.str());
  std::cout << txt.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lesion-aware dynamic-kernel segmentation"};
  app.require_subcommand(1);

  CliOverrides train_o, eval_o, predict_o, ablate_o;
  std::string use_split = "all";
  std::string image_path;

  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_common_flags(train_cmd, train_o);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common_flags(eval_cmd, eval_o);
  eval_cmd->add_option("--use-split", use_split, "all|train|val|test");

  auto* predict_cmd = app.add_subcommand("predict", "segment one image");
  add_common_flags(predict_cmd, predict_o);
  predict_cmd->add_option("--image", image_path, "input image")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "run the four-configuration ablation");
  add_common_flags(ablate_cmd, ablate_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(train_o);
    if (eval_cmd->parsed()) return cmd_eval(eval_o, use_split);
    if (predict_cmd->parsed()) return cmd_predict(predict_o, image_path);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
