// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace ldseg {

// Network topology and ablation switches.
struct ModelConfig {
  std::array<int, 5> encoder_channels{16, 32, 64, 128, 256};
  int input_h = 64;
  int input_w = 64;
  int kernel_size = 1;  // K: spatial extent of the dynamic kernel
  int heads = 8;        // n: attention heads
  std::set<int> esa_stages{3, 4, 5};
  std::set<int> lca_stages{2, 3, 4};
  bool use_dk = true;
  bool use_esa = true;
  bool use_lca = true;
  bool lca_softmax = false;   // literal single-token softmax instead of sigmoid gate
  bool lesion_norm = false;   // normalize lesion descriptor by total prediction mass
  std::uint64_t seed = 0;

  static constexpr int kUnifiedChannels = 64;

  int decoder_channels(int stage) const { return encoder_channels[stage - 1]; }
  void validate() const;  // throws ConfigError naming the offending field
};

// Optimization recipe.
struct TrainConfig {
  double lr_init = 0.001;
  double power = 0.9;
  int epochs = 20;       // desk-scale default; paper uses 80
  int batch_size = 4;    // desk-scale default; paper uses 8
  double momentum = 0.9;
  double weight_decay = 1e-5;
  double dice_smooth = 1.0;
  bool augment = true;

  void validate() const;
};

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Fully merged run configuration used by the CLI commands.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  double split_train = 0.8;
  double split_val = 0.1;
  double split_test = 0.1;
  std::string data;        // directory path or "synth:N"
  std::string out = "out";
  std::string checkpoint;  // eval/predict input, train resume source
  double threshold = 0.5;

  // Applies one key=value pair; unknown keys are rejected.
  void apply_kv(const std::string& key, const std::string& value);
  // Canonical flat key=value echo, deterministic ordering.
  std::string echo() const;
  void validate() const;

  SplitSpec split_spec() const {
    return SplitSpec{split_train, split_val, split_test, model.seed};
  }

  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);
};

// Parses flat "key = value" lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_flat_kv(const std::string& text);

}  // namespace ldseg
