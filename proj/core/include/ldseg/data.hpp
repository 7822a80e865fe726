// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ldseg/config.hpp"
#include "ldseg/rng.hpp"
#include "ldseg/tensor.hpp"

namespace ldseg {

struct Sample {
  Tensor image;  // 3xHxW in [0,1]
  Tensor mask;   // 1xHxW strictly binary
  std::string id;
};

struct SplitResult {
  std::vector<Sample> train, val, test;
};

// Loads root/images/* and root/masks/* pairs matched by filename stem
// (extension-insensitive), sorted by id. Masks are binarized at the 0.5
// level of the 8-bit range (foreground > 127). Orphans on either side and
// empty directories are errors naming the offender.
std::vector<Sample> load_pairs(const std::string& root);

// Seeded shuffle, then contiguous partition. Counts are floor allocations
// with the remainder assigned to train; partitions are disjoint/exhaustive.
SplitResult split(std::vector<Sample> samples, const SplitSpec& spec);

struct AugmentParams {
  bool hflip = false;
  bool vflip = false;
  double angle_deg = 0.0;  // rotation in [-15, +15]
  double crop_area = 1.0;  // kept area fraction in [0.9, 1.0]
  double crop_off_x = 0.0; // window position in [0,1]
  double crop_off_y = 0.0;
};

AugmentParams draw_augment(Rng& rng);
// Applies the same geometric transform to image and mask; mask resampling is
// nearest-neighbor so it stays binary, image values stay inside [0,1].
Sample apply_augment(const Sample& sample, const AugmentParams& params);
Sample augment(const Sample& sample, Rng& rng);

// Half-pixel-center resampling. Same-size requests return the input as-is.
Tensor resize_bilinear(const Tensor& chw, int out_h, int out_w);
Tensor resize_nearest(const Tensor& chw, int out_h, int out_w);

Sample resize_sample(const Sample& sample, int out_h, int out_w);
inline Tensor downsample_gt(const Tensor& mask, int out_h, int out_w) {
  return resize_nearest(mask, out_h, out_w);
}

// Synthetic polyp-like samples: low-frequency background plus 1-2 blurred
// bright ellipses; the mask is the ellipse union. Deterministic per seed;
// every mask's foreground fraction lies in [0.02, 0.5].
std::vector<Sample> synth_generate(int n, int size, std::uint64_t seed);

// True when the data spec is "synth:N"; extracts N.
bool parse_synth_spec(const std::string& data, int& n_out);

// Loads `data` either as a synth spec or as a dataset directory.
std::vector<Sample> load_dataset(const std::string& data, int synth_size, std::uint64_t seed);

}  // namespace ldseg
