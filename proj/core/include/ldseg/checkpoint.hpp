// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ldseg/seg_core.hpp"
#include "ldseg/tensor.hpp"

namespace ldseg {

// Versioned binary container: magic + version, flat-text config echo, epoch
// counter, and named double arrays (model parameters plus optional "opt/"
// optimizer state).
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string config_echo;
  int epoch = 0;
  std::map<std::string, Tensor> arrays;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);  // validates magic and version

// Snapshot of the model parameters (names as in the ParamStore).
Checkpoint snapshot(const LdnetModel& model, const std::string& config_echo, int epoch);

// Copies arrays into the model parameters; every parameter must be present
// with an identical shape, and unknown non-"opt/" arrays are rejected. The
// error message lists every disagreement.
void restore_model(const Checkpoint& ckpt, LdnetModel& model);

}  // namespace ldseg
