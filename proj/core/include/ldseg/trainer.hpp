// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ldseg/checkpoint.hpp"
#include "ldseg/config.hpp"
#include "ldseg/data.hpp"
#include "ldseg/objective.hpp"
#include "ldseg/seg_core.hpp"

namespace ldseg {

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double mean_loss = 0;
  double val_dice = 0;
  bool has_val = false;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_val_dice = 0;
  int best_epoch = -1;
  double final_train_dice = 0;
  std::string best_checkpoint;
  std::string final_checkpoint;
};

// Deep-supervision training loop with the SGD/poly-LR recipe. Epoch order and
// augmentation draws are pure functions of (seed, epoch, sample id), so a run
// resumed from the final checkpoint continues exactly like an uninterrupted
// one.
class Trainer {
 public:
  Trainer(LdnetModel& model, const RunConfig& cfg);

  // Restores parameters, optimizer state and the epoch counter.
  void resume_from(const Checkpoint& ckpt);

  // Trains on `train_set`, tracks best validation Dice on `val_set` (may be
  // empty), writes train_log.csv plus best/final checkpoints under `out_dir`
  // (unless empty), and optionally echoes progress to `console`.
  TrainResult run(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::string& out_dir, std::ostream* console);

  // Mean deep-supervision loss over one batch; exposed for determinism tests.
  double batch_loss_and_grad(const std::vector<Sample>& batch);

  SgdOptimizer& optimizer() { return opt_; }
  int start_epoch() const { return start_epoch_; }

 private:
  LdnetModel& model_;
  RunConfig cfg_;
  SgdOptimizer opt_;
  int start_epoch_ = 0;
};

std::uint64_t fnv1a(const std::string& s);

}  // namespace ldseg
