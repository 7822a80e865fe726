// SPDX-License-Identifier: Apache-2.0
#include "ldseg/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "ldseg/errors.hpp"
#include "ldseg/metrics.hpp"

namespace fs = std::filesystem;

namespace ldseg {

namespace {

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Trainer::Trainer(LdnetModel& model, const RunConfig& cfg)
    : model_(model), cfg_(cfg), opt_(cfg.train.momentum, cfg.train.weight_decay) {}

void Trainer::resume_from(const Checkpoint& ckpt) {
  restore_model(ckpt, model_);
  for (const auto& [name, tensor] : ckpt.arrays) {
    if (name.rfind("opt/", 0) == 0) {
      opt_.velocity()[name.substr(4)] = tensor;
    }
  }
  start_epoch_ = ckpt.epoch;
}

double Trainer::batch_loss_and_grad(const std::vector<Sample>& batch) {
  model_.params().zero_grad();
  ad::Var total;
  for (const auto& sample : batch) {
    ForwardTrace trace = model_.forward(sample.image);
    auto loss = deep_supervision_loss(trace, sample.mask, cfg_.train.dice_smooth);
    total = total ? ad::add(total, loss) : loss;
  }
  total = ad::scale(total, 1.0 / static_cast<double>(batch.size()));
  ad::backward(total);
  return total->value[0];
}

TrainResult Trainer::run(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                         const std::string& out_dir, std::ostream* console) {
  if (train_set.empty()) throw DataError("train: empty training set");
  const auto& mc = model_.config();
  const auto& tc = cfg_.train;

  // One up-front resize to the model resolution; augmentation preserves size.
  std::vector<Sample> train;
  train.reserve(train_set.size());
  for (const auto& s : train_set) train.push_back(resize_sample(s, mc.input_h, mc.input_w));

  TrainResult result;
  const std::string echo = cfg_.echo();
  std::ofstream log_file;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    log_file.open(fs::path(out_dir) / "train_log.csv");
    std::istringstream echo_in(echo);
    std::string line;
    while (std::getline(echo_in, line)) log_file << "# " << line << "\n";
    log_file << "epoch,lr,mean_loss,val_dice\n";
  }

  auto save = [&](const std::string& name, int completed_epochs) -> std::string {
    if (out_dir.empty()) return "";
    Checkpoint ckpt = snapshot(model_, echo, completed_epochs);
    for (const auto& [pname, vel] : opt_.velocity()) ckpt.arrays["opt/" + pname] = vel;
    const std::string path = (fs::path(out_dir) / name).string();
    save_checkpoint(path, ckpt);
    return path;
  };

  for (int epoch = start_epoch_; epoch < tc.epochs; ++epoch) {
    const double lr = poly_lr(epoch, tc);

    std::vector<int> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle_rng(Rng::mix(mc.seed, 0xe90c4ULL + static_cast<std::uint64_t>(epoch)));
    for (int i = static_cast<int>(order.size()) - 1; i >= 1; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    }

    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      std::vector<Sample> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + tc.batch_size); ++k) {
        const Sample& s = train[order[k]];
        if (tc.augment) {
          Rng aug_rng(Rng::mix(Rng::mix(mc.seed, 0xa96ULL + static_cast<std::uint64_t>(epoch)),
                               fnv1a(s.id)));
          batch.push_back(augment(s, aug_rng));
        } else {
          batch.push_back(s);
        }
      }
      loss_sum += batch_loss_and_grad(batch);
      opt_.step(model_.params(), lr);
      ++batches;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.mean_loss = loss_sum / batches;
    if (!val_set.empty()) {
      entry.has_val = true;
      entry.val_dice = evaluate_dataset(model_, val_set, cfg_.threshold).aggregate.dice;
      if (result.best_epoch < 0 || entry.val_dice > result.best_val_dice) {
        result.best_val_dice = entry.val_dice;
        result.best_epoch = epoch;
        result.best_checkpoint = save("best.ckpt", epoch + 1);
      }
    }
    result.log.push_back(entry);

    if (log_file) {
      log_file << epoch << "," << fmt17(lr) << "," << fmt17(entry.mean_loss) << ","
               << (entry.has_val ? fmt17(entry.val_dice) : std::string()) << "\n";
      log_file.flush();
    }
    if (console) {
      (*console) << "epoch " << epoch << ": lr=" << fmt17(lr)
                 << " loss=" << fmt17(entry.mean_loss);
      if (entry.has_val) (*console) << " val_dice=" << fmt17(entry.val_dice);
      (*console) << "\n";
    }
  }

  result.final_checkpoint = save("final.ckpt", tc.epochs);
  if (result.best_epoch < 0) result.best_checkpoint = result.final_checkpoint;
  result.final_train_dice =
      evaluate_dataset(model_, train_set, cfg_.threshold).aggregate.dice;
  return result;
}

}  // namespace ldseg
