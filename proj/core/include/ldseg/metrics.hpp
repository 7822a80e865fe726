// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ldseg/data.hpp"
#include "ldseg/seg_core.hpp"
#include "ldseg/tensor.hpp"

namespace ldseg {

struct ConfusionCounts {
  long long tp = 0;
  long long fp = 0;
  long long tn = 0;
  long long fn = 0;
  long long total() const { return tp + fp + tn + fn; }
};

// The eight evaluation metrics, all in [0,1]. Column order matches the
// reporting convention: Rec, Spec, Prec, Dice, IoUp, IoUb, mIoU, Acc.
struct MetricsRow {
  double recall = 0;
  double specificity = 0;
  double precision = 0;
  double dice = 0;
  double iou_polyp = 0;
  double iou_background = 0;
  double mean_iou = 0;
  double accuracy = 0;
};

struct MetricsReport {
  std::vector<std::pair<std::string, MetricsRow>> per_image;
  MetricsRow aggregate;  // unweighted mean of per-image rows
};

// mask = [prob >= threshold]
Tensor binarize(const Tensor& prob, double threshold);

// Pixelwise counts; inputs must be strictly binary and same shape.
ConfusionCounts confusion_counts(const Tensor& pred, const Tensor& gt);

// Rec=TP/(TP+FN), Spec=TN/(TN+FP), Prec=TP/(TP+FP), Dice=2TP/(2TP+FP+FN),
// IoUp=TP/(TP+FP+FN), IoUb=TN/(TN+FP+FN), mIoU=(IoUp+IoUb)/2,
// Acc=(TP+TN)/total. 0/0 resolves to 1 (empty-vs-empty agreement).
MetricsRow compute_metrics(const ConfusionCounts& c);

// Runs the model on every sample (image resized to the model input size),
// bilinearly upsamples the P_1 probability map back to ground-truth
// resolution, thresholds, and aggregates by unweighted per-image mean.
MetricsReport evaluate_dataset(const LdnetModel& model, const std::vector<Sample>& samples,
                               double threshold);

// Sigmoid(P_1) resized to the requested resolution.
Tensor predict_probability(const LdnetModel& model, const Tensor& image, int out_h, int out_w);

std::vector<std::string> metric_names();
std::string report_csv(const MetricsReport& report, const std::string& config_echo);
std::string report_text(const MetricsReport& report);

}  // namespace ldseg
