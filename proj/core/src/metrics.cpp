// SPDX-License-Identifier: Apache-2.0
#include "ldseg/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "ldseg/errors.hpp"

namespace ldseg {

namespace {

double safe_ratio(double num, double den) { return den == 0.0 ? 1.0 : num / den; }

std::vector<double> row_values(const MetricsRow& r) {
  return {r.recall, r.specificity, r.precision, r.dice,
          r.iou_polyp, r.iou_background, r.mean_iou, r.accuracy};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

Tensor binarize(const Tensor& prob, double threshold) {
  Tensor out = prob;
  for (double& v : out.vec()) v = (v >= threshold) ? 1.0 : 0.0;
  return out;
}

ConfusionCounts confusion_counts(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt)) {
    throw ShapeError("confusion_counts: " + pred.shape_str() + " vs " + gt.shape_str());
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double p = pred[i], y = gt[i];
    if ((p != 0.0 && p != 1.0) || (y != 0.0 && y != 1.0)) {
      throw DataError("confusion_counts: non-binary input at index " + std::to_string(i));
    }
    if (p == 1.0 && y == 1.0) ++c.tp;
    else if (p == 1.0 && y == 0.0) ++c.fp;
    else if (p == 0.0 && y == 1.0) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricsRow compute_metrics(const ConfusionCounts& c) {
  if (c.total() <= 0) throw DataError("compute_metrics: empty counts");
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  MetricsRow r;
  r.recall = safe_ratio(tp, tp + fn);
  r.specificity = safe_ratio(tn, tn + fp);
  r.precision = safe_ratio(tp, tp + fp);
  r.dice = safe_ratio(2.0 * tp, 2.0 * tp + fp + fn);
  r.iou_polyp = safe_ratio(tp, tp + fp + fn);
  r.iou_background = safe_ratio(tn, tn + fp + fn);
  r.mean_iou = 0.5 * (r.iou_polyp + r.iou_background);
  r.accuracy = (tp + tn) / static_cast<double>(c.total());
  return r;
}

Tensor predict_probability(const LdnetModel& model, const Tensor& image, int out_h, int out_w) {
  Tensor resized = resize_bilinear(image, model.config().input_h, model.config().input_w);
  ForwardTrace trace = model.forward(resized);
  Tensor prob = trace.final_prediction().probabilities();
  return resize_bilinear(prob, out_h, out_w);
}

MetricsReport evaluate_dataset(const LdnetModel& model, const std::vector<Sample>& samples,
                               double threshold) {
  if (samples.empty()) throw DataError("evaluate_dataset: empty dataset");
  MetricsReport report;
  MetricsRow sum;
  for (const auto& sample : samples) {
    if (sample.image.dim(1) != sample.mask.dim(1) || sample.image.dim(2) != sample.mask.dim(2)) {
      throw DataError("evaluate_dataset: image/mask size mismatch for '" + sample.id + "'");
    }
    Tensor prob = predict_probability(model, sample.image, sample.mask.dim(1), sample.mask.dim(2));
    Tensor pred = binarize(prob, threshold);
    MetricsRow row = compute_metrics(confusion_counts(pred, sample.mask));
    report.per_image.emplace_back(sample.id, row);
    sum.recall += row.recall;
    sum.specificity += row.specificity;
    sum.precision += row.precision;
    sum.dice += row.dice;
    sum.iou_polyp += row.iou_polyp;
    sum.iou_background += row.iou_background;
    sum.mean_iou += row.mean_iou;
    sum.accuracy += row.accuracy;
  }
  const double n = static_cast<double>(report.per_image.size());
  report.aggregate = MetricsRow{sum.recall / n,       sum.specificity / n, sum.precision / n,
                                sum.dice / n,         sum.iou_polyp / n,   sum.iou_background / n,
                                sum.mean_iou / n,     sum.accuracy / n};
  return report;
}

std::vector<std::string> metric_names() {
  return {"Rec", "Spec", "Prec", "Dice", "IoUp", "IoUb", "mIoU", "Acc"};
}

std::string report_csv(const MetricsReport& report, const std::string& config_echo) {
  std::ostringstream os;
  if (!config_echo.empty()) {
    std::istringstream echo(config_echo);
    std::string line;
    while (std::getline(echo, line)) os << "# " << line << "\n";
  }
  os << "id";
  for (const auto& name : metric_names()) os << "," << name;
  os << "\n";
  for (const auto& [id, row] : report.per_image) {
    os << id;
    for (double v : row_values(row)) os << "," << fmt(v);
    os << "\n";
  }
  os << "aggregate";
  for (double v : row_values(report.aggregate)) os << "," << fmt(v);
  os << "\n";
  return os.str();
}

std::string report_text(const MetricsReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "image";
  for (const auto& name : metric_names()) os << std::right << std::setw(9) << name;
  os << "\n";
  auto emit = [&os](const std::string& id, const MetricsRow& row) {
    os << std::left << std::setw(20) << id;
    for (double v : row_values(row)) {
      os << std::right << std::setw(9) << std::fixed << std::setprecision(4) << v;
    }
    os << "\n";
  };
  for (const auto& [id, row] : report.per_image) emit(id, row);
  emit("aggregate", report.aggregate);
  return os.str();
}

}  // namespace ldseg
