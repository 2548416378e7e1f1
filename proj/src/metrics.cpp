#include "agest/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "agest/margin.hpp"

namespace agest {

double mae(const std::vector<double>& predictions, const std::vector<double>& labels) {
  if (predictions.empty() || predictions.size() != labels.size())
    throw std::invalid_argument("mae: size mismatch or empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    acc += std::abs(predictions[i] - labels[i]);
  return acc / double(predictions.size());
}

double epsilon_error(const std::vector<double>& predictions, const std::vector<double>& labels,
                     const std::vector<double>& label_std) {
  if (predictions.empty() || predictions.size() != labels.size() ||
      predictions.size() != label_std.size())
    throw std::invalid_argument("epsilon_error: size mismatch or empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double s = label_std[i];
    if (s < 0.0) throw std::invalid_argument("epsilon_error: negative sigma");
    const double d = predictions[i] - labels[i];
    if (s == 0.0) {
      acc += (d == 0.0) ? 0.0 : 1.0;
    } else {
      acc += 1.0 - std::exp(-(d * d) / (2.0 * s * s));
    }
  }
  return acc / double(predictions.size());
}

double aar_value(double mae_value, double sigma) {
  return std::max(0.0, 7.0 - mae_value) + std::max(0.0, 3.0 - sigma);
}

MetricsReport evaluate_metrics(const std::vector<double>& predictions,
                               const std::vector<int>& label_ages,
                               const std::vector<double>* label_std) {
  if (predictions.empty() || predictions.size() != label_ages.size())
    throw std::invalid_argument("evaluate_metrics: size mismatch or empty input");

  MetricsReport report;
  report.samples = predictions.size();

  std::vector<double> group_abs(kNumGroups, 0.0);
  std::vector<std::size_t> group_n(kNumGroups, 0);
  double total_abs = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int g = group_of_age(label_ages[i]);
    const double e = std::abs(predictions[i] - double(label_ages[i]));
    group_abs[std::size_t(g)] += e;
    group_n[std::size_t(g)] += 1;
    total_abs += e;
  }
  report.mae = total_abs / double(predictions.size());

  double var_acc = 0.0;
  std::size_t nonempty = 0;
  for (int g = 0; g < kNumGroups; ++g) {
    GroupMetric gm;
    gm.group = g;
    gm.count = group_n[std::size_t(g)];
    if (gm.count > 0) {
      gm.mae = group_abs[std::size_t(g)] / double(gm.count);
      const double d = *gm.mae - report.mae;
      var_acc += d * d;
      nonempty += 1;
    }
    report.groups.push_back(gm);
  }
  report.sigma = std::sqrt(var_acc / double(nonempty));
  report.aar = aar_value(report.mae, report.sigma);

  if (label_std != nullptr)
    report.epsilon = epsilon_error(predictions,
                                   std::vector<double>(label_ages.begin(), label_ages.end()),
                                   *label_std);
  return report;
}

bool operator==(const GroupMetric& a, const GroupMetric& b) {
  return a.group == b.group && a.count == b.count && a.mae == b.mae;
}

bool operator==(const MetricsReport& a, const MetricsReport& b) {
  return a.mae == b.mae && a.sigma == b.sigma && a.aar == b.aar && a.epsilon == b.epsilon &&
         a.groups == b.groups && a.samples == b.samples;
}

}  // namespace agest
