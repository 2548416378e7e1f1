#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace agest {

// Mean absolute error; sizes must match and be nonzero.
double mae(const std::vector<double>& predictions, const std::vector<double>& labels);

// Mean over samples of 1 - exp(-(pred - label)^2 / (2 sigma_i^2)). A sample
// with sigma_i = 0 contributes 0 if the prediction matches the label exactly
// and 1 otherwise.
double epsilon_error(const std::vector<double>& predictions, const std::vector<double>& labels,
                     const std::vector<double>& label_std);

// max(0, 7 - mae) + max(0, 3 - sigma).
double aar_value(double mae_value, double sigma);

struct GroupMetric {
  int group = 0;
  std::size_t count = 0;
  std::optional<double> mae;  // empty for groups with no samples
};

struct MetricsReport {
  double mae = 0.0;
  double sigma = 0.0;  // spread of per-group MAEs around the overall MAE
  double aar = 0.0;
  std::optional<double> epsilon;  // present when label_std was supplied
  std::vector<GroupMetric> groups;  // one entry per age group, in group order
  std::size_t samples = 0;
};

bool operator==(const GroupMetric& a, const GroupMetric& b);
bool operator==(const MetricsReport& a, const MetricsReport& b);

// Groups come from group_of_age of each label; sigma averages over non-empty
// groups only. Throws std::invalid_argument on an empty batch.
MetricsReport evaluate_metrics(const std::vector<double>& predictions,
                               const std::vector<int>& label_ages,
                               const std::vector<double>* label_std = nullptr);

}  // namespace agest
