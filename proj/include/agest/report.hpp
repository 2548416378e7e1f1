#pragma once

#include <string>

#include "agest/config.hpp"
#include "agest/metrics.hpp"
#include "agest/train.hpp"

namespace agest {

Json metrics_to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const Json& j);

// Full run record: schema tag, config echo, metrics, margins, epoch log.
std::string report_to_string(const RunConfig& cfg, const TrainOutcome& out);

// Flat table: header plus one overall row and one row per group.
std::string report_to_csv(const MetricsReport& r);

// The margin-policy grid as data: every discrete state exactly once with its
// greedy action and Q-values.
std::string policy_to_string(const rl::MarginSpaces& sp, const DenseMatrix& q_table,
                             const std::vector<int>& policy);

struct ParsedReport {
  RunConfig config;
  MetricsReport metrics;
  std::array<double, 4> final_margins{};
  bool rl_ran = false;
};

// Inverse of report_to_string for the metrics/config payload.
ParsedReport parse_report(const std::string& text);

// report.json + report.csv, plus policy.json when the tuner ran. Atomic.
void emit_report(const RunConfig& cfg, const TrainOutcome& out, const std::string& out_dir);

// Human-readable rendering of a report file for the terminal.
std::string render_report_text(const std::string& report_json_text);

}  // namespace agest
