#include "agest/report.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "agest/margin.hpp"

namespace agest {

namespace {
constexpr const char* kReportSchema = "agest.report/1";
constexpr const char* kPolicySchema = "agest.policy/1";

// Shortest round-trip decimal, same as the JSON writer produces.
std::string num(double v) {
  Json j = v;
  return j.dump();
}
}  // namespace

Json metrics_to_json(const MetricsReport& r) {
  Json groups = Json::array();
  for (const GroupMetric& g : r.groups) {
    Json item = Json{{"group", g.group},
                     {"name", group_name(g.group)},
                     {"count", g.count},
                     {"mae", nullptr}};
    if (g.mae.has_value()) item["mae"] = *g.mae;
    groups.push_back(item);
  }
  Json j = Json{{"samples", r.samples}, {"mae", r.mae},       {"sigma", r.sigma},
                {"aar", r.aar},         {"epsilon", nullptr}, {"groups", groups}};
  if (r.epsilon.has_value()) j["epsilon"] = *r.epsilon;
  return j;
}

MetricsReport metrics_from_json(const Json& j) {
  MetricsReport r;
  r.samples = j.at("samples").get<std::size_t>();
  r.mae = j.at("mae").get<double>();
  r.sigma = j.at("sigma").get<double>();
  r.aar = j.at("aar").get<double>();
  if (!j.at("epsilon").is_null()) r.epsilon = j.at("epsilon").get<double>();
  for (const Json& item : j.at("groups")) {
    GroupMetric g;
    g.group = item.at("group").get<int>();
    g.count = item.at("count").get<std::size_t>();
    if (!item.at("mae").is_null()) g.mae = item.at("mae").get<double>();
    r.groups.push_back(g);
  }
  return r;
}

std::string report_to_string(const RunConfig& cfg, const TrainOutcome& out) {
  Json j;
  j["schema"] = kReportSchema;
  Json c;
  to_json(c, cfg);
  j["config"] = c;
  j["metrics"] = metrics_to_json(out.report);
  j["final_margins"] = out.final_margins;
  j["rl_ran"] = out.rl_ran;
  Json epochs = Json::array();
  for (const EpochLog& e : out.log) {
    epochs.push_back(Json{{"epoch", e.epoch}, {"loss", e.loss}, {"margins", e.margins}});
  }
  j["epochs"] = epochs;
  return j.dump(2) + "\n";
}

std::string report_to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "scope,count,mae,sigma,aar,epsilon\n";
  os << "overall," << r.samples << ',' << num(r.mae) << ',' << num(r.sigma) << ',' << num(r.aar)
     << ',';
  if (r.epsilon.has_value()) os << num(*r.epsilon);
  os << '\n';
  for (const GroupMetric& g : r.groups) {
    os << group_name(g.group) << ',' << g.count << ',';
    if (g.mae.has_value()) os << num(*g.mae);
    os << ",,,\n";
  }
  return os.str();
}

std::string policy_to_string(const rl::MarginSpaces& sp, const DenseMatrix& q_table,
                             const std::vector<int>& policy) {
  const int S = rl::num_states(sp);
  if (int(policy.size()) != S || q_table.rows != std::size_t(S) ||
      q_table.cols != std::size_t(rl::kNumActions)) {
    throw std::invalid_argument("policy_to_string: table shape mismatch");
  }
  Json j;
  j["schema"] = kPolicySchema;
  j["spaces"] = Json{{"margins", sp.margins},
                     {"kappa", sp.kappa},
                     {"dev_lo", sp.dev_lo},
                     {"dev_hi", sp.dev_hi},
                     {"dev_buckets", sp.dev_buckets}};
  Json states = Json::array();
  for (int s = 0; s < S; ++s) {
    const rl::MdpState st = rl::state_from_index(s, sp);
    std::vector<double> q(std::size_t(rl::kNumActions));
    for (int a = 0; a < rl::kNumActions; ++a) q[std::size_t(a)] = q_table.at(std::size_t(s), std::size_t(a));
    states.push_back(Json{{"index", s},
                          {"group", st.group},
                          {"name", group_name(st.group)},
                          {"d_bucket", st.d_bucket},
                          {"m_bucket", st.m_bucket},
                          {"margin", sp.margins[std::size_t(st.m_bucket)]},
                          {"action", policy[std::size_t(s)]},
                          {"delta", rl::action_delta(policy[std::size_t(s)])},
                          {"q", q}});
  }
  j["states"] = states;
  return j.dump(2) + "\n";
}

ParsedReport parse_report(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("report parse error: ") + e.what());
  }
  if (!j.contains("schema") || j.at("schema").get<std::string>() != kReportSchema) {
    throw std::runtime_error("report: unsupported schema");
  }
  ParsedReport r;
  from_json(j.at("config"), r.config);
  r.metrics = metrics_from_json(j.at("metrics"));
  j.at("final_margins").get_to(r.final_margins);
  r.rl_ran = j.at("rl_ran").get<bool>();
  return r;
}

void emit_report(const RunConfig& cfg, const TrainOutcome& out, const std::string& out_dir) {
  write_file_atomic(out_dir + "/report.json", report_to_string(cfg, out));
  write_file_atomic(out_dir + "/report.csv", report_to_csv(out.report));
  if (out.rl_ran) {
    write_file_atomic(out_dir + "/policy.json", policy_to_string(out.spaces, out.q_table, out.policy));
  }
}

std::string render_report_text(const std::string& report_json_text) {
  Json j;
  try {
    j = Json::parse(report_json_text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("report parse error: ") + e.what());
  }
  if (!j.contains("schema") || j.at("schema").get<std::string>() != kReportSchema) {
    throw std::runtime_error("report: unsupported schema");
  }
  const MetricsReport m = metrics_from_json(j.at("metrics"));
  std::ostringstream os;
  os << "samples " << m.samples << "\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "mae %.4f  sigma %.4f  aar %.4f", m.mae, m.sigma, m.aar);
  os << buf;
  if (m.epsilon.has_value()) {
    std::snprintf(buf, sizeof buf, "  epsilon %.4f", *m.epsilon);
    os << buf;
  }
  os << "\nper-group mae:\n";
  for (const GroupMetric& g : m.groups) {
    if (g.mae.has_value()) {
      std::snprintf(buf, sizeof buf, "  %-9s n=%-5zu %.4f", group_name(g.group), g.count, *g.mae);
    } else {
      std::snprintf(buf, sizeof buf, "  %-9s n=%-5zu -", group_name(g.group), g.count);
    }
    os << buf << '\n';
  }
  const auto margins = j.at("final_margins").get<std::array<double, 4>>();
  os << "margins";
  for (double v : margins) os << ' ' << v;
  os << "\n";
  if (j.at("rl_ran").get<bool>()) os << "margin tuner: ran\n";
  return os.str();
}

}  // namespace agest
