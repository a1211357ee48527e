#include "sbrl/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cstdlib>
#include <sstream>

#include "sbrl/errors.hpp"

namespace sbrl {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

nlohmann::json certificate_json(const SafetyCertificate& cert) {
  return nlohmann::json{
      {"eta", cert.eta},
      {"bound", cert.bound},
      {"valid", cert.valid},
      {"invalid_reason", cert.invalid_reason},
      {"condition_stats",
       {{"init_barrier_mean", cert.stats.init_mean},
        {"init_barrier_max", cert.stats.init_max},
        {"unsafe_barrier_min", cert.stats.unsafe_min},
        {"unsafe_barrier_mean", cert.stats.unsafe_mean},
        {"lie_mean", cert.stats.lie_mean},
        {"lie_max", cert.stats.lie_max},
        {"eta_raw_max", cert.stats.eta_raw_max},
        {"eta_raw_mean", cert.stats.eta_raw_mean}}},
      {"delta", cert.delta},
      {"mc_crosscheck",
       {{"sup_exceed_freq", cert.mc.sup_exceed_freq},
        {"standard_error", cert.mc.standard_error},
        {"samples", cert.mc.samples},
        {"threshold", cert.mc.threshold},
        {"consistent", cert.mc.consistent}}}};
}

nlohmann::json report_json(const TrainConfig& config, const RunReport& report) {
  nlohmann::json metrics = nlohmann::json::array();
  for (const IterationMetrics& m : report.metrics)
    metrics.push_back({{"gen_nll", m.gen_nll},
                       {"barrier_init", m.barrier_init},
                       {"barrier_unsafe", m.barrier_unsafe},
                       {"barrier_lie", m.barrier_lie},
                       {"barrier_total", m.barrier_total},
                       {"j_hat", m.j_hat},
                       {"model_gap", m.model_gap},
                       {"excluded", m.excluded}});
  return nlohmann::json{{"environment", config.env_name},
                        {"seed", config.seed},
                        {"iterations", report.metrics.size()},
                        {"metrics", std::move(metrics)},
                        {"certificate", certificate_json(report.certificate)},
                        {"safe_rate", report.safe_rate},
                        {"mean_return", report.mean_return},
                        {"barrier_converged", report.barrier_converged}};
}

std::string metrics_csv(const std::vector<IterationMetrics>& metrics) {
  std::string out =
      "iter,gen_nll,barrier_init,barrier_unsafe,barrier_lie,barrier_total,"
      "j_hat,model_gap,excluded\n";
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const IterationMetrics& m = metrics[i];
    out += std::to_string(i) + "," + fmt(m.gen_nll) + "," + fmt(m.barrier_init) + "," +
           fmt(m.barrier_unsafe) + "," + fmt(m.barrier_lie) + "," + fmt(m.barrier_total) +
           "," + fmt(m.j_hat) + "," + fmt(m.model_gap) + "," + std::to_string(m.excluded) +
           "\n";
  }
  return out;
}

void write_metric_series(const std::filesystem::path& dir,
                         const std::vector<IterationMetrics>& metrics) {
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, double IterationMetrics::*>> series = {
      {"gen_nll", &IterationMetrics::gen_nll},
      {"barrier_init", &IterationMetrics::barrier_init},
      {"barrier_unsafe", &IterationMetrics::barrier_unsafe},
      {"barrier_lie", &IterationMetrics::barrier_lie},
      {"barrier_total", &IterationMetrics::barrier_total},
      {"j_hat", &IterationMetrics::j_hat},
      {"model_gap", &IterationMetrics::model_gap}};
  for (const auto& [name, member] : series) {
    std::string csv = "iter," + name + "\n";
    for (std::size_t i = 0; i < metrics.size(); ++i)
      csv += std::to_string(i) + "," + fmt(metrics[i].*member) + "\n";
    std::ofstream file(dir / (name + ".csv"), std::ios::trunc);
    if (!file) throw ContractError("cannot write metric series under " + dir.string());
    file << csv;
  }
}

std::vector<IterationMetrics> parse_metrics_csv(const std::string& text) {
  std::vector<IterationMetrics> metrics;
  std::istringstream stream(text);
  std::string line;
  bool header = true;
  while (std::getline(stream, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    IterationMetrics m;
    std::istringstream row(line);
    std::string field;
    auto next = [&row, &field, &line]() {
      if (!std::getline(row, field, ','))
        throw ParseError("short metrics row: " + line, 0);
      return std::strtod(field.c_str(), nullptr);
    };
    next();  // iter
    m.gen_nll = next();
    m.barrier_init = next();
    m.barrier_unsafe = next();
    m.barrier_lie = next();
    m.barrier_total = next();
    m.j_hat = next();
    m.model_gap = next();
    m.excluded = static_cast<int>(next());
    metrics.push_back(m);
  }
  return metrics;
}

}  // namespace sbrl
