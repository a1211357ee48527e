#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbrl/barrier.hpp"
#include "sbrl/orchestrator.hpp"

namespace sbrl {

nlohmann::json certificate_json(const SafetyCertificate& cert);
nlohmann::json report_json(const TrainConfig& config, const RunReport& report);

// Header row plus one row per completed iteration.
std::string metrics_csv(const std::vector<IterationMetrics>& metrics);
std::vector<IterationMetrics> parse_metrics_csv(const std::string& text);

// One "iter,<name>" file per metric under dir.
void write_metric_series(const std::filesystem::path& dir,
                         const std::vector<IterationMetrics>& metrics);

}  // namespace sbrl
