#pragma once

#include <filesystem>
#include <string>

#include "sbrl/orchestrator.hpp"

namespace sbrl {

struct ExportOptions {
  enum class Format { csv, json } format = Format::csv;
  int pairs = 5;  // paired real/synthetic trajectory overlays
  std::uint64_t seed = 0;
};

// Reads a finished run directory (checkpoint_final.ckpt + metrics.csv) and
// writes plot-ready data under <run>/export: per-metric loss curves, paired
// real/synthetic trajectory overlays, and barrier-value-along-trajectory
// series for both. CSV emits one file per series; JSON emits a single
// document.
void export_run(const std::filesystem::path& run_dir, const ExportOptions& options);

}  // namespace sbrl
