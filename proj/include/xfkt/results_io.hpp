#pragma once

// On-disk layout of a run directory:
//   results.json     deterministic results document (no timings)
//   predictions.csv  one row per prediction
//   summary.md       metrics table
//   config.json      effective configuration
//   reports/         per-student report, JSON and Markdown

#include <filesystem>
#include <string>

#include <json.hpp>

#include "xfkt/evaluation.hpp"

namespace xfkt {

nlohmann::json result_to_json(const ExperimentResult& result);
// Throws CorruptResults on any structural problem.
ExperimentResult result_from_json(const nlohmann::json& doc);

std::string predictions_csv(const ExperimentResult& result);
std::string summary_markdown(const ExperimentResult& result);

// `effective_config` is written verbatim to config.json.
void write_results_dir(const ExperimentResult& result, const std::filesystem::path& dir,
                       const nlohmann::json& effective_config);

// Reads results.json (reports are not loaded). Missing file -> Io,
// unreadable document -> CorruptResults naming the path.
ExperimentResult read_results(const std::filesystem::path& dir);

}  // namespace xfkt
