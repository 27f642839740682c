#pragma once

// Non-LLM baselines evaluated on exactly the targets an LLM run with the same
// configuration would see (same student samples, splits and shots).
//   bkt        fitted on every student's pre-split pool, predicts each target
//              from the student's whole pool
//   bkt-shots  fitted per repeat on the selected shots only, predicts from
//              the shots
//   majority   global majority label of every pre-split pool

#include <vector>

#include <json.hpp>

#include "xfkt/bkt.hpp"
#include "xfkt/evaluation.hpp"

namespace xfkt {

enum class BaselineMethod { Bkt, BktShotsOnly, Majority };

std::string_view to_string(BaselineMethod method);  // "bkt", "bkt-shots", "majority"
BaselineMethod parse_baseline_method(std::string_view text);

struct BaselineOutput {
    ExperimentResult result;
    // Full-train BKT: one model. Shots-only: one model per repeat.
    std::vector<BktModel> models;
};

BaselineOutput run_baseline(const ExperimentConfig& config, BaselineMethod method, const EmOptions& em = {});

// Compares the fields that decide which targets are evaluated. Throws
// SeedMismatch naming the first differing field.
void check_comparable(const nlohmann::json& reference_config, const nlohmann::json& config);

}  // namespace xfkt
