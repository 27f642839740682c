#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "xfkt/cognition.hpp"
#include "xfkt/llm_client.hpp"
#include "xfkt/prompting.hpp"
#include "xfkt/types.hpp"

namespace xfkt {

// One explanation call; an empty completion is re-requested once, then
// replaced by a placeholder flagged degraded. The prediction's source is not
// passed to the prompt.
Explanation explain_prediction(Provider& provider, std::span<const InteractionRecord> shots, const TraceState& trace,
                               const PredictionTarget& target, const Prediction& prediction,
                               const PromptBuilder& prompts, const CognitionOptions& options = {});

struct ShotRow {
    std::size_t index = 0;  // 1-based
    InteractionRecord record;
    KnowledgeState estimate;
    Interpretation interpretation;
    bool ksa_degraded = false;
};

struct TargetRow {
    InteractionRecord record;  // ground truth included; reports are for scoring
    Prediction prediction;
    std::optional<Explanation> explanation;
};

struct StudentReport {
    StudentId student;
    std::size_t repeat = 0;
    std::vector<ShotRow> shots;
    std::vector<std::pair<ConceptId, MasteryLevel>> final_state;  // sorted by concept id
    std::vector<TargetRow> targets;
    bool has_explanations = false;
};

// `explanations` is either empty (explanations disabled) or parallel to
// `predictions`.
StudentReport assemble_student_report(const StudentId& student, std::span<const InteractionRecord> shots,
                                      const TraceState& trace,
                                      std::span<const std::pair<PredictionTarget, Prediction>> predictions,
                                      std::span<const Explanation> explanations, std::size_t repeat = 0);

nlohmann::json report_to_json(const StudentReport& report);
StudentReport report_from_json(const nlohmann::json& doc);
std::string report_to_markdown(const StudentReport& report);

}  // namespace xfkt
