#pragma once

// The cognition stage: for each shot j in time order, a knowledge state
// analysis call (fed shots 1..j plus earlier estimates and interpretations)
// followed by a trajectory interpretation call (fed the new estimate); then
// one performance prediction call for the target.
//
// Unparseable answers are re-requested once. A mastery answer that still
// fails keeps the previous estimate for the unmatched concepts (flagged); a
// prediction that still fails becomes a seeded random bit (source Fallback).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xfkt/llm_client.hpp"
#include "xfkt/prompting.hpp"
#include "xfkt/types.hpp"

namespace xfkt {

struct GenerationSettings {
    GenerationParams ksa{0.0, 256, "default", 0};
    GenerationParams lti{0.0, 256, "default", 0};
    GenerationParams pp{0.0, 16, "default", 0};
    GenerationParams lpe{0.0, 512, "default", 0};

    void set_model(const std::string& model_id);
};

struct CognitionOptions {
    int retries = 1;  // re-requests after an unparseable answer
    GenerationSettings generation;
};

struct TranscriptRef {
    PromptKind kind = PromptKind::KSA;
    std::size_t shot_index = 0;  // 1-based; 0 for PP / LPE
    int attempt = 0;
    std::string digest;
    bool parsed = true;
};

struct TraceState {
    // Cumulative estimate after each shot: states[j] covers every concept of
    // shots 1..j+1 that has ever parsed (or been carried forward).
    std::vector<KnowledgeState> states;
    // Per-shot estimate for the concepts of that shot (the k_j fed back into
    // later prompts).
    std::vector<KnowledgeState> step_states;
    std::vector<Interpretation> interps;
    std::vector<bool> ksa_degraded;
    std::vector<TranscriptRef> transcripts;
};

struct MasteryParse {
    KnowledgeState state;
    std::vector<ConceptId> unmatched;

    bool ok() const noexcept { return unmatched.empty(); }
};

// Lines of the form "<concept>: <label>" ("=" also accepted; list bullets,
// quotes and a trailing "(name)" on the concept are tolerated). Concept ids and
// labels match case-insensitively; a concept given two different labels is
// unmatched.
MasteryParse parse_mastery(std::string_view text, std::span<const ConceptId> expected_concepts);

// Succeeds iff exactly one standalone "0" or "1" token occurs.
std::optional<bool> parse_binary(std::string_view text);

TraceState analyze_shots(Provider& provider, std::span<const InteractionRecord> shots, const PromptBuilder& prompts,
                         const CognitionOptions& options = {});

struct PredictionOutcome {
    Prediction prediction;
    std::vector<TranscriptRef> transcripts;
};

PredictionOutcome predict_performance(Provider& provider, const TraceState& trace,
                                      std::span<const InteractionRecord> shots, const PredictionTarget& target,
                                      const PromptBuilder& prompts, std::uint64_t rng_seed,
                                      const CognitionOptions& options = {});

// The fallback bit used after the retry budget is spent.
bool fallback_bit(std::uint64_t rng_seed);

}  // namespace xfkt
