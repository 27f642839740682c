#pragma once

// Prompt construction for the four stages of the tracing chain:
//   KSA  knowledge state analysis, one call per shot
//   LTI  learning trajectory interpretation, one call per shot
//   PP   performance prediction on the target exercise
//   LPE  learner proficiency explanation of that prediction
// Templates are plain text with `{{slot}}` placeholders. Record blocks only
// carry the fields the active ModeView exposes, and the target block never
// carries the ground-truth label.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xfkt/types.hpp"

namespace xfkt {

enum class PromptKind { KSA, PP, LTI, LPE };

inline constexpr std::array<PromptKind, 4> kAllPromptKinds{PromptKind::KSA, PromptKind::PP, PromptKind::LTI,
                                                          PromptKind::LPE};

std::string_view to_string(PromptKind kind);  // "ksa", "pp", "lti", "lpe"
PromptKind parse_prompt_kind(std::string_view text);

struct RenderedPrompt {
    PromptKind template_id = PromptKind::KSA;
    std::string text;
    std::string digest;  // hex SHA-256 of text
};

RenderedPrompt make_prompt(PromptKind kind, std::string text);

// Replaces every `{{name}}` in `body`. Throws InvalidArgument for a slot not
// in `slots` or an unterminated placeholder.
std::string fill_template(std::string_view body, const std::map<std::string, std::string>& slots);
std::vector<std::string> template_slots(std::string_view body);

// One body per prompt kind, optionally specialised per dataset mode.
class TemplateSet {
public:
    static TemplateSet defaults();
    // Reads <kind>.txt and <kind>.<mode>.txt from `dir`; absent files keep
    // the defaults.
    static TemplateSet load_dir(const std::filesystem::path& dir);

    const std::string& body(PromptKind kind, DatasetMode mode) const;
    void set(PromptKind kind, std::string body);
    void set(PromptKind kind, DatasetMode mode, std::string body);

private:
    std::map<PromptKind, std::string> base_;
    std::map<std::pair<PromptKind, DatasetMode>, std::string> per_mode_;
};

struct PromptOptions {
    // Window on earlier records, states and interpretations embedded in KSA
    // and LTI prompts. 0 keeps everything.
    std::size_t max_context_shots = 0;
};

// Stable field order: index, exercise id, concept ids, [concept names],
// [exercise text], correctness, [timestamp], [duration].
std::string render_record(const InteractionRecord& record, const ModeView& view, std::size_t index);

class PromptBuilder {
public:
    explicit PromptBuilder(ModeView view, TemplateSet templates = TemplateSet::defaults(), PromptOptions options = {});

    const ModeView& view() const noexcept { return view_; }
    const PromptOptions& options() const noexcept { return options_; }

    std::string render_record(const InteractionRecord& record, std::size_t index) const;
    // Target block: same fields as a record block minus correctness.
    std::string render_target(const PredictionTarget& target) const;

    // `shots_prefix` holds shots 1..j; `prior_states` and `prior_interps`
    // hold the per-shot estimates for shots 1..j-1.
    RenderedPrompt ksa(std::span<const InteractionRecord> shots_prefix, std::span<const KnowledgeState> prior_states,
                       std::span<const Interpretation> prior_interps) const;

    // `states` holds per-shot estimates for shots 1..j (the last one is the
    // estimate being interpreted); `prior_interps` covers shots 1..j-1.
    RenderedPrompt lti(std::span<const InteractionRecord> shots_prefix, std::span<const KnowledgeState> states,
                       std::span<const Interpretation> prior_interps) const;

    RenderedPrompt pp(std::span<const InteractionRecord> shots, std::span<const KnowledgeState> states,
                      std::span<const Interpretation> interps, const PredictionTarget& target) const;

    RenderedPrompt lpe(std::span<const InteractionRecord> shots, std::span<const KnowledgeState> states,
                       std::span<const Interpretation> interps, const PredictionTarget& target,
                       const Prediction& prediction) const;

private:
    std::map<std::string, std::string> common_slots(const StudentId& student) const;
    std::string render_records(std::span<const InteractionRecord> shots, std::size_t first_index) const;
    std::string render_state(const KnowledgeState& state, const InteractionRecord& shot) const;
    std::string render_state_list(std::span<const InteractionRecord> shots, std::span<const KnowledgeState> states,
                                  std::size_t first_index) const;
    std::string render_interp_list(std::span<const Interpretation> interps) const;
    std::string render_concepts(const ExerciseId& exercise) const;
    RenderedPrompt finish_labelled_target(PromptKind kind, std::map<std::string, std::string> slots,
                                          const PredictionTarget& target) const;
    std::size_t window_start(std::size_t count) const;

    ModeView view_;
    TemplateSet templates_;
    PromptOptions options_;
};

// Free-function forms over the default templates.
RenderedPrompt build_ksa_prompt(std::span<const InteractionRecord> shots_prefix,
                                std::span<const KnowledgeState> prior_states,
                                std::span<const Interpretation> prior_interps, const ModeView& view);
RenderedPrompt build_pp_prompt(std::span<const InteractionRecord> shots, std::span<const KnowledgeState> states,
                               std::span<const Interpretation> interps, const PredictionTarget& target,
                               const ModeView& view);
RenderedPrompt build_lti_prompt(std::span<const InteractionRecord> shots_prefix, std::span<const KnowledgeState> states,
                                std::span<const Interpretation> prior_interps, const ModeView& view);
RenderedPrompt build_lpe_prompt(std::span<const InteractionRecord> shots, std::span<const KnowledgeState> states,
                                std::span<const Interpretation> interps, const PredictionTarget& target,
                                const Prediction& prediction, const ModeView& view);

namespace detail {
extern const char* const kDefaultKsaTemplate;
extern const char* const kDefaultPpTemplate;
extern const char* const kDefaultLtiTemplate;
extern const char* const kDefaultLpeTemplate;
}  // namespace detail

}  // namespace xfkt
