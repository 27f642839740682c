#include "xfkt/prompting.hpp"

#include <fstream>
#include <sstream>

#include "xfkt/error.hpp"
#include "xfkt/hashing.hpp"

namespace xfkt {

namespace fs = std::filesystem;

namespace {

// Slot names a PP/LPE template may never reference.
constexpr std::array<std::string_view, 5> kLabelSlots{"target_correct", "target_label", "label", "ground_truth",
                                                      "correct"};

std::string indent_continuations(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        if (ch == '\r') continue;
        out.push_back(ch);
        if (ch == '\n') out += "  ";
    }
    return out;
}

std::string_view mode_note(DatasetMode mode) {
    switch (mode) {
        case DatasetMode::Scant:
            return "Each record lists exercise and concept identifiers and whether the answer was correct (1) or "
                   "incorrect (0).";
        case DatasetMode::Sparse:
            return "Each record lists exercise and concept identifiers, concept names, and whether the answer was "
                   "correct (1) or incorrect (0).";
        case DatasetMode::Moderate:
            return "Each record lists exercise and concept identifiers, concept names, the exercise text, timing, and "
                   "whether the answer was correct (1) or incorrect (0).";
    }
    return "";
}

void require_no_label_line(std::string_view block) {
    std::size_t pos = 0;
    while (pos <= block.size()) {
        const auto end = block.find('\n', pos);
        const auto line = block.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        if (line.starts_with("correct:")) {
            throw Error(ErrorKind::LeakedLabel, "target block would reveal the ground-truth label");
        }
        if (end == std::string_view::npos) break;
        pos = end + 1;
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read template '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string_view to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::KSA: return "ksa";
        case PromptKind::PP: return "pp";
        case PromptKind::LTI: return "lti";
        case PromptKind::LPE: return "lpe";
    }
    return "ksa";
}

PromptKind parse_prompt_kind(std::string_view text) {
    for (auto k : kAllPromptKinds) {
        if (to_string(k) == text) return k;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown prompt kind '" + std::string(text) + "'");
}

RenderedPrompt make_prompt(PromptKind kind, std::string text) {
    if (text.empty()) throw Error(ErrorKind::InvalidArgument, "rendered prompt is empty");
    RenderedPrompt p;
    p.template_id = kind;
    p.digest = sha256_hex(text);
    p.text = std::move(text);
    return p;
}

std::vector<std::string> template_slots(std::string_view body) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = body.find("{{", pos)) != std::string_view::npos) {
        const auto end = body.find("}}", pos + 2);
        if (end == std::string_view::npos) throw Error(ErrorKind::InvalidArgument, "unterminated '{{' in template");
        out.emplace_back(body.substr(pos + 2, end - pos - 2));
        pos = end + 2;
    }
    return out;
}

std::string fill_template(std::string_view body, const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(body.size() * 2);
    std::size_t pos = 0;
    while (true) {
        const auto open = body.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(body.substr(pos));
            break;
        }
        const auto close = body.find("}}", open + 2);
        if (close == std::string_view::npos) throw Error(ErrorKind::InvalidArgument, "unterminated '{{' in template");
        out.append(body.substr(pos, open - pos));
        const std::string name(body.substr(open + 2, close - open - 2));
        auto it = slots.find(name);
        if (it == slots.end()) throw Error(ErrorKind::InvalidArgument, "template references unknown slot '" + name + "'");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

TemplateSet TemplateSet::defaults() {
    TemplateSet t;
    t.base_[PromptKind::KSA] = detail::kDefaultKsaTemplate;
    t.base_[PromptKind::PP] = detail::kDefaultPpTemplate;
    t.base_[PromptKind::LTI] = detail::kDefaultLtiTemplate;
    t.base_[PromptKind::LPE] = detail::kDefaultLpeTemplate;
    return t;
}

TemplateSet TemplateSet::load_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "template directory '" + dir.string() + "' not found");
    TemplateSet t = defaults();
    for (auto kind : kAllPromptKinds) {
        const std::string stem(to_string(kind));
        if (fs::exists(dir / (stem + ".txt"))) t.set(kind, read_file(dir / (stem + ".txt")));
        for (auto mode : {DatasetMode::Scant, DatasetMode::Sparse, DatasetMode::Moderate}) {
            const auto file = dir / (stem + "." + std::string(to_string(mode)) + ".txt");
            if (fs::exists(file)) t.set(kind, mode, read_file(file));
        }
    }
    return t;
}

const std::string& TemplateSet::body(PromptKind kind, DatasetMode mode) const {
    if (auto it = per_mode_.find({kind, mode}); it != per_mode_.end()) return it->second;
    return base_.at(kind);
}

void TemplateSet::set(PromptKind kind, std::string body) {
    template_slots(body);
    base_[kind] = std::move(body);
}

void TemplateSet::set(PromptKind kind, DatasetMode mode, std::string body) {
    template_slots(body);
    per_mode_[{kind, mode}] = std::move(body);
}

std::string render_record(const InteractionRecord& record, const ModeView& view, std::size_t index) {
    const Exercise& ex = view.exercise(record.exercise);
    std::ostringstream os;
    os << "[Record " << index << "]\n";
    os << "exercise: " << ex.id.value << '\n';
    os << "concepts: ";
    for (std::size_t i = 0; i < ex.concept_ids.size(); ++i) os << (i ? ", " : "") << ex.concept_ids[i].value;
    os << '\n';
    if (view.shows_concept_names()) {
        std::string names;
        for (const auto& c : ex.concept_ids) {
            if (auto n = view.concept_name(ex.id, c)) {
                if (!names.empty()) names += "; ";
                names += c.value + " = " + *n;
            }
        }
        if (!names.empty()) os << "concept names: " << indent_continuations(names) << '\n';
    }
    if (auto text = view.exercise_text(ex.id)) os << "exercise text: " << indent_continuations(*text) << '\n';
    os << "correct: " << (record.correct ? 1 : 0);
    if (view.shows_timing()) {
        if (record.timestamp) os << "\ntimestamp: " << *record.timestamp;
        if (record.duration) os << "\nduration: " << *record.duration;
    }
    return os.str();
}

PromptBuilder::PromptBuilder(ModeView view, TemplateSet templates, PromptOptions options)
    : view_(std::move(view)), templates_(std::move(templates)), options_(options) {}

std::string PromptBuilder::render_record(const InteractionRecord& record, std::size_t index) const {
    return xfkt::render_record(record, view_, index);
}

std::string PromptBuilder::render_target(const PredictionTarget& target) const {
    // Rendered from a copy with the label zeroed, then the label line dropped:
    // the block is a function of everything except the ground truth.
    InteractionRecord unlabeled = target.record;
    unlabeled.correct = false;
    const std::string full = xfkt::render_record(unlabeled, view_, 0);
    std::istringstream in(full);
    std::string line, out = "[Target]";
    std::getline(in, line);  // "[Record 0]"
    while (std::getline(in, line)) {
        if (line.starts_with("correct:")) continue;
        out += '\n';
        out += line;
    }
    return out;
}

std::size_t PromptBuilder::window_start(std::size_t count) const {
    if (options_.max_context_shots == 0 || count <= options_.max_context_shots) return 0;
    return count - options_.max_context_shots;
}

std::map<std::string, std::string> PromptBuilder::common_slots(const StudentId& student) const {
    return {{"student", student.value}, {"mode_note", std::string(mode_note(view_.mode()))}};
}

std::string PromptBuilder::render_records(std::span<const InteractionRecord> shots, std::size_t first_index) const {
    std::string out;
    for (std::size_t i = 0; i < shots.size(); ++i) {
        if (i) out += "\n\n";
        out += render_record(shots[i], first_index + i);
    }
    return out;
}

std::string PromptBuilder::render_state(const KnowledgeState& state, const InteractionRecord& shot) const {
    if (state.per_concept.empty()) return "(no estimate)";
    std::string out;
    for (const auto& [c, level] : state.per_concept) {
        if (!out.empty()) out += ", ";
        out += c.value;
        if (auto n = view_.concept_name(shot.exercise, c)) out += " (" + *n + ")";
        out += " = ";
        out += to_string(level);
    }
    return out;
}

std::string PromptBuilder::render_state_list(std::span<const InteractionRecord> shots,
                                             std::span<const KnowledgeState> states, std::size_t first_index) const {
    std::string out;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (i) out += '\n';
        out += "- After record " + std::to_string(first_index + i) + ": " + render_state(states[i], shots[i]);
    }
    return out;
}

std::string PromptBuilder::render_interp_list(std::span<const Interpretation> interps) const {
    std::string out;
    for (std::size_t i = 0; i < interps.size(); ++i) {
        if (i) out += '\n';
        out += "- Record " + std::to_string(interps[i].record_index) + ": " + indent_continuations(interps[i].text);
    }
    return out;
}

std::string PromptBuilder::render_concepts(const ExerciseId& exercise) const {
    const auto& ex = view_.exercise(exercise);
    std::string out;
    for (const auto& c : ex.concept_ids) {
        if (!out.empty()) out += ", ";
        out += c.value;
        if (auto n = view_.concept_name(exercise, c)) out += " (" + *n + ")";
    }
    return out;
}

RenderedPrompt PromptBuilder::ksa(std::span<const InteractionRecord> shots_prefix,
                                  std::span<const KnowledgeState> prior_states,
                                  std::span<const Interpretation> prior_interps) const {
    const std::size_t j = shots_prefix.size();
    if (j == 0) throw Error(ErrorKind::InvalidArgument, "KSA prompt needs at least one shot");
    if (prior_states.size() != j - 1 || prior_interps.size() != j - 1) {
        throw Error(ErrorKind::InvalidArgument, "KSA prompt for shot " + std::to_string(j) + " needs " +
                                                    std::to_string(j - 1) + " prior states and interpretations");
    }
    const std::size_t rec_from = window_start(j);
    const std::size_t prior_from = window_start(j - 1);

    auto slots = common_slots(shots_prefix.front().student);
    slots["records"] = render_records(shots_prefix.subspan(rec_from), rec_from + 1);
    slots["current_index"] = std::to_string(j);
    slots["concepts"] = render_concepts(shots_prefix.back().exercise);
    slots["prior_states"] = prior_states.empty() ? std::string{}
                                                 : "\nEarlier knowledge state estimates:\n" +
                                                       render_state_list(shots_prefix.subspan(prior_from, j - 1 - prior_from),
                                                                         prior_states.subspan(prior_from), prior_from + 1) +
                                                       "\n";
    slots["prior_interpretations"] =
        prior_interps.empty() ? std::string{}
                              : "\nInterpretations of earlier records:\n" +
                                    render_interp_list(prior_interps.subspan(prior_from)) + "\n";
    return make_prompt(PromptKind::KSA, fill_template(templates_.body(PromptKind::KSA, view_.mode()), slots));
}

RenderedPrompt PromptBuilder::lti(std::span<const InteractionRecord> shots_prefix, std::span<const KnowledgeState> states,
                                  std::span<const Interpretation> prior_interps) const {
    const std::size_t j = shots_prefix.size();
    if (j == 0) throw Error(ErrorKind::InvalidArgument, "LTI prompt needs at least one shot");
    if (states.size() != j || prior_interps.size() != j - 1) {
        throw Error(ErrorKind::InvalidArgument, "LTI prompt for shot " + std::to_string(j) + " needs " +
                                                    std::to_string(j) + " states and " + std::to_string(j - 1) +
                                                    " prior interpretations");
    }
    const std::size_t rec_from = window_start(j);
    const std::size_t prior_from = window_start(j - 1);

    auto slots = common_slots(shots_prefix.front().student);
    slots["records"] = render_records(shots_prefix.subspan(rec_from), rec_from + 1);
    slots["current_index"] = std::to_string(j);
    slots["current_state"] = render_state(states.back(), shots_prefix.back());
    slots["prior_states"] = j == 1 ? std::string{}
                                   : "\nEarlier knowledge state estimates:\n" +
                                         render_state_list(shots_prefix.subspan(prior_from, j - 1 - prior_from),
                                                           states.subspan(prior_from, j - 1 - prior_from), prior_from + 1) +
                                         "\n";
    slots["prior_interpretations"] =
        prior_interps.empty() ? std::string{}
                              : "\nInterpretations of earlier records:\n" +
                                    render_interp_list(prior_interps.subspan(prior_from)) + "\n";
    return make_prompt(PromptKind::LTI, fill_template(templates_.body(PromptKind::LTI, view_.mode()), slots));
}

RenderedPrompt PromptBuilder::finish_labelled_target(PromptKind kind, std::map<std::string, std::string> slots,
                                                     const PredictionTarget& target) const {
    const auto& body = templates_.body(kind, view_.mode());
    for (const auto& name : template_slots(body)) {
        for (auto forbidden : kLabelSlots) {
            if (name == forbidden) {
                throw Error(ErrorKind::LeakedLabel, "template slot '" + name + "' would expose the target's label");
            }
        }
    }
    slots["target"] = render_target(target);
    require_no_label_line(slots["target"]);
    return make_prompt(kind, fill_template(body, slots));
}

RenderedPrompt PromptBuilder::pp(std::span<const InteractionRecord> shots, std::span<const KnowledgeState> states,
                                 std::span<const Interpretation> interps, const PredictionTarget& target) const {
    if (shots.empty()) throw Error(ErrorKind::InvalidArgument, "PP prompt needs at least one shot");
    if (states.size() != shots.size() || interps.size() != shots.size()) {
        throw Error(ErrorKind::InvalidArgument, "PP prompt needs one state and one interpretation per shot");
    }
    auto slots = common_slots(target.record.student);
    slots["records"] = render_records(shots, 1);
    slots["states"] = render_state_list(shots, states, 1);
    slots["interpretations"] = render_interp_list(interps);
    return finish_labelled_target(PromptKind::PP, std::move(slots), target);
}

RenderedPrompt PromptBuilder::lpe(std::span<const InteractionRecord> shots, std::span<const KnowledgeState> states,
                                  std::span<const Interpretation> interps, const PredictionTarget& target,
                                  const Prediction& prediction) const {
    if (shots.empty()) throw Error(ErrorKind::InvalidArgument, "LPE prompt needs at least one shot");
    if (states.size() != shots.size() || interps.size() != shots.size()) {
        throw Error(ErrorKind::InvalidArgument, "LPE prompt needs one state and one interpretation per shot");
    }
    auto slots = common_slots(target.record.student);
    slots["records"] = render_records(shots, 1);
    slots["states"] = render_state_list(shots, states, 1);
    slots["interpretations"] = render_interp_list(interps);
    slots["prediction"] = prediction.value ? "1" : "0";
    return finish_labelled_target(PromptKind::LPE, std::move(slots), target);
}

RenderedPrompt build_ksa_prompt(std::span<const InteractionRecord> shots_prefix,
                                std::span<const KnowledgeState> prior_states,
                                std::span<const Interpretation> prior_interps, const ModeView& view) {
    return PromptBuilder(view).ksa(shots_prefix, prior_states, prior_interps);
}

RenderedPrompt build_pp_prompt(std::span<const InteractionRecord> shots, std::span<const KnowledgeState> states,
                               std::span<const Interpretation> interps, const PredictionTarget& target,
                               const ModeView& view) {
    return PromptBuilder(view).pp(shots, states, interps, target);
}

RenderedPrompt build_lti_prompt(std::span<const InteractionRecord> shots_prefix, std::span<const KnowledgeState> states,
                                std::span<const Interpretation> prior_interps, const ModeView& view) {
    return PromptBuilder(view).lti(shots_prefix, states, prior_interps);
}

RenderedPrompt build_lpe_prompt(std::span<const InteractionRecord> shots, std::span<const KnowledgeState> states,
                                std::span<const Interpretation> interps, const PredictionTarget& target,
                                const Prediction& prediction, const ModeView& view) {
    return PromptBuilder(view).lpe(shots, states, interps, target, prediction);
}

}  // namespace xfkt
