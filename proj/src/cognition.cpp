#include "xfkt/cognition.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "xfkt/error.hpp"
#include "xfkt/hashing.hpp"

namespace xfkt {

void GenerationSettings::set_model(const std::string& model_id) {
    ksa.model_id = lti.model_id = pp.model_id = lpe.model_id = model_id;
}

namespace {

std::string_view trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

// Strips list bullets, markdown emphasis and quotes around a key or value.
std::string_view strip_decoration(std::string_view s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '`' || s.front() == '"' ||
                          s.front() == '\'' || s.front() == '#' || s.front() == '>')) {
        s.remove_prefix(1);
        s = trim(s);
    }
    while (!s.empty() && (s.back() == '*' || s.back() == '`' || s.back() == '"' || s.back() == '\'' ||
                          s.back() == '.' || s.back() == ',' || s.back() == ';' || s.back() == '!')) {
        s.remove_suffix(1);
        s = trim(s);
    }
    return s;
}

bool blank(std::string_view s) { return trim(s).empty(); }

}  // namespace

MasteryParse parse_mastery(std::string_view text, std::span<const ConceptId> expected_concepts) {
    if (expected_concepts.empty()) throw Error(ErrorKind::InvalidArgument, "parse_mastery needs expected concepts");

    std::map<std::string, const ConceptId*> by_lower;
    for (const auto& c : expected_concepts) by_lower.emplace(lower(c.value), &c);

    std::map<const ConceptId*, std::optional<MasteryLevel>> seen;  // nullopt = conflicting labels
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        const auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;

        const auto sep = line.find_first_of(":=");
        if (sep == std::string_view::npos) continue;
        auto key = strip_decoration(line.substr(0, sep));
        if (const auto paren = key.find('('); paren != std::string_view::npos && paren > 0) {
            key = strip_decoration(key.substr(0, paren));
        }
        const auto value = strip_decoration(line.substr(sep + 1));

        auto it = by_lower.find(lower(key));
        if (it == by_lower.end()) continue;
        const auto level = parse_mastery_label(value);
        auto [slot, fresh] = seen.try_emplace(it->second, level);
        if (!level || (!fresh && slot->second != level)) slot->second = std::nullopt;
    }

    MasteryParse out;
    for (const auto& c : expected_concepts) {
        auto it = seen.find(&c);
        if (it == seen.end() || !it->second) {
            if (std::find(out.unmatched.begin(), out.unmatched.end(), c) == out.unmatched.end()) out.unmatched.push_back(c);
        } else {
            out.state.per_concept[c] = *it->second;
        }
    }
    return out;
}

std::optional<bool> parse_binary(std::string_view text) {
    std::optional<bool> found;
    std::size_t count = 0;
    std::size_t i = 0;
    auto is_alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
    while (i < text.size()) {
        if (!is_alnum(text[i])) {
            ++i;
            continue;
        }
        // A token is a run of letters/digits; "." or "," between digits keeps
        // a number such as 0.5 in one token.
        const std::size_t start = i;
        while (i < text.size()) {
            if (is_alnum(text[i])) {
                ++i;
            } else if ((text[i] == '.' || text[i] == ',') && i > start && is_digit(text[i - 1]) && i + 1 < text.size() &&
                       is_digit(text[i + 1])) {
                ++i;
            } else {
                break;
            }
        }
        const auto token = text.substr(start, i - start);
        if (token == "0" || token == "1") {
            ++count;
            found = token == "1";
        }
    }
    if (count != 1) return std::nullopt;
    return found;
}

bool fallback_bit(std::uint64_t rng_seed) { return (mix_seed(rng_seed, 0x6661006c6c626b31ULL) >> 63) != 0; }

namespace {

std::vector<std::size_t> seqs_of(std::span<const InteractionRecord> shots) {
    std::vector<std::size_t> out;
    out.reserve(shots.size());
    for (const auto& s : shots) out.push_back(s.seq);
    return out;
}

}  // namespace

TraceState analyze_shots(Provider& provider, std::span<const InteractionRecord> shots, const PromptBuilder& prompts,
                         const CognitionOptions& options) {
    if (shots.empty()) throw Error(ErrorKind::InvalidArgument, "analyze_shots needs at least one shot");
    for (std::size_t i = 1; i < shots.size(); ++i) {
        if (shots[i].student != shots[0].student || shots[i].seq <= shots[i - 1].seq) {
            throw Error(ErrorKind::InvalidArgument, "shots must belong to one student and be in time order");
        }
    }

    TraceState trace;
    const auto& view = prompts.view();
    for (std::size_t j = 1; j <= shots.size(); ++j) {
        const auto prefix = shots.first(j);
        const auto& shot = shots[j - 1];
        const auto& concepts = view.exercise(shot.exercise).concept_ids;

        // Knowledge state analysis.
        GenerationRequest req;
        req.prompt = prompts.ksa(prefix, trace.step_states, trace.interps);
        req.params = options.generation.ksa;
        req.context = RequestContext{shot.student, seqs_of(prefix), std::nullopt, concepts};

        MasteryParse parsed;
        for (int attempt = 0; attempt <= options.retries; ++attempt) {
            req.params.attempt = attempt;
            const auto out = provider.complete(req);
            parsed = parse_mastery(out.text, concepts);
            trace.transcripts.push_back({PromptKind::KSA, j, attempt, req.prompt.digest, parsed.ok()});
            if (parsed.ok()) break;
        }

        const KnowledgeState previous = trace.states.empty() ? KnowledgeState{} : trace.states.back();
        KnowledgeState estimate = parsed.state;
        for (const auto& c : parsed.unmatched) {
            if (auto it = previous.per_concept.find(c); it != previous.per_concept.end()) estimate.per_concept[c] = it->second;
        }
        KnowledgeState cumulative = previous;
        for (const auto& [c, level] : estimate.per_concept) cumulative.per_concept[c] = level;

        trace.step_states.push_back(std::move(estimate));
        trace.states.push_back(std::move(cumulative));
        trace.ksa_degraded.push_back(!parsed.ok());

        // Trajectory interpretation of shot j, given the estimate just made.
        GenerationRequest lreq;
        lreq.prompt = prompts.lti(prefix, trace.step_states, trace.interps);
        lreq.params = options.generation.lti;
        lreq.context = RequestContext{shot.student, seqs_of(prefix), std::nullopt, {}};

        Interpretation interp;
        interp.record_index = j;
        for (int attempt = 0; attempt <= options.retries; ++attempt) {
            lreq.params.attempt = attempt;
            const auto out = provider.complete(lreq);
            const bool ok = !blank(out.text);
            trace.transcripts.push_back({PromptKind::LTI, j, attempt, lreq.prompt.digest, ok});
            if (ok) {
                interp.text = std::string(trim(out.text));
                break;
            }
        }
        if (interp.text.empty()) {
            interp.text = "No interpretation available for record " + std::to_string(j) + ".";
            interp.degraded = true;
        }
        trace.interps.push_back(std::move(interp));
    }
    return trace;
}

PredictionOutcome predict_performance(Provider& provider, const TraceState& trace,
                                      std::span<const InteractionRecord> shots, const PredictionTarget& target,
                                      const PromptBuilder& prompts, std::uint64_t rng_seed,
                                      const CognitionOptions& options) {
    if (trace.step_states.size() != shots.size() || trace.interps.size() != shots.size()) {
        throw Error(ErrorKind::InvalidArgument, "trace does not cover every shot");
    }

    GenerationRequest req;
    req.prompt = prompts.pp(shots, trace.step_states, trace.interps, target);
    req.params = options.generation.pp;
    req.context = RequestContext{target.record.student, seqs_of(shots), target.record.seq, {}};

    PredictionOutcome outcome;
    std::string raw;
    for (int attempt = 0; attempt <= options.retries; ++attempt) {
        req.params.attempt = attempt;
        const auto out = provider.complete(req);
        raw = out.text;
        const auto bit = parse_binary(raw);
        outcome.transcripts.push_back({PromptKind::PP, 0, attempt, req.prompt.digest, bit.has_value()});
        if (bit) {
            outcome.prediction = Prediction{*bit, PredictionSource::Parsed, raw};
            return outcome;
        }
    }
    outcome.prediction = Prediction{fallback_bit(rng_seed), PredictionSource::Fallback, raw};
    return outcome;
}

}  // namespace xfkt
