#include "xfkt/interpretation.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "xfkt/error.hpp"

namespace xfkt {

using nlohmann::json;

namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string trimmed(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

Explanation explain_prediction(Provider& provider, std::span<const InteractionRecord> shots, const TraceState& trace,
                               const PredictionTarget& target, const Prediction& prediction,
                               const PromptBuilder& prompts, const CognitionOptions& options) {
    if (trace.step_states.size() != shots.size() || trace.interps.size() != shots.size()) {
        throw Error(ErrorKind::InvalidArgument, "trace does not cover every shot");
    }
    GenerationRequest req;
    req.prompt = prompts.lpe(shots, trace.step_states, trace.interps, target, prediction);
    req.params = options.generation.lpe;
    req.context.student = target.record.student;
    for (const auto& s : shots) req.context.shot_seqs.push_back(s.seq);
    req.context.target_seq = target.record.seq;

    for (int attempt = 0; attempt <= options.retries; ++attempt) {
        req.params.attempt = attempt;
        const auto out = provider.complete(req);
        if (!blank(out.text)) return Explanation{trimmed(out.text), false};
    }
    return Explanation{"No explanation available; the model returned an empty answer.", true};
}

StudentReport assemble_student_report(const StudentId& student, std::span<const InteractionRecord> shots,
                                      const TraceState& trace,
                                      std::span<const std::pair<PredictionTarget, Prediction>> predictions,
                                      std::span<const Explanation> explanations, std::size_t repeat) {
    if (!explanations.empty() && explanations.size() != predictions.size()) {
        throw Error(ErrorKind::LengthMismatch, "explanations must be empty or match the predictions");
    }
    StudentReport report;
    report.student = student;
    report.repeat = repeat;
    report.has_explanations = !explanations.empty();

    for (std::size_t i = 0; i < shots.size(); ++i) {
        ShotRow row;
        row.index = i + 1;
        row.record = shots[i];
        if (i < trace.step_states.size()) row.estimate = trace.step_states[i];
        if (i < trace.interps.size()) row.interpretation = trace.interps[i];
        if (i < trace.ksa_degraded.size()) row.ksa_degraded = trace.ksa_degraded[i];
        report.shots.push_back(std::move(row));
    }
    if (!trace.states.empty()) {
        for (const auto& [c, level] : trace.states.back().per_concept) report.final_state.emplace_back(c, level);
    }
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        TargetRow row{predictions[i].first.record, predictions[i].second, std::nullopt};
        if (report.has_explanations) row.explanation = explanations[i];
        report.targets.push_back(std::move(row));
    }
    return report;
}

namespace {

json record_json(const InteractionRecord& r) {
    json j;
    j["exercise_id"] = r.exercise.value;
    j["correct"] = r.correct;
    j["seq"] = r.seq;
    if (r.timestamp) j["timestamp"] = *r.timestamp;
    if (r.duration) j["duration"] = *r.duration;
    return j;
}

InteractionRecord record_from(const json& j, const StudentId& student) {
    InteractionRecord r;
    r.student = student;
    r.exercise = ExerciseId{j.at("exercise_id").get<std::string>()};
    r.correct = j.at("correct").get<bool>();
    r.seq = j.at("seq").get<std::size_t>();
    if (j.contains("timestamp")) r.timestamp = j["timestamp"].get<std::int64_t>();
    if (j.contains("duration")) r.duration = j["duration"].get<std::int64_t>();
    return r;
}

json state_json(const KnowledgeState& s) {
    json j = json::object();
    for (const auto& [c, level] : s.per_concept) j[c.value] = std::string(to_string(level));
    return j;
}

MasteryLevel level_from(const json& j) {
    const auto label = parse_mastery_label(j.get<std::string>());
    if (!label) throw Error(ErrorKind::CorruptResults, "bad mastery label '" + j.get<std::string>() + "'");
    return *label;
}

PredictionSource source_from(const std::string& s) {
    if (s == "parsed") return PredictionSource::Parsed;
    if (s == "fallback") return PredictionSource::Fallback;
    throw Error(ErrorKind::CorruptResults, "bad prediction source '" + s + "'");
}

std::string one_line(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '\n' || c == '\r') out += ' ';
        else if (c == '|') out += "\\|";
        else out += c;
    }
    return out;
}

}  // namespace

json report_to_json(const StudentReport& report) {
    json j;
    j["student_id"] = report.student.value;
    j["repeat"] = report.repeat;
    j["has_explanations"] = report.has_explanations;
    json shots = json::array();
    for (const auto& row : report.shots) {
        json s;
        s["index"] = row.index;
        s["record"] = record_json(row.record);
        s["estimate"] = state_json(row.estimate);
        s["ksa_degraded"] = row.ksa_degraded;
        s["interpretation"] = {{"text", row.interpretation.text}, {"degraded", row.interpretation.degraded}};
        shots.push_back(std::move(s));
    }
    j["shots"] = std::move(shots);
    json final_state = json::array();
    for (const auto& [c, level] : report.final_state) {
        final_state.push_back({{"concept_id", c.value}, {"mastery", std::string(to_string(level))}});
    }
    j["final_state"] = std::move(final_state);
    json targets = json::array();
    for (const auto& row : report.targets) {
        json t;
        t["record"] = record_json(row.record);
        t["prediction"] = {{"value", row.prediction.value ? 1 : 0},
                           {"source", std::string(to_string(row.prediction.source))},
                           {"raw_text", row.prediction.raw_text}};
        if (row.explanation) t["explanation"] = {{"text", row.explanation->text}, {"degraded", row.explanation->degraded}};
        targets.push_back(std::move(t));
    }
    j["targets"] = std::move(targets);
    return j;
}

StudentReport report_from_json(const json& doc) {
    try {
        StudentReport r;
        r.student = StudentId{doc.at("student_id").get<std::string>()};
        r.repeat = doc.at("repeat").get<std::size_t>();
        r.has_explanations = doc.at("has_explanations").get<bool>();
        for (const auto& s : doc.at("shots")) {
            ShotRow row;
            row.index = s.at("index").get<std::size_t>();
            row.record = record_from(s.at("record"), r.student);
            for (const auto& [c, level] : s.at("estimate").items()) row.estimate.per_concept[ConceptId{c}] = level_from(level);
            row.ksa_degraded = s.at("ksa_degraded").get<bool>();
            row.interpretation.record_index = row.index;
            row.interpretation.text = s.at("interpretation").at("text").get<std::string>();
            row.interpretation.degraded = s.at("interpretation").at("degraded").get<bool>();
            r.shots.push_back(std::move(row));
        }
        for (const auto& f : doc.at("final_state")) {
            r.final_state.emplace_back(ConceptId{f.at("concept_id").get<std::string>()}, level_from(f.at("mastery")));
        }
        for (const auto& t : doc.at("targets")) {
            TargetRow row;
            row.record = record_from(t.at("record"), r.student);
            const auto& p = t.at("prediction");
            row.prediction.value = p.at("value").get<int>() == 1;
            row.prediction.source = source_from(p.at("source").get<std::string>());
            row.prediction.raw_text = p.at("raw_text").get<std::string>();
            if (t.contains("explanation")) {
                row.explanation = Explanation{t["explanation"].at("text").get<std::string>(),
                                              t["explanation"].at("degraded").get<bool>()};
            }
            r.targets.push_back(std::move(row));
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptResults, std::string("malformed student report: ") + e.what());
    }
}

std::string report_to_markdown(const StudentReport& report) {
    std::ostringstream md;
    md << "# Student " << report.student.value;
    if (report.repeat > 0) md << " (repeat " << report.repeat << ")";
    md << "\n\n## Practice records\n\n";
    md << "| # | Exercise | Correct | Estimate | Interpretation |\n";
    md << "|---|----------|---------|----------|----------------|\n";
    for (const auto& row : report.shots) {
        std::string est;
        for (const auto& [c, level] : row.estimate.per_concept) {
            if (!est.empty()) est += ", ";
            est += c.value + "=" + std::string(to_string(level));
        }
        if (row.ksa_degraded) est += " (carried forward)";
        std::string interp = one_line(row.interpretation.text);
        if (row.interpretation.degraded) interp += " (degraded)";
        md << "| " << row.index << " | " << row.record.exercise.value << " | " << (row.record.correct ? 1 : 0) << " | "
           << est << " | " << interp << " |\n";
    }

    md << "\n## Final knowledge state\n\n| Concept | Mastery |\n|---------|---------|\n";
    for (const auto& [c, level] : report.final_state) md << "| " << c.value << " | " << to_string(level) << " |\n";

    md << "\n## Predictions\n\n| Exercise | Predicted | Source | Actual |";
    if (report.has_explanations) md << " Explanation |";
    md << "\n|----------|-----------|--------|--------|";
    if (report.has_explanations) md << "-------------|";
    md << "\n";
    for (const auto& row : report.targets) {
        md << "| " << row.record.exercise.value << " | " << (row.prediction.value ? 1 : 0) << " | "
           << to_string(row.prediction.source) << " | " << (row.record.correct ? 1 : 0) << " |";
        if (report.has_explanations) {
            std::string text = row.explanation ? one_line(row.explanation->text) : std::string{};
            if (row.explanation && row.explanation->degraded) text += " (degraded)";
            md << " " << text << " |";
        }
        md << "\n";
    }
    return md.str();
}

}  // namespace xfkt
