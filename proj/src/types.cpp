#include "xfkt/types.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

#include "xfkt/error.hpp"

namespace xfkt {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::Io: return "Io";
        case ErrorKind::ModeUnavailable: return "ModeUnavailable";
        case ErrorKind::MalformedMatrix: return "MalformedMatrix";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::MalformedRecord: return "MalformedRecord";
        case ErrorKind::HistoryTooShort: return "HistoryTooShort";
        case ErrorKind::EmptyPool: return "EmptyPool";
        case ErrorKind::UnknownExercise: return "UnknownExercise";
        case ErrorKind::LeakedLabel: return "LeakedLabel";
        case ErrorKind::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorKind::AuthError: return "AuthError";
        case ErrorKind::BudgetExceeded: return "BudgetExceeded";
        case ErrorKind::ReplayMiss: return "ReplayMiss";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::SeedMismatch: return "SeedMismatch";
        case ErrorKind::CorruptResults: return "CorruptResults";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), line_(line) {}

const Exercise& Dataset::exercise(const ExerciseId& id) const {
    auto it = exercises.find(id);
    if (it == exercises.end()) {
        throw Error(ErrorKind::UnknownExercise, "exercise '" + id.value + "' not in dataset");
    }
    return it->second;
}

bool Dataset::has_exercise_text() const {
    return std::any_of(exercises.begin(), exercises.end(),
                       [](const auto& kv) { return kv.second.text.has_value(); });
}

std::size_t Dataset::record_count() const {
    std::size_t n = 0;
    for (const auto& [_, h] : histories) n += h.records.size();
    return n;
}

void normalize_histories(Dataset& dataset) {
    for (auto& [_, history] : dataset.histories) {
        auto& recs = history.records;
        const bool timed = std::all_of(recs.begin(), recs.end(),
                                       [](const InteractionRecord& r) { return r.timestamp.has_value(); });
        if (timed) {
            std::stable_sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) {
                return *a.timestamp < *b.timestamp;
            });
        }
        for (std::size_t i = 0; i < recs.size(); ++i) recs[i].seq = i;
    }
}

double DatasetStats::avg_skills() const {
    return exercises == 0 ? 0.0 : static_cast<double>(concept_links) / static_cast<double>(exercises);
}

double DatasetStats::avg_records() const {
    return students == 0 ? 0.0 : static_cast<double>(records) / static_cast<double>(students);
}

DatasetStats compute_stats(const Dataset& dataset) {
    DatasetStats s;
    s.students = dataset.histories.size();
    s.exercises = dataset.exercises.size();
    s.skills = dataset.concepts.size();
    s.records = dataset.record_count();
    for (const auto& [_, ex] : dataset.exercises) s.concept_links += ex.concept_ids.size();
    for (const auto& [_, h] : dataset.histories) {
        for (const auto& r : h.records) s.has_timestamps = s.has_timestamps || r.timestamp.has_value();
    }
    return s;
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::EmptyId: return "EmptyId";
        case ViolationKind::DanglingExercise: return "DanglingExercise";
        case ViolationKind::DanglingConcept: return "DanglingConcept";
        case ViolationKind::EmptyConceptSet: return "EmptyConceptSet";
        case ViolationKind::DuplicateConcept: return "DuplicateConcept";
        case ViolationKind::ConceptNameNotInExercise: return "ConceptNameNotInExercise";
        case ViolationKind::ForeignRecord: return "ForeignRecord";
        case ViolationKind::MixedTimestamps: return "MixedTimestamps";
        case ViolationKind::UnsortedHistory: return "UnsortedHistory";
        case ViolationKind::NegativeDuration: return "NegativeDuration";
    }
    return "Unknown";
}

std::vector<Violation> validate_dataset(const Dataset& dataset) {
    std::vector<Violation> out;
    auto add = [&out](ViolationKind k, std::string detail) { out.push_back({k, std::move(detail)}); };

    for (const auto& c : dataset.concepts) {
        if (c.empty()) add(ViolationKind::EmptyId, "concept with empty id");
    }
    for (const auto& [id, ex] : dataset.exercises) {
        if (id.empty() || id != ex.id) add(ViolationKind::EmptyId, "exercise key/id mismatch or empty: '" + id.value + "'");
        if (ex.concept_ids.empty()) add(ViolationKind::EmptyConceptSet, "exercise '" + id.value + "' has no concepts");
        std::set<ConceptId> seen;
        for (const auto& c : ex.concept_ids) {
            if (!seen.insert(c).second) add(ViolationKind::DuplicateConcept, "exercise '" + id.value + "' lists '" + c.value + "' twice");
            if (!dataset.concepts.contains(c)) add(ViolationKind::DanglingConcept, "exercise '" + id.value + "' references unknown concept '" + c.value + "'");
        }
        for (const auto& [c, _] : ex.concept_names) {
            if (!seen.contains(c)) add(ViolationKind::ConceptNameNotInExercise, "exercise '" + id.value + "' names concept '" + c.value + "' it does not test");
        }
    }
    for (const auto& [sid, h] : dataset.histories) {
        if (sid.empty()) add(ViolationKind::EmptyId, "history with empty student id");
        std::size_t timed = 0;
        for (const auto& r : h.records) {
            if (r.student != sid || h.student != sid) add(ViolationKind::ForeignRecord, "history '" + sid.value + "' holds record of '" + r.student.value + "'");
            if (!dataset.exercises.contains(r.exercise)) add(ViolationKind::DanglingExercise, "record of '" + sid.value + "' references unknown exercise '" + r.exercise.value + "'");
            if (r.duration && *r.duration < 0) add(ViolationKind::NegativeDuration, "record of '" + sid.value + "' has negative duration");
            if (r.timestamp) ++timed;
        }
        if (timed != 0 && timed != h.records.size()) {
            add(ViolationKind::MixedTimestamps, "history '" + sid.value + "' mixes timed and untimed records");
        } else if (timed != 0) {
            for (std::size_t i = 1; i < h.records.size(); ++i) {
                if (*h.records[i].timestamp < *h.records[i - 1].timestamp) {
                    add(ViolationKind::UnsortedHistory, "history '" + sid.value + "' not sorted by timestamp");
                    break;
                }
            }
        }
    }
    return out;
}

namespace {
std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}
}  // namespace

std::string_view to_string(DatasetMode mode) {
    switch (mode) {
        case DatasetMode::Scant: return "scant";
        case DatasetMode::Sparse: return "sparse";
        case DatasetMode::Moderate: return "moderate";
    }
    return "scant";
}

DatasetMode parse_mode(std::string_view text) {
    const auto t = lower(text);
    if (t == "scant") return DatasetMode::Scant;
    if (t == "sparse") return DatasetMode::Sparse;
    if (t == "moderate") return DatasetMode::Moderate;
    throw Error(ErrorKind::InvalidArgument, "unknown dataset mode '" + std::string(text) + "'");
}

ModeView::ModeView(std::shared_ptr<const Dataset> dataset, DatasetMode mode)
    : dataset_(std::move(dataset)), mode_(mode) {
    if (!dataset_) throw Error(ErrorKind::InvalidArgument, "null dataset");
}

std::optional<std::string> ModeView::concept_name(const ExerciseId& exercise,
                                                  const ConceptId& concept_id) const {
    if (!shows_concept_names()) return std::nullopt;
    const auto& ex = dataset_->exercise(exercise);
    auto it = ex.concept_names.find(concept_id);
    if (it == ex.concept_names.end()) return std::nullopt;
    return it->second;
}

std::optional<std::string> ModeView::exercise_text(const ExerciseId& id) const {
    if (!shows_text()) return std::nullopt;
    return dataset_->exercise(id).text;
}

ModeView project_mode(std::shared_ptr<const Dataset> dataset, DatasetMode mode) {
    if (!dataset) throw Error(ErrorKind::InvalidArgument, "null dataset");
    if (mode == DatasetMode::Moderate && !dataset->has_exercise_text()) {
        throw Error(ErrorKind::ModeUnavailable, "moderate mode needs exercise text, dataset has none");
    }
    return ModeView(std::move(dataset), mode);
}

std::string_view to_string(MasteryLevel level) {
    switch (level) {
        case MasteryLevel::Good: return "good";
        case MasteryLevel::Fair: return "fair";
        case MasteryLevel::Fail: return "fail";
    }
    return "fail";
}

std::optional<MasteryLevel> parse_mastery_label(std::string_view text) {
    const auto t = lower(text);
    if (t == "good") return MasteryLevel::Good;
    if (t == "fair") return MasteryLevel::Fair;
    if (t == "fail") return MasteryLevel::Fail;
    return std::nullopt;
}

std::string_view to_string(PredictionSource source) {
    return source == PredictionSource::Parsed ? "parsed" : "fallback";
}

}  // namespace xfkt
