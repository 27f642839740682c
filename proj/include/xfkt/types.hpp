#pragma once

// Core domain model for few-shot knowledge tracing: exercises and the
// exercise -> concept mapping, per-student interaction histories, the
// information tiers a prompt may expose, and the outputs of the cognition and
// interpretation stages.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace xfkt {

template <class Tag>
struct Id {
    std::string value;

    auto operator<=>(const Id&) const = default;
    bool empty() const noexcept { return value.empty(); }
};

using ConceptId = Id<struct ConceptTag>;
using ExerciseId = Id<struct ExerciseTag>;
using StudentId = Id<struct StudentTag>;

struct Exercise {
    ExerciseId id;
    std::vector<ConceptId> concept_ids;  // ordered, duplicate-free
    std::optional<std::string> text;
    std::map<ConceptId, std::string> concept_names;

    bool operator==(const Exercise&) const = default;
};

struct InteractionRecord {
    StudentId student;
    ExerciseId exercise;
    bool correct = false;
    std::optional<std::int64_t> timestamp;  // epoch seconds
    std::optional<std::int64_t> duration;   // seconds, >= 0
    // Position inside the owning student's time-ordered history. Assigned by
    // normalize_histories(); not part of any on-disk format.
    std::size_t seq = 0;

    bool operator==(const InteractionRecord&) const = default;
};

struct StudentHistory {
    StudentId student;
    std::vector<InteractionRecord> records;

    bool operator==(const StudentHistory&) const = default;
};

struct Dataset {
    std::map<ExerciseId, Exercise> exercises;
    std::set<ConceptId> concepts;
    std::map<StudentId, StudentHistory> histories;

    bool operator==(const Dataset&) const = default;

    // Throws Error(UnknownExercise).
    const Exercise& exercise(const ExerciseId& id) const;
    bool has_exercise_text() const;
    std::size_t record_count() const;
};

// Sorts each history by timestamp (stable, so input order breaks ties and is
// kept verbatim when there are no timestamps) and renumbers `seq`.
void normalize_histories(Dataset& dataset);

struct DatasetStats {
    std::size_t students = 0;
    std::size_t exercises = 0;
    std::size_t skills = 0;
    std::size_t records = 0;
    std::size_t concept_links = 0;  // sum over exercises of |concept_ids|
    bool has_timestamps = false;

    double avg_skills() const;   // concept links per exercise
    double avg_records() const;  // records per student
};

DatasetStats compute_stats(const Dataset& dataset);

enum class ViolationKind {
    EmptyId,
    DanglingExercise,
    DanglingConcept,
    EmptyConceptSet,
    DuplicateConcept,
    ConceptNameNotInExercise,
    ForeignRecord,
    MixedTimestamps,
    UnsortedHistory,
    NegativeDuration,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::string detail;
};

// Empty iff every referential invariant of the dataset holds.
std::vector<Violation> validate_dataset(const Dataset& dataset);

enum class DatasetMode { Scant, Sparse, Moderate };

std::string_view to_string(DatasetMode mode);
// Accepts "scant", "sparse", "moderate" (case-insensitive); throws InvalidArgument.
DatasetMode parse_mode(std::string_view text);

// Read-only projection of a dataset onto one information tier.
//   Scant    identifiers and correctness
//   Sparse   + concept names
//   Moderate + exercise text, timestamps and durations
class ModeView {
public:
    ModeView(std::shared_ptr<const Dataset> dataset, DatasetMode mode);

    DatasetMode mode() const noexcept { return mode_; }
    const Dataset& dataset() const noexcept { return *dataset_; }
    std::shared_ptr<const Dataset> shared_dataset() const noexcept { return dataset_; }

    const Exercise& exercise(const ExerciseId& id) const { return dataset_->exercise(id); }
    std::optional<std::string> concept_name(const ExerciseId& exercise,
                                            const ConceptId& concept_id) const;
    std::optional<std::string> exercise_text(const ExerciseId& id) const;
    bool shows_concept_names() const noexcept { return mode_ != DatasetMode::Scant; }
    bool shows_text() const noexcept { return mode_ == DatasetMode::Moderate; }
    bool shows_timing() const noexcept { return mode_ == DatasetMode::Moderate; }

private:
    std::shared_ptr<const Dataset> dataset_;
    DatasetMode mode_;
};

// Throws Error(ModeUnavailable) for Moderate on a dataset without exercise text.
ModeView project_mode(std::shared_ptr<const Dataset> dataset, DatasetMode mode);

enum class MasteryLevel { Fail = 0, Fair = 1, Good = 2 };

std::string_view to_string(MasteryLevel level);
std::optional<MasteryLevel> parse_mastery_label(std::string_view text);

struct KnowledgeState {
    std::map<ConceptId, MasteryLevel> per_concept;

    bool operator==(const KnowledgeState&) const = default;
};

struct Interpretation {
    std::size_t record_index = 0;  // 1-based shot index
    std::string text;
    bool degraded = false;

    bool operator==(const Interpretation&) const = default;
};

enum class PredictionSource { Parsed, Fallback };

std::string_view to_string(PredictionSource source);

struct Prediction {
    bool value = false;
    PredictionSource source = PredictionSource::Parsed;
    std::string raw_text;

    bool operator==(const Prediction&) const = default;
};

struct Explanation {
    std::string text;
    bool degraded = false;

    bool operator==(const Explanation&) const = default;
};

// Ground truth is held for scoring only; prompt builders never render it.
struct PredictionTarget {
    InteractionRecord record;
};

}  // namespace xfkt
