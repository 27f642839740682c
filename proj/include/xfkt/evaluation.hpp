#pragma once

// Experiment runner: per repeat, sample students, split each history, pick
// shots, then run the cognition chain with every held-out record as a target.
// Students within a repeat run concurrently (OpenMP, bounded by
// max_in_flight); `serial::run_experiment` is the single-threaded reference.
// Both produce identical results because per-student outputs are collected by
// sample position and assembled in order afterwards.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "xfkt/cognition.hpp"
#include "xfkt/error.hpp"
#include "xfkt/ingestion.hpp"
#include "xfkt/interpretation.hpp"
#include "xfkt/llm_client.hpp"
#include "xfkt/metrics.hpp"
#include "xfkt/prompting.hpp"
#include "xfkt/selection.hpp"
#include "xfkt/types.hpp"

namespace xfkt {

struct ExperimentConfig {
    std::shared_ptr<const Dataset> dataset;
    std::string dataset_path;  // provenance only
    std::string dataset_format = "frcsub";
    std::string dataset_digest;  // see dataset_digest()
    DatasetMode mode = DatasetMode::Scant;
    SelectionStrategy strategy;  // strategy.seed is replaced by a per-student seed
    std::size_t n_students = 50;
    std::size_t repeats = 3;
    SplitSpec split;
    std::uint64_t seed = 0;
    bool explain = false;
    std::size_t max_in_flight = 4;
    TemplateSet templates = TemplateSet::defaults();
    PromptOptions prompt_options;
    CognitionOptions cognition;
    std::string provider_id;
    std::string method = "llm";
};

// SHA-256 of the dataset in interaction-log form; identifies the data
// independently of where it was loaded from.
std::string dataset_digest(const Dataset& dataset);

// Fields that influence results; echoed into every results document.
nlohmann::json config_to_json(const ExperimentConfig& config);

struct PredictionRecord {
    std::size_t repeat = 0;
    StudentId student;
    ExerciseId exercise;
    std::size_t target_seq = 0;
    bool label = false;
    bool prediction = false;
    PredictionSource source = PredictionSource::Parsed;
    std::size_t shots = 0;
    std::size_t provider_calls = 0;
    std::optional<double> probability;  // baselines report their score
    std::optional<Explanation> explanation;

    bool operator==(const PredictionRecord&) const = default;
};

struct RepeatResult {
    std::size_t repeat = 0;
    std::uint64_t seed = 0;
    std::vector<StudentId> students;  // sample order
    std::vector<StudentId> skipped;   // history too short to split
    Metrics metrics;                  // over all predictions of the repeat
    // Mean of per-student metrics; the confusion counts are left at zero.
    Metrics student_mean;

    bool operator==(const RepeatResult&) const = default;
};

struct AggregateMetrics {
    Spread accuracy, precision, recall, f1, fallback_rate;

    bool operator==(const AggregateMetrics&) const = default;
};

struct ExperimentResult {
    std::string method;
    nlohmann::json config;
    std::vector<RepeatResult> repeats;
    AggregateMetrics aggregate;          // over repeats, prediction level
    AggregateMetrics student_aggregate;  // over repeats, student-level means
    std::vector<PredictionRecord> predictions;
    std::vector<StudentReport> reports;  // not part of the results document
    bool partial = false;
    std::optional<std::string> failure;
};

// Students per repeat: sampled without replacement from students not used in
// earlier repeats, topping up from used ones only when too few remain.
// Repeat r draws with seed `seed + r`. Throws InvalidArgument when
// n_students exceeds the dataset or is zero.
std::vector<std::vector<StudentId>> sample_students(const Dataset& dataset, std::size_t n_students,
                                                    std::size_t repeats, std::uint64_t seed);

std::uint64_t student_seed(std::uint64_t base_seed, std::size_t repeat, const StudentId& student);

struct StudentPlan {
    StudentId student;
    std::uint64_t seed = 0;
    std::vector<InteractionRecord> pool;
    std::vector<InteractionRecord> shots;
    std::vector<PredictionTarget> targets;
};

// nullopt when the history is too short to split.
std::optional<StudentPlan> plan_student(const Dataset& dataset, const StudentId& student,
                                        const ExperimentConfig& config, std::size_t repeat);

// Recomputes per-repeat and aggregate metrics from `result.predictions`.
// `result.repeats` must already list the repeats (students and skips).
void finalize_metrics(ExperimentResult& result);

// Provider failures (unavailable, auth, budget, replay miss) stop the run and
// leave a partial result with `failure` set; other errors propagate.
ExperimentResult run_experiment(const ExperimentConfig& config, ProviderPtr provider);

namespace serial {
ExperimentResult run_experiment(const ExperimentConfig& config, ProviderPtr provider);
}

bool is_provider_failure(ErrorKind kind) noexcept;

struct ComparisonRow {
    std::string method;
    std::size_t repeats = 0;
    std::size_t predictions = 0;
    AggregateMetrics aggregate;
};

// Ranked by mean accuracy (descending), ties broken by method name. Needs at
// least two results.
std::vector<ComparisonRow> compare_runs(std::span<const ExperimentResult> results);
std::string comparison_to_markdown(std::span<const ComparisonRow> rows);

}  // namespace xfkt
