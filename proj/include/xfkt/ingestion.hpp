#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "xfkt/types.hpp"

namespace xfkt {

// FrcSub-style pair of whitespace-separated binary matrices: a student x
// exercise response matrix and an exercise x concept Q-matrix. Records keep
// column order as time order; ids are s<row>, e<col>, c<col> (1-based).
// `concept_names_path`, when given, holds one concept name per line.
Dataset load_frcsub(const std::filesystem::path& response_matrix_path,
                    const std::filesystem::path& q_matrix_path,
                    const std::optional<std::filesystem::path>& concept_names_path = std::nullopt);

Dataset parse_frcsub(std::istream& responses, std::istream& q_matrix,
                     const std::vector<std::string>& concept_names = {});

// Looks for data.txt + q.txt (and optional qnames.txt) inside `dir`.
Dataset load_frcsub_dir(const std::filesystem::path& dir);

// Writes data.txt, q.txt (and qnames.txt when concept names exist). Student
// rows are in natural id order; every student must answer every exercise
// once, in the same order. Ids are not preserved: loading renumbers them.
void save_frcsub_dir(const Dataset& dataset, const std::filesystem::path& dir);

// Newline-delimited JSON objects, one interaction per line:
//   {"student_id", "exercise_id", "correct", "concept_ids": [...],
//    optional "timestamp", "duration", "exercise_text", "concept_names": {...}}
Dataset load_interaction_log(const std::filesystem::path& path);
Dataset parse_interaction_log(std::istream& in);
void write_interaction_log(const Dataset& dataset, std::ostream& out);
void save_interaction_log(const Dataset& dataset, const std::filesystem::path& path);

enum class DatasetFormat { FrcSub, Log };

DatasetFormat parse_format(std::string_view text);
// FrcSub expects a directory (see load_frcsub_dir), Log a file.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);

struct SplitSpec {
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct StudentSplit {
    std::vector<InteractionRecord> shots_pool;
    std::vector<InteractionRecord> test_records;
};

// Time-tail split: the last ceil(test_fraction * n) records are held out.
// Deterministic; `spec.seed` is carried for bookkeeping only.
StudentSplit split_student(const StudentHistory& history, const SplitSpec& spec);

std::size_t test_count(std::size_t n, double test_fraction);

}  // namespace xfkt
