#include "xfkt/ingestion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "xfkt/error.hpp"

namespace xfkt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    return in;
}

std::vector<std::vector<bool>> read_binary_matrix(std::istream& in, std::string_view what) {
    std::vector<std::vector<bool>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<bool> row;
        std::string cell;
        while (ls >> cell) {
            if (cell == "0") row.push_back(false);
            else if (cell == "1") row.push_back(true);
            else throw Error(ErrorKind::MalformedMatrix,
                             std::string(what) + " line " + std::to_string(lineno) + ": non-binary cell '" + cell + "'",
                             lineno);
        }
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw Error(ErrorKind::MalformedMatrix,
                        std::string(what) + " line " + std::to_string(lineno) + ": ragged row (" +
                            std::to_string(row.size()) + " cells, expected " + std::to_string(rows.front().size()) + ")",
                        lineno);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error(ErrorKind::MalformedMatrix, std::string(what) + " is empty");
    return rows;
}

}  // namespace

Dataset parse_frcsub(std::istream& responses, std::istream& q_matrix,
                     const std::vector<std::string>& concept_names) {
    const auto r = read_binary_matrix(responses, "response matrix");
    const auto q = read_binary_matrix(q_matrix, "q-matrix");
    const std::size_t n_exercises = r.front().size();
    if (q.size() != n_exercises) {
        throw Error(ErrorKind::DimensionMismatch, "response matrix has " + std::to_string(n_exercises) +
                                                      " exercises but q-matrix has " + std::to_string(q.size()) + " rows");
    }
    const std::size_t n_concepts = q.front().size();
    if (!concept_names.empty() && concept_names.size() != n_concepts) {
        throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(n_concepts) + " concept names, got " +
                                                      std::to_string(concept_names.size()));
    }

    Dataset ds;
    for (std::size_t c = 0; c < n_concepts; ++c) ds.concepts.insert(ConceptId{"c" + std::to_string(c + 1)});

    std::vector<ExerciseId> exercise_ids;
    for (std::size_t e = 0; e < n_exercises; ++e) {
        Exercise ex;
        ex.id = ExerciseId{"e" + std::to_string(e + 1)};
        for (std::size_t c = 0; c < n_concepts; ++c) {
            if (!q[e][c]) continue;
            ConceptId cid{"c" + std::to_string(c + 1)};
            ex.concept_ids.push_back(cid);
            if (!concept_names.empty()) ex.concept_names.emplace(cid, concept_names[c]);
        }
        exercise_ids.push_back(ex.id);
        ds.exercises.emplace(ex.id, std::move(ex));
    }

    for (std::size_t s = 0; s < r.size(); ++s) {
        StudentId sid{"s" + std::to_string(s + 1)};
        StudentHistory h{sid, {}};
        h.records.reserve(n_exercises);
        for (std::size_t e = 0; e < n_exercises; ++e) {
            h.records.push_back(InteractionRecord{sid, exercise_ids[e], r[s][e], std::nullopt, std::nullopt, 0});
        }
        ds.histories.emplace(sid, std::move(h));
    }
    normalize_histories(ds);
    return ds;
}

Dataset load_frcsub(const fs::path& response_matrix_path, const fs::path& q_matrix_path,
                    const std::optional<fs::path>& concept_names_path) {
    auto r = open_input(response_matrix_path);
    auto q = open_input(q_matrix_path);
    std::vector<std::string> names;
    if (concept_names_path) {
        auto n = open_input(*concept_names_path);
        std::string line;
        while (std::getline(n, line)) {
            while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
            if (!line.empty()) names.push_back(line);
        }
    }
    return parse_frcsub(r, q, names);
}

Dataset load_frcsub_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "'" + dir.string() + "' is not a directory");
    std::optional<fs::path> names;
    if (fs::exists(dir / "qnames.txt")) names = dir / "qnames.txt";
    return load_frcsub(dir / "data.txt", dir / "q.txt", names);
}

Dataset parse_interaction_log(std::istream& in) {
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    auto malformed = [&lineno](const std::string& why) {
        return Error(ErrorKind::MalformedRecord, "line " + std::to_string(lineno) + ": " + why, lineno);
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); })) continue;

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw malformed(std::string("not a JSON object (") + e.what() + ")");
        }
        if (!obj.is_object()) throw malformed("not a JSON object");

        auto require_string = [&](const char* key) {
            if (!obj.contains(key)) throw malformed(std::string("missing key '") + key + "'");
            if (!obj[key].is_string() || obj[key].get_ref<const std::string&>().empty()) {
                throw malformed(std::string("'") + key + "' must be a non-empty string");
            }
            return obj[key].get<std::string>();
        };
        auto optional_int = [&](const char* key) -> std::optional<std::int64_t> {
            if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
            if (!obj[key].is_number_integer()) throw malformed(std::string("'") + key + "' must be an integer");
            return obj[key].get<std::int64_t>();
        };

        InteractionRecord rec;
        rec.student = StudentId{require_string("student_id")};
        rec.exercise = ExerciseId{require_string("exercise_id")};

        if (!obj.contains("correct")) throw malformed("missing key 'correct'");
        const auto& c = obj["correct"];
        if (c.is_boolean()) rec.correct = c.get<bool>();
        else if (c.is_number_integer() && (c.get<std::int64_t>() == 0 || c.get<std::int64_t>() == 1)) rec.correct = c.get<std::int64_t>() == 1;
        else throw malformed("'correct' must be 0 or 1");

        rec.timestamp = optional_int("timestamp");
        rec.duration = optional_int("duration");
        if (rec.duration && *rec.duration < 0) throw malformed("'duration' must be non-negative");

        if (!obj.contains("concept_ids")) throw malformed("missing key 'concept_ids'");
        if (!obj["concept_ids"].is_array() || obj["concept_ids"].empty()) throw malformed("'concept_ids' must be a non-empty list");
        Exercise ex;
        ex.id = rec.exercise;
        for (const auto& v : obj["concept_ids"]) {
            if (!v.is_string() || v.get_ref<const std::string&>().empty()) throw malformed("concept ids must be non-empty strings");
            ConceptId cid{v.get<std::string>()};
            if (std::find(ex.concept_ids.begin(), ex.concept_ids.end(), cid) != ex.concept_ids.end()) {
                throw malformed("duplicate concept id '" + cid.value + "'");
            }
            ex.concept_ids.push_back(std::move(cid));
        }
        if (obj.contains("exercise_text") && !obj["exercise_text"].is_null()) {
            if (!obj["exercise_text"].is_string()) throw malformed("'exercise_text' must be a string");
            ex.text = obj["exercise_text"].get<std::string>();
        }
        if (obj.contains("concept_names") && !obj["concept_names"].is_null()) {
            if (!obj["concept_names"].is_object()) throw malformed("'concept_names' must be an object");
            for (const auto& [k, v] : obj["concept_names"].items()) {
                if (!v.is_string()) throw malformed("concept names must be strings");
                ConceptId cid{k};
                if (std::find(ex.concept_ids.begin(), ex.concept_ids.end(), cid) == ex.concept_ids.end()) {
                    throw malformed("concept_names key '" + k + "' not among concept_ids");
                }
                ex.concept_names.emplace(std::move(cid), v.get<std::string>());
            }
        }

        auto [it, inserted] = ds.exercises.try_emplace(ex.id, ex);
        if (!inserted) {
            Exercise& known = it->second;
            if (known.concept_ids != ex.concept_ids) {
                throw malformed("exercise '" + ex.id.value + "' listed with different concept_ids than before");
            }
            if (ex.text) {
                if (known.text && *known.text != *ex.text) throw malformed("conflicting exercise_text for '" + ex.id.value + "'");
                known.text = ex.text;
            }
            for (auto& [k, v] : ex.concept_names) {
                auto [nit, fresh] = known.concept_names.try_emplace(k, v);
                if (!fresh && nit->second != v) throw malformed("conflicting name for concept '" + k.value + "'");
            }
        }
        for (const auto& cid : ex.concept_ids) ds.concepts.insert(cid);

        auto& hist = ds.histories[rec.student];
        hist.student = rec.student;
        hist.records.push_back(std::move(rec));
    }

    for (const auto& [sid, h] : ds.histories) {
        const auto timed = std::count_if(h.records.begin(), h.records.end(),
                                         [](const auto& r) { return r.timestamp.has_value(); });
        if (timed != 0 && static_cast<std::size_t>(timed) != h.records.size()) {
            throw Error(ErrorKind::MalformedRecord, "student '" + sid.value + "' mixes records with and without timestamps");
        }
    }
    normalize_histories(ds);
    return ds;
}

Dataset load_interaction_log(const fs::path& path) {
    auto in = open_input(path);
    return parse_interaction_log(in);
}

void write_interaction_log(const Dataset& dataset, std::ostream& out) {
    for (const auto& [sid, h] : dataset.histories) {
        for (const auto& r : h.records) {
            const auto& ex = dataset.exercise(r.exercise);
            json obj;
            obj["student_id"] = sid.value;
            obj["exercise_id"] = r.exercise.value;
            obj["correct"] = r.correct ? 1 : 0;
            json concepts = json::array();
            for (const auto& c : ex.concept_ids) concepts.push_back(c.value);
            obj["concept_ids"] = std::move(concepts);
            if (r.timestamp) obj["timestamp"] = *r.timestamp;
            if (r.duration) obj["duration"] = *r.duration;
            if (ex.text) obj["exercise_text"] = *ex.text;
            if (!ex.concept_names.empty()) {
                json names = json::object();
                for (const auto& [c, n] : ex.concept_names) names[c.value] = n;
                obj["concept_names"] = std::move(names);
            }
            out << obj.dump() << '\n';
        }
    }
}

void save_interaction_log(const Dataset& dataset, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
    write_interaction_log(dataset, out);
}

void save_frcsub_dir(const Dataset& dataset, const fs::path& dir) {
    if (dataset.histories.empty()) throw Error(ErrorKind::InvalidArgument, "nothing to write");
    std::vector<ExerciseId> columns;
    for (const auto& r : dataset.histories.begin()->second.records) columns.push_back(r.exercise);
    if (columns.size() != dataset.exercises.size()) {
        throw Error(ErrorKind::InvalidArgument, "FrcSub layout needs every student to answer every exercise once");
    }
    // Natural order so that c2 precedes c10.
    std::vector<ConceptId> concepts(dataset.concepts.begin(), dataset.concepts.end());
    std::sort(concepts.begin(), concepts.end(), [](const ConceptId& a, const ConceptId& b) {
        return std::pair(a.value.size(), a.value) < std::pair(b.value.size(), b.value);
    });
    std::vector<std::pair<std::size_t, std::string>> rows;
    for (const auto& [sid, h] : dataset.histories) {
        if (h.records.size() != columns.size()) {
            throw Error(ErrorKind::InvalidArgument, "student '" + sid.value + "' does not fit the FrcSub layout");
        }
        std::string row;
        for (std::size_t e = 0; e < columns.size(); ++e) {
            if (h.records[e].exercise != columns[e]) {
                throw Error(ErrorKind::InvalidArgument, "student '" + sid.value + "' answers in a different order");
            }
            if (e > 0) row += ' ';
            row += h.records[e].correct ? '1' : '0';
        }
        rows.emplace_back(sid.value.size(), sid.value + '\t' + row);
    }
    std::sort(rows.begin(), rows.end());

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
    std::ofstream data(dir / "data.txt"), q(dir / "q.txt");
    if (!data || !q) throw Error(ErrorKind::Io, "cannot write into '" + dir.string() + "'");
    for (const auto& [_, row] : rows) data << row.substr(row.find('\t') + 1) << '\n';
    bool named = false;
    for (const auto& ex : columns) {
        const auto& exercise = dataset.exercise(ex);
        std::string line;
        for (std::size_t c = 0; c < concepts.size(); ++c) {
            if (c > 0) line += ' ';
            const bool on = std::find(exercise.concept_ids.begin(), exercise.concept_ids.end(), concepts[c]) !=
                            exercise.concept_ids.end();
            line += on ? '1' : '0';
        }
        q << line << '\n';
        named = named || !exercise.concept_names.empty();
    }
    if (named) {
        std::ofstream names(dir / "qnames.txt");
        for (const auto& c : concepts) {
            std::string name = c.value;
            for (const auto& [_, ex] : dataset.exercises) {
                if (auto it = ex.concept_names.find(c); it != ex.concept_names.end()) {
                    name = it->second;
                    break;
                }
            }
            names << name << '\n';
        }
    }
}

DatasetFormat parse_format(std::string_view text) {
    if (text == "frcsub") return DatasetFormat::FrcSub;
    if (text == "log" || text == "jsonl") return DatasetFormat::Log;
    throw Error(ErrorKind::InvalidArgument, "unknown dataset format '" + std::string(text) + "' (expected frcsub|log)");
}

Dataset load_dataset(const fs::path& path, DatasetFormat format) {
    if (!fs::exists(path)) throw Error(ErrorKind::Io, "'" + path.string() + "' does not exist");
    if (format == DatasetFormat::FrcSub) return load_frcsub_dir(path);
    if (fs::is_directory(path)) throw Error(ErrorKind::Io, "'" + path.string() + "' is a directory, expected a log file");
    return load_interaction_log(path);
}

std::size_t test_count(std::size_t n, double test_fraction) {
    // Guard against 0.2 * 20 evaluating to 4.000000000000001 before the ceiling.
    const double raw = test_fraction * static_cast<double>(n);
    const double rounded = std::round(raw);
    const double held = std::abs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw);
    return static_cast<std::size_t>(held);
}

StudentSplit split_student(const StudentHistory& history, const SplitSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "test_fraction must lie in (0, 1)");
    }
    const std::size_t n = history.records.size();
    if (n < 2) {
        throw Error(ErrorKind::HistoryTooShort, "student '" + history.student.value + "' has " + std::to_string(n) +
                                                    " record(s); need at least 2");
    }
    std::size_t held = std::clamp<std::size_t>(test_count(n, spec.test_fraction), 1, n - 1);
    StudentSplit split;
    split.shots_pool.assign(history.records.begin(), history.records.end() - static_cast<std::ptrdiff_t>(held));
    split.test_records.assign(history.records.end() - static_cast<std::ptrdiff_t>(held), history.records.end());
    return split;
}

}  // namespace xfkt
