#include "xfkt/results_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "xfkt/error.hpp"

namespace xfkt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json metrics_json(const Metrics& m) {
    return json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                {"tp", m.tp},             {"fp", m.fp},               {"tn", m.tn},         {"fn", m.fn},
                {"fallback_rate", m.fallback_rate}};
}

Metrics metrics_from(const json& j) {
    Metrics m;
    m.accuracy = j.at("accuracy").get<double>();
    m.precision = j.at("precision").get<double>();
    m.recall = j.at("recall").get<double>();
    m.f1 = j.at("f1").get<double>();
    m.tp = j.at("tp").get<std::size_t>();
    m.fp = j.at("fp").get<std::size_t>();
    m.tn = j.at("tn").get<std::size_t>();
    m.fn = j.at("fn").get<std::size_t>();
    m.fallback_rate = j.at("fallback_rate").get<double>();
    return m;
}

json spread_json(const Spread& s) { return json{{"mean", s.mean}, {"std", s.std}, {"band_2sigma", s.band()}}; }

Spread spread_from(const json& j) { return Spread{j.at("mean").get<double>(), j.at("std").get<double>()}; }

json aggregate_json(const AggregateMetrics& a) {
    return json{{"accuracy", spread_json(a.accuracy)},
                {"precision", spread_json(a.precision)},
                {"recall", spread_json(a.recall)},
                {"f1", spread_json(a.f1)},
                {"fallback_rate", spread_json(a.fallback_rate)}};
}

AggregateMetrics aggregate_from(const json& j) {
    return AggregateMetrics{spread_from(j.at("accuracy")), spread_from(j.at("precision")), spread_from(j.at("recall")),
                            spread_from(j.at("f1")), spread_from(j.at("fallback_rate"))};
}

json ids_json(const std::vector<StudentId>& ids) {
    json a = json::array();
    for (const auto& s : ids) a.push_back(s.value);
    return a;
}

std::vector<StudentId> ids_from(const json& j) {
    std::vector<StudentId> out;
    for (const auto& s : j) out.push_back(StudentId{s.get<std::string>()});
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

json result_to_json(const ExperimentResult& result) {
    json j;
    j["method"] = result.method;
    j["config"] = result.config;
    j["partial"] = result.partial;
    j["failure"] = result.failure ? json(*result.failure) : json(nullptr);
    json reps = json::array();
    for (const auto& r : result.repeats) {
        reps.push_back({{"repeat", r.repeat},
                        {"seed", r.seed},
                        {"students", ids_json(r.students)},
                        {"skipped", ids_json(r.skipped)},
                        {"metrics", metrics_json(r.metrics)},
                        {"student_mean", metrics_json(r.student_mean)}});
    }
    j["repeats"] = std::move(reps);
    j["aggregate"] = aggregate_json(result.aggregate);
    j["student_aggregate"] = aggregate_json(result.student_aggregate);
    json preds = json::array();
    for (const auto& p : result.predictions) {
        json row{{"repeat", p.repeat},
                 {"student_id", p.student.value},
                 {"exercise_id", p.exercise.value},
                 {"target_seq", p.target_seq},
                 {"label", p.label ? 1 : 0},
                 {"prediction", p.prediction ? 1 : 0},
                 {"source", std::string(to_string(p.source))},
                 {"shots", p.shots},
                 {"provider_calls", p.provider_calls}};
        if (p.probability) row["probability"] = *p.probability;
        if (p.explanation) row["explanation"] = {{"text", p.explanation->text}, {"degraded", p.explanation->degraded}};
        preds.push_back(std::move(row));
    }
    j["predictions"] = std::move(preds);
    return j;
}

ExperimentResult result_from_json(const json& doc) {
    try {
        ExperimentResult r;
        r.method = doc.at("method").get<std::string>();
        r.config = doc.at("config");
        r.partial = doc.at("partial").get<bool>();
        if (!doc.at("failure").is_null()) r.failure = doc["failure"].get<std::string>();
        for (const auto& rep : doc.at("repeats")) {
            RepeatResult rr;
            rr.repeat = rep.at("repeat").get<std::size_t>();
            rr.seed = rep.at("seed").get<std::uint64_t>();
            rr.students = ids_from(rep.at("students"));
            rr.skipped = ids_from(rep.at("skipped"));
            rr.metrics = metrics_from(rep.at("metrics"));
            rr.student_mean = metrics_from(rep.at("student_mean"));
            r.repeats.push_back(std::move(rr));
        }
        r.aggregate = aggregate_from(doc.at("aggregate"));
        r.student_aggregate = aggregate_from(doc.at("student_aggregate"));
        for (const auto& p : doc.at("predictions")) {
            PredictionRecord rec;
            rec.repeat = p.at("repeat").get<std::size_t>();
            rec.student = StudentId{p.at("student_id").get<std::string>()};
            rec.exercise = ExerciseId{p.at("exercise_id").get<std::string>()};
            rec.target_seq = p.at("target_seq").get<std::size_t>();
            rec.label = p.at("label").get<int>() == 1;
            rec.prediction = p.at("prediction").get<int>() == 1;
            const auto src = p.at("source").get<std::string>();
            if (src == "parsed") rec.source = PredictionSource::Parsed;
            else if (src == "fallback") rec.source = PredictionSource::Fallback;
            else throw Error(ErrorKind::CorruptResults, "unknown prediction source '" + src + "'");
            rec.shots = p.at("shots").get<std::size_t>();
            rec.provider_calls = p.at("provider_calls").get<std::size_t>();
            if (p.contains("probability")) rec.probability = p["probability"].get<double>();
            if (p.contains("explanation")) {
                rec.explanation = Explanation{p["explanation"].at("text").get<std::string>(),
                                              p["explanation"].at("degraded").get<bool>()};
            }
            r.predictions.push_back(std::move(rec));
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptResults, std::string("malformed results document: ") + e.what());
    }
}

std::string predictions_csv(const ExperimentResult& result) {
    std::string out = "repeat,student_id,exercise_id,target_seq,label,prediction,source,shots,provider_calls,probability,"
                      "explanation_degraded,explanation\n";
    for (const auto& p : result.predictions) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", p.repeat, csv_field(p.student.value),
                           csv_field(p.exercise.value), p.target_seq, p.label ? 1 : 0, p.prediction ? 1 : 0,
                           to_string(p.source), p.shots, p.provider_calls,
                           p.probability ? fmt::format("{:.6f}", *p.probability) : std::string{},
                           p.explanation ? (p.explanation->degraded ? "1" : "0") : "",
                           p.explanation ? csv_field(p.explanation->text) : std::string{});
    }
    return out;
}

std::string summary_markdown(const ExperimentResult& result) {
    std::string md = fmt::format("# {}\n\n", result.method);
    if (result.partial) md += fmt::format("**Partial run**: {}\n\n", result.failure.value_or("stopped early"));
    md += "## Per repeat (prediction level)\n\n"
          "| Repeat | Students | Skipped | Predictions | Accuracy | Precision | Recall | F1 | Fallback rate |\n"
          "|--------|----------|---------|-------------|----------|-----------|--------|----|---------------|\n";
    for (const auto& r : result.repeats) {
        md += fmt::format("| {} | {} | {} | {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} |\n", r.repeat,
                          r.students.size(), r.skipped.size(), r.metrics.total(), r.metrics.accuracy,
                          r.metrics.precision, r.metrics.recall, r.metrics.f1, r.metrics.fallback_rate);
    }
    auto row = [](std::string_view label, const AggregateMetrics& a) {
        return fmt::format("| {} | {:.4f} ± {:.4f} | {:.4f} ± {:.4f} | {:.4f} ± {:.4f} | {:.4f} ± {:.4f} | {:.4f} |\n",
                           label, a.accuracy.mean, a.accuracy.band(), a.precision.mean, a.precision.band(),
                           a.recall.mean, a.recall.band(), a.f1.mean, a.f1.band(), a.fallback_rate.mean);
    };
    md += "\n## Aggregate (mean ± 2σ over repeats)\n\n"
          "| Level | Accuracy | Precision | Recall | F1 | Fallback rate |\n"
          "|-------|----------|-----------|--------|----|---------------|\n";
    md += row("prediction", result.aggregate);
    md += row("student mean", result.student_aggregate);
    return md;
}

void write_results_dir(const ExperimentResult& result, const fs::path& dir, const json& effective_config) {
    std::error_code ec;
    fs::create_directories(dir / "reports", ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());

    write_file(dir / "results.json", result_to_json(result).dump(2) + "\n");
    write_file(dir / "predictions.csv", predictions_csv(result));
    write_file(dir / "summary.md", summary_markdown(result));
    write_file(dir / "config.json", effective_config.dump(2) + "\n");
    for (const auto& rep : result.reports) {
        const auto stem = fmt::format("r{}_{}", rep.repeat, rep.student.value);
        write_file(dir / "reports" / (stem + ".json"), report_to_json(rep).dump(2) + "\n");
        write_file(dir / "reports" / (stem + ".md"), report_to_markdown(rep));
    }
}

ExperimentResult read_results(const fs::path& dir) {
    const auto path = dir / "results.json";
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptResults, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
    try {
        return result_from_json(doc);
    } catch (const Error& e) {
        throw Error(ErrorKind::CorruptResults, "'" + path.string() + "': " + e.what());
    }
}

}  // namespace xfkt
