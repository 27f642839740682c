#include "xfkt/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "xfkt/baseline_runner.hpp"
#include "xfkt/evaluation.hpp"
#include "xfkt/http_provider.hpp"
#include "xfkt/ingestion.hpp"
#include "xfkt/results_io.hpp"
#include "xfkt/synthetic.hpp"
#include "xfkt/transcript_cache.hpp"

namespace xfkt {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Io: return kExitIo;
        case ErrorKind::ProviderUnavailable:
        case ErrorKind::AuthError:
        case ErrorKind::BudgetExceeded:
        case ErrorKind::ReplayMiss: return kExitProvider;
        case ErrorKind::MalformedMatrix:
        case ErrorKind::DimensionMismatch:
        case ErrorKind::MalformedRecord:
        case ErrorKind::UnknownExercise:
        case ErrorKind::ModeUnavailable:
        case ErrorKind::EmptyPool:
        case ErrorKind::HistoryTooShort: return kExitData;
        case ErrorKind::SeedMismatch:
        case ErrorKind::CorruptResults: return kExitResults;
        default: return kExitUsage;
    }
}

namespace {

struct DataFlags {
    std::string dataset;
    std::string format = "frcsub";
};

struct ProtocolFlags {
    std::string mode = "scant";
    std::string select = "first";
    std::size_t shots = 4;
    std::size_t students = 50;
    std::size_t repeats = 3;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
    cmd->add_option("--dataset", f.dataset, "Dataset path (FrcSub directory or JSONL log)")->required();
    cmd->add_option("--format", f.format, "Dataset format")->check(CLI::IsMember({"frcsub", "log", "jsonl"}));
}

void add_protocol_flags(CLI::App* cmd, ProtocolFlags& f) {
    cmd->add_option("--mode", f.mode, "Information tier")->check(CLI::IsMember({"scant", "sparse", "moderate"}));
    cmd->add_option("--select", f.select, "Shot selection strategy")
        ->check(CLI::IsMember({"first", "first_k", "random", "random_k"}));
    cmd->add_option("--shots", f.shots, "Shots per student")->check(CLI::PositiveNumber);
    cmd->add_option("--students", f.students, "Students sampled per repeat")->check(CLI::PositiveNumber);
    cmd->add_option("--repeats", f.repeats, "Number of repeats")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "Base seed");
    cmd->add_option("--test-fraction", f.test_fraction, "Held-out fraction of each history")
        ->check(CLI::Range(0.0, 1.0));
}

std::shared_ptr<const Dataset> load(const DataFlags& f) {
    return std::make_shared<const Dataset>(load_dataset(f.dataset, parse_format(f.format)));
}

ExperimentConfig make_config(const DataFlags& d, const ProtocolFlags& p, std::shared_ptr<const Dataset> dataset) {
    ExperimentConfig c;
    c.dataset_digest = dataset_digest(*dataset);
    c.dataset = std::move(dataset);
    c.dataset_path = d.dataset;
    c.dataset_format = d.format == "jsonl" ? "log" : d.format;
    c.mode = parse_mode(p.mode);
    c.strategy.kind = parse_selection(p.select);
    c.strategy.k = p.shots;
    c.n_students = p.students;
    c.repeats = p.repeats;
    c.seed = p.seed;
    c.split.test_fraction = p.test_fraction;
    c.split.seed = p.seed;
    return c;
}

std::string short_number(double v) { return fmt::format("{}", std::round(v * 100.0) / 100.0); }

int cmd_ingest(const DataFlags& d, bool as_json, std::ostream& out, std::ostream& err) {
    const auto ds = load(d);
    const auto violations = validate_dataset(*ds);
    if (!violations.empty()) {
        for (const auto& v : violations) err << "invalid dataset: " << to_string(v.kind) << ": " << v.detail << "\n";
        return kExitData;
    }
    const auto st = compute_stats(*ds);
    if (as_json) {
        json j{{"students", st.students},       {"exercises", st.exercises},     {"skills", st.skills},
               {"records", st.records},         {"avg_skills", st.avg_skills()}, {"avg_records", st.avg_records()},
               {"has_timestamps", st.has_timestamps}, {"has_exercise_text", ds->has_exercise_text()}};
        out << j.dump(2) << "\n";
        return kExitOk;
    }
    out << "| Students | Exercises | Skills | Records | Avg skills/exercise | Avg records/student |\n"
        << "|----------|-----------|--------|---------|---------------------|---------------------|\n"
        << fmt::format("| {} | {} | {} | {} | {} | {} |\n", st.students, st.exercises, st.skills, st.records,
                       short_number(st.avg_skills()), short_number(st.avg_records()));
    return kExitOk;
}

struct RunFlags {
    std::string provider = "mock";
    std::string model = "default";
    bool explain = false;
    std::string replay;
    std::string cache;
    std::string templates;
    std::string out;
    std::size_t max_in_flight = 4;
    std::size_t max_context = 0;
    std::int64_t max_tokens = 0;
};

ProviderPtr make_provider(const RunFlags& f, const std::shared_ptr<const Dataset>& dataset) {
    if (f.provider == "mock") return make_mock_provider();
    if (f.provider == "oracle") return make_oracle_provider(dataset);
    if (f.provider == "anti-oracle") return make_anti_oracle_provider(dataset);
    if (f.provider == "unparseable") return make_unparseable_provider();
    return make_http_provider_from_env();
}

int cmd_run(const DataFlags& d, const ProtocolFlags& p, const RunFlags& f, std::ostream& out, std::ostream& err) {
    auto config = make_config(d, p, load(d));
    config.explain = f.explain;
    config.max_in_flight = f.max_in_flight;
    config.prompt_options.max_context_shots = f.max_context;
    config.cognition.generation.set_model(f.model);
    config.provider_id = f.provider;
    config.method = "llm-" + f.provider;
    if (!f.templates.empty()) config.templates = TemplateSet::load_dir(f.templates);

    ProviderPtr provider;
    std::shared_ptr<TranscriptCache> cache;
    if (!f.replay.empty()) {
        cache = std::make_shared<TranscriptCache>(f.replay, CacheMode::Replay);
        provider = std::make_shared<CachedProvider>(nullptr, cache);
    } else {
        ProviderPtr inner = make_provider(f, config.dataset);
        if (f.max_tokens > 0) inner = std::make_shared<BudgetedProvider>(inner, f.max_tokens);
        const fs::path dir = f.cache.empty() ? fs::path(f.out) / "transcripts" : fs::path(f.cache);
        cache = std::make_shared<TranscriptCache>(dir, CacheMode::ReadWrite);
        provider = std::make_shared<CachedProvider>(inner, cache);
    }

    const auto result = run_experiment(config, provider);

    json effective = config_to_json(config);
    effective["max_in_flight"] = f.max_in_flight;
    effective["templates"] = f.templates;
    effective["cache"] = cache->dir().string();
    effective["replay"] = !f.replay.empty();
    write_results_dir(result, f.out, effective);

    out << summary_markdown(result);
    if (result.partial) {
        err << "run stopped early: " << result.failure.value_or("provider failure") << "\n"
            << "partial results written to " << f.out << "\n";
        return kExitProvider;
    }
    return kExitOk;
}

struct BaselineFlags {
    std::string method = "bkt";
    std::string reference;
    std::string out;
};

int cmd_baseline(const DataFlags& d, const ProtocolFlags& p, const BaselineFlags& f, std::ostream& out) {
    auto config = make_config(d, p, load(d));
    const auto method = parse_baseline_method(f.method);
    if (!f.reference.empty()) {
        const auto ref = read_results(f.reference);
        auto mine = config_to_json(config);
        check_comparable(ref.config, mine);
    }
    const auto output = run_baseline(config, method, EmOptions{});
    json effective = output.result.config;
    if (!f.reference.empty()) effective["reference"] = f.reference;
    write_results_dir(output.result, f.out, effective);

    auto write = [](const fs::path& path, const std::string& text) {
        std::ofstream o(path);
        o << text;
        if (!o) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
    };
    if (method == BaselineMethod::Bkt) {
        write(fs::path(f.out) / "params.json", export_bkt_params(output.models.front()));
    } else if (method == BaselineMethod::BktShotsOnly) {
        for (std::size_t r = 0; r < output.models.size(); ++r) {
            write(fs::path(f.out) / fmt::format("params_r{}.json", r), export_bkt_params(output.models[r]));
        }
    }
    out << summary_markdown(output.result);
    return kExitOk;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out_path, std::ostream& out) {
    if (dirs.size() < 2) throw Error(ErrorKind::InvalidArgument, "need >= 2 result directories to compare");
    std::vector<ExperimentResult> results;
    std::map<std::string, int> seen;
    for (const auto& d : dirs) results.push_back(read_results(d));
    for (const auto& r : results) ++seen[r.method];
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (seen[results[i].method] > 1) {
            results[i].method += " (" + fs::path(dirs[i]).lexically_normal().filename().string() + ")";
        }
    }
    const auto rows = compare_runs(results);
    const auto md = comparison_to_markdown(rows);
    out << md;
    if (!out_path.empty()) {
        std::ofstream o(out_path);
        o << md;
        if (!o) throw Error(ErrorKind::Io, "cannot write '" + out_path + "'");
    }
    return kExitOk;
}

struct SynthFlags {
    SyntheticSpec spec;
    std::string format = "frcsub";
    std::string out;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
    const auto ds = make_synthetic_dataset(f.spec);
    if (f.format == "frcsub") {
        save_frcsub_dir(ds, f.out);
    } else {
        const fs::path path(f.out);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        save_interaction_log(ds, path);
    }
    const auto st = compute_stats(ds);
    out << fmt::format("wrote {} students, {} exercises, {} skills, {} records to {}\n", st.students, st.exercises,
                       st.skills, st.records, f.out);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Few-shot knowledge tracing experiments with chat-completion models", "xfkt"};
    app.require_subcommand(1);

    DataFlags ingest_data;
    bool ingest_json = false;
    auto* ingest = app.add_subcommand("ingest", "Validate a dataset and print its statistics");
    add_data_flags(ingest, ingest_data);
    ingest->add_flag("--json", ingest_json, "Print statistics as JSON");

    DataFlags run_data;
    ProtocolFlags run_protocol;
    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "Run an experiment and write a results directory");
    run->set_config("--config", "", "TOML or INI file with default flag values");
    add_data_flags(run, run_data);
    add_protocol_flags(run, run_protocol);
    run->add_option("--provider", run_flags.provider, "Completion provider")
        ->check(CLI::IsMember({"http", "mock", "oracle", "anti-oracle", "unparseable"}));
    run->add_option("--model", run_flags.model, "Model id sent to the provider");
    run->add_flag("--explain", run_flags.explain, "Also request an explanation per prediction");
    run->add_option("--replay", run_flags.replay, "Serve every completion from this cache; a miss is an error");
    run->add_option("--cache", run_flags.cache, "Transcript cache directory (default <out>/transcripts)");
    run->add_option("--templates", run_flags.templates, "Directory of prompt template overrides");
    run->add_option("--out", run_flags.out, "Results directory")->required();
    run->add_option("--max-in-flight", run_flags.max_in_flight, "Students processed concurrently")
        ->check(CLI::PositiveNumber);
    run->add_option("--max-context", run_flags.max_context, "Earlier shots kept in analysis prompts (0 = all)");
    run->add_option("--max-tokens", run_flags.max_tokens, "Token budget for the whole run (0 = unlimited)");

    DataFlags base_data;
    ProtocolFlags base_protocol;
    BaselineFlags base_flags;
    auto* baseline = app.add_subcommand("baseline", "Evaluate a classical baseline on the same targets");
    baseline->set_config("--config", "", "TOML or INI file with default flag values");
    add_data_flags(baseline, base_data);
    add_protocol_flags(baseline, base_protocol);
    baseline->add_option("--method", base_flags.method, "Baseline")
        ->check(CLI::IsMember({"bkt", "bkt-shots", "majority"}));
    baseline->add_option("--reference", base_flags.reference, "LLM results directory the split must match");
    baseline->add_option("--out", base_flags.out, "Results directory")->required();

    std::vector<std::string> report_dirs;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Compare result directories");
    report->add_option("dirs", report_dirs, "Result directories")->required();
    report->add_option("--out", report_out, "Also write the table to this file");

    SynthFlags synth_flags;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from known BKT parameters");
    synth->add_option("--students", synth_flags.spec.students)->check(CLI::PositiveNumber);
    synth->add_option("--exercises", synth_flags.spec.exercises)->check(CLI::PositiveNumber);
    synth->add_option("--concepts", synth_flags.spec.concepts)->check(CLI::PositiveNumber);
    synth->add_option("--attempts", synth_flags.spec.attempts_per_student, "Attempts per student (0 = one per exercise)");
    synth->add_flag("--timestamps", synth_flags.spec.timestamps);
    synth->add_flag("--names", synth_flags.spec.concept_names, "Attach concept names");
    synth->add_flag("--text", synth_flags.spec.exercise_text, "Attach exercise text");
    synth->add_option("--seed", synth_flags.spec.seed);
    synth->add_option("--format", synth_flags.format)->check(CLI::IsMember({"frcsub", "log"}));
    synth->add_option("--out", synth_flags.out, "Output directory (frcsub) or file (log)")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        // --help and --version exit cleanly; everything else is a usage error.
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*ingest) return cmd_ingest(ingest_data, ingest_json, out, err);
        if (*run) return cmd_run(run_data, run_protocol, run_flags, out, err);
        if (*baseline) return cmd_baseline(base_data, base_protocol, base_flags, out);
        if (*report) return cmd_report(report_dirs, report_out, out);
        if (*synth) return cmd_synth(synth_flags, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitUsage;
}

}  // namespace xfkt
