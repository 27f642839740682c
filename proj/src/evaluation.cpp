#include "xfkt/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "xfkt/hashing.hpp"

namespace xfkt {

using nlohmann::json;

std::string dataset_digest(const Dataset& dataset) {
    std::ostringstream out;
    write_interaction_log(dataset, out);
    return sha256_hex(out.str());
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["method"] = c.method;
    j["dataset"] = {{"path", c.dataset_path}, {"format", c.dataset_format}, {"digest", c.dataset_digest}};
    j["mode"] = std::string(to_string(c.mode));
    j["selection"] = {{"strategy", std::string(to_string(c.strategy.kind))}, {"k", c.strategy.k}};
    j["n_students"] = c.n_students;
    j["repeats"] = c.repeats;
    j["split"] = {{"test_fraction", c.split.test_fraction}, {"seed", c.split.seed}};
    j["seed"] = c.seed;
    j["explain"] = c.explain;
    j["provider"] = c.provider_id;
    j["max_context_shots"] = c.prompt_options.max_context_shots;
    j["retries"] = c.cognition.retries;
    json gen;
    for (const auto& [name, p] : {std::pair{"ksa", &c.cognition.generation.ksa}, std::pair{"lti", &c.cognition.generation.lti},
                                  std::pair{"pp", &c.cognition.generation.pp}, std::pair{"lpe", &c.cognition.generation.lpe}}) {
        gen[name] = {{"model_id", p->model_id}, {"temperature", p->temperature}, {"max_tokens", p->max_tokens}};
    }
    j["generation"] = std::move(gen);
    return j;
}

std::vector<std::vector<StudentId>> sample_students(const Dataset& dataset, std::size_t n_students,
                                                    std::size_t repeats, std::uint64_t seed) {
    if (n_students == 0) throw Error(ErrorKind::InvalidArgument, "n_students must be >= 1");
    if (repeats == 0) throw Error(ErrorKind::InvalidArgument, "repeats must be >= 1");
    if (n_students > dataset.histories.size()) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("asked for {} students but the dataset has {}", n_students,
                                                            dataset.histories.size()));
    }
    std::vector<StudentId> all;
    for (const auto& [sid, _] : dataset.histories) all.push_back(sid);

    std::set<StudentId> used;
    std::vector<std::vector<StudentId>> out;
    for (std::size_t r = 0; r < repeats; ++r) {
        std::mt19937_64 rng(seed + r);
        std::vector<StudentId> fresh, old;
        for (const auto& s : all) (used.contains(s) ? old : fresh).push_back(s);

        std::vector<StudentId> picked;
        if (fresh.size() >= n_students) {
            std::sample(fresh.begin(), fresh.end(), std::back_inserter(picked), n_students, rng);
        } else {
            picked = fresh;
            std::sample(old.begin(), old.end(), std::back_inserter(picked), n_students - fresh.size(), rng);
            std::sort(picked.begin(), picked.end());
        }
        for (const auto& s : picked) used.insert(s);
        out.push_back(std::move(picked));
    }
    return out;
}

std::uint64_t student_seed(std::uint64_t base_seed, std::size_t repeat, const StudentId& student) {
    return mix_seed(base_seed + repeat, fnv1a64(student.value));
}

std::optional<StudentPlan> plan_student(const Dataset& dataset, const StudentId& student,
                                        const ExperimentConfig& config, std::size_t repeat) {
    auto it = dataset.histories.find(student);
    if (it == dataset.histories.end()) throw Error(ErrorKind::InvalidArgument, "unknown student '" + student.value + "'");

    StudentSplit split;
    try {
        split = split_student(it->second, config.split);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::HistoryTooShort) return std::nullopt;
        throw;
    }
    StudentPlan plan;
    plan.student = student;
    plan.seed = student_seed(config.seed, repeat, student);
    for (auto& r : split.test_records) plan.targets.push_back(PredictionTarget{std::move(r)});
    SelectionStrategy strategy = config.strategy;
    strategy.seed = plan.seed;
    plan.shots = select_shots(split.shots_pool, strategy, plan.targets);
    plan.pool = std::move(split.shots_pool);
    return plan;
}

bool is_provider_failure(ErrorKind kind) noexcept {
    return kind == ErrorKind::ProviderUnavailable || kind == ErrorKind::AuthError || kind == ErrorKind::BudgetExceeded ||
           kind == ErrorKind::ReplayMiss;
}

namespace {

Metrics metrics_of(const std::vector<const PredictionRecord*>& recs) {
    std::vector<std::uint8_t> p, y, f;
    for (const auto* r : recs) {
        p.push_back(r->prediction ? 1 : 0);
        y.push_back(r->label ? 1 : 0);
        f.push_back(r->source == PredictionSource::Fallback ? 1 : 0);
    }
    return compute_metrics(p, y, f);
}

AggregateMetrics aggregate_of(const std::vector<Metrics>& ms) {
    std::vector<double> a, p, r, f, fb;
    for (const auto& m : ms) {
        a.push_back(m.accuracy);
        p.push_back(m.precision);
        r.push_back(m.recall);
        f.push_back(m.f1);
        fb.push_back(m.fallback_rate);
    }
    return AggregateMetrics{spread_of(a), spread_of(p), spread_of(r), spread_of(f), spread_of(fb)};
}

}  // namespace

void finalize_metrics(ExperimentResult& result) {
    std::vector<Metrics> per_repeat, per_repeat_students;
    for (auto& rep : result.repeats) {
        std::vector<const PredictionRecord*> recs;
        std::map<StudentId, std::vector<const PredictionRecord*>> by_student;
        for (const auto& p : result.predictions) {
            if (p.repeat != rep.repeat) continue;
            recs.push_back(&p);
            by_student[p.student].push_back(&p);
        }
        rep.metrics = recs.empty() ? Metrics{} : metrics_of(recs);

        // Student order follows the sample so the floating-point sums are
        // reproducible.
        Metrics mean;
        std::size_t n = 0;
        for (const auto& s : rep.students) {
            auto it = by_student.find(s);
            if (it == by_student.end()) continue;
            const auto m = metrics_of(it->second);
            mean.accuracy += m.accuracy;
            mean.precision += m.precision;
            mean.recall += m.recall;
            mean.f1 += m.f1;
            mean.fallback_rate += m.fallback_rate;
            ++n;
        }
        if (n > 0) {
            const auto d = static_cast<double>(n);
            mean.accuracy /= d;
            mean.precision /= d;
            mean.recall /= d;
            mean.f1 /= d;
            mean.fallback_rate /= d;
        }
        rep.student_mean = mean;
        if (!recs.empty()) {
            per_repeat.push_back(rep.metrics);
            per_repeat_students.push_back(rep.student_mean);
        }
    }
    result.aggregate = aggregate_of(per_repeat);
    result.student_aggregate = aggregate_of(per_repeat_students);
}

namespace {

struct StudentOutcome {
    std::vector<PredictionRecord> predictions;
    std::optional<StudentReport> report;
    bool skipped = false;
    std::exception_ptr error;
};

StudentOutcome run_student(const ExperimentConfig& config, const ProviderPtr& provider, const PromptBuilder& prompts,
                           const StudentId& student, std::size_t repeat) {
    StudentOutcome out;
    auto plan = plan_student(*config.dataset, student, config, repeat);
    if (!plan) {
        out.skipped = true;
        return out;
    }

    std::optional<TraceState> first_trace;
    std::vector<std::pair<PredictionTarget, Prediction>> preds;
    std::vector<Explanation> explanations;
    for (const auto& target : plan->targets) {
        // The whole chain runs again for every target, so each prediction
        // costs 2s + 1 calls (one more with explanations).
        auto counter = std::make_shared<CountingProvider>(provider);
        auto trace = analyze_shots(*counter, plan->shots, prompts, config.cognition);
        const auto outcome = predict_performance(*counter, trace, plan->shots, target, prompts,
                                                 mix_seed(plan->seed, target.record.seq), config.cognition);

        PredictionRecord rec;
        rec.repeat = repeat;
        rec.student = student;
        rec.exercise = target.record.exercise;
        rec.target_seq = target.record.seq;
        rec.label = target.record.correct;
        rec.prediction = outcome.prediction.value;
        rec.source = outcome.prediction.source;
        rec.shots = plan->shots.size();
        if (config.explain) {
            rec.explanation = explain_prediction(*counter, plan->shots, trace, target, outcome.prediction, prompts,
                                                 config.cognition);
            explanations.push_back(*rec.explanation);
        }
        rec.provider_calls = counter->calls();
        out.predictions.push_back(std::move(rec));
        preds.emplace_back(target, outcome.prediction);
        if (!first_trace) first_trace = std::move(trace);
    }
    if (first_trace) {
        out.report = assemble_student_report(student, plan->shots, *first_trace, preds, explanations, repeat);
    }
    return out;
}

ExperimentResult run(const ExperimentConfig& config, ProviderPtr provider, bool parallel) {
    if (!config.dataset) throw Error(ErrorKind::InvalidArgument, "experiment config has no dataset");
    if (!provider) throw Error(ErrorKind::InvalidArgument, "experiment needs a provider");
    if (config.max_in_flight == 0) throw Error(ErrorKind::InvalidArgument, "max_in_flight must be >= 1");

    const PromptBuilder prompts(project_mode(config.dataset, config.mode), config.templates, config.prompt_options);
    const auto samples = sample_students(*config.dataset, config.n_students, config.repeats, config.seed);

    ExperimentResult result;
    result.method = config.method;
    result.config = config_to_json(config);

    for (std::size_t r = 0; r < samples.size() && !result.failure; ++r) {
        const auto& students = samples[r];
        std::vector<StudentOutcome> outcomes(students.size());
        std::atomic<bool> stop{false};
        const auto n = static_cast<std::ptrdiff_t>(students.size());
        const int threads = parallel ? static_cast<int>(config.max_in_flight) : 1;

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (parallel)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (stop.load()) continue;
            try {
                outcomes[idx] = run_student(config, provider, prompts, students[idx], r);
            } catch (const Error& e) {
                outcomes[idx].error = std::current_exception();
                if (is_provider_failure(e.kind())) stop.store(true);
            } catch (...) {
                outcomes[idx].error = std::current_exception();
            }
        }

        RepeatResult rep;
        rep.repeat = r;
        rep.seed = config.seed + r;
        rep.students = students;
        std::exception_ptr fatal;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            auto& o = outcomes[i];
            if (o.error) {
                try {
                    std::rethrow_exception(o.error);
                } catch (const Error& e) {
                    if (!is_provider_failure(e.kind())) {
                        if (!fatal) fatal = o.error;
                    } else if (!result.failure) {
                        result.failure = fmt::format("{}: {} (student {}, repeat {})", to_string(e.kind()), e.what(),
                                                     students[i].value, r);
                    }
                } catch (...) {
                    if (!fatal) fatal = o.error;
                }
                continue;
            }
            if (o.skipped) {
                rep.skipped.push_back(students[i]);
                continue;
            }
            for (auto& p : o.predictions) result.predictions.push_back(std::move(p));
            if (o.report) result.reports.push_back(std::move(*o.report));
        }
        if (fatal) std::rethrow_exception(fatal);
        result.repeats.push_back(std::move(rep));
    }
    result.partial = result.failure.has_value();
    finalize_metrics(result);
    return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, ProviderPtr provider) {
    return run(config, std::move(provider), true);
}

namespace serial {
ExperimentResult run_experiment(const ExperimentConfig& config, ProviderPtr provider) {
    return run(config, std::move(provider), false);
}
}  // namespace serial

std::vector<ComparisonRow> compare_runs(std::span<const ExperimentResult> results) {
    if (results.size() < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 results to compare");
    std::vector<ComparisonRow> rows;
    for (const auto& r : results) {
        rows.push_back(ComparisonRow{r.method, r.repeats.size(), r.predictions.size(), r.aggregate});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        if (a.aggregate.accuracy.mean != b.aggregate.accuracy.mean) return a.aggregate.accuracy.mean > b.aggregate.accuracy.mean;
        return a.method < b.method;
    });
    return rows;
}

std::string comparison_to_markdown(std::span<const ComparisonRow> rows) {
    std::string md = "| Rank | Method | Repeats | Predictions | Accuracy | Precision | Recall | F1 |\n"
                     "|------|--------|---------|-------------|----------|-----------|--------|----|\n";
    auto cell = [](const Spread& s) { return fmt::format("{:.4f} ± {:.4f}", s.mean, s.band()); };
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        md += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} |\n", i + 1, r.method, r.repeats, r.predictions,
                          cell(r.aggregate.accuracy), cell(r.aggregate.precision), cell(r.aggregate.recall),
                          cell(r.aggregate.f1));
    }
    return md;
}

}  // namespace xfkt
