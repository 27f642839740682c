#include "xfkt/baseline_runner.hpp"

#include <map>

#include <fmt/format.h>

#include "xfkt/error.hpp"

namespace xfkt {

using nlohmann::json;

std::string_view to_string(BaselineMethod method) {
    switch (method) {
        case BaselineMethod::Bkt: return "bkt";
        case BaselineMethod::BktShotsOnly: return "bkt-shots";
        case BaselineMethod::Majority: return "majority";
    }
    return "?";
}

BaselineMethod parse_baseline_method(std::string_view text) {
    if (text == "bkt") return BaselineMethod::Bkt;
    if (text == "bkt-shots" || text == "bkt_shots") return BaselineMethod::BktShotsOnly;
    if (text == "majority") return BaselineMethod::Majority;
    throw Error(ErrorKind::InvalidArgument, "unknown baseline method '" + std::string(text) + "'");
}

namespace {

// Every student's pre-split pool; histories too short to split contribute in
// full since they never supply a target.
std::map<StudentId, std::vector<InteractionRecord>> training_pools(const Dataset& dataset, const SplitSpec& split) {
    std::map<StudentId, std::vector<InteractionRecord>> pools;
    for (const auto& [sid, h] : dataset.histories) {
        try {
            pools[sid] = split_student(h, split).shots_pool;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::HistoryTooShort) throw;
            pools[sid] = h.records;
        }
    }
    return pools;
}

}  // namespace

BaselineOutput run_baseline(const ExperimentConfig& config, BaselineMethod method, const EmOptions& em) {
    if (!config.dataset) throw Error(ErrorKind::InvalidArgument, "baseline config has no dataset");
    const Dataset& ds = *config.dataset;

    ExperimentConfig echo = config;
    echo.method = std::string(to_string(method));
    echo.provider_id = "none";
    echo.explain = false;

    BaselineOutput out;
    out.result.method = echo.method;
    out.result.config = config_to_json(echo);

    std::optional<BktModel> full_model;
    std::optional<bool> majority;
    if (method != BaselineMethod::BktShotsOnly) {
        const auto pools = training_pools(ds, config.split);
        if (method == BaselineMethod::Bkt) {
            EmOptions opt = em;
            opt.seed = config.seed;
            full_model = fit_bkt(group_by_concept(ds, pools), ds.concepts, opt);
            out.models.push_back(*full_model);
        } else {
            std::vector<InteractionRecord> train;
            for (const auto& [_, recs] : pools) train.insert(train.end(), recs.begin(), recs.end());
            majority = majority_predict(train);
        }
    }

    const auto samples = sample_students(ds, config.n_students, config.repeats, config.seed);
    for (std::size_t r = 0; r < samples.size(); ++r) {
        RepeatResult rep;
        rep.repeat = r;
        rep.seed = config.seed + r;
        rep.students = samples[r];

        std::vector<StudentPlan> plans;
        for (const auto& sid : samples[r]) {
            if (auto plan = plan_student(ds, sid, config, r)) plans.push_back(std::move(*plan));
            else rep.skipped.push_back(sid);
        }

        const BktModel* model = full_model ? &*full_model : nullptr;
        if (method == BaselineMethod::BktShotsOnly) {
            std::map<StudentId, std::vector<InteractionRecord>> shots;
            for (const auto& p : plans) shots[p.student] = p.shots;
            EmOptions opt = em;
            opt.seed = config.seed + r;
            out.models.push_back(fit_bkt(group_by_concept(ds, shots), ds.concepts, opt));
            model = &out.models.back();
        }

        for (const auto& plan : plans) {
            const auto& prefix = method == BaselineMethod::BktShotsOnly ? plan.shots : plan.pool;
            for (const auto& t : plan.targets) {
                PredictionRecord rec;
                rec.repeat = r;
                rec.student = plan.student;
                rec.exercise = t.record.exercise;
                rec.target_seq = t.record.seq;
                rec.label = t.record.correct;
                rec.shots = prefix.size();
                if (model) {
                    const auto p = bkt_predict(*model, ds, prefix, t.record.exercise);
                    rec.prediction = p.value;
                    rec.probability = p.probability;
                } else {
                    rec.prediction = *majority;
                }
                out.result.predictions.push_back(std::move(rec));
            }
        }
        out.result.repeats.push_back(std::move(rep));
    }
    finalize_metrics(out.result);
    return out;
}

void check_comparable(const json& reference_config, const json& config) {
    static const char* const kFields[] = {"/seed", "/split", "/n_students", "/repeats", "/selection", "/dataset/digest"};
    for (const char* field : kFields) {
        const json::json_pointer ptr(field);
        const auto a = reference_config.contains(ptr) ? reference_config.at(ptr) : json();
        const auto b = config.contains(ptr) ? config.at(ptr) : json();
        if (a != b) {
            throw Error(ErrorKind::SeedMismatch, fmt::format("'{}' differs from the reference run ({} vs {})", field,
                                                             b.dump(), a.dump()));
        }
    }
}

}  // namespace xfkt
