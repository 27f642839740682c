#include <doctest.h>

#include <atomic>
#include <set>

#include "fixtures.hpp"
#include "xfkt/error.hpp"
#include "xfkt/evaluation.hpp"
#include "xfkt/synthetic.hpp"

using namespace xfkt;

namespace {

ExperimentConfig small_config(std::size_t students = 12, std::size_t repeats = 2) {
    SyntheticSpec spec;
    spec.students = 40;
    spec.seed = 5;
    ExperimentConfig cfg;
    cfg.dataset = std::make_shared<const Dataset>(make_synthetic_dataset(spec));
    cfg.dataset_digest = dataset_digest(*cfg.dataset);
    cfg.n_students = students;
    cfg.repeats = repeats;
    cfg.strategy = SelectionStrategy{SelectionKind::FirstK, 3, 0};
    cfg.seed = 11;
    return cfg;
}

// Fails with ProviderUnavailable once `budget` calls have been made.
class FlakyProvider final : public Provider {
public:
    FlakyProvider(ProviderPtr inner, std::size_t budget) : inner_(std::move(inner)), budget_(budget) {}
    GenerationOutput complete(const GenerationRequest& r) override {
        if (calls_.fetch_add(1) >= budget_) throw Error(ErrorKind::ProviderUnavailable, "endpoint down");
        return inner_->complete(r);
    }
    std::string id() const override { return "flaky"; }

private:
    ProviderPtr inner_;
    std::size_t budget_;
    std::atomic<std::size_t> calls_{0};
};

}  // namespace

TEST_SUITE("evaluation") {
    TEST_CASE("student samples: seeded, distinct within a repeat, fresh across repeats") {
        const auto cfg = small_config();
        const auto a = sample_students(*cfg.dataset, 15, 3, 1);
        CHECK(a == sample_students(*cfg.dataset, 15, 3, 1));
        CHECK(a != sample_students(*cfg.dataset, 15, 3, 2));
        std::set<StudentId> seen;
        for (std::size_t r = 0; r < 2; ++r) {
            CHECK(std::set<StudentId>(a[r].begin(), a[r].end()).size() == 15);
            for (const auto& s : a[r]) CHECK(seen.insert(s).second);
        }
        // Repeat 3 needs 15 but only 10 are fresh: all 10 are included.
        const std::set<StudentId> third(a[2].begin(), a[2].end());
        CHECK(third.size() == 15);
        std::size_t fresh = 0;
        for (const auto& s : third) fresh += seen.count(s) ? 0 : 1;
        CHECK(fresh == 10);
        CHECK_THROWS_AS(sample_students(*cfg.dataset, 41, 1, 0), Error);
        CHECK_THROWS_AS(sample_students(*cfg.dataset, 0, 1, 0), Error);
    }

    TEST_CASE("plan: targets are the tail, shots come from the pool") {
        const auto cfg = small_config();
        const auto plan = plan_student(*cfg.dataset, StudentId{"s1"}, cfg, 0);
        REQUIRE(plan);
        CHECK(plan->targets.size() == 4);
        CHECK(plan->pool.size() == 16);
        CHECK(plan->shots.size() == 3);
        for (const auto& t : plan->targets) CHECK(t.record.seq >= 16);
        CHECK(plan->seed == student_seed(11, 0, StudentId{"s1"}));
        CHECK(plan->seed != student_seed(11, 1, StudentId{"s1"}));
    }

    TEST_CASE("oracle scores perfectly, anti-oracle scores zero") {
        const auto cfg = small_config();
        const auto good = run_experiment(cfg, make_oracle_provider(cfg.dataset));
        CHECK(good.aggregate.accuracy.mean == 1.0);
        CHECK(good.aggregate.f1.mean == 1.0);
        CHECK(good.aggregate.fallback_rate.mean == 0.0);
        CHECK(good.predictions.size() == 12 * 2 * 4);
        const auto bad = run_experiment(cfg, make_anti_oracle_provider(cfg.dataset));
        CHECK(bad.aggregate.accuracy.mean == 0.0);
    }

    TEST_CASE("every prediction costs 2s + 1 calls, one more with explanations") {
        auto cfg = small_config(4, 1);
        for (const auto& p : run_experiment(cfg, make_mock_provider()).predictions) CHECK(p.provider_calls == 7);
        cfg.explain = true;
        const auto res = run_experiment(cfg, make_mock_provider());
        for (const auto& p : res.predictions) {
            CHECK(p.provider_calls == 8);
            CHECK(p.explanation.has_value());
        }
        for (const auto& r : res.reports) CHECK(r.has_explanations);
    }

    TEST_CASE("unparseable provider falls back on every target") {
        const auto cfg = small_config();
        const auto res = run_experiment(cfg, make_unparseable_provider());
        CHECK(res.aggregate.fallback_rate.mean == 1.0);
        for (const auto& p : res.predictions) CHECK(p.source == PredictionSource::Fallback);
        const auto again = run_experiment(cfg, make_unparseable_provider());
        CHECK(again.predictions == res.predictions);
    }

    TEST_CASE("parallel and serial runs agree") {
        auto cfg = small_config(10, 2);
        cfg.strategy.kind = SelectionKind::RandomK;
        cfg.max_in_flight = 4;
        const auto a = run_experiment(cfg, make_mock_provider());
        const auto b = serial::run_experiment(cfg, make_mock_provider());
        CHECK(a.predictions == b.predictions);
        CHECK(a.repeats == b.repeats);
        CHECK(a.aggregate == b.aggregate);
    }

    TEST_CASE("short histories are skipped") {
        auto ds = fixtures::small_log();
        ExperimentConfig cfg;
        cfg.dataset = ds;
        cfg.n_students = 3;
        cfg.repeats = 1;
        const auto res = run_experiment(cfg, make_oracle_provider(ds));
        REQUIRE(res.repeats.size() == 1);
        CHECK(res.repeats[0].skipped == std::vector<StudentId>{StudentId{"carol"}});
        for (const auto& p : res.predictions) CHECK(p.student.value != "carol");
    }

    TEST_CASE("provider failure leaves a partial result") {
        const auto cfg = small_config(6, 2);
        auto flaky = std::make_shared<FlakyProvider>(make_mock_provider(), 200);
        const auto res = serial::run_experiment(cfg, flaky);
        CHECK(res.partial);
        REQUIRE(res.failure.has_value());
        CHECK(res.failure->find("ProviderUnavailable") != std::string::npos);
        CHECK_FALSE(res.predictions.empty());
        CHECK(res.predictions.size() < 6 * 2 * 4);
    }

    TEST_CASE("audit: every prediction belongs to a sampled student and a held-out record") {
        const auto cfg = small_config(8, 3);
        const auto res = run_experiment(cfg, make_mock_provider());
        const auto samples = sample_students(*cfg.dataset, 8, 3, cfg.seed);
        for (const auto& p : res.predictions) {
            const auto& sample = samples.at(p.repeat);
            CHECK(std::find(sample.begin(), sample.end(), p.student) != sample.end());
            const auto& h = cfg.dataset->histories.at(p.student);
            CHECK(h.records.at(p.target_seq).exercise == p.exercise);
            CHECK(h.records.at(p.target_seq).correct == p.label);
            CHECK(p.target_seq >= h.records.size() - test_count(h.records.size(), 0.2));
        }
    }

    TEST_CASE("config echo") {
        const auto cfg = small_config();
        const auto j = config_to_json(cfg);
        CHECK(j["n_students"] == 12);
        CHECK(j["selection"]["strategy"] == "first_k");
        CHECK(j["dataset"]["digest"] == cfg.dataset_digest);
        CHECK(cfg.dataset_digest.size() == 64);
    }

    TEST_CASE("compare_runs ranks by accuracy") {
        const auto cfg = small_config(6, 2);
        auto good = run_experiment(cfg, make_oracle_provider(cfg.dataset));
        good.method = "oracle";
        auto bad = run_experiment(cfg, make_anti_oracle_provider(cfg.dataset));
        bad.method = "anti";
        const std::vector<ExperimentResult> both{bad, good};
        const auto rows = compare_runs(both);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].method == "oracle");
        CHECK(rows[1].method == "anti");
        const auto md = comparison_to_markdown(rows);
        CHECK(md.find("oracle") < md.find("anti"));
        CHECK(md.find("±") != std::string::npos);
        CHECK_THROWS_AS(compare_runs(std::span(both).first(1)), Error);
    }
}
