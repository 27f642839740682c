#include <doctest.h>

#include "fixtures.hpp"
#include "xfkt/error.hpp"
#include "xfkt/types.hpp"

using namespace xfkt;

namespace {

Dataset tiny() {
    Dataset ds;
    ds.concepts = {ConceptId{"c1"}, ConceptId{"c2"}};
    ds.exercises[ExerciseId{"e1"}] = Exercise{ExerciseId{"e1"}, {ConceptId{"c1"}, ConceptId{"c2"}}, std::nullopt,
                                              {{ConceptId{"c1"}, "Addition"}}};
    ds.exercises[ExerciseId{"e2"}] = Exercise{ExerciseId{"e2"}, {ConceptId{"c2"}}, std::string("Compute 1 + 1."), {}};
    StudentHistory h{StudentId{"s1"}, {}};
    h.records.push_back(InteractionRecord{StudentId{"s1"}, ExerciseId{"e1"}, true, 20, 5, 0});
    h.records.push_back(InteractionRecord{StudentId{"s1"}, ExerciseId{"e2"}, false, 10, 7, 0});
    ds.histories[h.student] = h;
    normalize_histories(ds);
    return ds;
}

bool has_kind(const std::vector<Violation>& vs, ViolationKind k) {
    for (const auto& v : vs) {
        if (v.kind == k) return true;
    }
    return false;
}

}  // namespace

TEST_SUITE("data_model") {
    TEST_CASE("ids order by value and compare by tag") {
        CHECK(ConceptId{"a"} < ConceptId{"b"});
        CHECK(ExerciseId{"x"} == ExerciseId{"x"});
        CHECK(StudentId{}.empty());
    }

    TEST_CASE("normalize_histories sorts timed records and renumbers seq") {
        const auto ds = tiny();
        const auto& recs = ds.histories.at(StudentId{"s1"}).records;
        REQUIRE(recs.size() == 2);
        CHECK(recs[0].exercise.value == "e2");
        CHECK(recs[0].seq == 0);
        CHECK(recs[1].seq == 1);
    }

    TEST_CASE("untimed histories keep input order") {
        Dataset ds = tiny();
        auto& recs = ds.histories.at(StudentId{"s1"}).records;
        for (auto& r : recs) r.timestamp.reset();
        std::swap(recs[0], recs[1]);
        normalize_histories(ds);
        CHECK(recs[0].exercise.value == "e1");
        CHECK(recs[1].seq == 1);
    }

    TEST_CASE("compute_stats counts links and averages") {
        const auto st = compute_stats(tiny());
        CHECK(st.students == 1);
        CHECK(st.exercises == 2);
        CHECK(st.skills == 2);
        CHECK(st.records == 2);
        CHECK(st.concept_links == 3);
        CHECK(st.avg_skills() == doctest::Approx(1.5));
        CHECK(st.avg_records() == doctest::Approx(2.0));
        CHECK(st.has_timestamps);
    }

    TEST_CASE("validate_dataset") {
        SUBCASE("well-formed dataset has no violations") { CHECK(validate_dataset(tiny()).empty()); }
        SUBCASE("record referencing unknown exercise") {
            Dataset ds = tiny();
            ds.histories.at(StudentId{"s1"}).records[0].exercise = ExerciseId{"ghost"};
            const auto vs = validate_dataset(ds);
            REQUIRE(vs.size() == 1);
            CHECK(vs[0].kind == ViolationKind::DanglingExercise);
        }
        SUBCASE("exercise with empty concept set") {
            Dataset ds = tiny();
            ds.exercises.at(ExerciseId{"e2"}).concept_ids.clear();
            const auto vs = validate_dataset(ds);
            REQUIRE(vs.size() == 1);
            CHECK(vs[0].kind == ViolationKind::EmptyConceptSet);
        }
        SUBCASE("other invariants") {
            Dataset ds = tiny();
            ds.exercises.at(ExerciseId{"e1"}).concept_ids.push_back(ConceptId{"c9"});
            ds.exercises.at(ExerciseId{"e2"}).concept_ids.push_back(ConceptId{"c2"});
            ds.exercises.at(ExerciseId{"e2"}).concept_names[ConceptId{"c1"}] = "not tested here";
            auto& recs = ds.histories.at(StudentId{"s1"}).records;
            recs[0].duration = -1;
            recs[1].student = StudentId{"s2"};
            const auto vs = validate_dataset(ds);
            CHECK(has_kind(vs, ViolationKind::DanglingConcept));
            CHECK(has_kind(vs, ViolationKind::DuplicateConcept));
            CHECK(has_kind(vs, ViolationKind::ConceptNameNotInExercise));
            CHECK(has_kind(vs, ViolationKind::NegativeDuration));
            CHECK(has_kind(vs, ViolationKind::ForeignRecord));
        }
        SUBCASE("timestamp invariants") {
            Dataset ds = tiny();
            auto& recs = ds.histories.at(StudentId{"s1"}).records;
            std::swap(recs[0], recs[1]);
            CHECK(has_kind(validate_dataset(ds), ViolationKind::UnsortedHistory));
            recs[0].timestamp.reset();
            CHECK(has_kind(validate_dataset(ds), ViolationKind::MixedTimestamps));
        }
    }

    TEST_CASE("dataset modes") {
        CHECK(parse_mode("Scant") == DatasetMode::Scant);
        CHECK(parse_mode("MODERATE") == DatasetMode::Moderate);
        CHECK_THROWS_AS(parse_mode("rich"), Error);
        CHECK(to_string(DatasetMode::Sparse) == "sparse");
    }

    TEST_CASE("project_mode gates fields by tier") {
        auto ds = std::make_shared<const Dataset>(tiny());
        const auto scant = project_mode(ds, DatasetMode::Scant);
        CHECK_FALSE(scant.concept_name(ExerciseId{"e1"}, ConceptId{"c1"}).has_value());
        CHECK_FALSE(scant.exercise_text(ExerciseId{"e2"}).has_value());
        CHECK_FALSE(scant.shows_timing());

        const auto sparse = project_mode(ds, DatasetMode::Sparse);
        CHECK(sparse.concept_name(ExerciseId{"e1"}, ConceptId{"c1"}) == std::optional<std::string>("Addition"));
        CHECK_FALSE(sparse.exercise_text(ExerciseId{"e2"}).has_value());

        const auto moderate = project_mode(ds, DatasetMode::Moderate);
        CHECK(moderate.exercise_text(ExerciseId{"e2"}) == std::optional<std::string>("Compute 1 + 1."));
        CHECK(moderate.shows_timing());

        // Idempotent and non-mutating.
        const Dataset before = *ds;
        const auto again = project_mode(ds, DatasetMode::Sparse);
        CHECK(again.mode() == sparse.mode());
        CHECK(*ds == before);
    }

    TEST_CASE("moderate needs exercise text") {
        auto ds = fixtures::mini_frcsub();
        CHECK_NOTHROW(project_mode(ds, DatasetMode::Scant));
        try {
            project_mode(ds, DatasetMode::Moderate);
            FAIL("expected ModeUnavailable");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ModeUnavailable);
        }
    }

    TEST_CASE("mastery levels are ordered and parse case-insensitively") {
        CHECK(MasteryLevel::Fail < MasteryLevel::Fair);
        CHECK(MasteryLevel::Fair < MasteryLevel::Good);
        CHECK(parse_mastery_label("GOOD") == MasteryLevel::Good);
        CHECK(parse_mastery_label("fail") == MasteryLevel::Fail);
        CHECK_FALSE(parse_mastery_label("great").has_value());
    }

    TEST_CASE("errors carry kind and line") {
        const Error e(ErrorKind::MalformedRecord, "bad", 3);
        CHECK(e.kind() == ErrorKind::MalformedRecord);
        CHECK(e.line() == std::optional<std::size_t>(3));
        CHECK(std::string(e.what()).find("MalformedRecord") != std::string::npos);
    }
}
