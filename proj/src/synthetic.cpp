#include "xfkt/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "xfkt/error.hpp"

namespace xfkt {

std::vector<Observations> simulate_bkt_sequences(const BktParams& params, std::size_t count, std::size_t length,
                                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Observations> out(count);
    for (auto& seq : out) {
        seq.reserve(length);
        bool learned = u(rng) < params.p_init;
        for (std::size_t t = 0; t < length; ++t) {
            const double p_correct = learned ? 1.0 - params.p_slip : params.p_guess;
            seq.push_back(u(rng) < p_correct ? 1 : 0);
            if (!learned && u(rng) < params.p_learn) learned = true;
        }
    }
    return out;
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.students == 0 || spec.exercises == 0 || spec.concepts == 0 || spec.max_concepts_per_exercise == 0) {
        throw Error(ErrorKind::InvalidArgument, "synthetic dataset dimensions must be positive");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    Dataset ds;
    std::vector<ConceptId> concept_ids;
    for (std::size_t c = 0; c < spec.concepts; ++c) {
        concept_ids.push_back(ConceptId{"c" + std::to_string(c + 1)});
        ds.concepts.insert(concept_ids.back());
    }

    std::vector<ExerciseId> exercise_ids;
    std::vector<std::vector<std::size_t>> exercise_concepts;
    std::uniform_int_distribution<std::size_t> n_concepts(1, std::min(spec.max_concepts_per_exercise, spec.concepts));
    for (std::size_t e = 0; e < spec.exercises; ++e) {
        std::vector<std::size_t> idx(spec.concepts);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(n_concepts(rng));
        std::sort(idx.begin(), idx.end());

        Exercise ex;
        ex.id = ExerciseId{"e" + std::to_string(e + 1)};
        for (auto c : idx) {
            ex.concept_ids.push_back(concept_ids[c]);
            if (spec.concept_names) ex.concept_names.emplace(concept_ids[c], "skill " + std::to_string(c + 1));
        }
        if (spec.exercise_text) {
            ex.text = "Exercise " + std::to_string(e + 1) + ": apply " + std::to_string(idx.size()) + " skill(s).";
        }
        exercise_ids.push_back(ex.id);
        exercise_concepts.push_back(std::move(idx));
        ds.exercises.emplace(ex.id, std::move(ex));
    }

    std::uniform_int_distribution<std::size_t> pick_exercise(0, spec.exercises - 1);
    std::uniform_int_distribution<std::int64_t> gap(30, 3600);
    for (std::size_t s = 0; s < spec.students; ++s) {
        StudentId sid{"s" + std::to_string(s + 1)};
        std::vector<bool> learned(spec.concepts);
        for (std::size_t c = 0; c < spec.concepts; ++c) learned[c] = u(rng) < spec.truth.p_init;

        const std::size_t attempts = spec.attempts_per_student == 0 ? spec.exercises : spec.attempts_per_student;
        StudentHistory h{sid, {}};
        std::int64_t clock = 1'700'000'000 + static_cast<std::int64_t>(s) * 86'400;
        for (std::size_t a = 0; a < attempts; ++a) {
            const std::size_t e = spec.attempts_per_student == 0 ? a : pick_exercise(rng);
            double p = 0.0;
            for (auto c : exercise_concepts[e]) p += learned[c] ? 1.0 - spec.truth.p_slip : spec.truth.p_guess;
            p /= static_cast<double>(exercise_concepts[e].size());

            InteractionRecord rec;
            rec.student = sid;
            rec.exercise = exercise_ids[e];
            rec.correct = u(rng) < p;
            if (spec.timestamps) {
                clock += gap(rng);
                rec.timestamp = clock;
                rec.duration = gap(rng) / 10;
            }
            h.records.push_back(std::move(rec));
            for (auto c : exercise_concepts[e]) {
                if (!learned[c] && u(rng) < spec.truth.p_learn) learned[c] = true;
            }
        }
        ds.histories.emplace(sid, std::move(h));
    }
    normalize_histories(ds);
    return ds;
}

}  // namespace xfkt
