#pragma once

#include <cstdint>
#include <vector>

#include "xfkt/bkt.hpp"
#include "xfkt/types.hpp"

namespace xfkt {

// Simulated students answering exercises, with one BKT chain per concept.
// An attempt is answered correctly with the mean of the per-concept correct
// probabilities (the same combination rule the baseline predicts with).
struct SyntheticSpec {
    std::size_t students = 536;
    std::size_t exercises = 20;
    std::size_t concepts = 8;
    std::size_t max_concepts_per_exercise = 4;
    // 0 means every student answers every exercise once, in column order
    // (FrcSub layout). Otherwise each student draws this many attempts.
    std::size_t attempts_per_student = 0;
    bool timestamps = false;
    bool concept_names = false;
    bool exercise_text = false;
    BktParams truth{0.3, 0.2, 0.15, 0.1};
    std::uint64_t seed = 1;
};

Dataset make_synthetic_dataset(const SyntheticSpec& spec);

// `count` independent single-skill sequences of `length` attempts.
std::vector<Observations> simulate_bkt_sequences(const BktParams& params, std::size_t count, std::size_t length,
                                                 std::uint64_t seed);

}  // namespace xfkt
