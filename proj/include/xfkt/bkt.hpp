#pragma once

// Per-skill Bayesian Knowledge Tracing: a two-state hidden Markov model
// (unlearned / learned, no forgetting) with prior, learn, guess and slip
// probabilities, fitted by EM (Baum-Welch). Multi-skill exercises combine the
// per-skill next-step correct probabilities by arithmetic mean.
//
// The EM E-step is an OpenMP kernel over observation sequences; the
// `serial` namespace keeps the single-threaded reference used in tests.
// Per-sequence statistics are reduced in index order, so both paths are
// bit-identical regardless of thread count.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xfkt/types.hpp"

namespace xfkt {

struct BktParams {
    double p_init = 0.5;   // P(L0): mastered before the first attempt
    double p_learn = 0.1;  // P(T): unlearned -> learned after an attempt
    double p_guess = 0.2;  // P(G): correct while unlearned
    double p_slip = 0.1;   // P(S): incorrect while learned

    bool operator==(const BktParams&) const = default;
};

inline constexpr BktParams kDefaultBktParams{0.5, 0.1, 0.2, 0.1};

bool is_valid(const BktParams& p);

using Observations = std::vector<std::uint8_t>;  // 1 = correct

struct ForwardTrace {
    // P(learned before attempt t | o_1..o_{t-1}), t = 1..n+1
    std::vector<double> mastery;
    // P(learned at attempt t | o_1..o_t), t = 1..n
    std::vector<double> posterior;
    // P(o_t = 1 | o_1..o_{t-1}), t = 1..n+1; the last entry is the next step
    std::vector<double> correct;
};

ForwardTrace bkt_forward(const BktParams& params, std::span<const std::uint8_t> observations);

// Sequence log-likelihood log P(o_1..o_n).
double bkt_log_likelihood(const BktParams& params, std::span<const std::uint8_t> observations);

struct EmOptions {
    int max_iter = 200;
    double tol = 1e-6;
    int restarts = 5;              // random restarts on top of the default start
    std::uint64_t seed = 0;
    double prob_floor = 1e-6;      // every probability kept in [floor, 1 - floor]
    double guess_slip_cap = 0.5;   // degeneracy guard on p_guess and p_slip
};

struct FitResult {
    BktParams params;
    double log_likelihood = 0.0;
    int iterations = 0;               // M-steps taken by the winning start
    bool converged = false;
    std::vector<double> ll_trace;     // LL of each visited parameter set
};

// Expected sufficient statistics of one sequence under the current params.
struct EStepStats {
    double log_likelihood = 0.0;
    double init_learned = 0.0;      // gamma_1(L)
    double learn_events = 0.0;      // sum_t xi_t(U -> L)
    double unlearned_trans = 0.0;   // sum_{t<n} gamma_t(U)
    double unlearned = 0.0;         // sum_t gamma_t(U)
    double unlearned_correct = 0.0;
    double learned = 0.0;           // sum_t gamma_t(L)
    double learned_incorrect = 0.0;

    EStepStats& operator+=(const EStepStats& o);
};

EStepStats e_step_sequence(const BktParams& params, std::span<const std::uint8_t> observations);

// Parallel kernels.
EStepStats e_step(const BktParams& params, const std::vector<Observations>& sequences);
FitResult fit_bkt_sequences(const std::vector<Observations>& sequences, const EmOptions& options = {});

namespace serial {
EStepStats e_step(const BktParams& params, const std::vector<Observations>& sequences);
FitResult fit_bkt_sequences(const std::vector<Observations>& sequences, const EmOptions& options = {});
}  // namespace serial

// One observation sequence per student per concept, in time order. A record
// of a multi-concept exercise contributes to every concept it tests.
using ConceptSequences = std::map<ConceptId, std::vector<Observations>>;

ConceptSequences group_by_concept(const Dataset& dataset,
                                  const std::map<StudentId, std::vector<InteractionRecord>>& records);

struct BktModel {
    std::map<ConceptId, BktParams> params;
    // Concepts with no training sequence; they carry kDefaultBktParams.
    std::set<ConceptId> defaulted;
    std::map<ConceptId, FitResult> fits;
};

// Fits every concept in `concepts`; those absent from `sequences` get the
// default parameters and are listed in `defaulted`. Concepts are fitted in
// parallel.
BktModel fit_bkt(const ConceptSequences& sequences, const std::set<ConceptId>& concepts,
                 const EmOptions& options = {});

struct BktPrediction {
    double probability = 0.0;
    bool value = false;                 // probability >= 0.5
    std::vector<ConceptId> defaulted;   // concepts with no fitted params
};

BktPrediction bkt_predict(const BktModel& model, const Dataset& dataset,
                          std::span<const InteractionRecord> history_prefix, const ExerciseId& target);

// Global majority label of the training records; ties go to 1.
bool majority_predict(std::span<const InteractionRecord> train);

std::string export_bkt_params(const BktModel& model);
BktModel import_bkt_params(const std::string& text);

}  // namespace xfkt
