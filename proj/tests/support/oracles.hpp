#pragma once

// Independent reference computations used by the tests. None of them calls
// into the library's numeric code.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "xfkt/bkt.hpp"

namespace oracle {

struct PathPosteriors {
    std::vector<double> posterior;   // P(learned at t | o_1..o_t)
    std::vector<double> correct;     // P(o_t = 1 | o_1..o_{t-1}), n + 1 entries
};

// Sums the joint probability of every latent path in {U, L}^(n+1). Exponential;
// meant for n <= 8.
PathPosteriors enumerate_paths(const xfkt::BktParams& p, const std::vector<std::uint8_t>& obs);

// Same quantities over the n + 2 monotone paths a no-forgetting chain can
// take (learned from step k onward, or never). Linear in the number of paths
// per step, so it handles longer sequences.
PathPosteriors enumerate_monotone_paths(const xfkt::BktParams& p, const std::vector<std::uint8_t>& obs);

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

// Tallies (prediction, label) pairs in a 2x2 table, then applies the metric
// definitions with zero-denominator values set to 0.
Confusion brute_confusion(const std::vector<std::uint8_t>& preds, const std::vector<std::uint8_t>& labels);

}  // namespace oracle
