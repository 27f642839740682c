#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace xfkt {

// Binary classification metrics with correct (1) as the positive class.
// A zero denominator yields 0 for precision, recall and f1.
struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double fallback_rate = 0.0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const Metrics&) const = default;
};

// Throws LengthMismatch for unequal lengths and EmptyInput for empty input.
// Any nonzero byte counts as 1.
Metrics compute_metrics(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels);

// Same, plus the fraction of predictions flagged as fallbacks.
Metrics compute_metrics(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels,
                        std::span<const std::uint8_t> fallback_flags);

struct Spread {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for fewer than two values

    double band() const noexcept { return 2.0 * std; }
    bool operator==(const Spread&) const = default;
};

Spread spread_of(std::span<const double> values);

}  // namespace xfkt
