#include "xfkt/metrics.hpp"

#include <cmath>
#include <string>

#include "xfkt/error.hpp"

namespace xfkt {

Metrics compute_metrics(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
    if (predictions.size() != labels.size()) {
        throw Error(ErrorKind::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                                   std::to_string(labels.size()) + " labels");
    }
    if (predictions.empty()) throw Error(ErrorKind::EmptyInput, "no predictions to score");

    Metrics m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool p = predictions[i] != 0;
        const bool y = labels[i] != 0;
        if (p && y) ++m.tp;
        else if (p) ++m.fp;
        else if (y) ++m.fn;
        else ++m.tn;
    }
    const auto n = static_cast<double>(m.total());
    m.accuracy = static_cast<double>(m.tp + m.tn) / n;
    if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

Metrics compute_metrics(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels,
                        std::span<const std::uint8_t> fallback_flags) {
    Metrics m = compute_metrics(predictions, labels);
    if (fallback_flags.size() != predictions.size()) {
        throw Error(ErrorKind::LengthMismatch, "fallback flags do not match the predictions");
    }
    std::size_t fallbacks = 0;
    for (auto f : fallback_flags) fallbacks += f != 0 ? 1 : 0;
    m.fallback_rate = static_cast<double>(fallbacks) / static_cast<double>(predictions.size());
    return m;
}

Spread spread_of(std::span<const double> values) {
    Spread s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return s;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return s;
}

}  // namespace xfkt
