#include "xfkt/selection.hpp"

#include <algorithm>
#include <iterator>
#include <random>

#include "xfkt/error.hpp"

namespace xfkt {

std::string_view to_string(SelectionKind kind) {
    return kind == SelectionKind::FirstK ? "first_k" : "random_k";
}

SelectionKind parse_selection(std::string_view text) {
    if (text == "first" || text == "first_k") return SelectionKind::FirstK;
    if (text == "random" || text == "random_k") return SelectionKind::RandomK;
    throw Error(ErrorKind::InvalidArgument, "unknown selection strategy '" + std::string(text) + "'");
}

std::vector<InteractionRecord> select_shots(std::span<const InteractionRecord> pool, const SelectionStrategy& strategy) {
    if (pool.empty()) throw Error(ErrorKind::EmptyPool, "no records to select shots from");
    if (strategy.k == 0) throw Error(ErrorKind::InvalidArgument, "shot count k must be >= 1");

    const std::size_t take = std::min(strategy.k, pool.size());
    std::vector<InteractionRecord> out;
    out.reserve(take);
    if (strategy.kind == SelectionKind::FirstK) {
        out.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
        return out;
    }

    // std::sample over a forward range is selection sampling: uniform without
    // replacement, and the chosen records keep their pool (time) order.
    std::mt19937_64 rng(strategy.seed);
    std::sample(pool.begin(), pool.end(), std::back_inserter(out), take, rng);
    return out;
}

std::vector<InteractionRecord> select_shots(std::span<const InteractionRecord> pool, const SelectionStrategy& strategy,
                                            std::span<const PredictionTarget> targets) {
    for (const auto& t : targets) {
        const bool leaked = std::any_of(pool.begin(), pool.end(), [&t](const InteractionRecord& r) {
            return r.student == t.record.student && r.seq == t.record.seq;
        });
        if (leaked) {
            throw Error(ErrorKind::InvalidArgument, "prediction target " + t.record.student.value + "#" +
                                                        std::to_string(t.record.seq) + " is inside the shot pool");
        }
    }
    return select_shots(pool, strategy);
}

std::vector<StrategyDescriptor> list_strategies() {
    return {
        {"first_k", "earliest k records of the training pool", {{"k", "positive integer", true}}, true},
        {"random_k", "k records drawn uniformly without replacement, re-sorted into time order",
         {{"k", "positive integer", true}, {"seed", "64-bit integer", true}}, true},
        {"recent_k", "latest k records before the target (reserved)", {{"k", "positive integer", true}}, false},
        {"similar_k", "k records most similar to the target exercise (reserved)",
         {{"k", "positive integer", true}, {"similarity", "string", false}}, false},
        {"linear_k", "k records evenly spaced across the pool (reserved)", {{"k", "positive integer", true}}, false},
    };
}

}  // namespace xfkt
