#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xfkt/types.hpp"

namespace xfkt {

enum class SelectionKind { FirstK, RandomK };

struct SelectionStrategy {
    SelectionKind kind = SelectionKind::FirstK;
    std::size_t k = 4;
    std::uint64_t seed = 0;  // RandomK only
};

std::string_view to_string(SelectionKind kind);
// "first" / "first_k" / "random" / "random_k".
SelectionKind parse_selection(std::string_view text);

// Picks min(k, |pool|) records and returns them in time order. Throws
// EmptyPool on an empty pool, InvalidArgument for k == 0.
std::vector<InteractionRecord> select_shots(std::span<const InteractionRecord> pool, const SelectionStrategy& strategy);

// Same, after checking that none of `targets` is in the pool.
std::vector<InteractionRecord> select_shots(std::span<const InteractionRecord> pool, const SelectionStrategy& strategy,
                                            std::span<const PredictionTarget> targets);

struct StrategyParam {
    std::string name;
    std::string type;
    bool required = true;
};

struct StrategyDescriptor {
    std::string id;
    std::string description;
    std::vector<StrategyParam> params;
    bool implemented = true;
};

std::vector<StrategyDescriptor> list_strategies();

}  // namespace xfkt
