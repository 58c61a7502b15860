#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vmsim {

/// Bounds on a branch-and-bound search. Unset means unlimited.
struct SolveBudget {
    std::optional<std::uint64_t> max_nodes;
    std::optional<std::int64_t> max_wall_ms;

    bool unlimited() const noexcept { return !max_nodes && !max_wall_ms; }
    friend bool operator==(const SolveBudget&, const SolveBudget&) = default;
};

struct PackItem {
    double cpu = 0.0;
    double memory = 0.0;
};

struct PackBin {
    double cpu = 0.0;
    double memory = 0.0;
};

struct ExactSolution {
    /// assignment[i] = bin index of item i.
    std::vector<std::size_t> assignment;
    std::size_t bins_used = 0;
    /// True iff the search finished inside the budget.
    bool optimal = false;
    std::uint64_t nodes = 0;
};

/// First-fit decreasing in the solver's canonical item order (cpu desc,
/// memory desc, index asc) over bins in index order. nullopt if some item
/// cannot be placed.
std::optional<std::vector<std::size_t>> first_fit_decreasing(std::span<const PackItem> items,
                                                             std::span<const PackBin> bins);

/// Lower bound on bins used: the fewest largest bins whose summed capacity
/// covers the total demand, per dimension.
std::size_t bin_count_lower_bound(std::span<const PackItem> items, std::span<const PackBin> bins);

/// Minimizes the number of bins used subject to per-bin cpu and memory
/// capacity. Seeded with the FFD incumbent; items are branched in
/// descending demand order and bins in index order, so the search is
/// deterministic under a node budget. Throws Error(Infeasible) when no
/// assignment exists or none was found before the budget ran out.
ExactSolution solve_min_servers_exact(std::span<const PackItem> items,
                                      std::span<const PackBin> bins,
                                      const SolveBudget& budget = {});

} // namespace vmsim
