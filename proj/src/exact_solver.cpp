#include <vmsim/exact_solver.hpp>

#include <vmsim/error.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace vmsim {

namespace {

constexpr double kEps = 1e-9;

std::vector<std::size_t> canonical_order(std::span<const PackItem> items) {
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (items[a].cpu != items[b].cpu) return items[a].cpu > items[b].cpu;
        return items[a].memory > items[b].memory;
    });
    return order;
}

bool fits(const PackItem& item, double free_cpu, double free_mem) {
    return item.cpu <= free_cpu + kEps && item.memory <= free_mem + kEps;
}

/// Fewest of the largest capacities needed to cover `demand`.
std::size_t cover_count(std::vector<double> caps, double demand) {
    if (demand <= kEps) return 0;
    std::sort(caps.begin(), caps.end(), std::greater<>());
    double acc = 0.0;
    for (std::size_t k = 0; k < caps.size(); ++k) {
        acc += caps[k];
        if (acc + kEps >= demand) return k + 1;
    }
    return caps.size() + 1;
}

class Search {
public:
    Search(std::span<const PackItem> items, std::span<const PackBin> bins, const SolveBudget& budget)
        : items_(items), bins_(bins), budget_(budget), order_(canonical_order(items)),
          free_cpu_(bins.size()), free_mem_(bins.size()), load_count_(bins.size(), 0),
          current_(items.size()), start_(std::chrono::steady_clock::now()) {
        for (std::size_t b = 0; b < bins.size(); ++b) {
            free_cpu_[b] = bins[b].cpu;
            free_mem_[b] = bins[b].memory;
        }
        // Bins with identical capacity are interchangeable while empty.
        first_of_class_.resize(bins.size());
        for (std::size_t b = 0; b < bins.size(); ++b) {
            first_of_class_[b] = b;
            for (std::size_t a = 0; a < b; ++a) {
                if (bins[a].cpu == bins[b].cpu && bins[a].memory == bins[b].memory) {
                    first_of_class_[b] = a;
                    break;
                }
            }
        }
        suffix_cpu_.assign(items.size() + 1, 0.0);
        suffix_mem_.assign(items.size() + 1, 0.0);
        for (std::size_t k = items.size(); k-- > 0;) {
            suffix_cpu_[k] = suffix_cpu_[k + 1] + items[order_[k]].cpu;
            suffix_mem_[k] = suffix_mem_[k + 1] + items[order_[k]].memory;
        }
    }

    void seed(std::vector<std::size_t> incumbent, std::size_t used) {
        best_ = std::move(incumbent);
        best_used_ = used;
    }

    /// Returns true if the search ran to completion.
    bool run() {
        descend(0, 0);
        return !exhausted_;
    }

    const std::optional<std::vector<std::size_t>>& best() const { return best_; }
    std::size_t best_used() const { return best_used_; }
    std::uint64_t nodes() const { return nodes_; }

private:
    bool out_of_budget() {
        if (budget_.max_nodes && nodes_ >= *budget_.max_nodes) return true;
        if (budget_.max_wall_ms && (nodes_ & 0x3FF) == 0) {
            const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start_);
            if (elapsed.count() >= *budget_.max_wall_ms) return true;
        }
        return false;
    }

    std::size_t bound(std::size_t k, std::size_t used) const {
        double open_cpu = 0.0;
        double open_mem = 0.0;
        std::vector<double> closed_cpu;
        std::vector<double> closed_mem;
        for (std::size_t b = 0; b < bins_.size(); ++b) {
            if (load_count_[b] > 0) {
                open_cpu += free_cpu_[b];
                open_mem += free_mem_[b];
            } else {
                closed_cpu.push_back(bins_[b].cpu);
                closed_mem.push_back(bins_[b].memory);
            }
        }
        const auto extra = std::max(cover_count(std::move(closed_cpu), suffix_cpu_[k] - open_cpu),
                                    cover_count(std::move(closed_mem), suffix_mem_[k] - open_mem));
        return used + extra;
    }

    void descend(std::size_t k, std::size_t used) {
        if (exhausted_) return;
        if (out_of_budget()) {
            exhausted_ = true;
            return;
        }
        ++nodes_;
        if (k == order_.size()) {
            if (used < best_used_) {
                best_ = current_;
                best_used_ = used;
            }
            return;
        }
        if (bound(k, used) >= best_used_) return;

        const std::size_t item_index = order_[k];
        const PackItem& item = items_[item_index];
        // Open bins first, then at most one representative per class of empty bins.
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t b = 0; b < bins_.size(); ++b) {
                const bool open = load_count_[b] > 0;
                if ((pass == 0) != open) continue;
                if (!open && !is_class_leader(b)) continue;
                if (!fits(item, free_cpu_[b], free_mem_[b])) continue;
                place(item_index, b);
                descend(k + 1, used + (open ? 0 : 1));
                unplace(item_index, b);
                if (exhausted_) return;
            }
        }
    }

    /// True if no lower-indexed empty bin has the same capacity.
    bool is_class_leader(std::size_t b) const {
        for (std::size_t a = 0; a < b; ++a) {
            if (load_count_[a] == 0 && first_of_class_[a] == first_of_class_[b]) return false;
        }
        return true;
    }

    void place(std::size_t item, std::size_t b) {
        free_cpu_[b] -= items_[item].cpu;
        free_mem_[b] -= items_[item].memory;
        ++load_count_[b];
        current_[item] = b;
    }

    void unplace(std::size_t item, std::size_t b) {
        free_cpu_[b] += items_[item].cpu;
        free_mem_[b] += items_[item].memory;
        --load_count_[b];
    }

    std::span<const PackItem> items_;
    std::span<const PackBin> bins_;
    SolveBudget budget_;
    std::vector<std::size_t> order_;
    std::vector<double> free_cpu_;
    std::vector<double> free_mem_;
    std::vector<std::size_t> load_count_;
    std::vector<std::size_t> first_of_class_;
    std::vector<double> suffix_cpu_;
    std::vector<double> suffix_mem_;
    std::vector<std::size_t> current_;
    std::optional<std::vector<std::size_t>> best_;
    std::size_t best_used_ = SIZE_MAX;
    std::uint64_t nodes_ = 0;
    bool exhausted_ = false;
    std::chrono::steady_clock::time_point start_;
};

std::size_t count_used(const std::vector<std::size_t>& assignment) {
    std::vector<std::size_t> bins(assignment);
    std::sort(bins.begin(), bins.end());
    return static_cast<std::size_t>(std::unique(bins.begin(), bins.end()) - bins.begin());
}

} // namespace

std::optional<std::vector<std::size_t>> first_fit_decreasing(std::span<const PackItem> items,
                                                             std::span<const PackBin> bins) {
    std::vector<double> free_cpu(bins.size());
    std::vector<double> free_mem(bins.size());
    for (std::size_t b = 0; b < bins.size(); ++b) {
        free_cpu[b] = bins[b].cpu;
        free_mem[b] = bins[b].memory;
    }
    std::vector<std::size_t> assignment(items.size());
    for (std::size_t i : canonical_order(items)) {
        bool placed = false;
        for (std::size_t b = 0; b < bins.size() && !placed; ++b) {
            if (fits(items[i], free_cpu[b], free_mem[b])) {
                free_cpu[b] -= items[i].cpu;
                free_mem[b] -= items[i].memory;
                assignment[i] = b;
                placed = true;
            }
        }
        if (!placed) return std::nullopt;
    }
    return assignment;
}

std::size_t bin_count_lower_bound(std::span<const PackItem> items, std::span<const PackBin> bins) {
    double cpu = 0.0;
    double mem = 0.0;
    for (const auto& it : items) {
        cpu += it.cpu;
        mem += it.memory;
    }
    std::vector<double> cpu_caps;
    std::vector<double> mem_caps;
    for (const auto& b : bins) {
        cpu_caps.push_back(b.cpu);
        mem_caps.push_back(b.memory);
    }
    return std::max(cover_count(std::move(cpu_caps), cpu), cover_count(std::move(mem_caps), mem));
}

ExactSolution solve_min_servers_exact(std::span<const PackItem> items,
                                      std::span<const PackBin> bins,
                                      const SolveBudget& budget) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        const bool fits_somewhere = std::any_of(bins.begin(), bins.end(), [&](const PackBin& b) {
            return fits(items[i], b.cpu, b.memory);
        });
        if (!fits_somewhere) {
            throw Error(Errc::Infeasible, "item " + std::to_string(i) + " fits no server");
        }
    }
    ExactSolution result;
    if (items.empty()) {
        result.optimal = true;
        return result;
    }

    Search search(items, bins, budget);
    if (auto ffd = first_fit_decreasing(items, bins)) {
        const auto used = count_used(*ffd);
        search.seed(std::move(*ffd), used);
    }
    const bool complete = search.run();
    if (!search.best()) {
        throw Error(Errc::Infeasible, complete ? "no assignment satisfies the capacities"
                                               : "budget exhausted before any assignment was found");
    }
    result.assignment = *search.best();
    result.bins_used = search.best_used();
    result.optimal = complete;
    result.nodes = search.nodes();
    return result;
}

} // namespace vmsim
