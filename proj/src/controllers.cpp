#include <vmsim/controllers.hpp>

#include <vmsim/error.hpp>

#include <algorithm>
#include <map>
#include <numeric>

namespace vmsim {

namespace {

constexpr double kEps = 1e-9;

bool fits(const VmDemand& vm, double free_cpu, double free_memory) {
    return vm.cpu <= free_cpu + kEps && vm.memory_mb <= free_memory + kEps;
}

[[noreturn]] void no_feasible_server(const VmDemand& vm) {
    throw Error(Errc::NoFeasibleServer, "no feasible server for VM '" + vm.vm + "'");
}

/// cpu desc, id asc.
void sort_decreasing(std::vector<VmDemand>& vms) {
    std::sort(vms.begin(), vms.end(), [](const VmDemand& a, const VmDemand& b) {
        if (a.cpu != b.cpu) return a.cpu > b.cpu;
        return a.vm < b.vm;
    });
}

class FitInitial final : public InitialPlacement {
public:
    FitInitial(std::string_view name, FitRule rule, bool decreasing)
        : name_(name), rule_(rule), decreasing_(decreasing) {}

    std::string_view name() const noexcept override { return name_; }
    FitRule online_rule() const noexcept override { return rule_; }

    Allocation place(std::span<const VmDemand> vms, std::span<const ServerSpec> servers,
                     Rng& rng) const override {
        std::vector<VmDemand> order(vms.begin(), vms.end());
        if (decreasing_) sort_decreasing(order);
        std::vector<double> free_cpu;
        std::vector<double> free_mem;
        for (const auto& s : servers) {
            free_cpu.push_back(s.placeable_cpu());
            free_mem.push_back(s.memory_mb);
        }
        Allocation alloc;
        for (const auto& vm : order) {
            const auto chosen = choose_server(vm, free_cpu, free_mem, rule_, rng);
            if (!chosen) no_feasible_server(vm);
            free_cpu[*chosen] -= vm.cpu;
            free_mem[*chosen] -= vm.memory_mb;
            alloc[vm.vm] = servers[*chosen].id;
        }
        return alloc;
    }

private:
    std::string_view name_;
    FitRule rule_;
    bool decreasing_;
};

class FitOnline final : public OnlinePlacement {
public:
    FitOnline(std::string_view name, FitRule rule) : name_(name), rule_(rule) {}

    std::string_view name() const noexcept override { return name_; }

    std::size_t place(const VmDemand& vm, const ClusterView& view, Rng& rng) const override {
        auto free_cpu = view.committed_cpu();
        auto free_mem = view.committed_memory();
        for (std::size_t s = 0; s < view.servers.size(); ++s) {
            free_cpu[s] = view.servers[s].placeable_cpu() - free_cpu[s];
            free_mem[s] = view.servers[s].memory_mb - free_mem[s];
        }
        const auto chosen = choose_server(vm, free_cpu, free_mem, rule_, rng);
        if (!chosen) no_feasible_server(vm);
        return *chosen;
    }

private:
    std::string_view name_;
    FitRule rule_;
};

ReallocationPlan diff_plan(const ClusterView& view, const std::vector<std::size_t>& target,
                           const std::vector<std::size_t>& order) {
    ReallocationPlan plan;
    for (std::size_t i : order) {
        if (target[i] != view.vms[i].server) {
            plan.migrations.push_back({view.vms[i].demand.vm, view.servers[target[i]].id});
        }
    }
    return plan;
}

/// FFD over current estimates with servers visited in descending order of
/// committed load. Among feasible servers indistinguishable from the first
/// feasible one (same current load, same room left in the new packing), the
/// VM's current server wins.
class FfdRepack final : public Reallocation {
public:
    std::string_view name() const noexcept override { return "ffd-repack"; }

    ReallocationPlan plan(const ClusterView& view, Rng&) const override {
        const auto load = view.committed_cpu();
        std::vector<std::size_t> servers(view.servers.size());
        std::iota(servers.begin(), servers.end(), std::size_t{0});
        std::stable_sort(servers.begin(), servers.end(),
                         [&](std::size_t a, std::size_t b) { return load[a] > load[b]; });

        std::vector<std::size_t> vms(view.vms.size());
        std::iota(vms.begin(), vms.end(), std::size_t{0});
        std::stable_sort(vms.begin(), vms.end(), [&](std::size_t a, std::size_t b) {
            const auto& da = view.vms[a].demand;
            const auto& db = view.vms[b].demand;
            if (da.cpu != db.cpu) return da.cpu > db.cpu;
            return da.vm < db.vm;
        });

        std::vector<double> free_cpu(view.servers.size());
        std::vector<double> free_mem(view.servers.size());
        for (std::size_t s = 0; s < view.servers.size(); ++s) {
            free_cpu[s] = view.servers[s].placeable_cpu();
            free_mem[s] = view.servers[s].memory_mb;
        }
        std::vector<std::size_t> target(view.vms.size());
        for (std::size_t i : vms) {
            const auto& vm = view.vms[i];
            std::optional<std::size_t> chosen;
            std::optional<std::size_t> first;
            for (std::size_t pos = 0; pos < servers.size(); ++pos) {
                const std::size_t s = servers[pos];
                if (!fits(vm.demand, free_cpu[s], free_mem[s])) continue;
                if (!first) {
                    first = chosen = s;
                } else if (load[s] != load[*first] || free_cpu[s] != free_cpu[*first] ||
                           free_mem[s] != free_mem[*first]) {
                    continue;
                }
                if (s == vm.server) {
                    chosen = s;
                    break;
                }
            }
            // A repack that does not fit everything is not applied.
            if (!chosen) return {};
            free_cpu[*chosen] -= vm.demand.cpu;
            free_mem[*chosen] -= vm.demand.memory_mb;
            target[i] = *chosen;
        }
        return diff_plan(view, target, vms);
    }
};

/// Branch-and-bound minimum server count. Bins of equal capacity are
/// relabelled onto the servers already holding most of their VMs so that
/// only necessary moves are planned.
class ExactConsolidation final : public Reallocation {
public:
    explicit ExactConsolidation(SolveBudget budget) : budget_(budget) {}

    std::string_view name() const noexcept override { return "exact"; }

    ReallocationPlan plan(const ClusterView& view, Rng&) const override {
        if (view.vms.empty()) return {};
        std::vector<PackItem> items;
        for (const auto& vm : view.vms) {
            items.push_back({vm.demand.cpu, static_cast<double>(vm.demand.memory_mb)});
        }
        std::vector<PackBin> bins;
        for (const auto& s : view.servers) {
            bins.push_back({static_cast<double>(s.placeable_cpu()), static_cast<double>(s.memory_mb)});
        }
        ExactSolution solution;
        try {
            solution = solve_min_servers_exact(items, bins, budget_);
        } catch (const Error& e) {
            if (e.code() == Errc::Infeasible) return {};
            throw;
        }
        const auto relabel = match_bins(view, bins, solution.assignment);
        std::vector<std::size_t> target(view.vms.size());
        for (std::size_t i = 0; i < target.size(); ++i) {
            target[i] = relabel.at(solution.assignment[i]);
        }
        std::vector<std::size_t> order(view.vms.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        return diff_plan(view, target, order);
    }

private:
    static std::map<std::size_t, std::size_t> match_bins(const ClusterView& view,
                                                         const std::vector<PackBin>& bins,
                                                         const std::vector<std::size_t>& assignment) {
        auto same_class = [&](std::size_t a, std::size_t b) {
            return bins[a].cpu == bins[b].cpu && bins[a].memory == bins[b].memory;
        };
        std::map<std::pair<std::size_t, std::size_t>, std::size_t> overlap;
        std::vector<std::size_t> used;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            used.push_back(assignment[i]);
            if (same_class(assignment[i], view.vms[i].server)) {
                ++overlap[{assignment[i], view.vms[i].server}];
            }
        }
        std::sort(used.begin(), used.end());
        used.erase(std::unique(used.begin(), used.end()), used.end());

        std::map<std::size_t, std::size_t> relabel;
        std::vector<bool> taken(bins.size(), false);
        for (;;) {
            std::size_t best = 0;
            std::pair<std::size_t, std::size_t> pick{};
            for (const auto& [key, count] : overlap) {
                if (relabel.count(key.first) || taken[key.second]) continue;
                if (count > best) {
                    best = count;
                    pick = key;
                }
            }
            if (best == 0) break;
            relabel[pick.first] = pick.second;
            taken[pick.second] = true;
        }
        for (std::size_t bin : used) {
            if (relabel.count(bin)) continue;
            for (std::size_t s = 0; s < bins.size(); ++s) {
                if (!taken[s] && same_class(bin, s)) {
                    relabel[bin] = s;
                    taken[s] = true;
                    break;
                }
            }
        }
        return relabel;
    }

    SolveBudget budget_;
};

struct InitialEntry {
    std::string_view name;
    FitRule rule;
    bool decreasing;
};

constexpr InitialEntry kInitial[] = {
    {"firstfit", FitRule::first, false}, {"bestfit", FitRule::best, false},
    {"worstfit", FitRule::worst, false}, {"ffd", FitRule::first, true},
    {"random", FitRule::random, false},
};

struct OnlineEntry {
    std::string_view name;
    FitRule rule;
};

constexpr OnlineEntry kOnline[] = {
    {"firstfit-online", FitRule::first},
    {"bestfit-online", FitRule::best},
    {"worstfit-online", FitRule::worst},
    {"random-online", FitRule::random},
};

constexpr std::string_view kReallocation[] = {"ffd-repack", "exact"};

[[noreturn]] void unknown(std::string_view name, Family family) {
    throw Error(Errc::UnknownController, "unknown " + std::string(to_string(family)) +
                                             " controller '" + std::string(name) + "'");
}

} // namespace

std::string_view to_string(Family family) noexcept {
    switch (family) {
    case Family::initial: return "initial";
    case Family::placement: return "placement";
    case Family::reallocation: return "reallocation";
    }
    return "initial";
}

std::vector<double> ClusterView::committed_cpu() const {
    std::vector<double> cpu(servers.size(), 0.0);
    for (const auto& vm : vms) {
        cpu[vm.server] += vm.demand.cpu;
        if (vm.migrating_to) cpu[*vm.migrating_to] += vm.demand.cpu;
    }
    return cpu;
}

std::vector<double> ClusterView::committed_memory() const {
    std::vector<double> mem(servers.size(), 0.0);
    for (const auto& vm : vms) {
        mem[vm.server] += vm.demand.memory_mb;
        if (vm.migrating_to) mem[*vm.migrating_to] += vm.demand.memory_mb;
    }
    return mem;
}

std::optional<std::size_t> ClusterView::server_index(std::string_view id) const {
    for (std::size_t s = 0; s < servers.size(); ++s) {
        if (servers[s].id == id) return s;
    }
    return std::nullopt;
}

std::optional<std::size_t> choose_server(const VmDemand& demand,
                                         std::span<const double> free_cpu,
                                         std::span<const double> free_memory,
                                         FitRule rule,
                                         Rng& rng) {
    std::vector<std::size_t> feasible;
    for (std::size_t s = 0; s < free_cpu.size(); ++s) {
        if (fits(demand, free_cpu[s], free_memory[s])) feasible.push_back(s);
    }
    if (feasible.empty()) return std::nullopt;
    switch (rule) {
    case FitRule::first:
        return feasible.front();
    case FitRule::best:
        // min_element/max_element keep the first of equal elements: lowest index wins ties.
        return *std::min_element(feasible.begin(), feasible.end(),
                                 [&](std::size_t a, std::size_t b) { return free_cpu[a] < free_cpu[b]; });
    case FitRule::worst:
        return *std::min_element(feasible.begin(), feasible.end(),
                                 [&](std::size_t a, std::size_t b) { return free_cpu[a] > free_cpu[b]; });
    case FitRule::random:
        return feasible[rng.below(feasible.size())];
    }
    return std::nullopt;
}

std::unique_ptr<InitialPlacement> resolve_initial(std::string_view name) {
    if (name == "none") {
        throw Error(Errc::NoneNotAllowed, "an initial placement controller is required");
    }
    for (const auto& e : kInitial) {
        if (e.name == name) return std::make_unique<FitInitial>(e.name, e.rule, e.decreasing);
    }
    unknown(name, Family::initial);
}

std::unique_ptr<OnlinePlacement> resolve_placement(std::string_view name) {
    if (name == "none") return nullptr;
    for (const auto& e : kOnline) {
        if (e.name == name) return std::make_unique<FitOnline>(e.name, e.rule);
    }
    unknown(name, Family::placement);
}

std::unique_ptr<Reallocation> resolve_reallocation(std::string_view name,
                                                   const ControllerOptions& options) {
    if (name == "none") return nullptr;
    if (name == "ffd-repack") return std::make_unique<FfdRepack>();
    if (name == "exact") return std::make_unique<ExactConsolidation>(options.exact_budget);
    unknown(name, Family::reallocation);
}

std::unique_ptr<Controller> resolve(std::string_view name, Family family,
                                    const ControllerOptions& options) {
    switch (family) {
    case Family::initial: return resolve_initial(name);
    case Family::placement: return resolve_placement(name);
    case Family::reallocation: return resolve_reallocation(name, options);
    }
    unknown(name, family);
}

std::vector<std::string> registry_names(Family family) {
    std::vector<std::string> names;
    switch (family) {
    case Family::initial:
        for (const auto& e : kInitial) names.emplace_back(e.name);
        break;
    case Family::placement:
        names.emplace_back("none");
        for (const auto& e : kOnline) names.emplace_back(e.name);
        break;
    case Family::reallocation:
        names.emplace_back("none");
        for (auto n : kReallocation) names.emplace_back(n);
        break;
    }
    return names;
}

Allocation place_initial(std::span<const VmDemand> vms, std::span<const ServerSpec> servers,
                         std::string_view strategy, Rng& rng) {
    return resolve_initial(strategy)->place(vms, servers, rng);
}

std::string place_online(const VmDemand& vm, const ClusterView& view, std::string_view strategy,
                         Rng& rng) {
    auto controller = resolve_placement(strategy);
    if (!controller) {
        throw Error(Errc::UnknownController, "placement controller is disabled");
    }
    return view.servers[controller->place(vm, view, rng)].id;
}

ReallocationPlan reallocate(const ClusterView& view, std::string_view strategy, Rng& rng,
                            const ControllerOptions& options) {
    auto controller = resolve_reallocation(strategy, options);
    if (!controller) return {};
    return controller->plan(view, rng);
}

Allocation apply_plan(const ClusterView& view, const ReallocationPlan& plan) {
    Allocation alloc;
    for (const auto& vm : view.vms) {
        alloc[vm.demand.vm] = view.servers[vm.server].id;
    }
    for (const auto& move : plan.migrations) {
        alloc[move.vm] = move.target;
    }
    return alloc;
}

bool respects_capacity(const Allocation& allocation, std::span<const VmDemand> vms,
                       std::span<const ServerSpec> servers) {
    std::map<std::string, std::pair<double, double>> used;
    for (const auto& vm : vms) {
        const auto it = allocation.find(vm.vm);
        if (it == allocation.end()) return false;
        auto& u = used[it->second];
        u.first += vm.cpu;
        u.second += vm.memory_mb;
    }
    for (const auto& [id, u] : used) {
        const auto s = std::find_if(servers.begin(), servers.end(),
                                    [&](const ServerSpec& spec) { return spec.id == id; });
        if (s == servers.end()) return false;
        if (u.first > s->placeable_cpu() + kEps || u.second > s->memory_mb + kEps) return false;
    }
    return true;
}

} // namespace vmsim
