#pragma once

#include <vmsim/exact_solver.hpp>
#include <vmsim/model.hpp>
#include <vmsim/rng.hpp>

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vmsim {

/// Estimated demand of one VM as the controllers see it.
struct VmDemand {
    std::string vm;
    double cpu = 0.0;
    int memory_mb = 0;
};

/// Snapshot of the data center handed to controllers.
struct ClusterView {
    struct Vm {
        VmDemand demand;
        std::size_t server = 0;
        /// Target server while a migration is in flight.
        std::optional<std::size_t> migrating_to;
    };

    std::vector<ServerSpec> servers;
    /// Sorted by VM id.
    std::vector<Vm> vms;

    /// Estimated CPU committed per server. In-flight VMs count on both ends.
    std::vector<double> committed_cpu() const;
    /// Memory committed per server, reservations included.
    std::vector<double> committed_memory() const;
    std::optional<std::size_t> server_index(std::string_view id) const;
};

struct Move {
    std::string vm;
    std::string target;

    friend bool operator==(const Move&, const Move&) = default;
};

struct ReallocationPlan {
    std::vector<Move> migrations;
};

enum class Family { initial, placement, reallocation };

std::string_view to_string(Family family) noexcept;

/// How a single VM is matched against per-server residual capacity.
enum class FitRule { first, best, worst, random };

/// Picks a server for `demand` given residual capacities, or nullopt.
std::optional<std::size_t> choose_server(const VmDemand& demand,
                                         std::span<const double> free_cpu,
                                         std::span<const double> free_memory,
                                         FitRule rule,
                                         Rng& rng);

class Controller {
public:
    virtual ~Controller() = default;
    virtual std::string_view name() const noexcept = 0;
    virtual Family family() const noexcept = 0;
};

class InitialPlacement : public Controller {
public:
    Family family() const noexcept final { return Family::initial; }

    /// Throws Error(NoFeasibleServer) naming the first VM that does not fit.
    virtual Allocation place(std::span<const VmDemand> vms,
                             std::span<const ServerSpec> servers,
                             Rng& rng) const = 0;

    /// Rule used when this controller also has to place arrivals.
    virtual FitRule online_rule() const noexcept = 0;
};

class OnlinePlacement : public Controller {
public:
    Family family() const noexcept final { return Family::placement; }

    /// Returns the chosen server index. Throws Error(NoFeasibleServer).
    virtual std::size_t place(const VmDemand& vm, const ClusterView& view, Rng& rng) const = 0;
};

class Reallocation : public Controller {
public:
    Family family() const noexcept final { return Family::reallocation; }

    virtual ReallocationPlan plan(const ClusterView& view, Rng& rng) const = 0;
};

struct ControllerOptions {
    SolveBudget exact_budget{.max_nodes = 1'000'000, .max_wall_ms = std::nullopt};
};

/// Registry lookup. Returns nullptr for "none" in the placement and
/// reallocation families. Throws Error(UnknownController) or
/// Error(NoneNotAllowed) for the initial family.
std::unique_ptr<Controller> resolve(std::string_view name, Family family,
                                    const ControllerOptions& options = {});

std::unique_ptr<InitialPlacement> resolve_initial(std::string_view name);
std::unique_ptr<OnlinePlacement> resolve_placement(std::string_view name);
std::unique_ptr<Reallocation> resolve_reallocation(std::string_view name,
                                                   const ControllerOptions& options = {});

/// Every registered name of a family, "none" included where allowed.
std::vector<std::string> registry_names(Family family);

/// Initial placement with one of the registered strategies.
Allocation place_initial(std::span<const VmDemand> vms, std::span<const ServerSpec> servers,
                         std::string_view strategy, Rng& rng);

/// Returns the server id chosen for an arriving VM.
std::string place_online(const VmDemand& vm, const ClusterView& view, std::string_view strategy,
                         Rng& rng);

ReallocationPlan reallocate(const ClusterView& view, std::string_view strategy, Rng& rng,
                            const ControllerOptions& options = {});

/// Applies a plan to the current residences. Used to check plans.
Allocation apply_plan(const ClusterView& view, const ReallocationPlan& plan);

/// True if every server's estimated cpu and memory fit its capacity.
bool respects_capacity(const Allocation& allocation, std::span<const VmDemand> vms,
                       std::span<const ServerSpec> servers);

} // namespace vmsim
