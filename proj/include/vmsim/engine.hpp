#pragma once

#include <vmsim/config.hpp>
#include <vmsim/controllers.hpp>
#include <vmsim/model.hpp>
#include <vmsim/rng.hpp>
#include <vmsim/schedule.hpp>
#include <vmsim/times/store.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

namespace vmsim {

enum class EventKind { loop_tick, reallocation_tick, arrival, departure, migration_done };

std::string_view to_string(EventKind kind) noexcept;

struct Event {
    std::int64_t time_ms = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::loop_tick;
    std::string vm;
    std::uint64_t migration = 0;
};

/// The message pump: a min-queue on (time_ms, seq). Popping advances the
/// clock; pushing into the past is an error.
class EventQueue {
public:
    /// Assigns the next sequence number and returns the queued event.
    /// Throws Error(EventInPast).
    Event push(std::int64_t time_ms, EventKind kind, std::string vm = {},
                      std::uint64_t migration = 0);
    Event pop();
    const Event& top() const { return heap_.top(); }
    bool empty() const noexcept { return heap_.empty(); }
    std::size_t size() const noexcept { return heap_.size(); }
    std::int64_t clock_ms() const noexcept { return clock_ms_; }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const noexcept {
            if (a.time_ms != b.time_ms) return a.time_ms > b.time_ms;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    std::int64_t clock_ms_ = 0;
    std::uint64_t next_seq_ = 0;
};

struct Migration {
    std::uint64_t id = 0;
    std::string vm;
    std::string source;
    std::string target;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
};

/// Migration length in ms: ceil(memory / rate * 1000).
std::int64_t migration_duration_ms(int memory_mb, double rate_mb_per_s);

struct MetricsAccumulator {
    std::uint64_t loop_count = 0;
    std::uint64_t active_server_loop_sum = 0;
    double util_sample_sum = 0.0;
    std::uint64_t util_sample_count = 0;
    std::uint64_t overload_samples = 0;
    std::uint64_t active_samples = 0;
    std::uint64_t migrations_total = 0;
};

enum class RunStatus { ok, failed };

struct SimulationResult {
    std::string sim_id;
    std::string initial_placement;
    std::string reallocation;
    std::string placement;
    std::string estimator;
    std::uint64_t seed = 0;
    std::string schedule_id;
    std::int64_t duration_s = 0;
    double avg_active_servers = 0.0;
    double avg_cpu_util_pct = 0.0;
    double sla_violation_rate = 0.0;
    std::uint64_t migration_count = 0;
    std::uint64_t vm_count = 0;
    RunStatus status = RunStatus::ok;
    std::int64_t wall_ms = 0;
    /// Failure reason; not part of the CSV row.
    std::string message;
};

/// Identifies a run in its result row.
struct RunMeta {
    std::string sim_id;
    std::string initial_placement;
    std::string reallocation;
    std::string placement;
    std::string estimator;
    std::uint64_t seed = 0;
    std::string schedule_id;
    std::int64_t duration_s = 0;
    std::uint64_t vm_count = 0;
};

RunMeta meta_from(const SimulationConfig& config, const Schedule& schedule);

/// Ratios over the accumulated samples; zero rather than NaN when empty.
SimulationResult finalize_metrics(const MetricsAccumulator& acc, const RunMeta& meta);

inline constexpr std::string_view kCsvHeader =
    "sim_id,initial_placement,reallocation,placement,estimator,seed,schedule_id,duration_s,"
    "avg_active_servers,avg_cpu_util_pct,sla_violation_rate,migration_count,vm_count,status,wall_ms";

std::string format_number(double value);
std::string csv_row(const SimulationResult& r);
/// `RESULT avg_active_servers=.. avg_cpu_util_pct=.. sla_violation_rate=.. migrations=..`
std::string result_line(const SimulationResult& r);

struct SimulationOptions {
    /// Replaces the initial placement controller's decision. For tests and
    /// scenario setups that need a specific starting layout.
    std::optional<Allocation> forced_initial;
};

/// One deterministic simulation run.
class Simulation {
public:
    Simulation(SimulationConfig config, Schedule schedule, times::WorkloadSource& workloads,
               SimulationOptions options = {});

    /// Resolves controllers, loads series, performs the initial placement and
    /// seeds the event queue.
    void start();

    /// Processes events up to and including the next loop tick. Returns
    /// false once the run has no loop left.
    bool step();

    /// Runs to the end and returns the finalized result.
    SimulationResult run();

    Migration start_migration(const std::string& vm, const std::string& target);

    std::int64_t clock_ms() const noexcept { return queue_.clock_ms(); }
    const MetricsAccumulator& metrics() const noexcept { return acc_; }
    const std::vector<ServerSpec>& servers() const noexcept { return servers_; }
    /// VM id -> resident server id (the source while migrating).
    Allocation residence() const;
    std::vector<Migration> in_flight() const;
    /// Last loop's utilization per server, percent.
    const std::vector<double>& last_utilization() const noexcept { return last_util_; }
    /// FNV-1a over processed (time_ms, kind, vm) tuples.
    std::uint64_t trace_hash() const noexcept { return trace_hash_; }
    ClusterView view() const;

    /// Throws Error(InvariantViolated) if residency or memory accounting is off.
    void check_invariants() const;

private:
    struct LiveVm {
        VmSpec spec;
        const TimeSeries* series = nullptr;
        double estimate = 0.0;
        std::size_t server = 0;
        std::optional<std::uint64_t> migration;
    };

    void handle(const Event& ev);
    void on_loop_tick();
    void on_reallocation_tick();
    void on_arrival(const std::string& vm);
    void on_departure(const std::string& vm);
    void on_migration_done(std::uint64_t id);
    LiveVm make_vm(const ScheduleEntry& entry);
    double current_load(const LiveVm& vm) const;
    std::size_t server_index(const std::string& id) const;
    void record_trace(const Event& ev);

    SimulationConfig config_;
    Schedule schedule_;
    times::WorkloadSource& workloads_;
    SimulationOptions options_;
    std::vector<ServerSpec> servers_;
    std::map<std::string, std::size_t> server_lookup_;
    std::map<std::string, const ScheduleEntry*> entries_;
    std::map<std::string, TimeSeries> series_cache_;
    std::unique_ptr<InitialPlacement> initial_;
    std::unique_ptr<OnlinePlacement> placement_;
    std::unique_ptr<Reallocation> reallocation_;
    Rng rng_;
    EventQueue queue_;
    std::map<std::string, LiveVm> live_;
    std::map<std::uint64_t, Migration> migrations_;
    std::vector<double> reserved_mb_;
    std::vector<double> last_util_;
    MetricsAccumulator acc_;
    std::uint64_t next_migration_ = 1;
    std::uint64_t vms_seen_ = 0;
    std::uint64_t trace_hash_ = 0xcbf29ce484222325ull;
    std::int64_t last_event_ms_ = 0;
    bool started_ = false;
    bool finished_ = false;
};

/// Runs one simulation and folds every error into status=failed.
SimulationResult run_simulation(const SimulationConfig& config, const Schedule& schedule,
                                times::WorkloadSource& workloads, SimulationOptions options = {});

/// Loads schedule and workloads named in the config, then runs.
SimulationResult run_configured(const SimulationConfig& config);

} // namespace vmsim
