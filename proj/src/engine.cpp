#include <vmsim/engine.hpp>

#include <vmsim/error.hpp>

#include <charconv>
#include <chrono>
#include <cmath>

namespace vmsim {

std::string_view to_string(EventKind kind) noexcept {
    switch (kind) {
    case EventKind::loop_tick: return "LoopTick";
    case EventKind::reallocation_tick: return "ReallocationTick";
    case EventKind::arrival: return "Arrival";
    case EventKind::departure: return "Departure";
    case EventKind::migration_done: return "MigrationDone";
    }
    return "LoopTick";
}

Event EventQueue::push(std::int64_t time_ms, EventKind kind, std::string vm,
                              std::uint64_t migration) {
    if (time_ms < clock_ms_) {
        throw Error(Errc::EventInPast, "event at " + std::to_string(time_ms) + " ms is before clock " +
                                           std::to_string(clock_ms_) + " ms");
    }
    Event ev{time_ms, next_seq_++, kind, std::move(vm), migration};
    heap_.push(ev);
    return ev;
}

Event EventQueue::pop() {
    Event ev = heap_.top();
    heap_.pop();
    clock_ms_ = ev.time_ms;
    return ev;
}

std::int64_t migration_duration_ms(int memory_mb, double rate_mb_per_s) {
    return static_cast<std::int64_t>(std::ceil(memory_mb * 1000.0 / rate_mb_per_s));
}

RunMeta meta_from(const SimulationConfig& config, const Schedule& schedule) {
    RunMeta meta;
    meta.initial_placement = config.initial_placement;
    meta.reallocation = config.reallocation;
    meta.placement = config.placement;
    meta.estimator = std::string(to_string(config.estimator));
    meta.seed = config.seed;
    meta.schedule_id = schedule.id;
    meta.duration_s = config.duration_s;
    return meta;
}

SimulationResult finalize_metrics(const MetricsAccumulator& acc, const RunMeta& meta) {
    SimulationResult r;
    r.sim_id = meta.sim_id;
    r.initial_placement = meta.initial_placement;
    r.reallocation = meta.reallocation;
    r.placement = meta.placement;
    r.estimator = meta.estimator;
    r.seed = meta.seed;
    r.schedule_id = meta.schedule_id;
    r.duration_s = meta.duration_s;
    r.vm_count = meta.vm_count;
    r.avg_active_servers =
        acc.loop_count == 0 ? 0.0
                            : static_cast<double>(acc.active_server_loop_sum) / acc.loop_count;
    r.avg_cpu_util_pct =
        acc.util_sample_count == 0 ? 0.0 : acc.util_sample_sum / acc.util_sample_count;
    r.sla_violation_rate = acc.active_samples == 0
                               ? 0.0
                               : static_cast<double>(acc.overload_samples) / acc.active_samples;
    r.migration_count = acc.migrations_total;
    return r;
}

std::string format_number(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

std::string csv_row(const SimulationResult& r) {
    std::string row;
    bool first = true;
    auto add = [&](const std::string& field) {
        if (!first) row += ',';
        first = false;
        row += field;
    };
    add(r.sim_id);
    add(r.initial_placement);
    add(r.reallocation);
    add(r.placement);
    add(r.estimator);
    add(std::to_string(r.seed));
    add(r.schedule_id);
    add(std::to_string(r.duration_s));
    add(format_number(r.avg_active_servers));
    add(format_number(r.avg_cpu_util_pct));
    add(format_number(r.sla_violation_rate));
    add(std::to_string(r.migration_count));
    add(std::to_string(r.vm_count));
    add(r.status == RunStatus::ok ? "ok" : "failed");
    add(std::to_string(r.wall_ms));
    return row;
}

std::string result_line(const SimulationResult& r) {
    return "RESULT avg_active_servers=" + format_number(r.avg_active_servers) +
           " avg_cpu_util_pct=" + format_number(r.avg_cpu_util_pct) +
           " sla_violation_rate=" + format_number(r.sla_violation_rate) +
           " migrations=" + std::to_string(r.migration_count);
}

Simulation::Simulation(SimulationConfig config, Schedule schedule, times::WorkloadSource& workloads,
                       SimulationOptions options)
    : config_(std::move(config)), schedule_(std::move(schedule)), workloads_(workloads),
      options_(std::move(options)), rng_(config_.seed) {}

std::size_t Simulation::server_index(const std::string& id) const {
    const auto it = server_lookup_.find(id);
    if (it == server_lookup_.end()) {
        throw Error(Errc::InvariantViolated, "unknown server '" + id + "'");
    }
    return it->second;
}

Simulation::LiveVm Simulation::make_vm(const ScheduleEntry& entry) {
    LiveVm vm;
    vm.spec.id = entry.vm;
    vm.spec.size = schedule_.sizes.at(entry.size_index);
    vm.spec.series_name = entry.series;
    vm.series = &series_cache_.at(entry.series);
    vm.estimate = estimate_demand(*vm.series, config_.estimator, vm.spec.size.cpu_units);
    return vm;
}

void Simulation::start() {
    if (started_) return;
    started_ = true;
    config_.validate();
    servers_ = config_.server_specs();
    for (std::size_t s = 0; s < servers_.size(); ++s) server_lookup_[servers_[s].id] = s;
    reserved_mb_.assign(servers_.size(), 0.0);
    last_util_.assign(servers_.size(), 0.0);

    ControllerOptions opts;
    opts.exact_budget = config_.exact_budget;
    initial_ = resolve_initial(config_.initial_placement);
    placement_ = resolve_placement(config_.placement);
    reallocation_ = resolve_reallocation(config_.reallocation, opts);

    for (const auto& v : validate_schedule(schedule_, {})) {
        if (v.kind != Violation::Kind::MissingSeries) {
            throw Error(Errc::ConfigInvalid, "schedule '" + schedule_.id + "': " + describe(v));
        }
    }
    const std::int64_t duration_ms = config_.duration_s * 1000;
    for (const auto& e : schedule_.entries) {
        entries_[e.vm] = &e;
        if (e.arrival_s * 1000 >= duration_ms || series_cache_.count(e.series)) continue;
        try {
            auto series = workloads_.get(e.series);
            if (series.samples.empty()) throw Error(Errc::EmptySeries, "empty series");
            series_cache_.emplace(e.series, std::move(series));
        } catch (const Error& err) {
            throw Error(Errc::WorkloadMissing, "series '" + e.series + "': " + err.what());
        }
    }

    // Initial placement covers every VM present at t = 0.
    std::vector<VmDemand> demands;
    std::vector<LiveVm> initial_vms;
    for (const auto& e : schedule_.entries) {
        if (e.arrival_s != 0 || duration_ms == 0) continue;
        auto vm = make_vm(e);
        demands.push_back({vm.spec.id, vm.estimate, vm.spec.size.memory_mb});
        initial_vms.push_back(std::move(vm));
    }
    const Allocation alloc = options_.forced_initial ? *options_.forced_initial
                                                     : initial_->place(demands, servers_, rng_);
    for (auto& vm : initial_vms) {
        const auto it = alloc.find(vm.spec.id);
        if (it == alloc.end()) {
            throw Error(Errc::NoFeasibleServer, "VM '" + vm.spec.id + "' left unplaced");
        }
        vm.server = server_index(it->second);
        ++vms_seen_;
        live_.emplace(vm.spec.id, std::move(vm));
    }

    for (const auto& e : schedule_.entries) {
        if (e.arrival_s * 1000 >= duration_ms) continue;
        if (e.arrival_s > 0) queue_.push(e.arrival_s * 1000, EventKind::arrival, e.vm);
        queue_.push(e.departure_s * 1000, EventKind::departure, e.vm);
    }
    queue_.push(0, EventKind::loop_tick);
    if (reallocation_ && config_.reallocation_interval_s * 1000 < duration_ms) {
        queue_.push(config_.reallocation_interval_s * 1000, EventKind::reallocation_tick);
    }
}

bool Simulation::step() {
    if (!started_) start();
    const std::int64_t duration_ms = config_.duration_s * 1000;
    while (!finished_ && !queue_.empty()) {
        if (queue_.top().time_ms >= duration_ms) break;
        const Event ev = queue_.pop();
        handle(ev);
        if (ev.kind == EventKind::loop_tick) return true;
    }
    finished_ = true;
    return false;
}

SimulationResult Simulation::run() {
    const auto wall_start = std::chrono::steady_clock::now();
    start();
    while (step()) {
    }
    RunMeta meta = meta_from(config_, schedule_);
    meta.vm_count = vms_seen_;
    auto result = finalize_metrics(acc_, meta);
    result.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - wall_start)
                         .count();
    return result;
}

void Simulation::record_trace(const Event& ev) {
    if (ev.time_ms < last_event_ms_) {
        throw Error(Errc::InvariantViolated, "event clock went backwards");
    }
    last_event_ms_ = ev.time_ms;
    auto mix = [this](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            trace_hash_ ^= p[i];
            trace_hash_ *= 0x100000001b3ull;
        }
    };
    const auto kind = static_cast<std::uint8_t>(ev.kind);
    mix(&ev.time_ms, sizeof ev.time_ms);
    mix(&kind, 1);
    mix(ev.vm.data(), ev.vm.size());
}

void Simulation::handle(const Event& ev) {
    record_trace(ev);
    switch (ev.kind) {
    case EventKind::loop_tick: on_loop_tick(); break;
    case EventKind::reallocation_tick: on_reallocation_tick(); break;
    case EventKind::arrival: on_arrival(ev.vm); break;
    case EventKind::departure: on_departure(ev.vm); break;
    case EventKind::migration_done: on_migration_done(ev.migration); break;
    }
}

double Simulation::current_load(const LiveVm& vm) const {
    const std::int64_t t_s = queue_.clock_ms() / 1000;
    return sample_at(*vm.series, vm.series->start_s + t_s) / 100.0 * vm.spec.size.cpu_units;
}

void Simulation::on_loop_tick() {
    check_invariants();
    std::vector<std::vector<double>> loads(servers_.size());
    std::vector<std::vector<double>> overheads(servers_.size());
    std::vector<bool> active(servers_.size(), false);
    for (const auto& [id, vm] : live_) {
        const double load = current_load(vm);
        loads[vm.server].push_back(load);
        active[vm.server] = true;
        if (vm.migration) {
            const auto& m = migrations_.at(*vm.migration);
            const double overhead = config_.migration.cpu_overhead_frac * load;
            overheads[vm.server].push_back(overhead);
            const auto target = server_index(m.target);
            overheads[target].push_back(overhead);
            active[target] = true;
        }
    }
    ++acc_.loop_count;
    for (std::size_t s = 0; s < servers_.size(); ++s) {
        last_util_[s] = server_utilization(servers_[s], loads[s], overheads[s]);
        if (!active[s]) continue;
        ++acc_.active_server_loop_sum;
        ++acc_.active_samples;
        ++acc_.util_sample_count;
        acc_.util_sample_sum += last_util_[s];
        if (last_util_[s] > config_.sla_threshold_pct) ++acc_.overload_samples;
    }
    const std::int64_t next = queue_.clock_ms() + config_.loop_interval_s * 1000;
    if (next < config_.duration_s * 1000) queue_.push(next, EventKind::loop_tick);
}

void Simulation::on_reallocation_tick() {
    const std::int64_t next = queue_.clock_ms() + config_.reallocation_interval_s * 1000;
    if (next < config_.duration_s * 1000) queue_.push(next, EventKind::reallocation_tick);
    if (!migrations_.empty()) return;

    const auto plan = reallocation_->plan(view(), rng_);
    for (const auto& move : plan.migrations) {
        try {
            start_migration(move.vm, move.target);
        } catch (const Error& e) {
            // Source and target both hold the VM's memory while it moves, so a
            // plan that is feasible at rest can be briefly infeasible in flight.
            if (e.code() != Errc::TargetMemoryExhausted) throw;
        }
    }
}

void Simulation::on_arrival(const std::string& id) {
    const auto* entry = entries_.at(id);
    LiveVm vm = make_vm(*entry);
    const VmDemand demand{vm.spec.id, vm.estimate, vm.spec.size.memory_mb};
    if (placement_) {
        vm.server = placement_->place(demand, view(), rng_);
    } else {
        // Without an online controller the initial strategy places arrivals.
        auto v = view();
        auto free_cpu = v.committed_cpu();
        auto free_mem = v.committed_memory();
        for (std::size_t s = 0; s < servers_.size(); ++s) {
            free_cpu[s] = servers_[s].placeable_cpu() - free_cpu[s];
            free_mem[s] = servers_[s].memory_mb - free_mem[s];
        }
        const auto chosen = choose_server(demand, free_cpu, free_mem, initial_->online_rule(), rng_);
        if (!chosen) {
            throw Error(Errc::NoFeasibleServer, "no feasible server for VM '" + id + "'");
        }
        vm.server = *chosen;
    }
    ++vms_seen_;
    live_.emplace(id, std::move(vm));
}

void Simulation::on_departure(const std::string& id) {
    const auto it = live_.find(id);
    if (it == live_.end()) return;
    if (it->second.migration) {
        const auto m = migrations_.find(*it->second.migration);
        reserved_mb_[server_index(m->second.target)] -= it->second.spec.size.memory_mb;
        migrations_.erase(m);
    }
    live_.erase(it);
}

void Simulation::on_migration_done(std::uint64_t id) {
    const auto it = migrations_.find(id);
    if (it == migrations_.end()) return; // VM departed mid-flight
    auto& vm = live_.at(it->second.vm);
    const auto target = server_index(it->second.target);
    reserved_mb_[target] -= vm.spec.size.memory_mb;
    vm.server = target;
    vm.migration.reset();
    migrations_.erase(it);
}

Migration Simulation::start_migration(const std::string& id, const std::string& target_id) {
    const auto it = live_.find(id);
    if (it == live_.end()) {
        throw Error(Errc::InvariantViolated, "VM '" + id + "' is not live");
    }
    auto& vm = it->second;
    if (vm.migration) {
        throw Error(Errc::AlreadyMigrating, "VM '" + id + "' is already migrating");
    }
    const auto target = server_index(target_id);
    if (target == vm.server) {
        throw Error(Errc::InvariantViolated, "VM '" + id + "' already resides on " + target_id);
    }
    double used = reserved_mb_[target];
    for (const auto& [other_id, other] : live_) {
        if (other.server == target) used += other.spec.size.memory_mb;
    }
    if (servers_[target].memory_mb - used < vm.spec.size.memory_mb) {
        throw Error(Errc::TargetMemoryExhausted, "server '" + target_id + "' lacks memory for '" + id + "'");
    }
    Migration m;
    m.id = next_migration_++;
    m.vm = id;
    m.source = servers_[vm.server].id;
    m.target = target_id;
    m.start_ms = queue_.clock_ms();
    m.end_ms = m.start_ms + migration_duration_ms(vm.spec.size.memory_mb, config_.migration.rate_mb_per_s);
    reserved_mb_[target] += vm.spec.size.memory_mb;
    vm.migration = m.id;
    migrations_.emplace(m.id, m);
    queue_.push(m.end_ms, EventKind::migration_done, id, m.id);
    ++acc_.migrations_total;
    return m;
}

Allocation Simulation::residence() const {
    Allocation alloc;
    for (const auto& [id, vm] : live_) alloc[id] = servers_[vm.server].id;
    return alloc;
}

std::vector<Migration> Simulation::in_flight() const {
    std::vector<Migration> out;
    for (const auto& [id, m] : migrations_) out.push_back(m);
    return out;
}

ClusterView Simulation::view() const {
    ClusterView v;
    v.servers = servers_;
    for (const auto& [id, vm] : live_) {
        ClusterView::Vm entry;
        entry.demand = {id, vm.estimate, vm.spec.size.memory_mb};
        entry.server = vm.server;
        if (vm.migration) entry.migrating_to = server_index(migrations_.at(*vm.migration).target);
        v.vms.push_back(std::move(entry));
    }
    return v;
}

void Simulation::check_invariants() const {
    std::vector<double> memory(reserved_mb_);
    double reserved_total = 0.0;
    for (double r : reserved_mb_) reserved_total += r;
    double migrating_memory = 0.0;
    for (const auto& [id, vm] : live_) {
        if (vm.server >= servers_.size()) {
            throw Error(Errc::InvariantViolated, "VM '" + id + "' has no resident server");
        }
        memory[vm.server] += vm.spec.size.memory_mb;
        if (vm.migration) {
            if (!migrations_.count(*vm.migration)) {
                throw Error(Errc::InvariantViolated, "VM '" + id + "' points at a missing migration");
            }
            migrating_memory += vm.spec.size.memory_mb;
        }
    }
    if (std::abs(migrating_memory - reserved_total) > 1e-6) {
        throw Error(Errc::InvariantViolated, "reservations do not match in-flight migrations");
    }
    for (std::size_t s = 0; s < servers_.size(); ++s) {
        if (memory[s] > servers_[s].memory_mb + 1e-6) {
            throw Error(Errc::InvariantViolated, "server '" + servers_[s].id + "' memory overcommitted");
        }
    }
}

SimulationResult run_simulation(const SimulationConfig& config, const Schedule& schedule,
                                times::WorkloadSource& workloads, SimulationOptions options) {
    const auto wall_start = std::chrono::steady_clock::now();
    try {
        Simulation sim(config, schedule, workloads, std::move(options));
        return sim.run();
    } catch (const std::exception& e) {
        RunMeta meta = meta_from(config, schedule);
        auto result = finalize_metrics({}, meta);
        result.status = RunStatus::failed;
        if (const auto* err = dynamic_cast<const Error*>(&e)) {
            result.message = std::string(errc_name(err->code())) + ": " + err->what();
        } else {
            result.message = e.what();
        }
        result.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - wall_start)
                             .count();
        return result;
    }
}

SimulationResult run_configured(const SimulationConfig& config) {
    Schedule schedule;
    std::unique_ptr<times::WorkloadSource> workloads;
    try {
        schedule = load_schedule_file(config.schedule);
        workloads = times::open_workloads(config.workloads);
    } catch (const std::exception& e) {
        auto result = finalize_metrics({}, meta_from(config, schedule));
        result.status = RunStatus::failed;
        const auto* err = dynamic_cast<const Error*>(&e);
        result.message = err ? std::string(errc_name(err->code())) + ": " + e.what() : e.what();
        return result;
    }
    return run_simulation(config, schedule, *workloads);
}

} // namespace vmsim
