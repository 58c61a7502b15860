#pragma once

#include <vmsim/exact_solver.hpp>
#include <vmsim/model.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace vmsim {

struct ServerPopulation {
    int count = 1;
    int cpu_units = 100;
    int memory_mb = 16384;
    int base_cpu_units = 0;
    /// Extra servers appended after the homogeneous block.
    std::vector<ServerSpec> extra;

    friend bool operator==(const ServerPopulation&, const ServerPopulation&) = default;
};

struct MigrationModel {
    double rate_mb_per_s = 100.0;
    double cpu_overhead_frac = 0.1;

    friend bool operator==(const MigrationModel&, const MigrationModel&) = default;
};

/// Everything a single simulation run needs, loaded from one JSON file.
struct SimulationConfig {
    std::string initial_placement = "firstfit";
    std::string reallocation = "none";
    std::string placement = "none";
    Estimator estimator = Estimator::max;
    std::int64_t loop_interval_s = 3;
    std::int64_t reallocation_interval_s = 1800;
    ServerPopulation servers;
    MigrationModel migration;
    double sla_threshold_pct = 100.0;
    std::int64_t duration_s = 3600;
    std::uint64_t seed = 1;
    std::string schedule;
    std::string workloads;
    SolveBudget exact_budget{.max_nodes = 1'000'000, .max_wall_ms = std::nullopt};

    /// Homogeneous servers s1..sN followed by the explicit list.
    std::vector<ServerSpec> server_specs() const;

    /// Throws Error(ConfigInvalid) naming the offending field.
    void validate() const;

    friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

/// Parses and validates. Unknown fields are rejected. Errors carry the
/// field path: Error(ParseError) for malformed JSON, Error(ConfigInvalid)
/// otherwise.
SimulationConfig parse_config(std::istream& in);
SimulationConfig load_config_file(const std::filesystem::path& path);

/// Rewrites relative schedule/workload paths against `base_dir`.
void resolve_relative_paths(SimulationConfig& config, const std::filesystem::path& base_dir);

std::string dump_config(const SimulationConfig& config);

} // namespace vmsim
