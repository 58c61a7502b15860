#pragma once

#include <vmsim/config.hpp>
#include <vmsim/engine.hpp>
#include <vmsim/schedule.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace vmsim {

struct FactorLists {
    std::vector<std::string> initial;
    std::vector<std::string> reallocation;
    std::vector<std::string> placement;
    std::vector<Estimator> estimators;
    std::vector<std::uint64_t> seeds;
};

struct Combination {
    std::string sim_id;
    std::string initial;
    std::string reallocation;
    std::string placement;
    Estimator estimator = Estimator::max;
    std::uint64_t seed = 0;
};

/// Full cross product in lexicographic order of list positions
/// (initial, reallocation, placement, estimator, seed). sim_id is the
/// zero-padded rank. Throws Error(EmptyFactor) or Error(InvalidParams) on
/// duplicates.
std::vector<Combination> build_matrix(const FactorLists& lists);

struct BatchSummary {
    std::size_t total = 0;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    std::filesystem::path csv_path;
    std::filesystem::path err_path;
    std::int64_t wall_ms = 0;
};

/// Opens a fresh workload source for one worker.
using WorkloadFactory = std::function<std::unique_ptr<times::WorkloadSource>()>;

struct BatchOutputs {
    std::filesystem::path csv;
    std::filesystem::path err;
};

/// Runs every combination on `parallelism` worker threads. Each job gets its
/// own engine and workload source; any exception is contained to its job and
/// recorded in the ERR file. Rows are written in sim_id order once all jobs
/// finish. Existing outputs are rotated to .bak first.
BatchSummary run_batch(const std::vector<Combination>& matrix, const SimulationConfig& base,
                       const Schedule& schedule, const WorkloadFactory& workloads,
                       const BatchOutputs& outputs, unsigned parallelism);

/// Moves `path` to `path.bak`, replacing an older backup. No-op if `path`
/// does not exist. Throws Error(RotationFailed).
void rotate_outputs(const std::filesystem::path& path);

/// Tab-separated: sim_id, initial, reallocation, placement, estimator, seed, message.
std::string err_line(const Combination& combo, const std::string& message);

} // namespace vmsim
