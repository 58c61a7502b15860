#include <vmsim/runner.hpp>

#include <vmsim/error.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <thread>

namespace fs = std::filesystem;

namespace vmsim {

namespace {

template <typename T>
void check_factor(const std::vector<T>& list, const char* name) {
    if (list.empty()) {
        throw Error(Errc::EmptyFactor, std::string("factor '") + name + "' is empty");
    }
    std::set<T> unique(list.begin(), list.end());
    if (unique.size() != list.size()) {
        throw Error(Errc::InvalidParams, std::string("factor '") + name + "' has duplicates");
    }
}

std::string pad(std::size_t rank, std::size_t width) {
    auto s = std::to_string(rank);
    if (s.size() < width) s.insert(0, width - s.size(), '0');
    return s;
}

} // namespace

std::vector<Combination> build_matrix(const FactorLists& lists) {
    check_factor(lists.initial, "initial");
    check_factor(lists.reallocation, "reallocation");
    check_factor(lists.placement, "placement");
    check_factor(lists.estimators, "estimators");
    check_factor(lists.seeds, "seeds");

    const std::size_t total = lists.initial.size() * lists.reallocation.size() *
                              lists.placement.size() * lists.estimators.size() * lists.seeds.size();
    const std::size_t width = std::max<std::size_t>(4, std::to_string(total - 1).size());
    std::vector<Combination> matrix;
    matrix.reserve(total);
    for (const auto& ini : lists.initial)
        for (const auto& re : lists.reallocation)
            for (const auto& pl : lists.placement)
                for (auto est : lists.estimators)
                    for (auto seed : lists.seeds) {
                        matrix.push_back({pad(matrix.size(), width), ini, re, pl, est, seed});
                    }
    return matrix;
}

void rotate_outputs(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec)) return;
    fs::path backup = path;
    backup += ".bak";
    // rename(2) replaces an existing backup atomically.
    fs::rename(path, backup, ec);
    if (ec) {
        throw Error(Errc::RotationFailed, "cannot rotate " + path.string() + ": " + ec.message());
    }
}

std::string err_line(const Combination& c, const std::string& message) {
    std::string clean = message;
    std::replace(clean.begin(), clean.end(), '\n', ' ');
    std::replace(clean.begin(), clean.end(), '\t', ' ');
    return c.sim_id + '\t' + c.initial + '\t' + c.reallocation + '\t' + c.placement + '\t' +
           std::string(to_string(c.estimator)) + '\t' + std::to_string(c.seed) + '\t' + clean;
}

BatchSummary run_batch(const std::vector<Combination>& matrix, const SimulationConfig& base,
                       const Schedule& schedule, const WorkloadFactory& workloads,
                       const BatchOutputs& outputs, unsigned parallelism) {
    const auto wall_start = std::chrono::steady_clock::now();
    parallelism = std::max(1u, parallelism);

    rotate_outputs(outputs.csv);
    rotate_outputs(outputs.err);
    std::ofstream csv(outputs.csv, std::ios::trunc);
    std::ofstream err(outputs.err, std::ios::trunc);
    if (!csv || !err) {
        throw Error(Errc::OutputUnwritable, "cannot open batch outputs");
    }

    std::vector<SimulationResult> results(matrix.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < matrix.size(); i = next.fetch_add(1)) {
            const auto& combo = matrix[i];
            SimulationConfig config = base;
            config.initial_placement = combo.initial;
            config.reallocation = combo.reallocation;
            config.placement = combo.placement;
            config.estimator = combo.estimator;
            config.seed = combo.seed;
            SimulationResult r;
            try {
                auto source = workloads();
                r = run_simulation(config, schedule, *source);
            } catch (const std::exception& e) {
                r = finalize_metrics({}, meta_from(config, schedule));
                r.status = RunStatus::failed;
                r.message = e.what();
            } catch (...) {
                r = finalize_metrics({}, meta_from(config, schedule));
                r.status = RunStatus::failed;
                r.message = "unknown failure";
            }
            r.sim_id = combo.sim_id;
            results[i] = std::move(r);
        }
    };
    {
        std::vector<std::jthread> pool;
        const auto n = std::min<std::size_t>(parallelism, std::max<std::size_t>(1, matrix.size()));
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }

    BatchSummary summary;
    summary.total = matrix.size();
    summary.csv_path = outputs.csv;
    summary.err_path = outputs.err;
    csv << kCsvHeader << '\n';
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        if (results[i].status == RunStatus::ok) {
            csv << csv_row(results[i]) << '\n';
            ++summary.succeeded;
        } else {
            err << err_line(matrix[i], results[i].message) << '\n';
            ++summary.failed;
        }
    }
    csv.flush();
    err.flush();
    if (!csv || !err) {
        throw Error(Errc::OutputUnwritable, "writing batch outputs failed");
    }
    summary.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - wall_start)
                          .count();
    return summary;
}

} // namespace vmsim
