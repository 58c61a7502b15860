#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vmsim {

/// CPU utilization trace of one VM. Samples are percent of the VM's own
/// CPU capacity, spaced `interval_s` seconds apart starting at `start_s`.
struct TimeSeries {
    std::string name;
    std::int64_t start_s = 0;
    std::uint32_t interval_s = 1;
    std::vector<double> samples;

    /// Throws Error(InvalidSeries) on interval 0 and Error(InvalidSample)
    /// on any sample outside [0, 100] or non-finite.
    void validate() const;

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

/// A VM flavor. `probability` only matters inside a size catalog.
struct DomainSize {
    int cpu_units = 1;
    int memory_mb = 1;
    double probability = 1.0;

    friend bool operator==(const DomainSize&, const DomainSize&) = default;
};

/// Throws Error(InvalidParams) unless every size is positive and the
/// probabilities sum to 1 within 1e-9.
void validate_size_catalog(std::span<const DomainSize> sizes);

struct ServerSpec {
    std::string id;
    int cpu_units = 100;
    int memory_mb = 1;
    int base_cpu_units = 0;

    /// CPU left for VMs once the server's own demand is subtracted.
    int placeable_cpu() const noexcept { return cpu_units - base_cpu_units; }

    void validate() const;

    friend bool operator==(const ServerSpec&, const ServerSpec&) = default;
};

struct VmSpec {
    std::string id;
    DomainSize size;
    std::string series_name;
};

/// VM id -> server id. Ordered so iteration is deterministic.
using Allocation = std::map<std::string, std::string>;

enum class Estimator { max, mean, p95, p99 };

std::string_view to_string(Estimator est) noexcept;
std::optional<Estimator> parse_estimator(std::string_view text) noexcept;

/// Sample in effect at `t_s`; holds the last sample past the end of the trace.
double sample_at(const TimeSeries& series, std::int64_t t_s);

/// Nearest-rank quantile: value at 1-based rank ceil(p * n) of the sorted samples.
double nearest_rank(std::span<const double> samples, double p);

/// Statistic of the trace scaled to CPU units of a VM with `vm_cpu_units`.
double estimate_demand(const TimeSeries& series, Estimator est, int vm_cpu_units);

/// Server utilization in percent, base demand included. Not clamped: values
/// above 100 mean the server is overloaded.
double server_utilization(const ServerSpec& spec,
                          std::span<const double> resident_loads,
                          std::span<const double> migration_overheads = {});

/// Reads the `t_s,util_pct` workload CSV. The interval comes from the first
/// two rows and must stay constant.
TimeSeries read_workload_csv(std::istream& in, std::string name);

void write_workload_csv(std::ostream& out, const TimeSeries& series);

} // namespace vmsim
