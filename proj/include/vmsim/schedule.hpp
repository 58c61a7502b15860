#pragma once

#include <vmsim/model.hpp>

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace vmsim {

struct ScheduleEntry {
    std::string vm;
    std::int64_t arrival_s = 0;
    std::int64_t departure_s = 0;
    std::size_t size_index = 0;
    std::string series;

    friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

/// VM arrival/departure plan. Entries are sorted by (arrival_s, vm).
struct Schedule {
    std::string id;
    std::int64_t horizon_s = 0;
    std::vector<DomainSize> sizes;
    std::vector<ScheduleEntry> entries;

    friend bool operator==(const Schedule&, const Schedule&) = default;
};

enum class LifetimeDist { exponential, fixed };

struct BuilderParams {
    std::string id = "generated";
    double arrival_rate_per_s = 0.01;
    double mean_lifetime_s = 3600.0;
    LifetimeDist lifetime_dist = LifetimeDist::exponential;
    std::int64_t horizon_s = 86400;
    std::vector<DomainSize> sizes;
    std::vector<std::string> series_pool;
    std::uint64_t seed = 1;
};

/// Poisson arrivals until the horizon, lifetimes truncated at the horizon,
/// sizes drawn from the catalog, series assigned round-robin over a seeded
/// shuffle of the pool. VM ids are vm<k> in arrival order.
Schedule build_schedule(const BuilderParams& params);

/// Parses the JSON schedule document. Unknown fields are rejected.
/// Throws Error(ParseError) or Error(SchemaError) with the field path.
Schedule load_schedule(std::istream& in);
Schedule load_schedule_file(const std::string& path);

void save_schedule(std::ostream& out, const Schedule& schedule);
void save_schedule_file(const std::string& path, const Schedule& schedule);

/// One violation per broken invariant or missing series. Empty means valid.
struct Violation {
    enum class Kind {
        DuplicateVm,
        MissingSeries,
        BadInterval,
        SizeOutOfRange,
        Unsorted,
        BadHorizon,
        BadCatalog,
    };
    Kind kind;
    std::string subject;

    friend bool operator==(const Violation&, const Violation&) = default;
};

std::string describe(const Violation& v);

std::vector<Violation> validate_schedule(const Schedule& schedule,
                                         const std::set<std::string>& available_series);

} // namespace vmsim
