#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace vmsim {

/// Summary statistics for one (initial, reallocation, placement, estimator)
/// group. Standard deviations use the population (n) divisor.
struct AggregateRow {
    std::string initial_placement;
    std::string reallocation;
    std::string placement;
    std::string estimator;
    std::size_t n = 0;
    double mean_active_servers = 0.0;
    double sd_active_servers = 0.0;
    double mean_cpu_util_pct = 0.0;
    double sd_cpu_util_pct = 0.0;
    double mean_sla_violation_rate = 0.0;
    double sd_sla_violation_rate = 0.0;
    std::uint64_t total_migrations = 0;
};

/// Parsed batch CSV row, only the columns the aggregation needs.
struct ResultRecord {
    std::string initial_placement;
    std::string reallocation;
    std::string placement;
    std::string estimator;
    double avg_active_servers = 0.0;
    double avg_cpu_util_pct = 0.0;
    double sla_violation_rate = 0.0;
    std::uint64_t migration_count = 0;
    bool ok = true;
};

/// Reads a batch CSV. Throws Error(HeaderMismatch) on a foreign header and
/// Error(ParseError) on malformed rows.
std::vector<ResultRecord> read_results_csv(std::istream& in);

/// Groups successful rows and sorts by mean active servers ascending (group
/// key breaks ties). Throws Error(EmptyInput) when no successful row exists.
std::vector<AggregateRow> aggregate(const std::vector<ResultRecord>& rows);

enum class ReportFormat { markdown, html };

std::string render_report(const std::vector<AggregateRow>& rows, ReportFormat format, bool with_plot);

/// Horizontal bar chart of mean active servers per group.
std::string render_svg(const std::vector<AggregateRow>& rows);

} // namespace vmsim
