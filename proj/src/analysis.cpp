#include <vmsim/analysis.hpp>

#include <vmsim/engine.hpp>
#include <vmsim/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>
#include <tuple>

namespace vmsim {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

template <typename T>
T number(const std::string& text, std::size_t line) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error(Errc::ParseError, "results csv line " + std::to_string(line) + ": bad number '" + text + "'");
    }
    return value;
}

struct Stats {
    double mean = 0.0;
    double sd = 0.0;
};

Stats stats(const std::vector<double>& xs) {
    Stats s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(var / static_cast<double>(xs.size()));
    return s;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string escape_html(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string group_label(const AggregateRow& r) {
    return r.initial_placement + " / " + r.reallocation + " / " + r.placement + " / " + r.estimator;
}

const char* kColumns[] = {"initial_placement", "reallocation", "placement", "estimator",
                          "n", "mean_active_servers", "sd_active_servers", "mean_cpu_util_pct",
                          "sd_cpu_util_pct", "mean_sla_violation_rate", "sd_sla_violation_rate",
                          "total_migrations"};

std::vector<std::string> cells(const AggregateRow& r) {
    return {r.initial_placement,
            r.reallocation,
            r.placement,
            r.estimator,
            std::to_string(r.n),
            fixed(r.mean_active_servers, 3),
            fixed(r.sd_active_servers, 3),
            fixed(r.mean_cpu_util_pct, 2),
            fixed(r.sd_cpu_util_pct, 2),
            fixed(r.mean_sla_violation_rate, 4),
            fixed(r.sd_sla_violation_rate, 4),
            std::to_string(r.total_migrations)};
}

} // namespace

std::vector<ResultRecord> read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(Errc::EmptyInput, "results csv is empty");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) {
        throw Error(Errc::HeaderMismatch, "results csv header does not match the batch format");
    }
    std::vector<ResultRecord> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split(line, ',');
        if (f.size() != 15) {
            throw Error(Errc::ParseError, "results csv line " + std::to_string(lineno) + ": expected 15 fields");
        }
        ResultRecord r;
        r.initial_placement = f[1];
        r.reallocation = f[2];
        r.placement = f[3];
        r.estimator = f[4];
        r.avg_active_servers = number<double>(f[8], lineno);
        r.avg_cpu_util_pct = number<double>(f[9], lineno);
        r.sla_violation_rate = number<double>(f[10], lineno);
        r.migration_count = number<std::uint64_t>(f[11], lineno);
        r.ok = f[13] == "ok";
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<ResultRecord>& rows) {
    using Key = std::tuple<std::string, std::string, std::string, std::string>;
    struct Acc {
        std::vector<double> servers, util, sla;
        std::uint64_t migrations = 0;
    };
    std::map<Key, Acc> groups;
    for (const auto& r : rows) {
        if (!r.ok) continue;
        auto& g = groups[{r.initial_placement, r.reallocation, r.placement, r.estimator}];
        g.servers.push_back(r.avg_active_servers);
        g.util.push_back(r.avg_cpu_util_pct);
        g.sla.push_back(r.sla_violation_rate);
        g.migrations += r.migration_count;
    }
    if (groups.empty()) {
        throw Error(Errc::EmptyInput, "no successful rows to aggregate");
    }
    std::vector<AggregateRow> out;
    for (auto& [key, g] : groups) {
        // Sorting the samples makes the floating-point sums independent of row order.
        std::sort(g.servers.begin(), g.servers.end());
        std::sort(g.util.begin(), g.util.end());
        std::sort(g.sla.begin(), g.sla.end());
        AggregateRow row;
        std::tie(row.initial_placement, row.reallocation, row.placement, row.estimator) = key;
        row.n = g.servers.size();
        const auto s = stats(g.servers);
        const auto u = stats(g.util);
        const auto v = stats(g.sla);
        row.mean_active_servers = s.mean;
        row.sd_active_servers = s.sd;
        row.mean_cpu_util_pct = u.mean;
        row.sd_cpu_util_pct = u.sd;
        row.mean_sla_violation_rate = v.mean;
        row.sd_sla_violation_rate = v.sd;
        row.total_migrations = g.migrations;
        out.push_back(std::move(row));
    }
    // groups is already ordered by key, so a stable sort keeps key order on ties.
    std::stable_sort(out.begin(), out.end(), [](const AggregateRow& a, const AggregateRow& b) {
        return a.mean_active_servers < b.mean_active_servers;
    });
    return out;
}

std::string render_svg(const std::vector<AggregateRow>& rows) {
    constexpr int kLabelWidth = 340;
    constexpr int kBarArea = 400;
    constexpr int kRowHeight = 22;
    double max_value = 0.0;
    for (const auto& r : rows) max_value = std::max(max_value, r.mean_active_servers);
    if (max_value <= 0.0) max_value = 1.0;
    const int height = static_cast<int>(rows.size()) * kRowHeight + 40;
    const int width = kLabelWidth + kBarArea + 80;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<text x=\"" << kLabelWidth << "\" y=\"16\">mean active servers</text>\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const int y = 28 + static_cast<int>(i) * kRowHeight;
        const double w = r.mean_active_servers / max_value * kBarArea;
        svg << "<text x=\"" << kLabelWidth - 6 << "\" y=\"" << y + 14 << "\" text-anchor=\"end\">"
            << escape_html(group_label(r)) << "</text>\n";
        svg << "<rect x=\"" << kLabelWidth << "\" y=\"" << y << "\" width=\"" << fixed(w, 2)
            << "\" height=\"" << kRowHeight - 6 << "\" fill=\"#3070b3\"/>\n";
        svg << "<text x=\"" << fixed(kLabelWidth + w + 4, 2) << "\" y=\"" << y + 14 << "\">"
            << fixed(r.mean_active_servers, 3) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render_report(const std::vector<AggregateRow>& rows, ReportFormat format, bool with_plot) {
    std::ostringstream out;
    if (format == ReportFormat::markdown) {
        out << "# Simulation summary\n\n";
        out << "Groups ranked by mean number of active servers (lower is better).\n\n";
        out << '|';
        for (const char* c : kColumns) out << ' ' << c << " |";
        out << "\n|";
        for (std::size_t i = 0; i < std::size(kColumns); ++i) out << (i < 4 ? " --- |" : " ---: |");
        out << '\n';
        for (const auto& r : rows) {
            out << '|';
            for (const auto& cell : cells(r)) out << ' ' << cell << " |";
            out << '\n';
        }
        if (with_plot) {
            out << "\n" << render_svg(rows);
        }
        return out.str();
    }
    out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Simulation summary</title>\n"
        << "<style>table{border-collapse:collapse}td,th{border:1px solid #999;padding:2px 6px}"
        << "td.num{text-align:right}</style>\n</head>\n<body>\n<h1>Simulation summary</h1>\n"
        << "<p>Groups ranked by mean number of active servers (lower is better).</p>\n<table>\n<tr>";
    for (const char* c : kColumns) out << "<th>" << c << "</th>";
    out << "</tr>\n";
    for (const auto& r : rows) {
        out << "<tr>";
        const auto cs = cells(r);
        for (std::size_t i = 0; i < cs.size(); ++i) {
            out << (i < 4 ? "<td>" : "<td class=\"num\">") << escape_html(cs[i]) << "</td>";
        }
        out << "</tr>\n";
    }
    out << "</table>\n";
    if (with_plot) out << render_svg(rows);
    out << "</body>\n</html>\n";
    return out.str();
}

} // namespace vmsim
