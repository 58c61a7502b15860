#include <vmsim/model.hpp>

#include <vmsim/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace vmsim {

void TimeSeries::validate() const {
    if (interval_s < 1) {
        throw Error(Errc::InvalidSeries, "series '" + name + "': interval_s must be >= 1");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double s = samples[i];
        if (!std::isfinite(s) || s < 0.0 || s > 100.0) {
            throw Error(Errc::InvalidSample, "series '" + name + "': sample " + std::to_string(i) +
                                                 " outside [0, 100]");
        }
    }
}

void validate_size_catalog(std::span<const DomainSize> sizes) {
    if (sizes.empty()) {
        throw Error(Errc::InvalidParams, "size catalog is empty");
    }
    double total = 0.0;
    for (const auto& s : sizes) {
        if (s.cpu_units <= 0 || s.memory_mb <= 0) {
            throw Error(Errc::InvalidParams, "size catalog entries need positive cpu and memory");
        }
        if (!(s.probability >= 0.0 && s.probability <= 1.0)) {
            throw Error(Errc::InvalidParams, "size probability outside [0, 1]");
        }
        total += s.probability;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw Error(Errc::InvalidParams, "size probabilities must sum to 1");
    }
}

void ServerSpec::validate() const {
    if (cpu_units <= 0 || memory_mb <= 0 || base_cpu_units < 0 || base_cpu_units >= cpu_units) {
        throw Error(Errc::ConfigInvalid,
                    "server '" + id + "': need cpu_units > base_cpu_units >= 0 and memory_mb > 0");
    }
}

std::string_view to_string(Estimator est) noexcept {
    switch (est) {
    case Estimator::max: return "max";
    case Estimator::mean: return "mean";
    case Estimator::p95: return "p95";
    case Estimator::p99: return "p99";
    }
    return "max";
}

std::optional<Estimator> parse_estimator(std::string_view text) noexcept {
    if (text == "max") return Estimator::max;
    if (text == "mean") return Estimator::mean;
    if (text == "p95") return Estimator::p95;
    if (text == "p99") return Estimator::p99;
    return std::nullopt;
}

double sample_at(const TimeSeries& series, std::int64_t t_s) {
    if (t_s < series.start_s) {
        throw Error(Errc::TimeBeforeSeriesStart, "series '" + series.name + "' starts at " +
                                                     std::to_string(series.start_s));
    }
    if (series.samples.empty()) {
        throw Error(Errc::EmptySeries, "series '" + series.name + "' has no samples");
    }
    const auto index = static_cast<std::uint64_t>(t_s - series.start_s) / series.interval_s;
    return series.samples[std::min<std::uint64_t>(index, series.samples.size() - 1)];
}

double nearest_rank(std::span<const double> samples, double p) {
    if (samples.empty()) {
        throw Error(Errc::EmptySeries, "quantile of an empty sample set");
    }
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    // Integer rank arithmetic avoids 0.95 * 100 rounding up to 96.
    const auto permille = static_cast<std::size_t>(std::llround(p * 1000.0));
    std::size_t rank = (permille * n + 999) / 1000;
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

double estimate_demand(const TimeSeries& series, Estimator est, int vm_cpu_units) {
    if (series.samples.empty()) {
        throw Error(Errc::EmptySeries, "series '" + series.name + "' has no samples");
    }
    const auto& s = series.samples;
    double stat = 0.0;
    switch (est) {
    case Estimator::max:
        stat = *std::max_element(s.begin(), s.end());
        break;
    case Estimator::mean:
        stat = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
        break;
    case Estimator::p95:
        stat = nearest_rank(s, 0.95);
        break;
    case Estimator::p99:
        stat = nearest_rank(s, 0.99);
        break;
    }
    return stat / 100.0 * vm_cpu_units;
}

double server_utilization(const ServerSpec& spec,
                          std::span<const double> resident_loads,
                          std::span<const double> migration_overheads) {
    double total = spec.base_cpu_units;
    for (double l : resident_loads) total += l;
    for (double o : migration_overheads) total += o;
    return total / spec.cpu_units * 100.0;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line) {
    text = trim(text);
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error(Errc::ParseError, "workload csv line " + std::to_string(line) +
                                          ": bad number '" + std::string(text) + "'");
    }
    return value;
}

} // namespace

TimeSeries read_workload_csv(std::istream& in, std::string name) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "t_s,util_pct") {
        throw Error(Errc::ParseError, "workload csv: expected header 't_s,util_pct'");
    }
    TimeSeries series;
    series.name = std::move(name);
    std::vector<std::int64_t> times;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw Error(Errc::ParseError, "workload csv line " + std::to_string(lineno) + ": missing comma");
        }
        std::string_view view(line);
        times.push_back(parse_number<std::int64_t>(view.substr(0, comma), lineno));
        series.samples.push_back(parse_number<double>(view.substr(comma + 1), lineno));
    }
    if (series.samples.empty()) {
        throw Error(Errc::EmptySeries, "workload csv has no samples");
    }
    series.start_s = times.front();
    if (times.size() >= 2) {
        const auto step = times[1] - times[0];
        if (step < 1 || step > UINT32_MAX) {
            throw Error(Errc::ParseError, "workload csv: interval must be positive");
        }
        for (std::size_t i = 2; i < times.size(); ++i) {
            if (times[i] - times[i - 1] != step) {
                throw Error(Errc::ParseError,
                            "workload csv line " + std::to_string(i + 2) + ": interval not constant");
            }
        }
        series.interval_s = static_cast<std::uint32_t>(step);
    }
    series.validate();
    return series;
}

void write_workload_csv(std::ostream& out, const TimeSeries& series) {
    out << "t_s,util_pct\n";
    char buf[64];
    for (std::size_t i = 0; i < series.samples.size(); ++i) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, series.samples[i]);
        out << series.start_s + static_cast<std::int64_t>(i) * series.interval_s << ','
            << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
    }
}

} // namespace vmsim
