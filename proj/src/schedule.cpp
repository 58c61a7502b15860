#include <vmsim/schedule.hpp>

#include <vmsim/error.hpp>
#include <vmsim/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace vmsim {

using nlohmann::json;

namespace {

std::size_t draw_size(const std::vector<DomainSize>& sizes, Rng& rng) {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        acc += sizes[i].probability;
        if (u < acc) return i;
    }
    // Rounding left u above the cumulative sum: take the last size with mass.
    for (std::size_t i = sizes.size(); i-- > 0;) {
        if (sizes[i].probability > 0.0) return i;
    }
    return 0;
}

} // namespace

Schedule build_schedule(const BuilderParams& params) {
    if (!(params.arrival_rate_per_s > 0.0) || !std::isfinite(params.arrival_rate_per_s)) {
        throw Error(Errc::InvalidParams, "arrival rate must be positive");
    }
    if (!(params.mean_lifetime_s > 0.0) || !std::isfinite(params.mean_lifetime_s)) {
        throw Error(Errc::InvalidParams, "mean lifetime must be positive");
    }
    if (params.horizon_s < 0) {
        throw Error(Errc::InvalidParams, "horizon must be non-negative");
    }
    if (params.series_pool.empty()) {
        throw Error(Errc::InvalidParams, "series pool is empty");
    }
    validate_size_catalog(params.sizes);

    Rng rng(params.seed);
    std::vector<std::string> pool = params.series_pool;
    std::sort(pool.begin(), pool.end());
    rng.shuffle(pool.begin(), pool.end());

    Schedule schedule;
    schedule.id = params.id;
    schedule.horizon_s = params.horizon_s;
    schedule.sizes = params.sizes;

    const auto horizon = static_cast<double>(params.horizon_s);
    double t = rng.exponential(params.arrival_rate_per_s);
    std::size_t k = 0;
    while (t < horizon) {
        const auto arrival = static_cast<std::int64_t>(std::floor(t));
        const double lifetime = params.lifetime_dist == LifetimeDist::exponential
                                    ? rng.exponential(1.0 / params.mean_lifetime_s)
                                    : params.mean_lifetime_s;
        const auto span = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(lifetime)));
        ScheduleEntry entry;
        entry.vm = "vm" + std::to_string(k);
        entry.arrival_s = arrival;
        entry.departure_s = std::min(params.horizon_s, arrival + span);
        entry.size_index = draw_size(params.sizes, rng);
        entry.series = pool[k % pool.size()];
        schedule.entries.push_back(std::move(entry));
        ++k;
        t += rng.exponential(params.arrival_rate_per_s);
    }
    std::stable_sort(schedule.entries.begin(), schedule.entries.end(),
                     [](const ScheduleEntry& a, const ScheduleEntry& b) {
                         if (a.arrival_s != b.arrival_s) return a.arrival_s < b.arrival_s;
                         return a.vm < b.vm;
                     });
    return schedule;
}

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    throw Error(Errc::SchemaError, path + ": " + what);
}

void only_fields(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) schema_error(path.empty() ? "$" : path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* a) { return key == a; });
        if (!known) schema_error(path.empty() ? key : path + "." + key, "unknown field");
    }
}

const json& field(const json& obj, const std::string& path, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) schema_error(path.empty() ? key : path + "." + key, "missing field");
    return *it;
}

std::int64_t as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) schema_error(path, "expected an integer");
    return v.get<std::int64_t>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) schema_error(path, "expected a string");
    return v.get<std::string>();
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) schema_error(path, "expected a number");
    return v.get<double>();
}

} // namespace

Schedule load_schedule(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(Errc::ParseError, std::string("schedule: ") + e.what());
    }
    only_fields(doc, "", {"id", "horizon_s", "sizes", "entries"});
    Schedule s;
    s.id = as_string(field(doc, "", "id"), "id");
    s.horizon_s = as_int(field(doc, "", "horizon_s"), "horizon_s");
    if (s.horizon_s < 0) schema_error("horizon_s", "must be non-negative");

    const auto& sizes = field(doc, "", "sizes");
    if (!sizes.is_array()) schema_error("sizes", "expected an array");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const auto path = "sizes[" + std::to_string(i) + "]";
        only_fields(sizes[i], path, {"cpu_units", "memory_mb", "probability"});
        DomainSize d;
        const auto cpu = as_int(field(sizes[i], path, "cpu_units"), path + ".cpu_units");
        const auto mem = as_int(field(sizes[i], path, "memory_mb"), path + ".memory_mb");
        if (cpu <= 0 || cpu > INT32_MAX) schema_error(path + ".cpu_units", "must be a positive integer");
        if (mem <= 0 || mem > INT32_MAX) schema_error(path + ".memory_mb", "must be a positive integer");
        d.cpu_units = static_cast<int>(cpu);
        d.memory_mb = static_cast<int>(mem);
        d.probability = as_number(field(sizes[i], path, "probability"), path + ".probability");
        if (!(d.probability >= 0.0 && d.probability <= 1.0)) {
            schema_error(path + ".probability", "must be in [0, 1]");
        }
        s.sizes.push_back(d);
    }

    const auto& entries = field(doc, "", "entries");
    if (!entries.is_array()) schema_error("entries", "expected an array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto path = "entries[" + std::to_string(i) + "]";
        only_fields(entries[i], path, {"vm", "arrival_s", "departure_s", "size", "series"});
        ScheduleEntry e;
        e.vm = as_string(field(entries[i], path, "vm"), path + ".vm");
        e.arrival_s = as_int(field(entries[i], path, "arrival_s"), path + ".arrival_s");
        e.departure_s = as_int(field(entries[i], path, "departure_s"), path + ".departure_s");
        const auto size = as_int(field(entries[i], path, "size"), path + ".size");
        e.series = as_string(field(entries[i], path, "series"), path + ".series");
        if (e.vm.empty()) schema_error(path + ".vm", "must not be empty");
        if (!seen.insert(e.vm).second) schema_error(path + ".vm", "duplicate vm id '" + e.vm + "'");
        if (e.arrival_s < 0) schema_error(path + ".arrival_s", "must be non-negative");
        if (e.departure_s <= e.arrival_s) schema_error(path + ".departure_s", "must exceed arrival_s");
        if (e.departure_s > s.horizon_s) schema_error(path + ".departure_s", "exceeds horizon_s");
        if (size < 0 || static_cast<std::size_t>(size) >= s.sizes.size()) {
            schema_error(path + ".size", "index out of range");
        }
        e.size_index = static_cast<std::size_t>(size);
        if (!s.entries.empty()) {
            const auto& prev = s.entries.back();
            if (std::tie(prev.arrival_s, prev.vm) > std::tie(e.arrival_s, e.vm)) {
                schema_error(path, "entries must be sorted by (arrival_s, vm)");
            }
        }
        s.entries.push_back(std::move(e));
    }
    return s;
}

Schedule load_schedule_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open schedule '" + path + "'");
    return load_schedule(in);
}

void save_schedule(std::ostream& out, const Schedule& schedule) {
    json doc;
    doc["id"] = schedule.id;
    doc["horizon_s"] = schedule.horizon_s;
    doc["sizes"] = json::array();
    for (const auto& d : schedule.sizes) {
        doc["sizes"].push_back(
            {{"cpu_units", d.cpu_units}, {"memory_mb", d.memory_mb}, {"probability", d.probability}});
    }
    doc["entries"] = json::array();
    for (const auto& e : schedule.entries) {
        doc["entries"].push_back({{"vm", e.vm},
                                  {"arrival_s", e.arrival_s},
                                  {"departure_s", e.departure_s},
                                  {"size", e.size_index},
                                  {"series", e.series}});
    }
    out << doc.dump(1) << '\n';
}

void save_schedule_file(const std::string& path, const Schedule& schedule) {
    std::ofstream out(path, std::ios::trunc);
    save_schedule(out, schedule);
    if (!out) throw Error(Errc::OutputUnwritable, "cannot write schedule '" + path + "'");
}

std::string describe(const Violation& v) {
    switch (v.kind) {
    case Violation::Kind::DuplicateVm: return "DuplicateVm(" + v.subject + ")";
    case Violation::Kind::MissingSeries: return "MissingSeries(" + v.subject + ")";
    case Violation::Kind::BadInterval: return "BadInterval(" + v.subject + ")";
    case Violation::Kind::SizeOutOfRange: return "SizeOutOfRange(" + v.subject + ")";
    case Violation::Kind::Unsorted: return "Unsorted(" + v.subject + ")";
    case Violation::Kind::BadHorizon: return "BadHorizon(" + v.subject + ")";
    case Violation::Kind::BadCatalog: return "BadCatalog(" + v.subject + ")";
    }
    return "Unknown";
}

std::vector<Violation> validate_schedule(const Schedule& schedule,
                                         const std::set<std::string>& available_series) {
    using Kind = Violation::Kind;
    std::vector<Violation> out;
    if (schedule.horizon_s <= 0 && !schedule.entries.empty()) {
        out.push_back({Kind::BadHorizon, schedule.id});
    }
    try {
        validate_size_catalog(schedule.sizes);
    } catch (const Error& e) {
        out.push_back({Kind::BadCatalog, e.what()});
    }
    std::set<std::string> seen;
    std::set<std::string> missing;
    for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
        const auto& e = schedule.entries[i];
        if (!seen.insert(e.vm).second) out.push_back({Kind::DuplicateVm, e.vm});
        if (e.arrival_s < 0 || e.departure_s <= e.arrival_s || e.departure_s > schedule.horizon_s) {
            out.push_back({Kind::BadInterval, e.vm});
        }
        if (e.size_index >= schedule.sizes.size()) out.push_back({Kind::SizeOutOfRange, e.vm});
        if (i > 0) {
            const auto& p = schedule.entries[i - 1];
            if (std::tie(p.arrival_s, p.vm) > std::tie(e.arrival_s, e.vm)) {
                out.push_back({Kind::Unsorted, e.vm});
            }
        }
        if (!available_series.count(e.series) && missing.insert(e.series).second) {
            out.push_back({Kind::MissingSeries, e.series});
        }
    }
    return out;
}

} // namespace vmsim
