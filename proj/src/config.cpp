#include <vmsim/config.hpp>

#include <vmsim/error.hpp>
#include <vmsim/times/service.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace vmsim {

using nlohmann::json;

std::vector<ServerSpec> SimulationConfig::server_specs() const {
    std::vector<ServerSpec> specs;
    for (int i = 0; i < servers.count; ++i) {
        specs.push_back({"s" + std::to_string(i + 1), servers.cpu_units, servers.memory_mb,
                         servers.base_cpu_units});
    }
    specs.insert(specs.end(), servers.extra.begin(), servers.extra.end());
    return specs;
}

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
    throw Error(Errc::ConfigInvalid, path + ": " + what);
}

} // namespace

void SimulationConfig::validate() const {
    if (loop_interval_s <= 0) invalid("loop_interval_s", "must be positive");
    if (reallocation_interval_s <= 0) invalid("reallocation_interval_s", "must be positive");
    if (duration_s <= 0) invalid("duration_s", "must be positive");
    if (duration_s % loop_interval_s != 0) {
        invalid("duration_s", "must be a multiple of loop_interval_s");
    }
    if (servers.count < 1) invalid("servers.count", "must be at least 1");
    if (servers.cpu_units <= 0) invalid("servers.cpu_units", "must be positive");
    if (servers.memory_mb <= 0) invalid("servers.memory_mb", "must be positive");
    if (servers.base_cpu_units < 0 || servers.base_cpu_units >= servers.cpu_units) {
        invalid("servers.base_cpu_units", "must satisfy 0 <= base_cpu_units < cpu_units");
    }
    auto specs = server_specs();
    for (std::size_t i = 0; i < servers.extra.size(); ++i) {
        const auto path = "servers.list[" + std::to_string(i) + "]";
        const auto& s = servers.extra[i];
        if (s.id.empty()) invalid(path + ".id", "must not be empty");
        if (s.cpu_units <= 0 || s.memory_mb <= 0 || s.base_cpu_units < 0 ||
            s.base_cpu_units >= s.cpu_units) {
            invalid(path, "need cpu_units > base_cpu_units >= 0 and memory_mb > 0");
        }
    }
    std::vector<std::string> ids;
    for (const auto& s : specs) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        invalid("servers.list", "duplicate server id");
    }
    if (!(migration.rate_mb_per_s > 0.0) || !std::isfinite(migration.rate_mb_per_s)) {
        invalid("migration.rate_mb_per_s", "must be positive");
    }
    if (!(migration.cpu_overhead_frac >= 0.0) || !std::isfinite(migration.cpu_overhead_frac)) {
        invalid("migration.cpu_overhead_frac", "must be non-negative");
    }
    if (!(sla_threshold_pct > 0.0) || !std::isfinite(sla_threshold_pct)) {
        invalid("sla_threshold_pct", "must be positive");
    }
    if (initial_placement.empty()) invalid("initial_placement", "must not be empty");
    if (exact_budget.max_nodes && *exact_budget.max_nodes == 0) {
        invalid("exact_budget.max_nodes", "must be positive");
    }
    if (exact_budget.max_wall_ms && *exact_budget.max_wall_ms <= 0) {
        invalid("exact_budget.max_wall_ms", "must be positive");
    }
}

namespace {

void only_fields(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) invalid(path.empty() ? "$" : path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            invalid(path.empty() ? key : path + "." + key, "unknown field");
        }
    }
}

std::string join(const std::string& path, const char* key) {
    return path.empty() ? key : path + "." + key;
}

template <typename T>
void read_int(const json& obj, const std::string& path, const char* key, T& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_number_integer()) invalid(join(path, key), "expected an integer");
    const auto v = it->template get<std::int64_t>();
    if constexpr (std::is_same_v<T, int>) {
        if (v < INT32_MIN || v > INT32_MAX) invalid(join(path, key), "out of range");
    }
    if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_unsigned()) {
            out = it->template get<T>();
            return;
        }
        if (v < 0) invalid(join(path, key), "must be non-negative");
    }
    out = static_cast<T>(v);
}

void read_double(const json& obj, const std::string& path, const char* key, double& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_number()) invalid(join(path, key), "expected a number");
    out = it->get<double>();
}

void read_string(const json& obj, const std::string& path, const char* key, std::string& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_string()) invalid(join(path, key), "expected a string");
    out = it->get<std::string>();
}

template <typename T>
void read_optional_int(const json& obj, const std::string& path, const char* key,
                       std::optional<T>& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (it->is_null()) {
        out.reset();
        return;
    }
    T value{};
    read_int(obj, path, key, value);
    out = value;
}

} // namespace

SimulationConfig parse_config(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(Errc::ParseError, std::string("config: ") + e.what());
    }
    only_fields(doc, "",
                {"initial_placement", "reallocation", "placement", "estimator", "loop_interval_s",
                 "reallocation_interval_s", "servers", "migration", "sla_threshold_pct",
                 "duration_s", "seed", "schedule", "workloads", "exact_budget"});
    SimulationConfig c;
    read_string(doc, "", "initial_placement", c.initial_placement);
    read_string(doc, "", "reallocation", c.reallocation);
    read_string(doc, "", "placement", c.placement);
    if (doc.contains("estimator")) {
        std::string est;
        read_string(doc, "", "estimator", est);
        const auto parsed = parse_estimator(est);
        if (!parsed) invalid("estimator", "expected one of max, mean, p95, p99");
        c.estimator = *parsed;
    }
    read_int(doc, "", "loop_interval_s", c.loop_interval_s);
    read_int(doc, "", "reallocation_interval_s", c.reallocation_interval_s);
    if (const auto it = doc.find("servers"); it != doc.end()) {
        only_fields(*it, "servers", {"count", "cpu_units", "memory_mb", "base_cpu_units", "list"});
        read_int(*it, "servers", "count", c.servers.count);
        read_int(*it, "servers", "cpu_units", c.servers.cpu_units);
        read_int(*it, "servers", "memory_mb", c.servers.memory_mb);
        read_int(*it, "servers", "base_cpu_units", c.servers.base_cpu_units);
        if (const auto list = it->find("list"); list != it->end()) {
            if (!list->is_array()) invalid("servers.list", "expected an array");
            for (std::size_t i = 0; i < list->size(); ++i) {
                const auto path = "servers.list[" + std::to_string(i) + "]";
                const auto& item = (*list)[i];
                only_fields(item, path, {"id", "cpu_units", "memory_mb", "base_cpu_units"});
                ServerSpec s;
                if (!item.contains("id")) invalid(path + ".id", "missing field");
                read_string(item, path, "id", s.id);
                read_int(item, path, "cpu_units", s.cpu_units);
                read_int(item, path, "memory_mb", s.memory_mb);
                read_int(item, path, "base_cpu_units", s.base_cpu_units);
                c.servers.extra.push_back(std::move(s));
            }
        }
    }
    if (const auto it = doc.find("migration"); it != doc.end()) {
        only_fields(*it, "migration", {"rate_mb_per_s", "cpu_overhead_frac"});
        read_double(*it, "migration", "rate_mb_per_s", c.migration.rate_mb_per_s);
        read_double(*it, "migration", "cpu_overhead_frac", c.migration.cpu_overhead_frac);
    }
    read_double(doc, "", "sla_threshold_pct", c.sla_threshold_pct);
    if (!doc.contains("duration_s")) invalid("duration_s", "missing field");
    read_int(doc, "", "duration_s", c.duration_s);
    read_int(doc, "", "seed", c.seed);
    read_string(doc, "", "schedule", c.schedule);
    read_string(doc, "", "workloads", c.workloads);
    if (const auto it = doc.find("exact_budget"); it != doc.end()) {
        only_fields(*it, "exact_budget", {"max_nodes", "max_wall_ms"});
        read_optional_int(*it, "exact_budget", "max_nodes", c.exact_budget.max_nodes);
        read_optional_int(*it, "exact_budget", "max_wall_ms", c.exact_budget.max_wall_ms);
    }
    c.validate();
    return c;
}

SimulationConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open config '" + path.string() + "'");
    auto config = parse_config(in);
    resolve_relative_paths(config, path.parent_path());
    return config;
}

void resolve_relative_paths(SimulationConfig& config, const std::filesystem::path& base_dir) {
    namespace fs = std::filesystem;
    if (base_dir.empty()) return;
    if (!config.schedule.empty() && fs::path(config.schedule).is_relative()) {
        config.schedule = (base_dir / config.schedule).lexically_normal().string();
    }
    // HOST:PORT locations stay untouched.
    if (!config.workloads.empty() && fs::path(config.workloads).is_relative() &&
        !(times::parse_endpoint(config.workloads) && !fs::exists(base_dir / config.workloads))) {
        config.workloads = (base_dir / config.workloads).lexically_normal().string();
    }
}

std::string dump_config(const SimulationConfig& c) {
    json doc;
    doc["initial_placement"] = c.initial_placement;
    doc["reallocation"] = c.reallocation;
    doc["placement"] = c.placement;
    doc["estimator"] = std::string(to_string(c.estimator));
    doc["loop_interval_s"] = c.loop_interval_s;
    doc["reallocation_interval_s"] = c.reallocation_interval_s;
    json servers = {{"count", c.servers.count},
                    {"cpu_units", c.servers.cpu_units},
                    {"memory_mb", c.servers.memory_mb},
                    {"base_cpu_units", c.servers.base_cpu_units}};
    if (!c.servers.extra.empty()) {
        servers["list"] = json::array();
        for (const auto& s : c.servers.extra) {
            servers["list"].push_back({{"id", s.id},
                                       {"cpu_units", s.cpu_units},
                                       {"memory_mb", s.memory_mb},
                                       {"base_cpu_units", s.base_cpu_units}});
        }
    }
    doc["servers"] = servers;
    doc["migration"] = {{"rate_mb_per_s", c.migration.rate_mb_per_s},
                        {"cpu_overhead_frac", c.migration.cpu_overhead_frac}};
    doc["sla_threshold_pct"] = c.sla_threshold_pct;
    doc["duration_s"] = c.duration_s;
    doc["seed"] = c.seed;
    doc["schedule"] = c.schedule;
    doc["workloads"] = c.workloads;
    doc["exact_budget"] = {
        {"max_nodes", c.exact_budget.max_nodes ? json(*c.exact_budget.max_nodes) : json(nullptr)},
        {"max_wall_ms", c.exact_budget.max_wall_ms ? json(*c.exact_budget.max_wall_ms) : json(nullptr)}};
    return doc.dump(2) + "\n";
}

} // namespace vmsim
