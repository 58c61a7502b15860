#include <vmsim/analysis.hpp>
#include <vmsim/config.hpp>
#include <vmsim/controllers.hpp>
#include <vmsim/engine.hpp>
#include <vmsim/error.hpp>
#include <vmsim/exact_solver.hpp>
#include <vmsim/model.hpp>
#include <vmsim/rng.hpp>
#include <vmsim/runner.hpp>
#include <vmsim/schedule.hpp>
#include <vmsim/times/codec.hpp>
#include <vmsim/times/store.hpp>

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <sstream>

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

/// Series handed over from Python, served to the engine by name.
class ListWorkloads final : public vmsim::times::WorkloadSource {
public:
    explicit ListWorkloads(const std::vector<vmsim::TimeSeries>& series) {
        for (const auto& s : series) series_[s.name] = s;
    }

    vmsim::TimeSeries get(const std::string& name) override {
        const auto it = series_.find(name);
        if (it == series_.end()) throw vmsim::Error(vmsim::Errc::NotFound, "no series '" + name + "'");
        return it->second;
    }

    std::vector<std::string> list(std::string_view prefix) override {
        std::vector<std::string> out;
        for (const auto& [name, s] : series_) {
            if (name.starts_with(prefix)) out.push_back(name);
        }
        return out;
    }

private:
    std::map<std::string, vmsim::TimeSeries> series_;
};

vmsim::Estimator to_estimator(const std::string& name) {
    const auto est = vmsim::parse_estimator(name);
    if (!est) throw vmsim::Error(vmsim::Errc::InvalidParams, "unknown estimator '" + name + "'");
    return *est;
}

py::dict result_dict(const vmsim::SimulationResult& r) {
    return py::dict("sim_id"_a = r.sim_id, "initial_placement"_a = r.initial_placement,
                    "reallocation"_a = r.reallocation, "placement"_a = r.placement, "estimator"_a = r.estimator,
                    "seed"_a = r.seed, "schedule_id"_a = r.schedule_id, "duration_s"_a = r.duration_s,
                    "avg_active_servers"_a = r.avg_active_servers, "avg_cpu_util_pct"_a = r.avg_cpu_util_pct,
                    "sla_violation_rate"_a = r.sla_violation_rate, "migration_count"_a = r.migration_count,
                    "vm_count"_a = r.vm_count, "status"_a = r.status == vmsim::RunStatus::ok ? "ok" : "failed",
                    "wall_ms"_a = r.wall_ms, "message"_a = r.message);
}

vmsim::SimulationConfig config_from_json(const std::string& text) {
    std::istringstream in(text);
    return vmsim::parse_config(in);
}

vmsim::Schedule schedule_from_json(const std::string& text) {
    std::istringstream in(text);
    return vmsim::load_schedule(in);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Discrete-event VM allocation simulator";

    static py::exception<vmsim::Error> error(m, "VmsimError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const vmsim::Error& e) {
            // args = (code name, message)
            const auto args = py::make_tuple(std::string(vmsim::errc_name(e.code())), e.what());
            PyErr_SetObject(error.ptr(), args.ptr());
        }
    });

    py::class_<vmsim::TimeSeries>(m, "TimeSeries")
        .def(py::init([](std::string name, std::int64_t start_s, std::uint32_t interval_s,
                         std::vector<double> samples) {
                 return vmsim::TimeSeries{std::move(name), start_s, interval_s, std::move(samples)};
             }),
             "name"_a, "start_s"_a = 0, "interval_s"_a = 1, "samples"_a = std::vector<double>{})
        .def_readwrite("name", &vmsim::TimeSeries::name)
        .def_readwrite("start_s", &vmsim::TimeSeries::start_s)
        .def_readwrite("interval_s", &vmsim::TimeSeries::interval_s)
        .def_readwrite("samples", &vmsim::TimeSeries::samples)
        .def("validate", &vmsim::TimeSeries::validate)
        .def(py::self == py::self)
        .def("__repr__", [](const vmsim::TimeSeries& s) {
            return "TimeSeries(name='" + s.name + "', start_s=" + std::to_string(s.start_s) +
                   ", interval_s=" + std::to_string(s.interval_s) + ", samples=<" +
                   std::to_string(s.samples.size()) + ">)";
        });

    py::class_<vmsim::ServerSpec>(m, "ServerSpec")
        .def(py::init([](std::string id, int cpu_units, int memory_mb, int base_cpu_units) {
                 return vmsim::ServerSpec{std::move(id), cpu_units, memory_mb, base_cpu_units};
             }),
             "id"_a, "cpu_units"_a = 100, "memory_mb"_a = 1, "base_cpu_units"_a = 0)
        .def_readwrite("id", &vmsim::ServerSpec::id)
        .def_readwrite("cpu_units", &vmsim::ServerSpec::cpu_units)
        .def_readwrite("memory_mb", &vmsim::ServerSpec::memory_mb)
        .def_readwrite("base_cpu_units", &vmsim::ServerSpec::base_cpu_units)
        .def(py::self == py::self);

    m.def("sample_at", &vmsim::sample_at, "series"_a, "t_s"_a,
          "Sample in effect at absolute second t_s (hold-last).");
    m.def(
        "estimate_demand",
        [](const vmsim::TimeSeries& s, const std::string& estimator, int vm_cpu_units) {
            return vmsim::estimate_demand(s, to_estimator(estimator), vm_cpu_units);
        },
        "series"_a, "estimator"_a, "vm_cpu_units"_a);
    m.def(
        "server_utilization",
        [](const vmsim::ServerSpec& spec, const std::vector<double>& loads, const std::vector<double>& overheads) {
            return vmsim::server_utilization(spec, loads, overheads);
        },
        "server"_a, "loads"_a, "overheads"_a = std::vector<double>{});

    m.def(
        "encode_series",
        [](const vmsim::TimeSeries& s) {
            const auto bytes = vmsim::times::encode_series(s);
            return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        },
        "series"_a);
    m.def(
        "decode_series",
        [](const py::bytes& data) {
            const std::string_view view = data;
            return vmsim::times::decode_series(
                std::span(reinterpret_cast<const std::uint8_t*>(view.data()), view.size()));
        },
        "data"_a);

    m.def(
        "solve_min_servers_exact",
        [](const std::vector<std::pair<double, double>>& items, const std::vector<std::pair<double, double>>& bins,
           std::optional<std::uint64_t> max_nodes, std::optional<std::int64_t> max_wall_ms) {
            std::vector<vmsim::PackItem> it;
            for (const auto& [c, mem] : items) it.push_back({c, mem});
            std::vector<vmsim::PackBin> bs;
            for (const auto& [c, mem] : bins) bs.push_back({c, mem});
            const auto sol = vmsim::solve_min_servers_exact(it, bs, {max_nodes, max_wall_ms});
            return py::dict("assignment"_a = sol.assignment, "bins_used"_a = sol.bins_used,
                            "optimal"_a = sol.optimal, "nodes"_a = sol.nodes);
        },
        "items"_a, "bins"_a, "max_nodes"_a = py::none(), "max_wall_ms"_a = py::none(),
        "Minimum number of bins for (cpu, memory) items. Raises VmsimError('Infeasible', ...).");

    m.def(
        "place_initial",
        [](const std::vector<std::tuple<std::string, double, int>>& vms,
           const std::vector<vmsim::ServerSpec>& servers, const std::string& strategy, std::uint64_t seed) {
            std::vector<vmsim::VmDemand> demands;
            for (const auto& [id, cpu, mem] : vms) demands.push_back({id, cpu, mem});
            vmsim::Rng rng(seed);
            return vmsim::place_initial(demands, servers, strategy, rng);
        },
        "vms"_a, "servers"_a, "strategy"_a, "seed"_a = 1,
        "Maps (vm id, estimated cpu, memory_mb) tuples onto servers. Returns {vm: server id}.");

    m.def("registry_names", [](const std::string& family) {
        if (family == "initial") return vmsim::registry_names(vmsim::Family::initial);
        if (family == "placement") return vmsim::registry_names(vmsim::Family::placement);
        if (family == "reallocation") return vmsim::registry_names(vmsim::Family::reallocation);
        throw vmsim::Error(vmsim::Errc::InvalidParams, "unknown family '" + family + "'");
    });

    m.def(
        "build_schedule",
        [](const std::string& id, double rate, double mean_lifetime_s, const std::string& lifetime_dist,
           std::int64_t horizon_s, const std::vector<std::tuple<int, int, double>>& sizes,
           const std::vector<std::string>& series_pool, std::uint64_t seed) {
            vmsim::BuilderParams p;
            p.id = id;
            p.arrival_rate_per_s = rate;
            p.mean_lifetime_s = mean_lifetime_s;
            if (lifetime_dist == "fixed") {
                p.lifetime_dist = vmsim::LifetimeDist::fixed;
            } else if (lifetime_dist != "exponential") {
                throw vmsim::Error(vmsim::Errc::InvalidParams, "lifetime_dist must be exponential or fixed");
            }
            p.horizon_s = horizon_s;
            for (const auto& [cpu, mem, prob] : sizes) p.sizes.push_back({cpu, mem, prob});
            p.series_pool = series_pool;
            p.seed = seed;
            std::ostringstream out;
            vmsim::save_schedule(out, vmsim::build_schedule(p));
            return out.str();
        },
        "id"_a, "rate"_a, "mean_lifetime_s"_a, "lifetime_dist"_a, "horizon_s"_a, "sizes"_a, "series_pool"_a,
        "seed"_a, "Returns the schedule as a JSON document.");

    m.def(
        "validate_schedule",
        [](const std::string& schedule_json, const std::vector<std::string>& series) {
            const auto schedule = schedule_from_json(schedule_json);
            std::vector<std::string> out;
            for (const auto& v : vmsim::validate_schedule(schedule, {series.begin(), series.end()})) {
                out.push_back(vmsim::describe(v));
            }
            return out;
        },
        "schedule_json"_a, "series"_a);

    m.def(
        "normalize_config",
        [](const std::string& config_json) { return vmsim::dump_config(config_from_json(config_json)); },
        "config_json"_a, "Validates a config and returns it with every default filled in.");

    m.def(
        "simulate",
        [](const std::string& config_json, const std::string& schedule_json,
           const std::vector<vmsim::TimeSeries>& series) {
            const auto config = config_from_json(config_json);
            const auto schedule = schedule_from_json(schedule_json);
            ListWorkloads workloads(series);
            vmsim::SimulationResult r;
            {
                py::gil_scoped_release release;
                r = vmsim::run_simulation(config, schedule, workloads);
            }
            return result_dict(r);
        },
        "config_json"_a, "schedule_json"_a, "series"_a,
        "Runs one simulation with in-memory workloads. Failures come back as status 'failed'.");

    m.def(
        "simulate_file",
        [](const std::filesystem::path& config_path) {
            const auto config = vmsim::load_config_file(config_path);
            vmsim::SimulationResult r;
            {
                py::gil_scoped_release release;
                r = vmsim::run_configured(config);
            }
            return result_dict(r);
        },
        "config_path"_a, "Runs the simulation described by a config file.");

    m.def(
        "build_matrix",
        [](const std::vector<std::string>& initial, const std::vector<std::string>& reallocation,
           const std::vector<std::string>& placement, const std::vector<std::string>& estimators,
           const std::vector<std::uint64_t>& seeds) {
            vmsim::FactorLists lists{initial, reallocation, placement, {}, seeds};
            for (const auto& e : estimators) lists.estimators.push_back(to_estimator(e));
            py::list out;
            for (const auto& c : vmsim::build_matrix(lists)) {
                out.append(py::dict("sim_id"_a = c.sim_id, "initial"_a = c.initial,
                                    "reallocation"_a = c.reallocation, "placement"_a = c.placement,
                                    "estimator"_a = std::string(vmsim::to_string(c.estimator)),
                                    "seed"_a = c.seed));
            }
            return out;
        },
        "initial"_a, "reallocation"_a, "placement"_a, "estimators"_a, "seeds"_a);

    m.def(
        "aggregate_csv",
        [](const std::string& csv_text) {
            std::istringstream in(csv_text);
            py::list out;
            for (const auto& r : vmsim::aggregate(vmsim::read_results_csv(in))) {
                out.append(py::dict("initial_placement"_a = r.initial_placement, "reallocation"_a = r.reallocation,
                                    "placement"_a = r.placement, "estimator"_a = r.estimator, "n"_a = r.n,
                                    "mean_active_servers"_a = r.mean_active_servers,
                                    "sd_active_servers"_a = r.sd_active_servers,
                                    "mean_cpu_util_pct"_a = r.mean_cpu_util_pct,
                                    "sd_cpu_util_pct"_a = r.sd_cpu_util_pct,
                                    "mean_sla_violation_rate"_a = r.mean_sla_violation_rate,
                                    "sd_sla_violation_rate"_a = r.sd_sla_violation_rate,
                                    "total_migrations"_a = r.total_migrations));
            }
            return out;
        },
        "csv_text"_a, "Groups a batch CSV by controller combination and estimator.");

    m.def(
        "render_report",
        [](const std::string& csv_text, const std::string& format, bool plot) {
            std::istringstream in(csv_text);
            const auto rows = vmsim::aggregate(vmsim::read_results_csv(in));
            const auto fmt = format == "html" ? vmsim::ReportFormat::html : vmsim::ReportFormat::markdown;
            return vmsim::render_report(rows, fmt, plot);
        },
        "csv_text"_a, "format"_a = "markdown", "plot"_a = false);

    py::class_<vmsim::times::FileStore>(m, "FileStore")
        .def(py::init<std::filesystem::path>(), "root"_a)
        .def("put", &vmsim::times::FileStore::put, "name"_a, "series"_a)
        .def("get", &vmsim::times::FileStore::get, "name"_a)
        .def(
            "list", [](vmsim::times::FileStore& s, const std::string& prefix) { return s.list(prefix); },
            "prefix"_a = "");

    m.attr("CSV_HEADER") = std::string(vmsim::kCsvHeader);
}
