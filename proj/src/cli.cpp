#include <vmsim/cli.hpp>

#include <vmsim/analysis.hpp>
#include <vmsim/config.hpp>
#include <vmsim/engine.hpp>
#include <vmsim/error.hpp>
#include <vmsim/runner.hpp>
#include <vmsim/schedule.hpp>
#include <vmsim/times/service.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

namespace fs = std::filesystem;

namespace vmsim::cli {

std::atomic<bool>& shutdown_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

namespace {

struct SimulateArgs {
    std::string config;
    std::string csv;
    bool dump = false;
};

struct BatchArgs {
    std::vector<std::string> initial;
    std::vector<std::string> realloc{"none"};
    std::vector<std::string> placement{"none"};
    std::vector<std::string> estimators{"max"};
    std::vector<std::uint64_t> seeds{1};
    std::string config;
    std::string schedule;
    std::string out;
    std::string err;
    unsigned parallelism = 1;
};

struct ScheduleArgs {
    std::string out;
    std::uint64_t seed = 1;
    double rate = 0.01;
    double mean_lifetime = 3600.0;
    std::int64_t horizon = 86400;
    std::string sizes;
    std::string series_pool;
    std::string store;
    std::string addr;
    std::string lifetime_dist = "exponential";
    std::string id = "generated";
    std::string validate_file;
};

struct TimesArgs {
    std::string listen = "127.0.0.1:7855";
    std::string store;
    std::string addr;
    std::string name;
    std::string file;
    std::string prefix;
};

struct AnalyzeArgs {
    std::string csv;
    std::string out;
    bool svg = false;
};

int simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    SimulationConfig config;
    try {
        config = load_config_file(a.config);
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kConfig;
    }
    if (a.dump) {
        out << dump_config(config);
        return kOk;
    }
    const auto result = run_configured(config);
    if (result.status != RunStatus::ok) {
        err << "simulation failed: " << result.message << '\n';
        return kFailure;
    }
    out << result_line(result) << '\n';
    if (!a.csv.empty()) {
        std::error_code ec;
        const bool fresh = !fs::exists(a.csv, ec) || fs::file_size(a.csv, ec) == 0;
        std::ofstream csv(a.csv, std::ios::app);
        if (fresh) csv << kCsvHeader << '\n';
        csv << csv_row(result) << '\n';
        if (!csv) {
            err << "cannot append to " << a.csv << '\n';
            return kFailure;
        }
    }
    return kOk;
}

int batch(const BatchArgs& a, std::ostream& out, std::ostream& err) {
    FactorLists lists;
    SimulationConfig base;
    Schedule schedule;
    std::vector<Combination> matrix;
    try {
        lists.initial = a.initial;
        lists.reallocation = a.realloc;
        lists.placement = a.placement;
        lists.seeds = a.seeds;
        for (const auto& e : a.estimators) {
            const auto est = parse_estimator(e);
            if (!est) throw Error(Errc::ConfigInvalid, "estimators: unknown estimator '" + e + "'");
            lists.estimators.push_back(*est);
        }
        matrix = build_matrix(lists);
        base = load_config_file(a.config);
        if (!a.schedule.empty()) base.schedule = a.schedule;
        schedule = load_schedule_file(base.schedule);
        times::open_workloads(base.workloads);
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kConfig;
    }
    const std::string location = base.workloads;
    BatchSummary summary;
    try {
        summary = run_batch(matrix, base, schedule, [location] { return times::open_workloads(location); },
                            {a.out, a.err}, a.parallelism);
    } catch (const Error& e) {
        err << "batch error: " << e.what() << '\n';
        return kFailure;
    }
    out << "BATCH total=" << summary.total << " succeeded=" << summary.succeeded
        << " failed=" << summary.failed << " wall_ms=" << summary.wall_ms << '\n';
    if (summary.failed == 0) return kOk;
    return summary.succeeded == 0 ? kFailure : kPartial;
}

std::unique_ptr<times::WorkloadSource> source_from(const std::string& store, const std::string& addr) {
    if (!addr.empty()) {
        const auto ep = times::parse_endpoint(addr);
        if (!ep) throw Error(Errc::ConfigInvalid, "--addr must be HOST:PORT");
        return std::make_unique<times::TimesClient>(ep->host, ep->port);
    }
    if (store.empty()) throw Error(Errc::ConfigInvalid, "one of --store or --addr is required");
    return std::make_unique<times::FileStore>(store);
}

std::vector<DomainSize> read_sizes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigInvalid, "sizes: cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::ParseError, std::string("sizes: ") + e.what());
    }
    // Accept a bare array or a schedule-like {"sizes": [...]}.
    const auto& arr = doc.is_object() && doc.contains("sizes") ? doc["sizes"] : doc;
    if (!arr.is_array()) throw Error(Errc::ConfigInvalid, "sizes: expected an array");
    std::vector<DomainSize> sizes;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& s = arr[i];
        const auto path_i = "sizes[" + std::to_string(i) + "]";
        if (!s.is_object() || !s.contains("cpu_units") || !s.contains("memory_mb") ||
            !s.contains("probability") || !s["cpu_units"].is_number_integer() ||
            !s["memory_mb"].is_number_integer() || !s["probability"].is_number()) {
            throw Error(Errc::ConfigInvalid, path_i + ": need integer cpu_units, memory_mb and numeric probability");
        }
        sizes.push_back({s["cpu_units"].get<int>(), s["memory_mb"].get<int>(), s["probability"].get<double>()});
    }
    return sizes;
}

int schedule_build(const ScheduleArgs& a, std::ostream& out, std::ostream& err) {
    BuilderParams params;
    try {
        params.id = a.id;
        params.seed = a.seed;
        params.arrival_rate_per_s = a.rate;
        params.mean_lifetime_s = a.mean_lifetime;
        params.horizon_s = a.horizon;
        if (a.lifetime_dist == "exponential") {
            params.lifetime_dist = LifetimeDist::exponential;
        } else if (a.lifetime_dist == "fixed") {
            params.lifetime_dist = LifetimeDist::fixed;
        } else {
            throw Error(Errc::ConfigInvalid, "--lifetime-dist must be exponential or fixed");
        }
        params.sizes = read_sizes(a.sizes);
        params.series_pool = source_from(a.store, a.addr)->list(a.series_pool);
        if (params.series_pool.empty()) {
            throw Error(Errc::ConfigInvalid, "series pool: no series with prefix '" + a.series_pool + "'");
        }
        const auto schedule = build_schedule(params);
        save_schedule_file(a.out, schedule);
        out << "SCHEDULE id=" << schedule.id << " entries=" << schedule.entries.size() << '\n';
    } catch (const Error& e) {
        err << "schedule error: " << e.what() << '\n';
        return e.code() == Errc::OutputUnwritable || e.code() == Errc::StorageFailure ? kFailure : kConfig;
    }
    return kOk;
}

int schedule_validate(const ScheduleArgs& a, std::ostream& out, std::ostream& err) {
    try {
        const auto schedule = load_schedule_file(a.validate_file);
        const auto names = source_from(a.store, a.addr)->list("");
        const auto violations = validate_schedule(schedule, {names.begin(), names.end()});
        for (const auto& v : violations) out << describe(v) << '\n';
        if (violations.empty()) out << "OK\n";
        return violations.empty() ? kOk : kFailure;
    } catch (const Error& e) {
        err << "schedule error: " << e.what() << '\n';
        return kConfig;
    }
}

int times_serve(const TimesArgs& a, std::ostream& out, std::ostream& err) {
    const auto ep = times::parse_endpoint(a.listen);
    if (!ep) {
        err << "--listen must be HOST:PORT\n";
        return kConfig;
    }
    try {
        times::FileStore store(a.store);
        times::TimesServer server(store);
        server.start(*ep);
        out << "SERVING " << ep->host << ':' << server.port() << std::endl;
        while (!shutdown_flag().load()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        server.stop();
    } catch (const Error& e) {
        err << "times error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}

int times_put(const TimesArgs& a, std::ostream&, std::ostream& err) {
    try {
        std::ifstream in(a.file);
        if (!in) throw Error(Errc::ConfigInvalid, "cannot open '" + a.file + "'");
        const auto series = read_workload_csv(in, a.name);
        auto source = source_from(a.store, a.addr);
        if (auto* client = dynamic_cast<times::TimesClient*>(source.get())) {
            client->put(a.name, series);
        } else {
            static_cast<times::FileStore&>(*source).put(a.name, series);
        }
    } catch (const Error& e) {
        err << "times error: " << e.what() << '\n';
        return e.code() == Errc::ParseError || e.code() == Errc::ConfigInvalid || e.code() == Errc::InvalidName
                   ? kConfig
                   : kFailure;
    }
    return kOk;
}

int times_get(const TimesArgs& a, std::ostream& out, std::ostream& err) {
    try {
        const auto series = source_from(a.store, a.addr)->get(a.name);
        if (a.file.empty()) {
            write_workload_csv(out, series);
        } else {
            std::ofstream f(a.file, std::ios::trunc);
            write_workload_csv(f, series);
            if (!f) throw Error(Errc::OutputUnwritable, "cannot write '" + a.file + "'");
        }
    } catch (const Error& e) {
        err << "times error: " << e.what() << '\n';
        return e.code() == Errc::ConfigInvalid ? kConfig : kFailure;
    }
    return kOk;
}

int times_list(const TimesArgs& a, std::ostream& out, std::ostream& err) {
    try {
        for (const auto& name : source_from(a.store, a.addr)->list(a.prefix)) out << name << '\n';
    } catch (const Error& e) {
        err << "times error: " << e.what() << '\n';
        return e.code() == Errc::ConfigInvalid ? kConfig : kFailure;
    }
    return kOk;
}

int analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
    try {
        std::ifstream in(a.csv);
        if (!in) throw Error(Errc::ConfigInvalid, "cannot open '" + a.csv + "'");
        const auto rows = aggregate(read_results_csv(in));
        const auto ext = fs::path(a.out).extension().string();
        const auto format = ext == ".html" || ext == ".htm" ? ReportFormat::html : ReportFormat::markdown;
        std::ofstream report(a.out, std::ios::trunc);
        report << render_report(rows, format, a.svg);
        if (!report) throw Error(Errc::OutputUnwritable, "cannot write '" + a.out + "'");
        out << "REPORT groups=" << rows.size() << " out=" << a.out << '\n';
    } catch (const Error& e) {
        err << "analysis error: " << e.what() << '\n';
        return e.code() == Errc::OutputUnwritable ? kFailure : kConfig;
    }
    return kOk;
}

} // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Discrete-event simulator for VM allocation in cloud data centers", "vmsim"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Run one simulation from a config file");
    simulate_cmd->add_option("--config", sim.config, "Simulation config (JSON)")->required();
    simulate_cmd->add_option("--csv", sim.csv, "Append the result row to this CSV");
    simulate_cmd->add_flag("--dump-config", sim.dump, "Print the normalized config and exit");

    BatchArgs bat;
    auto* batch_cmd = app.add_subcommand("batch", "Run the factor-level matrix of simulations");
    batch_cmd->add_option("--initial", bat.initial, "Initial placement controllers")->delimiter(',')->required();
    batch_cmd->add_option("--realloc", bat.realloc, "Reallocation controllers")->delimiter(',');
    batch_cmd->add_option("--placement", bat.placement, "Online placement controllers")->delimiter(',');
    batch_cmd->add_option("--estimators", bat.estimators, "Demand estimators")->delimiter(',');
    batch_cmd->add_option("--seeds", bat.seeds, "Seeds")->delimiter(',');
    batch_cmd->add_option("--config", bat.config, "Base simulation config")->required();
    batch_cmd->add_option("--schedule", bat.schedule, "Schedule file (overrides the config)");
    batch_cmd->add_option("--out", bat.out, "Results CSV")->required();
    batch_cmd->add_option("--err", bat.err, "Failed-run log")->required();
    batch_cmd->add_option("--parallelism", bat.parallelism, "Worker threads")->check(CLI::PositiveNumber);

    ScheduleArgs sch;
    auto* schedule_cmd = app.add_subcommand("schedule", "Build or check arrival/departure schedules");
    schedule_cmd->require_subcommand(1);
    auto* build_cmd = schedule_cmd->add_subcommand("build", "Generate a schedule");
    build_cmd->add_option("--out", sch.out, "Output schedule file")->required();
    build_cmd->add_option("--seed", sch.seed, "Generator seed");
    build_cmd->add_option("--rate", sch.rate, "Arrival rate per second");
    build_cmd->add_option("--mean-lifetime", sch.mean_lifetime, "Mean VM lifetime in seconds");
    build_cmd->add_option("--horizon", sch.horizon, "Schedule horizon in seconds");
    build_cmd->add_option("--sizes", sch.sizes, "Size catalog (JSON)")->required();
    build_cmd->add_option("--series-pool", sch.series_pool, "Series name prefix");
    build_cmd->add_option("--lifetime-dist", sch.lifetime_dist, "exponential or fixed");
    build_cmd->add_option("--id", sch.id, "Schedule id");
    build_cmd->add_option("--store", sch.store, "Workload store directory");
    build_cmd->add_option("--addr", sch.addr, "Times service HOST:PORT");
    auto* validate_cmd = schedule_cmd->add_subcommand("validate", "Check a schedule against a store");
    validate_cmd->add_option("file", sch.validate_file, "Schedule file")->required();
    validate_cmd->add_option("--store", sch.store, "Workload store directory");
    validate_cmd->add_option("--addr", sch.addr, "Times service HOST:PORT");

    TimesArgs tms;
    auto* times_cmd = app.add_subcommand("times", "Workload time-series store");
    times_cmd->require_subcommand(1);
    auto* serve_cmd = times_cmd->add_subcommand("serve", "Serve a store over TCP");
    serve_cmd->add_option("--listen", tms.listen, "HOST:PORT to bind");
    serve_cmd->add_option("--store", tms.store, "Store directory")->required();
    auto* put_cmd = times_cmd->add_subcommand("put", "Import a workload CSV");
    put_cmd->add_option("name", tms.name, "Series name")->required();
    put_cmd->add_option("--file", tms.file, "CSV with header t_s,util_pct")->required();
    auto* get_cmd = times_cmd->add_subcommand("get", "Export a series as CSV");
    get_cmd->add_option("name", tms.name, "Series name")->required();
    get_cmd->add_option("--file", tms.file, "Write CSV here instead of stdout");
    auto* list_cmd = times_cmd->add_subcommand("list", "List series names");
    list_cmd->add_option("prefix", tms.prefix, "Name prefix");
    for (auto* c : {put_cmd, get_cmd, list_cmd}) {
        auto* store_opt = c->add_option("--store", tms.store, "Store directory");
        auto* addr_opt = c->add_option("--addr", tms.addr, "Times service HOST:PORT");
        store_opt->excludes(addr_opt);
    }

    AnalyzeArgs ana;
    auto* analyze_cmd = app.add_subcommand("analyze", "Aggregate a batch CSV into a report");
    analyze_cmd->add_option("csv", ana.csv, "Batch results CSV")->required();
    analyze_cmd->add_option("--out", ana.out, "report.md or report.html")->required();
    analyze_cmd->add_flag("--svg", ana.svg, "Include a bar chart");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    } catch (const std::exception& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (simulate_cmd->parsed()) return simulate(sim, out, err);
        if (batch_cmd->parsed()) return batch(bat, out, err);
        if (build_cmd->parsed()) return schedule_build(sch, out, err);
        if (validate_cmd->parsed()) return schedule_validate(sch, out, err);
        if (serve_cmd->parsed()) return times_serve(tms, out, err);
        if (put_cmd->parsed()) return times_put(tms, out, err);
        if (get_cmd->parsed()) return times_get(tms, out, err);
        if (list_cmd->parsed()) return times_list(tms, out, err);
        if (analyze_cmd->parsed()) return analyze(ana, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    err << app.help();
    return kUsage;
}

} // namespace vmsim::cli
