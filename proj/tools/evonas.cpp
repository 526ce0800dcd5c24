// evonas: multi-objective evolutionary architecture search over a 6-gene cell
// space, optimizing validation accuracy jointly with introspectability (the
// mean pairwise cosine distance between class activation centroids), plus the
// analysis, calibration/debugging and distributed-evaluation tooling around it.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>

#include <CLI11.hpp>

#include "evonas/dist.hpp"
#include "evonas/report.hpp"
#include "evonas/search.hpp"

namespace {

using namespace evonas;

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
    return buf;
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? v : fallback;
}

void write_search_outputs(const SearchConfig& cfg, const SearchResult& result,
                          const std::filesystem::path& out_dir, const std::string& started,
                          double wall_seconds) {
    write_file(out_dir / "archive.csv", archive_csv(result.archive));
    write_file(out_dir / "populations.csv", populations_csv(result.archive));
    write_file(out_dir / "fronts.csv", fronts_csv(result.archive));
    std::string hv = "generation,hypervolume\n";
    for (size_t g = 0; g < result.hypervolume_by_generation.size(); ++g)
        hv += std::to_string(g) + ',' + fmt_g(result.hypervolume_by_generation[g], 12) + '\n';
    write_file(out_dir / "hypervolume_by_generation.csv", hv);
    write_file(out_dir / "manifest.txt",
               manifest_text(cfg, started, timestamp(), wall_seconds, out_dir));
}

int cmd_search(const std::string& config_path, std::string out_dir_s, const std::string& distributed,
               int head_slots, int threads, bool quiet) {
    auto cfg = parse_search_config(KvFile::parse_file(config_path));
    const std::filesystem::path out_dir =
        out_dir_s.empty() ? std::filesystem::path("runs") / cfg.search_id
                          : std::filesystem::path(out_dir_s);
    std::ostream* log = quiet ? nullptr : &std::cerr;
    const std::string started = timestamp();
    const auto t0 = std::chrono::steady_clock::now();

    SearchResult result;
    if (distributed.empty()) {
        LocalEvaluator evaluator(cfg.eval, cfg.search_id, out_dir / "results",
                                 threads > 0 ? threads : cfg.eval_threads);
        result = run_search(cfg, [&](const std::vector<EvalJob>& jobs) { return evaluator(jobs); }, log);
    } else {
        MasterOptions opts;
        opts.bind = net::parse_address(distributed);
        opts.config_hash = config_hash_hex(cfg);
        opts.head_slots = head_slots;
        opts.log = log;
        std::optional<EvalTask> head_task;
        TaskFn head_fn;
        if (head_slots > 0) {
            head_task.emplace(cfg.eval, cfg.search_id, out_dir / "results");
            head_fn = [&](const EvalJob& job) { return head_task->run(job); };
        }
        MasterService master(opts, head_fn);
        master.start();
        result = run_search(cfg, [&](const std::vector<EvalJob>& jobs) { return master.evaluate(jobs); },
                            log);
        master.stop();
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_search_outputs(cfg, result, out_dir, started, wall);
    std::cout << "archive: " << (out_dir / "archive.csv").string() << "\n"
              << "individuals: " << result.archive.size() << "\n"
              << "final front hypervolume: "
              << fmt_g(result.hypervolume_by_generation.back(), 12) << "\n";
    return 0;
}

int cmd_report(std::string archive_path, std::string run_dir, std::string out_dir_s,
               std::string hv_ref) {
    std::filesystem::path archive_file, run;
    if (!run_dir.empty()) {
        run = run_dir;
        if (archive_path.empty()) archive_path = (run / "archive.csv").string();
    }
    archive_file = archive_path;
    if (archive_file.empty()) throw ValidationError("report: give --run or --archive");

    auto archive = parse_archive_csv(read_file(archive_file));
    const auto populations_file =
        run.empty() ? archive_file.parent_path() / "populations.csv" : run / "populations.csv";
    if (std::filesystem::exists(populations_file))
        archive.populations_by_generation = parse_populations_csv(read_file(populations_file));

    HypervolumeConfig hv_cfg{};
    std::string search_id;
    std::filesystem::path results_dir;
    const auto manifest_file =
        run.empty() ? archive_file.parent_path() / "manifest.txt" : run / "manifest.txt";
    if (!hv_ref.empty()) {
        auto parts = split(hv_ref, ',');
        if (parts.size() != 2) throw ValidationError("--hv-ref expects '<introspectability>,<accuracy>'");
        hv_cfg.intros_ref = parse_double(trim(parts[0]), "hv-ref");
        hv_cfg.acc_ref = parse_double(trim(parts[1]), "hv-ref");
    } else if (std::filesystem::exists(manifest_file)) {
        auto cfg = parse_search_config(KvFile::parse_file(manifest_file));
        hv_cfg = cfg.hv();
        search_id = cfg.search_id;
        results_dir = manifest_file.parent_path() / "results";
    } else {
        throw ValidationError("report: no manifest.txt found; pass --hv-ref explicitly");
    }

    const std::filesystem::path out_dir =
        out_dir_s.empty() ? archive_file.parent_path() / "report" : std::filesystem::path(out_dir_s);
    auto result = write_report(archive, hv_cfg, out_dir, results_dir, search_id);
    std::cout << "hypervolume: " << fmt_g(result.hypervolume, 12) << "\n"
              << "front size: " << result.front_ids.size() << "\n"
              << "report: " << out_dir.string() << "\n";
    return 0;
}

int cmd_topo_count() {
    const auto space = enumerate_space();
    std::set<TopologyKey> keys;
    for (const auto& e : space) keys.insert(topology_key(e));
    std::cout << "total architectures: " << space.size() << "\n"
              << "unique topologies: " << keys.size() << "\n";
    return 0;
}

int cmd_debug(const std::string& config_path, const std::string& run_dir, std::int64_t id,
              double corruption_rate, const std::string& percentiles_csv, bool no_repair,
              const std::string& repair_pair, double repair_omega, double repair_lambda,
              double repair_lr, int repair_epochs, std::uint64_t seed) {
    auto cfg = parse_search_config(KvFile::parse_file(config_path));
    DebugOptions opts;
    opts.corruption_rate = corruption_rate;
    opts.run_repair = !no_repair;
    opts.repair_weight = repair_omega;
    opts.repair_lambda = repair_lambda;
    opts.repair_lr = repair_lr;
    opts.repair_epochs = repair_epochs;
    opts.seed = seed;
    if (!percentiles_csv.empty())
        for (const auto& p : split(percentiles_csv, ','))
            opts.percentiles.push_back(parse_double(trim(p), "percentile"));
    if (!repair_pair.empty()) {
        auto parts = split(repair_pair, ',');
        if (parts.size() != 2) throw ValidationError("--repair-pair expects 'a,b'");
        opts.repair_pair = {static_cast<int>(parse_int(trim(parts[0]), "repair pair")),
                            static_cast<int>(parse_int(trim(parts[1]), "repair pair"))};
    }
    auto result = run_debug_session(cfg, run_dir, id, opts);
    std::cout << "debug outputs written for individual " << id << ":\n";
    for (const auto& p : result.written) std::cout << "  " << p.string() << "\n";
    return 0;
}

int cmd_master(const std::string& config_path, const std::string& bind, std::string out_dir_s,
               int head_slots, bool quiet) {
    return cmd_search(config_path, std::move(out_dir_s), bind, head_slots, 0, quiet);
}

int cmd_worker(const std::string& config_path, const std::string& connect, int slots,
               int heartbeat_ms, std::string results_dir, bool quiet) {
    auto cfg = parse_search_config(KvFile::parse_file(config_path));
    if (results_dir.empty())
        results_dir = (std::filesystem::path("runs") / cfg.search_id / "results").string();
    WorkerOptions opts;
    opts.master = net::parse_address(connect);
    opts.slots = slots;
    opts.heartbeat_ms = heartbeat_ms;
    opts.config_hash = config_hash_hex(cfg);
    opts.log = quiet ? nullptr : &std::cerr;
    EvalTask task(cfg.eval, cfg.search_id, results_dir);
    return worker_run(opts, [&](const EvalJob& job) { return task.run(job); });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective evolutionary architecture search with introspectability"};
    app.require_subcommand(1);

    std::string config_path, out_dir, distributed, archive_path, run_dir, hv_ref;
    std::string percentiles_csv, repair_pair, connect, bind, results_dir;
    int head_slots = 0, threads = 0, slots = 1, heartbeat_ms = 5000, repair_epochs = 5;
    std::int64_t id = -1;
    double corruption_rate = 20.0, repair_omega = 25.0, repair_lambda = 0.5, repair_lr = 0.001;
    std::uint64_t seed = 1;
    bool quiet = false, no_repair = false;

    auto* search = app.add_subcommand("search", "Run the evolutionary search");
    search->add_option("--config", config_path, "Search config file")->required();
    search->add_option("--out", out_dir, "Output directory (default runs/<search_id>)");
    search->add_option("--distributed", distributed, "Serve evaluation jobs on host:port");
    search->add_option("--head-slots", head_slots, "Local evaluation slots when distributed");
    search->add_option("--threads", threads, "In-process evaluation threads");
    search->add_flag("--quiet", quiet, "Suppress progress logging");

    auto* master = app.add_subcommand("master", "Run the search serving jobs to workers");
    master->add_option("--config", config_path, "Search config file")->required();
    master->add_option("--bind", bind, "Bind address host:port")
        ->default_val(env_or("EVONAS_BIND_ADDR", "127.0.0.1:7333"));
    master->add_option("--out", out_dir, "Output directory");
    master->add_option("--head-slots", head_slots, "Local evaluation slots on the head node");
    master->add_flag("--quiet", quiet, "Suppress progress logging");

    auto* worker = app.add_subcommand("worker", "Evaluate jobs for a master");
    worker->add_option("--config", config_path, "Search config file (must match the master's)")
        ->required();
    worker->add_option("--connect", connect, "Master address host:port")
        ->default_val(env_or("EVONAS_MASTER_ADDR", "127.0.0.1:7333"));
    worker->add_option("--slots", slots, "Concurrent jobs");
    worker->add_option("--heartbeat-ms", heartbeat_ms, "Heartbeat interval");
    worker->add_option("--results-dir", results_dir, "Shared results directory");
    worker->add_flag("--quiet", quiet, "Suppress logging");

    auto* report = app.add_subcommand("report", "Analyze a finished search archive");
    report->add_option("--run", run_dir, "Run directory containing archive.csv");
    report->add_option("--archive", archive_path, "Archive CSV path");
    report->add_option("--out", out_dir, "Report output directory");
    report->add_option("--hv-ref", hv_ref, "Hypervolume reference '<introspectability>,<accuracy>'");

    app.add_subcommand("topo-count", "Count the search space and its unique topologies");

    auto* debug = app.add_subcommand("debug", "Calibration, data debugging and model repair");
    debug->add_option("--config", config_path, "Search config file")->required();
    debug->add_option("--run", run_dir, "Run directory")->required();
    debug->add_option("--id", id, "Individual id")->required();
    debug->add_option("--corruption-rate", corruption_rate, "Label corruption percentage");
    debug->add_option("--percentiles", percentiles_csv, "Comma-separated percentile list");
    debug->add_flag("--no-repair", no_repair, "Skip the repair fine-tune");
    debug->add_option("--repair-pair", repair_pair, "Targeted class pair 'a,b'");
    debug->add_option("--repair-omega", repair_omega, "Pairwise weight for the targeted pair");
    debug->add_option("--repair-lambda", repair_lambda, "Regularizer weight for repair");
    debug->add_option("--repair-lr", repair_lr, "Repair learning rate");
    debug->add_option("--repair-epochs", repair_epochs, "Repair epochs");
    debug->add_option("--seed", seed, "Debug session seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("search"))
            return cmd_search(config_path, out_dir, distributed, head_slots, threads, quiet);
        if (app.got_subcommand("master"))
            return cmd_master(config_path, bind, out_dir, head_slots, quiet);
        if (app.got_subcommand("worker"))
            return cmd_worker(config_path, connect, slots, heartbeat_ms, results_dir, quiet);
        if (app.got_subcommand("report")) return cmd_report(archive_path, run_dir, out_dir, hv_ref);
        if (app.got_subcommand("topo-count")) return cmd_topo_count();
        if (app.got_subcommand("debug"))
            return cmd_debug(config_path, run_dir, id, corruption_rate, percentiles_csv, no_repair,
                             repair_pair, repair_omega, repair_lambda, repair_lr, repair_epochs, seed);
    } catch (const ValidationError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 3;
    }
    return 2;
}
