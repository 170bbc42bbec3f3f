// vqn: command-line entry point for the testbed.
#include "vqn/error.hpp"
#include "vqn/measurement.hpp"
#include "vqn/photon_source.hpp"
#include "vqn/service/bench.hpp"
#include "vqn/service/http_api.hpp"
#include "vqn/service/service.hpp"
#include "vqn/simulation.hpp"
#include "vqn/tagcore.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using nlohmann::json;

constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

/// Thrown for flag combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw vqn::Error(vqn::ErrorCode::io_error, "cannot open " + path);
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw vqn::Error(vqn::ErrorCode::config_error, path + " is not valid JSON: " + e.what());
    }
}

/// Writes to --out when given, otherwise stdout.
void emit(const std::string& out, const std::string& text) {
    if (out.empty()) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) {
        throw vqn::Error(vqn::ErrorCode::io_error, "cannot write " + out);
    }
    f << text;
    spdlog::info("wrote {}", out);
}

std::pair<double, double> parse_range(const std::string& text) {
    const auto comma = text.find(',');
    try {
        if (comma == std::string::npos) {
            const double v = std::stod(text);
            return {v, v};
        }
        return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    } catch (const std::logic_error&) {
        throw UsageError("expected LOW,HIGH but got '" + text + "'");
    }
}

// ---- serve

struct ServeArgs {
    std::string config;
    int port = -1;
};

int serve(const ServeArgs& a) {
    auto config = vqn::service::load_service_config(a.config);
    vqn::service::apply_env_overrides(config);
    if (a.port >= 0) {
        config.port = a.port;
    }
    vqn::service::Service service(config);
    vqn::service::HttpServer http(service, 128);
    const int port = http.bind(config.listen_address, config.port);
    service.start();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread watcher([&] {
        while (!g_stop) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        http.stop();
    });
    spdlog::info("listening on {}:{} (policy {}, {} pairs)", config.listen_address, port,
                 vqn::to_string(config.policy), config.source.pairs.size());
    // the port line goes to stdout so scripts can pick up an ephemeral port
    std::cout << json{{"listening", config.listen_address}, {"port", port}}.dump() << std::endl;
    http.listen();
    g_stop = true;
    watcher.join();
    service.stop();
    spdlog::info("stopped");
    return 0;
}

// ---- simulate

struct SimulateArgs {
    std::string preset;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string policy;
};

int simulate(const SimulateArgs& a) {
    if (a.preset.empty() == a.config.empty()) {
        throw UsageError("simulate needs exactly one of --preset or --config");
    }
    using namespace vqn::sim;
    Preset p;
    if (!a.preset.empty()) {
        p = preset(a.preset);
    } else {
        p.name = "config";
        const auto j = read_json(a.config);
        p.config = j.get<SimConfig>();
        if (j.contains("sweep_users")) {
            p.name = "fig5";
            p.sweep = j.at("sweep_users").get<std::vector<int>>();
        } else if (j.contains("sweep_resources")) {
            p.name = "fig6";
            p.sweep = j.at("sweep_resources").get<std::vector<int>>();
        }
    }
    if (a.seed) {
        p.config.seed = *a.seed;
    }
    if (!a.policy.empty()) {
        p.config.policy = vqn::parse_policy(a.policy);
    }
    spdlog::info("simulating {} (seed {}, policy {})", p.name, p.config.seed, vqn::to_string(p.config.policy));

    const bool want_json = a.out.size() >= 5 && a.out.compare(a.out.size() - 5, 5, ".json") == 0;
    if (p.sweep.empty()) {
        emit(a.out, to_json(run(p.config)).dump(2) + "\n");
        return 0;
    }
    const auto rows = p.name == "fig5" ? sweep_users(p.config, p.sweep) : sweep_resources(p.config, p.sweep);
    if (want_json) {
        json arr = json::array();
        for (const auto& r : rows) {
            arr.push_back({{"load", r.users},
                           {"resources", r.resources},
                           {"avg_wait", r.metrics.avg_wait},
                           {"avg_qos", r.metrics.avg_qos},
                           {"fairness", r.metrics.fairness},
                           {"throughput", r.metrics.throughput}});
        }
        emit(a.out, arr.dump(2) + "\n");
    } else {
        std::ostringstream csv;
        write_sweep_csv(csv, rows);
        emit(a.out, csv.str());
    }
    return 0;
}

// ---- generate

struct GenerateArgs {
    std::string preset;
    std::string config;
    std::optional<double> duration;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "vqtt";
};

int generate(const GenerateArgs& a) {
    if (a.preset.empty() == a.config.empty()) {
        throw UsageError("generate needs exactly one of --preset or --config");
    }
    vqn::SourceConfig cfg;
    if (!a.preset.empty()) {
        if (a.preset != "testbed") {
            throw vqn::Error(vqn::ErrorCode::config_error, "unknown source preset '" + a.preset + "'", "preset");
        }
        cfg = vqn::testbed_preset();
    } else {
        cfg = read_json(a.config).get<vqn::SourceConfig>();
    }
    if (a.duration) {
        cfg.duration_s = *a.duration;
    }
    if (a.seed) {
        cfg.seed = *a.seed;
    }
    cfg.validate();
    std::filesystem::create_directories(a.out);
    spdlog::info("generating {} s over {} pairs (seed {})", cfg.duration_s, cfg.pairs.size(), cfg.seed);
    const auto streams = vqn::generate(cfg);
    json summary{{"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"duration_s", cfg.duration_s}};
    json channels = json::object();
    for (const auto& [ch, stream] : streams) {
        const auto path = std::filesystem::path(a.out) / ("ch" + std::to_string(ch) + "." + a.format);
        vqn::write_stream(stream, path);
        channels[std::to_string(ch)] = {{"path", path.string()},
                                        {"tags", stream.size()},
                                        {"rate_hz", static_cast<double>(stream.size()) / cfg.duration_s}};
    }
    summary["channels"] = channels;
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// ---- analyze

struct AnalyzeArgs {
    std::string a;
    std::string b;
    vqn::Picoseconds window_ps = 500;
    vqn::Picoseconds bg_offset_ps = 1000;
    std::optional<vqn::Picoseconds> bg_width_ps;
    std::string histogram;
};

int analyze(const AnalyzeArgs& args) {
    std::optional<vqn::HistogramSpec> hist;
    if (!args.histogram.empty()) {
        const auto [w, n] = parse_range(args.histogram);
        hist = vqn::HistogramSpec{static_cast<vqn::Picoseconds>(w), static_cast<std::int64_t>(n)};
        if (args.histogram.find(',') == std::string::npos) {
            throw UsageError("--histogram expects BINW,NBINS");
        }
        hist->validate();
    }
    const auto a = vqn::read_stream(args.a);
    const auto b = vqn::read_stream(args.b);
    if (a.duration_ps() != b.duration_ps()) {
        spdlog::warn("stream durations differ ({} vs {} ps); using the longer", a.duration_ps(), b.duration_ps());
    }
    const double duration_s = static_cast<double>(std::max(a.duration_ps(), b.duration_ps())) * 1e-12;
    vqn::CoincidenceSpec spec;
    spec.window_ps = args.window_ps;
    spec.background_offset_ps = args.bg_offset_ps;
    spec.background_width_ps = args.bg_width_ps.value_or(args.window_ps);
    spec.validate();
    const auto result = vqn::coincidence_count(a, b, spec, duration_s);
    json out = result;
    out["duration_s"] = duration_s;
    out["window_ps"] = spec.window_ps;
    out["background_offset_ps"] = spec.background_offset_ps;
    if (hist) {
        out["counter"] = {{"a", vqn::counter(a, *hist, 0)}, {"b", vqn::counter(b, *hist, 0)}};
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

// ---- bench

struct BenchArgs {
    vqn::service::BenchOptions options;
    std::string interarrival = "50,200";
};

int bench(BenchArgs args) {
    const auto [lo, hi] = parse_range(args.interarrival);
    args.options.interarrival_ms_low = lo;
    args.options.interarrival_ms_high = hi;
    spdlog::info("bench: {} clients against {} for {} s", args.options.users, args.options.url,
                 args.options.duration_s);
    const auto report = vqn::service::run_bench(args.options);
    std::cout << to_json(report).dump(2) << "\n";
    return report.lost == 0 ? 0 : kRuntimeError;
}

} // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("vqn");
    spdlog::set_default_logger(logger);

    CLI::App app{"Virtual quantum network testbed"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    ServeArgs serve_args;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--config", serve_args.config, "Service config JSON")->required()->check(CLI::ExistingFile);
    serve_cmd->add_option("--port", serve_args.port, "Override the configured port (0 picks a free one)");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Run allocation simulations");
    auto* sim_preset = sim_cmd->add_option("--preset", sim_args.preset, "fig5 | fig6 | fig7")
                           ->check(CLI::IsMember({"fig5", "fig6", "fig7"}));
    sim_cmd->add_option("--config", sim_args.config, "Simulation config JSON")
        ->check(CLI::ExistingFile)
        ->excludes(sim_preset);
    sim_cmd->add_option("--seed", sim_args.seed, "Base seed");
    sim_cmd->add_option("--policy", sim_args.policy, "hungarian | fcfs")->check(CLI::IsMember({"hungarian", "fcfs"}));
    sim_cmd->add_option("--out", sim_args.out, "Output file (.csv or .json); stdout when omitted");

    GenerateArgs gen_args;
    auto* gen_cmd = app.add_subcommand("generate", "Synthesize tag files");
    auto* gen_preset = gen_cmd->add_option("--preset", gen_args.preset, "testbed")->check(CLI::IsMember({"testbed"}));
    gen_cmd->add_option("--config", gen_args.config, "Source config JSON")->check(CLI::ExistingFile)->excludes(gen_preset);
    gen_cmd->add_option("--duration", gen_args.duration, "Acquisition time in seconds")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen_args.seed, "Seed");
    gen_cmd->add_option("--out", gen_args.out, "Output directory")->required();
    gen_cmd->add_option("--format", gen_args.format, "vqtt | csv")->check(CLI::IsMember({"vqtt", "csv"}));

    AnalyzeArgs an_args;
    auto* an_cmd = app.add_subcommand("analyze", "Coincidence analysis of two tag files");
    an_cmd->add_option("--a", an_args.a, "First tag file")->required()->check(CLI::ExistingFile);
    an_cmd->add_option("--b", an_args.b, "Second tag file")->required()->check(CLI::ExistingFile);
    an_cmd->add_option("--window-ps", an_args.window_ps, "Coincidence window")->check(CLI::PositiveNumber);
    an_cmd->add_option("--bg-offset-ps", an_args.bg_offset_ps, "Background window offset")->check(CLI::PositiveNumber);
    an_cmd->add_option("--bg-width-ps", an_args.bg_width_ps, "Background window width (default: window)")
        ->check(CLI::PositiveNumber);
    an_cmd->add_option("--histogram", an_args.histogram, "Counter histograms BINW,NBINS");

    BenchArgs bench_args;
    auto& bo = bench_args.options;
    auto* bench_cmd = app.add_subcommand("bench", "Concurrent synthetic clients against a running service");
    bench_cmd->add_option("--url", bo.url, "Service base URL");
    bench_cmd->add_option("--users", bo.users, "Concurrent clients")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--interarrival-ms", bench_args.interarrival, "Think/hold time range LOW,HIGH");
    bench_cmd->add_option("--duration", bo.duration_s, "Seconds of new requests")->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--seed", bo.seed, "Seed");
    bench_cmd->add_option("--secret", bo.secret, "Shared secret of the bench users");
    bench_cmd->add_option("--user-prefix", bo.user_prefix, "Bench user names are PREFIX0..PREFIXn-1");
    bench_cmd->add_option("--poll-ms", bo.poll_ms, "Status poll interval")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--drain-timeout", bo.drain_timeout_s, "Seconds allowed for outstanding requests");
    bench_cmd->add_option("--measure-s", bo.measurement_s, "count_rate duration per held pair; 0 disables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*serve_cmd) {
            return serve(serve_args);
        }
        if (*sim_cmd) {
            return simulate(sim_args);
        }
        if (*gen_cmd) {
            return generate(gen_args);
        }
        if (*an_cmd) {
            return analyze(an_args);
        }
        return bench(bench_args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\nRun with --help for more information.\n";
        return kUsageError;
    } catch (const vqn::Error& e) {
        spdlog::error("{}{}{}", e.what(), e.field().empty() ? "" : " (field: ", e.field().empty() ? "" : e.field() + ")");
        return kRuntimeError;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kRuntimeError;
    }
}
