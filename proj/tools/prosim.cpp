#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "prosim/config.hpp"
#include "prosim/export.hpp"
#include "prosim/scenario.hpp"
#include "prosim/session.hpp"
#include "prosim/trials.hpp"
#include "prosim/ws_server.hpp"

namespace fs = std::filesystem;
using namespace prosim;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

// PROSIM_LOG takes spdlog level syntax, e.g. "debug" or "info".
void init_logging() {
    auto logger = spdlog::stderr_color_mt("prosim");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("PROSIM_LOG")) spdlog::cfg::helpers::load_levels(env);
}

SessionConfig make_config(const std::string& config_path, const std::string& condition) {
    SessionConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
    if (!condition.empty()) cfg.set_condition(condition_from_string(condition));
    cfg.validate();
    return cfg;
}

int cmd_run(const std::vector<std::string>& scenario_paths, const std::string& config_path,
            const std::string& condition, std::uint64_t seed, const std::string& out, int jobs) {
    const SessionConfig cfg = make_config(config_path, condition);
    std::vector<trials::Scenario> scenarios;
    for (const auto& p : scenario_paths) scenarios.push_back(trials::load_scenario(p));

    const auto result = trials::run_batch(scenarios, cfg, seed, out, jobs);
    int successes = 0;
    for (const auto& r : result.records) successes += r.metrics.success ? 1 : 0;
    const auto summary = trials::summarize(result.records);
    spdlog::info("{} trials ({}), {} placed; mean score {:.3f}; logs in {}", result.records.size(),
                 to_string(cfg.condition), successes, summary.stats.front().mean, out);
    if (result.any_aborted) {
        spdlog::error("at least one trial aborted");
        return 1;
    }
    return 0;
}

int cmd_serve(const std::string& config_path, const std::string& condition, unsigned short port,
              const std::string& address, int decimation, const std::string& log_dir, std::uint64_t seed) {
    interface::SessionOptions opts;
    opts.config = make_config(config_path, condition);
    if (decimation > 0) opts.config.stream_decimation = decimation;
    opts.config.validate();
    if (!log_dir.empty()) opts.log_dir = log_dir;
    opts.base_seed = seed;

    interface::Session session(opts);
    interface::WebSocketServer server(session, port, address);

    std::atomic<bool> stop{false};
    std::thread control([&] {
        interface::SteadyClock clock;
        interface::run_control_loop(session, clock, stop);
    });
    std::thread watcher([&] {
        while (!stop.load()) {
            if (g_interrupted.load()) {
                spdlog::info("shutting down");
                server.stop();
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    });

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.run();
    stop = true;
    watcher.join();
    control.join();
    return 0;
}

int cmd_export(const std::string& trial, const std::string& format, const std::string& out) {
    const auto fmt_kind = interface::export_format_from_string(format);
    const auto written = interface::export_trial(trial, fmt_kind, out.empty() ? std::nullopt
                                                                             : std::optional<fs::path>(out));
    std::cout << written.string() << '\n';
    return 0;
}

int cmd_generate(const std::string& kind, const std::string& out, int count, std::uint64_t seed) {
    fs::create_directories(out);
    std::vector<trials::Scenario> scenarios;
    if (kind == "batch") {
        scenarios = trials::make_standard_batch();
    } else if (kind == "overgrasp") {
        scenarios.push_back(trials::make_overgrasp_scenario());
    } else if (kind == "antislip") {
        for (int i = 0; i < count; ++i) {
            scenarios.push_back(trials::make_antislip_scenario(fmt::format("antislip_{:03}", i), seed + i));
        }
    } else {
        throw std::invalid_argument(fmt::format("unknown scenario kind '{}'", kind));
    }
    for (const auto& s : scenarios) {
        const fs::path p = fs::path(out) / (s.id + ".json");
        trials::save_scenario(p, s);
        std::cout << p.string() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    init_logging();

    CLI::App app{"Sensorimotor control stack for a myoelectric prosthetic hand"};
    app.require_subcommand(1);

    std::vector<std::string> scenarios;
    std::string config_path, condition, out = "out";
    std::uint64_t seed = 1;
    int jobs = 1;
    auto* run = app.add_subcommand("run", "Run scripted scenarios and write trial logs");
    run->add_option("--scenario", scenarios, "Scenario JSON file(s)")->required()->expected(1, -1);
    run->add_option("--condition", condition, "standard or tactile (default: from config)")
        ->check(CLI::IsMember({"standard", "tactile"}));
    run->add_option("--seed", seed, "Base seed; trial i uses seed + i");
    run->add_option("--out", out, "Output directory");
    run->add_option("--config", config_path, "Session configuration JSON");
    run->add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1, 256));

    unsigned short port = 8765;
    std::string address = "127.0.0.1", log_dir;
    int decimation = 0;
    auto* serve = app.add_subcommand("serve", "Live session over WebSocket");
    serve->add_option("--port", port, "TCP port");
    serve->add_option("--address", address, "Bind address");
    serve->add_option("--condition", condition)->check(CLI::IsMember({"standard", "tactile"}));
    serve->add_option("--config", config_path, "Session configuration JSON");
    serve->add_option("--decimation", decimation, "Telemetry decimation (default: from config)")
        ->check(CLI::PositiveNumber);
    serve->add_option("--log-dir", log_dir, "Directory for per-trial logs");
    serve->add_option("--seed", seed, "Seed of the first live trial");

    std::string trial, format = "csv", export_out;
    auto* exp = app.add_subcommand("export", "Export a trial trace as plot-ready CSV or SVG");
    exp->add_option("--trial", trial, "trial_<id>.csv written by run or serve")->required();
    exp->add_option("--format", format)->check(CLI::IsMember({"csv", "svg"}));
    exp->add_option("--out", export_out, "Output file (default: next to the trace)");

    std::string kind = "batch", gen_out = "scenarios";
    int count = 100;
    auto* gen = app.add_subcommand("generate", "Write built-in scenario scripts as JSON");
    gen->add_option("--kind", kind)->check(CLI::IsMember({"batch", "overgrasp", "antislip"}));
    gen->add_option("--out", gen_out, "Output directory");
    gen->add_option("--count", count, "Number of anti-slip draws")->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "Base seed for anti-slip draws");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(scenarios, config_path, condition, seed, out, jobs);
        if (*serve) return cmd_serve(config_path, condition, port, address, decimation, log_dir, seed);
        if (*exp) return cmd_export(trial, format, export_out);
        if (*gen) return cmd_generate(kind, gen_out, count, seed);
    } catch (const ParseError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
