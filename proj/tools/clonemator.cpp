#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "clonemator/scenario.hpp"
#include "clonemator/session.hpp"

namespace {

using namespace clonemator;

Engine load_scene(const std::string& path, double tick_rate) {
    std::ifstream in(path);
    if (!in) {
        throw EngineError(ErrorCode::SceneLoadError, path + ": cannot open");
    }
    try {
        const json doc = json::parse(in);
        if (doc.contains("version")) {
            ScenarioScript s = load_scenario(doc);
            s.config.tick_rate = tick_rate;
            return build_engine(s);
        }
        World w = load_world(doc);
        w.config.tick_rate = tick_rate;
        return Engine(std::move(w));
    } catch (const json::exception& e) {
        throw EngineError(ErrorCode::SceneLoadError, path + ": " + e.what());
    } catch (const EngineError& e) {
        throw EngineError(ErrorCode::SceneLoadError, path + ": " + e.what());
    }
}

int cmd_serve(unsigned short port, const std::string& scene, double tick_rate) {
    WorldConfig cfg;
    cfg.tick_rate = tick_rate;
    Engine engine = scene.empty() ? Engine(cfg) : load_scene(scene, tick_rate);
    ServeOptions opts;
    opts.port = port;
    opts.handle_signals = true;
    SessionServer server(std::move(engine), opts);
    server.start();
    std::cout << "listening on ws://" << opts.address << ":" << server.port() << std::endl;
    server.wait();
    server.stop();
    return 0;
}

int cmd_run(const std::string& path, const std::string& report_path, bool hash_only, bool timing) {
    const ScenarioScript s = load_scenario_file(path);
    const RunReport r = run_scenario(s);
    const std::string text = report_to_json(r, timing).dump(2) + "\n";
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) {
            throw EngineError(ErrorCode::InvalidArgument, report_path + ": cannot write");
        }
        out << text;
    }
    if (hash_only) {
        std::cout << r.final_hash << "\n";
    } else if (report_path.empty()) {
        std::cout << text;
    }
    if (!r.passed) {
        spdlog::error("{}: {} of {} assertions passed{}", r.scenario,
                      std::count_if(r.assertions.begin(), r.assertions.end(), [](const auto& a) { return a.passed; }),
                      r.assertions.size(), r.error ? ", aborted: " + r.error->detail : "");
    }
    return r.passed ? 0 : 1;
}

int cmd_list(const std::string& dir) {
    for (const auto& p : list_scenarios(dir)) {
        try {
            const ScenarioScript s = load_scenario_file(p);
            std::cout << p.filename().string() << "\t" << s.name << "\t" << s.ticks << " ticks\t" << s.description
                      << "\n";
        } catch (const EngineError& e) {
            std::cout << p.filename().string() << "\tINVALID\t" << e.what() << "\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("clonemator"));
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("CLONEMATOR_LOG_LEVEL")) {
        spdlog::cfg::helpers::load_levels(level);
    }

    CLI::App app{"Clone choreography engine: scenario runner and live session server"};
    app.require_subcommand(1);

    auto* serve = app.add_subcommand("serve", "Run the live session server");
    unsigned short port = 8765;
    std::string scene;
    double tick_rate = 60.0;
    serve->add_option("--port", port, "TCP port (0 picks a free one)");
    serve->add_option("--scene", scene, "World or scenario file to start from")->check(CLI::ExistingFile);
    serve->add_option("--tick-rate", tick_rate, "Fixed engine rate in Hz")->check(CLI::PositiveNumber);

    auto* run = app.add_subcommand("run", "Run a scenario file and print its report");
    std::string scenario;
    std::string report;
    bool hash = false;
    bool timing = false;
    run->add_option("SCENARIO", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--report", report, "Write the JSON report here instead of standard output");
    run->add_flag("--hash", hash, "Print only the final world hash");
    run->add_flag("--timing", timing, "Include wall-clock time in the report");

    auto* list = app.add_subcommand("list-scenarios", "List bundled scenarios");
    std::string dir = CLONEMATOR_SCENARIO_DIR;
    list->add_option("--dir", dir, "Scenario directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            return cmd_serve(port, scene, tick_rate);
        }
        if (*run) {
            return cmd_run(scenario, report, hash, timing);
        }
        return cmd_list(dir);
    } catch (const EngineError& e) {
        spdlog::error("{}", e.what());
        return 2;
    }
}
