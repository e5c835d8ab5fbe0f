#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "coscpmm/error.hpp"
#include "coscpmm/pipeline.hpp"

namespace {

std::vector<std::string> split_nodes(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("coscpmm");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_level(spdlog::level::warn);
    // COSCPMM_LOG_LEVEL=debug|info|warn|error|off
    if (const char* lvl = std::getenv("COSCPMM_LOG_LEVEL")) {
        spdlog::set_level(spdlog::level::from_str(lvl));
    }
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Phase, amplitude and cross noise of oscillators from periodic steady state and Floquet modes"};
    app.require_subcommand(1);

    std::string config_path;
    bool mc = false;
    bool plot = false;
    std::string nodes;
    std::string out_dir;
    auto* run = app.add_subcommand("run", "analyse the circuit described by a config file");
    run->add_option("config", config_path, "key = value configuration file")->required()->check(CLI::ExistingFile);
    run->add_flag("--mc", mc, "also run the Monte-Carlo reference and overlay it");
    run->add_option("--nodes", nodes, "comma separated observation nodes (overrides noise_nodes)");
    run->add_option("--out", out_dir, "output directory (overrides output_dir)");
    run->add_flag("--plot", plot, "write a gnuplot script and an SVG plot");

    CLI11_PARSE(app, argc, argv);

    try {
        coscpmm::SimulationConfig cfg = coscpmm::parse_config(config_path);
        if (mc) cfg.mc_enabled = true;
        if (plot) cfg.plot = true;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (!nodes.empty()) cfg.noise_nodes = split_nodes(nodes);
        const coscpmm::RunResult res = coscpmm::run_pipeline(cfg);
        coscpmm::print_summary(std::cout, res);
        for (const auto& f : res.files) std::cout << "wrote " << f.string() << '\n';
        return 0;
    } catch (const coscpmm::Error& e) {
        spdlog::error("{}", e.what());
        const bool user = e.kind() == coscpmm::ErrorKind::configuration || e.kind() == coscpmm::ErrorKind::parameter ||
                          e.kind() == coscpmm::ErrorKind::io;
        return user ? 2 : 1;
    } catch (const std::exception& e) {
        spdlog::error("unexpected failure: {}", e.what());
        return 1;
    }
}
