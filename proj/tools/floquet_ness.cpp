// floquet-ness — command line driver: rates, steady states, diagnostics and sweeps.

#include "fness/app.hpp"
#include "fness/error.hpp"
#include "fness/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

int main(int argc, char** argv) {
    CLI::App app{"Floquet scattering rates and nonequilibrium steady states of a driven N-level system"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string cache_dir;
    fness::AppOptions opts;
    bool converge = false;

    const std::map<std::string, std::string> help{
        {"rates", "rate CSV for every configured beta"},
        {"ness", "steady-state populations vs beta, with the beta -> 0 endpoint"},
        {"check", "diagnostics CSV (thermalization residuals, balance ratios, beta -> 0 checks)"},
        {"bound", "high-temperature thermal-domain bound vs lambda"},
        {"lowt", "beta -> infinity rate asymptote and steady state"},
        {"ratesym", "a^nu vs a^-nu against beta"},
        {"dump-solve", "system matrix, amplitudes and T elements for one (p, level)"},
    };
    for (const auto& name : fness::subcommands()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", config_path, "config file (INI)")->required()->check(CLI::ExistingFile);
        sub->add_option("--workers", opts.workers, "worker threads (default: all cores)");
        sub->add_option("--out", out_dir, "output directory (overrides [run] output_dir)");
        sub->add_option("--cache", cache_dir, "solve cache directory (overrides [run] cache_dir)");
        if (name == "check") sub->add_flag("--converge", converge, "also sweep e_cut x nu_cut");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string name = app.get_subcommands().front()->get_name();
    opts.converge = converge;

    fness::RunConfig cfg;
    try {
        cfg = fness::load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
        for (const auto& path : fness::run_subcommand(name, cfg, opts)) std::cout << path << "\n";
    } catch (const std::exception& e) {
        const std::string record = fness::error_record(e);
        std::cerr << record << "\n";
        // --out applies even when the config itself failed to load
        const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
        if (!dir.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            std::ofstream(std::filesystem::path(dir) / "error.json") << record << "\n";
        }
        return fness::exit_code_for(e);
    }
    return 0;
}
