#include "wappo/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>

int main(int argc, char** argv) {
    CLI::App app{"WAPPO experiment runner"};
    app.require_subcommand(1);

    std::string spec_path, log_dir;
    auto* run = app.add_subcommand("run", "run every (mode, seed) trial in a spec file");
    run->add_option("spec", spec_path, "experiment spec file")->required();
    auto* plot = app.add_subcommand("plot", "emit SVG plots from a log directory");
    plot->add_option("dir", log_dir, "log directory")->required();
    auto* report = app.add_subcommand("report", "rebuild report.txt from summary.csv");
    report->add_option("dir", log_dir, "log directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            wappo::ExperimentSpec spec = wappo::ExperimentSpec::parse_file(spec_path);
            return wappo::run_experiment(spec);
        }
        if (plot->parsed()) {
            wappo::plot_experiment(log_dir);
            return wappo::kExitOk;
        }
        wappo::report_experiment(log_dir);
        return wappo::kExitOk;
    } catch (const wappo::SpecError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return wappo::kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
