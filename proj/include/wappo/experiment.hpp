#pragma once

#include "wappo/trainer.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace wappo {

struct SpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parsed experiment spec: strict key=value text, unknown keys rejected.
struct ExperimentSpec {
    std::string family = "cartpole";
    std::vector<TrainMode> modes{TrainMode::Wappo, TrainMode::Ppo};
    std::vector<std::uint64_t> seeds{0};
    std::string output_dir = ".";
    WappoConfig base;  // mode and seed overwritten per trial
    int feature_samples = 1000;
    int sliced_directions = 64;

    static ExperimentSpec parse(const std::string& text);
    static ExperimentSpec parse_file(const std::string& path);
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitTrainingAbort = 3;

// Executes every (mode, seed) trial; writes train_log_<mode>_<seed>.csv,
// ckpt_<mode>_<seed>.txt, features_<mode>_<seed>.csv, then summary.csv and
// report.txt. Returns a process exit code.
int run_experiment(const ExperimentSpec& spec);

// Reads train_log/features CSVs from a directory and emits
// learning_curves.svg and feature_density.svg.
void plot_experiment(const std::string& log_dir);

// Rebuilds report.txt from summary.csv.
void report_experiment(const std::string& log_dir);

// Documented, schema-tested column sets.
extern const std::vector<std::string> kTrainLogColumns;
extern const std::vector<std::string> kSummaryColumns;

}  // namespace wappo
