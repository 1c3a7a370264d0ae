#pragma once

#include "pa1smt/adapt.hpp"
#include "pa1smt/io.hpp"
#include "pa1smt/preprocess.hpp"
#include "pa1smt/slmc.hpp"
#include "pa1smt/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

// Experiment orchestration: load or generate domains, preprocess them in a
// shared feature space, train the source model, run the adaptation solver
// (and the plain SLMC baseline) over several seeds, and write results.
namespace pa1smt::experiment {

struct SourceFile {
  std::filesystem::path path;
  io::MatrixFormat format = io::MatrixFormat::kCsv;
  bool label_column = true;
  std::optional<std::filesystem::path> labels;  // separate labels file
};

struct TargetFile {
  std::filesystem::path path;
  io::MatrixFormat format = io::MatrixFormat::kCsv;
  Eigen::Index categories = 0;
  bool label_column = false;  // ground truth in the last CSV column
  std::optional<std::filesystem::path> labels;  // ground truth file
};

struct PreprocessOptions {
  bool zscore = true;  // per domain
  // Shared Gaussian KPCA fitted on the pooled domains; nullopt disables it.
  std::optional<preprocess::Retention> kpca =
      preprocess::EnergyFraction{preprocess::kDefaultEnergy};
  bool append_bias = false;  // constant-1 feature after projection
};

struct ExperimentConfig {
  std::optional<SourceFile> source;
  std::vector<TargetFile> targets;
  std::optional<synth::SyntheticSpec> synthetic;  // replaces the files
  adapt::Hyperparams hyper;
  PreprocessOptions preprocess;
  adapt::MembershipInit init = adapt::MembershipInit::kDirichlet;
  int runs = 10;
  std::uint64_t seed = 0;
  bool baseline = true;  // also run per-target SLMC from the same init
  std::filesystem::path output_dir = "results";

  // Throws ConfigError when the config is inconsistent.
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

// Domains after preprocessing, ready for the solver. Target ground truth is
// kept apart and only read when scoring.
struct PreparedData {
  Matrix source_x;
  std::vector<int> source_labels;
  std::vector<Matrix> targets;
  std::vector<Eigen::Index> categories;
  std::vector<std::optional<std::vector<int>>> truth;
  Eigen::Index feature_dim = 0;
};

PreparedData prepare(const ExperimentConfig& config);

// Seed of run i and the per-target sub-seed of target j in that run.
std::uint64_t run_seed(std::uint64_t base, int run);
std::uint64_t target_seed(std::uint64_t run_seed, std::size_t target);

struct TargetScore {
  std::optional<double> nmi;
  std::optional<double> ri;
};

struct RunResult {
  int run = 0;
  std::uint64_t seed = 0;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  std::vector<std::vector<int>> assignments;
  std::vector<TargetScore> adapted;
  std::vector<TargetScore> baseline;  // empty when the baseline is off
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  Eigen::Index feature_dim = 0;
};

// Runs every seed on already prepared data; no files are written.
ExperimentResult execute(const ExperimentConfig& config,
                         const PreparedData& data);

// Writes results.csv, summary.json and traces.csv into `dir`. Each file is
// written atomically.
void write_results(const ExperimentConfig& config,
                   const ExperimentResult& result,
                   const std::filesystem::path& dir);

nlohmann::json summarize(const ExperimentConfig& config,
                         const ExperimentResult& result);

// prepare + execute + write_results into config.output_dir. On failure every
// file written so far is removed and the error is rethrown with its stage.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct Grid {
  std::vector<double> beta;
  std::vector<double> gamma;
  std::vector<double> eta;
  std::vector<Eigen::Index> atoms;
};

struct GridCell {
  adapt::Hyperparams hyper;
  double mean_nmi = 0.0;  // over runs and scored targets
  std::filesystem::path dir;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t best = 0;
};

// Evaluates the Cartesian product of the grid (an empty axis keeps the
// config value), each cell with the same seeds. Every cell writes the same
// files as run_experiment into cell_<index>/, and grid.csv plus
// grid_summary.json go into config.output_dir.
GridResult run_grid(const ExperimentConfig& config, const Grid& grid);

}  // namespace pa1smt::experiment
