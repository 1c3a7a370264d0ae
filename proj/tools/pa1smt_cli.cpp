#include "pa1smt/adapt.hpp"
#include "pa1smt/error.hpp"
#include "pa1smt/experiment.hpp"
#include "pa1smt/io.hpp"
#include "pa1smt/metrics.hpp"
#include "pa1smt/preprocess.hpp"
#include "pa1smt/slmc.hpp"
#include "pa1smt/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pa1smt;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kSolver = 3 };

// Flags shared by `fit` and `grid`; each one overrides the config file.
struct Overrides {
  std::optional<double> lambda, beta, gamma, eta, tol_outer, tol_inner;
  std::optional<long> atoms;
  std::optional<int> max_outer, max_inner, runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> init, output;
  std::optional<double> kpca_energy;
  std::optional<long> kpca_components;
  bool no_kpca = false;
  bool no_zscore = false;
  bool bias = false;
  bool no_baseline = false;

  void add_to(CLI::App* app) {
    app->add_option("--lambda", lambda, "clustering weight");
    app->add_option("--beta", beta, "source reconstruction weight");
    app->add_option("--gamma", gamma, "dictionary reconstruction weight");
    app->add_option("--eta", eta, "row-sparsity weight");
    app->add_option("--atoms", atoms, "dictionary size r");
    app->add_option("--max-outer", max_outer);
    app->add_option("--max-inner", max_inner);
    app->add_option("--tol-outer", tol_outer);
    app->add_option("--tol-inner", tol_inner);
    app->add_option("--runs", runs);
    app->add_option("--seed", seed, "base seed; run i uses seed + i");
    app->add_option("--init", init, "dirichlet | kmeans")
        ->check(CLI::IsMember({"dirichlet", "kmeans"}));
    app->add_option("--kpca-energy", kpca_energy);
    app->add_option("--kpca-components", kpca_components);
    app->add_flag("--no-kpca", no_kpca);
    app->add_flag("--no-zscore", no_zscore);
    app->add_flag("--bias", bias, "append a constant feature");
    app->add_flag("--no-baseline", no_baseline);
    app->add_option("-o,--output", output, "output directory");
  }

  void apply(experiment::ExperimentConfig& c) const {
    auto& h = c.hyper;
    if (lambda) h.lambda = *lambda;
    if (beta) h.beta = *beta;
    if (gamma) h.gamma = *gamma;
    if (eta) h.eta = *eta;
    if (atoms) h.atoms = *atoms;
    if (max_outer) h.max_outer = *max_outer;
    if (max_inner) h.max_inner = *max_inner;
    if (tol_outer) h.tol_outer = *tol_outer;
    if (tol_inner) h.tol_inner = *tol_inner;
    if (runs) c.runs = *runs;
    if (seed) c.seed = *seed;
    if (init) {
      c.init = *init == "kmeans" ? adapt::MembershipInit::kKMeans
                                 : adapt::MembershipInit::kDirichlet;
    }
    if (kpca_energy) c.preprocess.kpca = preprocess::EnergyFraction{*kpca_energy};
    if (kpca_components) {
      c.preprocess.kpca = preprocess::ComponentCount{*kpca_components};
    }
    if (no_kpca) c.preprocess.kpca.reset();
    if (no_zscore) c.preprocess.zscore = false;
    if (bias) c.preprocess.append_bias = true;
    if (no_baseline) c.baseline = false;
    if (output) c.output_dir = *output;
    c.validate();
  }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + item + "' in list '" + text + "'");
    }
    start = end + 1;
  }
  return out;
}

// "path:C" for a target given on the command line.
std::pair<fs::path, Eigen::Index> parse_target(const std::string& spec) {
  const std::size_t colon = spec.rfind(':');
  if (colon == std::string::npos) {
    throw ConfigError("target must be PATH:CATEGORIES, got '" + spec + "'");
  }
  try {
    return {spec.substr(0, colon), std::stol(spec.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ConfigError("bad category count in '" + spec + "'");
  }
}

void print_summary(const experiment::ExperimentResult& result) {
  if (result.runs.empty()) return;
  const std::size_t targets = result.runs.front().adapted.size();
  for (std::size_t j = 0; j < targets; ++j) {
    double ours = 0.0, base = 0.0;
    int scored = 0, base_scored = 0;
    for (const auto& r : result.runs) {
      if (r.adapted[j].nmi) {
        ours += *r.adapted[j].nmi;
        ++scored;
      }
      if (j < r.baseline.size() && r.baseline[j].nmi) {
        base += *r.baseline[j].nmi;
        ++base_scored;
      }
    }
    if (scored == 0) continue;
    std::printf("target %zu  nmi %.4f", j, ours / scored);
    if (base_scored > 0) std::printf("  (slmc %.4f)", base / base_scored);
    std::printf("\n");
  }
}

int cmd_synth(int targets, std::uint64_t seed,
              const std::optional<std::string>& spec_path, const fs::path& out) {
  synth::SyntheticSpec spec = synth::default_transfer_spec(targets);
  if (spec_path) {
    std::ifstream in(*spec_path);
    if (!in) throw ConfigError("cannot open " + *spec_path);
    nlohmann::json doc;
    in >> doc;
    spec = experiment::config_from_json({{"synthetic", doc}}).synthetic.value();
  }
  spec.seed = seed;
  const synth::SyntheticData data = synth::generate_synthetic(spec);
  fs::create_directories(out);
  io::save_csv(out / "source.csv", data.source.x, &*data.source.labels);

  nlohmann::json config;
  config["source"] = {{"path", "source.csv"}, {"label_column", true}};
  config["targets"] = nlohmann::json::array();
  for (std::size_t j = 0; j < data.targets.size(); ++j) {
    const std::string name = "target_" + std::to_string(j);
    io::save_csv(out / (name + ".csv"), data.targets[j]);
    io::save_labels(out / (name + "_labels.txt"), data.target_truth[j]);
    config["targets"].push_back(
        {{"path", name + ".csv"},
         {"categories", spec.targets[j].categories.size()},
         {"labels", name + "_labels.txt"}});
  }
  config["output_dir"] = "results";
  io::write_atomic(out / "config.json", config.dump(2) + "\n");
  std::printf("wrote %zu target domains to %s\n", data.targets.size(),
              out.string().c_str());
  return kOk;
}

int cmd_train_source(const fs::path& source, const std::optional<fs::path>& labels,
                     double lambda, bool zscore, const fs::path& out) {
  io::Dataset data =
      io::load_matrix(source, io::format_for(source), !labels.has_value());
  if (labels) data.labels = io::load_labels(*labels);
  if (!data.labels) throw DataError("source has no labels");
  if (zscore) data.x = preprocess::zscore(data.x).data;
  const slmc::SourceModel model =
      slmc::train_source_model(data.x, *data.labels, lambda);
  // One row per category, d values each.
  if (io::format_for(out) == io::MatrixFormat::kCsv) {
    io::save_csv(out, model.w);
  } else {
    io::save_raw(out, model.w);
  }
  std::printf("source model: %ld features x %ld categories\n",
              static_cast<long>(model.dim()), static_cast<long>(model.categories));
  return kOk;
}

// Direct fit on already preprocessed targets against a saved source model.
int cmd_fit_direct(const fs::path& model_path,
                   const std::vector<std::string>& target_specs,
                   const Overrides& flags) {
  experiment::ExperimentConfig base;
  base.synthetic = synth::default_transfer_spec(1);  // satisfies validate()
  flags.apply(base);

  slmc::SourceModel source;
  source.w = io::load_matrix(model_path, io::format_for(model_path)).x;
  source.categories = source.w.cols();
  for (Eigen::Index k = 0; k < source.categories; ++k) {
    source.label_map.push_back(static_cast<int>(k));
  }

  std::vector<adapt::TargetDomain> domains;
  for (std::size_t j = 0; j < target_specs.size(); ++j) {
    const auto [path, categories] = parse_target(target_specs[j]);
    adapt::TargetDomain d;
    d.x = io::load_matrix(path, io::format_for(path)).x;
    if (base.preprocess.zscore) d.x = preprocess::zscore(d.x).data;
    d.categories = categories;
    d.seed = experiment::target_seed(base.seed, j);
    domains.push_back(std::move(d));
  }
  adapt::Hyperparams h = base.hyper;
  h.seed = base.seed;
  const adapt::FitReport report = adapt::fit(source, domains, h, base.init);

  const fs::path out = base.output_dir;
  fs::create_directories(out);
  for (std::size_t j = 0; j < domains.size(); ++j) {
    io::save_labels(out / ("assignments_" + std::to_string(j) + ".txt"),
                    report.assignments[j]);
  }
  io::save_csv(out / "dictionary.csv", report.dictionary);
  std::string trace = "iteration,objective\n";
  for (std::size_t t = 0; t < report.trace.size(); ++t) {
    char line[64];
    std::snprintf(line, sizeof(line), "%zu,%.17g\n", t + 1, report.trace[t]);
    trace += line;
  }
  io::write_atomic(out / "trace.csv", trace);
  std::printf("%d iterations, %s, objective %.10g\n", report.iterations,
              report.converged ? "converged" : "not converged",
              report.trace.empty() ? 0.0 : report.trace.back());
  return kOk;
}

experiment::ExperimentConfig config_with(const std::optional<fs::path>& path,
                                         const Overrides& flags) {
  experiment::ExperimentConfig config;
  if (path) {
    config = experiment::load_config(*path);
  } else {
    config.synthetic = synth::default_transfer_spec(2);
  }
  flags.apply(config);
  return config;
}

int cmd_eval(const fs::path& pred, const fs::path& truth) {
  const auto a = io::load_labels(pred);
  const auto b = io::load_labels(truth);
  std::printf("nmi %.6f\nri %.6f\n", metrics::nmi(a, b), metrics::rand_index(a, b));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised adaptation from one labeled source to several "
               "unlabeled targets through model-parameter dictionaries"};
  app.require_subcommand(1);

  int synth_targets = 2;
  std::uint64_t synth_seed = 7;
  std::optional<std::string> synth_spec;
  std::string synth_out = "synthetic";
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-domain set");
  synth->add_option("--targets", synth_targets, "targets in the default spec (1-3)");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--spec", synth_spec, "JSON synthetic spec");
  synth->add_option("-o,--output", synth_out);

  std::string ts_source, ts_out = "source_model.csv";
  std::optional<fs::path> ts_labels;
  double ts_lambda = 1.0;
  bool ts_no_zscore = false;
  auto* train = app.add_subcommand("train-source", "fit the source model on labeled data");
  train->add_option("--source", ts_source, "matrix with a label column")->required();
  train->add_option("--labels", ts_labels, "separate label file");
  train->add_option("--lambda", ts_lambda);
  train->add_flag("--no-zscore", ts_no_zscore);
  train->add_option("-o,--output", ts_out);

  std::optional<fs::path> fit_config, fit_model;
  std::vector<std::string> fit_targets;
  Overrides fit_flags;
  auto* fit = app.add_subcommand("fit", "run the experiment or a direct fit");
  fit->add_option("-c,--config", fit_config, "experiment config (JSON)");
  fit->add_option("--source-model", fit_model, "saved source model");
  fit->add_option("--target", fit_targets, "PATH:CATEGORIES, repeatable");
  fit_flags.add_to(fit);

  std::string eval_pred, eval_truth;
  auto* eval = app.add_subcommand("eval", "score predicted labels");
  eval->add_option("--pred", eval_pred)->required();
  eval->add_option("--truth", eval_truth)->required();

  std::optional<fs::path> grid_config;
  std::string grid_beta, grid_gamma, grid_eta, grid_atoms;
  Overrides grid_flags;
  auto* grid = app.add_subcommand("grid", "sensitivity grid over beta, gamma, eta, r");
  grid->add_option("-c,--config", grid_config);
  grid->add_option("--betas", grid_beta, "comma-separated values");
  grid->add_option("--gammas", grid_gamma);
  grid->add_option("--etas", grid_eta);
  grid->add_option("--atoms-list", grid_atoms);
  grid_flags.add_to(grid);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*synth) {
      return cmd_synth(synth_targets, synth_seed, synth_spec, synth_out);
    }
    if (*train) {
      return cmd_train_source(ts_source, ts_labels, ts_lambda, !ts_no_zscore, ts_out);
    }
    if (*eval) return cmd_eval(eval_pred, eval_truth);
    if (*fit) {
      if (fit_model) {
        if (fit_config) throw ConfigError("--config and --source-model are exclusive");
        if (fit_targets.empty()) throw ConfigError("--source-model needs --target");
        return cmd_fit_direct(*fit_model, fit_targets, fit_flags);
      }
      const auto config = config_with(fit_config, fit_flags);
      const auto result = experiment::run_experiment(config);
      print_summary(result);
      std::printf("results in %s\n", config.output_dir.string().c_str());
      return kOk;
    }
    if (*grid) {
      const auto config = config_with(grid_config, grid_flags);
      experiment::Grid g;
      if (!grid_beta.empty()) g.beta = parse_list(grid_beta);
      if (!grid_gamma.empty()) g.gamma = parse_list(grid_gamma);
      if (!grid_eta.empty()) g.eta = parse_list(grid_eta);
      for (const double r : grid_atoms.empty() ? std::vector<double>{}
                                               : parse_list(grid_atoms)) {
        if (r < 1 || r != static_cast<double>(static_cast<long>(r))) {
          throw ConfigError("atoms must be positive integers");
        }
        g.atoms.push_back(static_cast<Eigen::Index>(r));
      }
      const auto result = experiment::run_grid(config, g);
      const auto& best = result.cells[result.best];
      std::printf("%zu cells; best beta=%g gamma=%g eta=%g r=%ld nmi=%.4f\n",
                  result.cells.size(), best.hyper.beta, best.hyper.gamma,
                  best.hyper.eta, static_cast<long>(best.hyper.atoms),
                  best.mean_nmi);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolver;
  }
  return kOk;
}
