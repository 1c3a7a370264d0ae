#include "pa1smt/experiment.hpp"

#include "pa1smt/error.hpp"
#include "pa1smt/metrics.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>

namespace pa1smt::experiment {
namespace {

using Index = Eigen::Index;
using nlohmann::json;

std::string tagged(std::string_view stage, const std::exception& e) {
  return "[" + std::string(stage) + "] " + e.what();
}

// Runs fn and rethrows library errors with the stage name prefixed, keeping
// their type so the CLI can still map them onto exit codes.
template <typename Fn>
auto staged(std::string_view stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const IndefiniteError& e) {
    throw IndefiniteError(tagged(stage, e));
  } catch (const SolverError& e) {
    throw SolverError(tagged(stage, e));
  } catch (const DimensionError& e) {
    throw DimensionError(tagged(stage, e));
  } catch (const DataError& e) {
    throw DataError(tagged(stage, e));
  } catch (const ConfigError& e) {
    throw ConfigError(tagged(stage, e));
  } catch (const std::filesystem::filesystem_error& e) {
    throw DataError(tagged(stage, e));
  } catch (const json::exception& e) {
    throw ConfigError(tagged(stage, e));
  }
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::string rotation_name(synth::RotationKind k) {
  return k == synth::RotationKind::kAngle ? "angle" : "random";
}

synth::SyntheticSpec synthetic_from_json(const json& doc) {
  if (doc.is_string()) {
    if (doc.get<std::string>() != "default") {
      throw ConfigError("synthetic preset must be \"default\"");
    }
    return synth::default_transfer_spec(2);
  }
  synth::SyntheticSpec spec;
  if (doc.contains("preset")) {
    if (doc.at("preset").get<std::string>() != "default") {
      throw ConfigError("synthetic preset must be \"default\"");
    }
    spec = synth::default_transfer_spec(doc.value("preset_targets", 2));
  }
  read_opt(doc, "dim", spec.dim);
  read_opt(doc, "source_categories", spec.source_categories);
  read_opt(doc, "class_std", spec.class_std);
  read_opt(doc, "separation", spec.separation);
  read_opt(doc, "source_samples_per_category", spec.source_samples_per_category);
  read_opt(doc, "target_samples_per_category", spec.target_samples_per_category);
  read_opt(doc, "seed", spec.seed);
  if (doc.contains("targets")) {
    spec.targets.clear();
    for (const json& t : doc.at("targets")) {
      synth::TargetSpec target;
      target.categories = t.at("categories").get<std::vector<int>>();
      const std::string rot = t.value("rotation", std::string("angle"));
      if (rot == "angle") {
        target.shift.rotation = synth::RotationKind::kAngle;
      } else if (rot == "random") {
        target.shift.rotation = synth::RotationKind::kRandomOrthogonal;
      } else {
        throw ConfigError("rotation must be \"angle\" or \"random\"");
      }
      read_opt(t, "angle", target.shift.angle);
      read_opt(t, "translation", target.shift.translation);
      read_opt(t, "noise", target.shift.noise);
      spec.targets.push_back(std::move(target));
    }
  }
  return spec;
}

json synthetic_to_json(const synth::SyntheticSpec& spec) {
  json targets = json::array();
  for (const auto& t : spec.targets) {
    targets.push_back({{"categories", t.categories},
                       {"rotation", rotation_name(t.shift.rotation)},
                       {"angle", t.shift.angle},
                       {"translation", t.shift.translation},
                       {"noise", t.shift.noise}});
  }
  return {{"dim", spec.dim},
          {"source_categories", spec.source_categories},
          {"class_std", spec.class_std},
          {"separation", spec.separation},
          {"source_samples_per_category", spec.source_samples_per_category},
          {"target_samples_per_category", spec.target_samples_per_category},
          {"seed", spec.seed},
          {"targets", targets}};
}

json hyper_to_json(const adapt::Hyperparams& h) {
  return {{"lambda", h.lambda},       {"beta", h.beta},
          {"gamma", h.gamma},         {"eta", h.eta},
          {"atoms", h.atoms},         {"max_outer", h.max_outer},
          {"max_inner", h.max_inner}, {"tol_outer", h.tol_outer},
          {"tol_inner", h.tol_inner}, {"row_floor", h.row_floor}};
}

std::vector<int> labels_or_throw(const io::Dataset& d, const std::string& what) {
  if (!d.labels) throw DataError(what + " has no labels");
  return *d.labels;
}

std::optional<std::vector<int>> load_truth(const TargetFile& t,
                                           const io::Dataset& data) {
  if (t.labels) return io::load_labels(*t.labels);
  return data.labels;
}

struct Stats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

Stats stats_of(const std::vector<double>& values) {
  Stats s;
  s.count = values.size();
  if (values.empty()) return s;
  for (const double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string opt_num(const std::optional<double>& v) {
  return v ? num(*v) : std::string();
}

const char* kMethodAdapted = "pa1smt";
const char* kMethodBaseline = "slmc";

std::vector<double> collect(const ExperimentResult& result, std::size_t target,
                            bool baseline, bool want_nmi) {
  std::vector<double> out;
  for (const RunResult& r : result.runs) {
    const auto& scores = baseline ? r.baseline : r.adapted;
    if (target >= scores.size()) continue;
    const auto& v = want_nmi ? scores[target].nmi : scores[target].ri;
    if (v) out.push_back(*v);
  }
  return out;
}

json method_summary(const ExperimentResult& result, std::size_t target,
                    bool baseline) {
  const Stats nmi = stats_of(collect(result, target, baseline, true));
  const Stats ri = stats_of(collect(result, target, baseline, false));
  if (nmi.count == 0) return nullptr;
  return {{"nmi_mean", nmi.mean},
          {"nmi_std", nmi.std},
          {"ri_mean", ri.mean},
          {"ri_std", ri.std}};
}

std::string results_csv(const ExperimentResult& result, std::size_t targets) {
  std::string out = "method,target,run,seed,nmi,ri\n";
  const auto emit = [&](bool baseline) {
    const char* method = baseline ? kMethodBaseline : kMethodAdapted;
    for (std::size_t j = 0; j < targets; ++j) {
      bool any = false;
      for (const RunResult& r : result.runs) {
        const auto& scores = baseline ? r.baseline : r.adapted;
        if (j >= scores.size()) continue;
        any = true;
        out += std::string(method) + "," + std::to_string(j) + "," +
               std::to_string(r.run) + "," + std::to_string(r.seed) + "," +
               opt_num(scores[j].nmi) + "," + opt_num(scores[j].ri) + "\n";
      }
      if (!any) continue;
      const Stats nmi = stats_of(collect(result, j, baseline, true));
      const Stats ri = stats_of(collect(result, j, baseline, false));
      if (nmi.count == 0) continue;
      out += std::string(method) + "," + std::to_string(j) + ",mean,," +
             num(nmi.mean) + "," + num(ri.mean) + "\n";
      out += std::string(method) + "," + std::to_string(j) + ",std,," +
             num(nmi.std) + "," + num(ri.std) + "\n";
    }
  };
  emit(false);
  emit(true);
  return out;
}

std::string traces_csv(const ExperimentResult& result) {
  std::string out = "run,iteration,objective\n";
  for (const RunResult& r : result.runs) {
    for (std::size_t t = 0; t < r.trace.size(); ++t) {
      out += std::to_string(r.run) + "," + std::to_string(t + 1) + "," +
             num(r.trace[t]) + "\n";
    }
  }
  return out;
}

// Removes the listed files unless release() was called.
class OutputGuard {
 public:
  void add(std::filesystem::path p) { paths_.push_back(std::move(p)); }
  void release() { paths_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (const auto& p : paths_) std::filesystem::remove(p, ec);
  }

 private:
  std::vector<std::filesystem::path> paths_;
};

Matrix with_bias(const Matrix& x) {
  Matrix out(x.rows() + 1, x.cols());
  out.topRows(x.rows()) = x;
  out.row(x.rows()).setOnes();
  return out;
}

double cell_mean_nmi(const ExperimentResult& result) {
  std::vector<double> values;
  for (const RunResult& r : result.runs) {
    for (const TargetScore& s : r.adapted) {
      if (s.nmi) values.push_back(*s.nmi);
    }
  }
  return stats_of(values).mean;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (runs < 1) throw ConfigError("runs must be >= 1");
  hyper.validate();
  if (synthetic) {
    synthetic->validate();
  } else {
    if (!source) throw ConfigError("config needs a source or a synthetic spec");
    if (targets.empty()) throw ConfigError("config needs at least one target");
    for (std::size_t j = 0; j < targets.size(); ++j) {
      if (targets[j].categories < 2) {
        throw ConfigError("target " + std::to_string(j) +
                          " needs categories >= 2");
      }
    }
  }
  if (preprocess.kpca) {
    if (const auto* e =
            std::get_if<preprocess::EnergyFraction>(&*preprocess.kpca)) {
      if (!(e->fraction > 0.0 && e->fraction <= 1.0)) {
        throw ConfigError("kpca energy must lie in (0, 1]");
      }
    } else if (std::get<preprocess::ComponentCount>(*preprocess.kpca).k < 1) {
      throw ConfigError("kpca components must be >= 1");
    }
  }
}

ExperimentConfig config_from_json(const json& doc,
                                  const std::filesystem::path& base_dir) {
  return staged("config", [&] {
    ExperimentConfig c;
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (doc.contains("source")) {
      const json& s = doc.at("source");
      SourceFile src;
      src.path = resolve(base_dir, s.at("path").get<std::string>());
      src.format = s.contains("format")
                       ? io::parse_format(s.at("format").get<std::string>())
                       : io::format_for(src.path);
      src.label_column = s.value("label_column", true);
      if (s.contains("labels")) {
        src.labels = resolve(base_dir, s.at("labels").get<std::string>());
        src.label_column = s.value("label_column", false);
      }
      c.source = src;
    }
    if (doc.contains("targets")) {
      for (const json& t : doc.at("targets")) {
        TargetFile tf;
        tf.path = resolve(base_dir, t.at("path").get<std::string>());
        tf.format = t.contains("format")
                        ? io::parse_format(t.at("format").get<std::string>())
                        : io::format_for(tf.path);
        tf.categories = t.at("categories").get<Index>();
        tf.label_column = t.value("label_column", false);
        if (t.contains("labels")) {
          tf.labels = resolve(base_dir, t.at("labels").get<std::string>());
        }
        c.targets.push_back(std::move(tf));
      }
    }
    if (doc.contains("synthetic")) c.synthetic = synthetic_from_json(doc.at("synthetic"));
    if (doc.contains("hyperparams")) {
      const json& h = doc.at("hyperparams");
      read_opt(h, "lambda", c.hyper.lambda);
      read_opt(h, "beta", c.hyper.beta);
      read_opt(h, "gamma", c.hyper.gamma);
      read_opt(h, "eta", c.hyper.eta);
      read_opt(h, "atoms", c.hyper.atoms);
      read_opt(h, "max_outer", c.hyper.max_outer);
      read_opt(h, "max_inner", c.hyper.max_inner);
      read_opt(h, "tol_outer", c.hyper.tol_outer);
      read_opt(h, "tol_inner", c.hyper.tol_inner);
      read_opt(h, "row_floor", c.hyper.row_floor);
    }
    if (doc.contains("preprocess")) {
      const json& p = doc.at("preprocess");
      read_opt(p, "zscore", c.preprocess.zscore);
      read_opt(p, "append_bias", c.preprocess.append_bias);
      if (p.contains("kpca")) {
        const json& k = p.at("kpca");
        if (k.is_null() || (k.is_boolean() && !k.get<bool>())) {
          c.preprocess.kpca.reset();
        } else if (k.contains("components")) {
          c.preprocess.kpca =
              preprocess::ComponentCount{k.at("components").get<Index>()};
        } else if (k.contains("energy")) {
          c.preprocess.kpca =
              preprocess::EnergyFraction{k.at("energy").get<double>()};
        } else {
          throw ConfigError("kpca needs \"energy\" or \"components\"");
        }
      }
    }
    if (doc.contains("init")) {
      const std::string init = doc.at("init").get<std::string>();
      if (init == "dirichlet") {
        c.init = adapt::MembershipInit::kDirichlet;
      } else if (init == "kmeans") {
        c.init = adapt::MembershipInit::kKMeans;
      } else {
        throw ConfigError("init must be \"dirichlet\" or \"kmeans\"");
      }
    }
    read_opt(doc, "runs", c.runs);
    read_opt(doc, "seed", c.seed);
    read_opt(doc, "baseline", c.baseline);
    if (doc.contains("output_dir")) {
      c.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
    }
    c.validate();
    return c;
  });
}

json config_to_json(const ExperimentConfig& c) {
  json doc;
  if (c.synthetic) {
    doc["synthetic"] = synthetic_to_json(*c.synthetic);
  } else {
    if (c.source) {
      json s = {{"path", c.source->path.string()},
                {"format", c.source->format == io::MatrixFormat::kCsv ? "csv"
                                                                       : "raw"},
                {"label_column", c.source->label_column}};
      if (c.source->labels) s["labels"] = c.source->labels->string();
      doc["source"] = s;
    }
    json targets = json::array();
    for (const auto& t : c.targets) {
      json tj = {{"path", t.path.string()},
                 {"format", t.format == io::MatrixFormat::kCsv ? "csv" : "raw"},
                 {"categories", t.categories},
                 {"label_column", t.label_column}};
      if (t.labels) tj["labels"] = t.labels->string();
      targets.push_back(tj);
    }
    doc["targets"] = targets;
  }
  doc["hyperparams"] = hyper_to_json(c.hyper);
  json kpca = nullptr;
  if (c.preprocess.kpca) {
    if (const auto* e =
            std::get_if<preprocess::EnergyFraction>(&*c.preprocess.kpca)) {
      kpca = {{"energy", e->fraction}};
    } else {
      kpca = {{"components",
               std::get<preprocess::ComponentCount>(*c.preprocess.kpca).k}};
    }
  }
  doc["preprocess"] = {{"zscore", c.preprocess.zscore},
                       {"kpca", kpca},
                       {"append_bias", c.preprocess.append_bias}};
  doc["init"] = c.init == adapt::MembershipInit::kDirichlet ? "dirichlet"
                                                             : "kmeans";
  doc["runs"] = c.runs;
  doc["seed"] = c.seed;
  doc["baseline"] = c.baseline;
  return doc;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

PreparedData prepare(const ExperimentConfig& config) {
  config.validate();
  PreparedData out;
  staged("load", [&] {
    if (config.synthetic) {
      synth::SyntheticData data = synth::generate_synthetic(*config.synthetic);
      out.source_x = std::move(data.source.x);
      out.source_labels = std::move(*data.source.labels);
      for (std::size_t j = 0; j < data.targets.size(); ++j) {
        out.categories.push_back(static_cast<Index>(
            config.synthetic->targets[j].categories.size()));
        out.targets.push_back(std::move(data.targets[j]));
        out.truth.emplace_back(std::move(data.target_truth[j]));
      }
      return;
    }
    const SourceFile& s = *config.source;
    io::Dataset src = io::load_matrix(s.path, s.format, s.label_column);
    out.source_x = std::move(src.x);
    out.source_labels =
        s.labels ? io::load_labels(*s.labels) : labels_or_throw(src, "source");
    if (static_cast<Index>(out.source_labels.size()) != out.source_x.cols()) {
      throw DataError("source has " + std::to_string(out.source_x.cols()) +
                      " samples but " + std::to_string(out.source_labels.size()) +
                      " labels");
    }
    for (std::size_t j = 0; j < config.targets.size(); ++j) {
      const TargetFile& t = config.targets[j];
      io::Dataset d = io::load_matrix(t.path, t.format, t.label_column);
      auto truth = load_truth(t, d);
      if (truth && static_cast<Index>(truth->size()) != d.x.cols()) {
        throw DataError("target " + std::to_string(j) +
                        " labels do not match its sample count");
      }
      out.targets.push_back(std::move(d.x));
      out.categories.push_back(t.categories);
      out.truth.push_back(std::move(truth));
    }
  });

  staged("preprocess", [&] {
    const Index dim = out.source_x.rows();
    for (std::size_t j = 0; j < out.targets.size(); ++j) {
      if (out.targets[j].rows() != dim) {
        throw DimensionError("target " + std::to_string(j) + " has " +
                             std::to_string(out.targets[j].rows()) +
                             " features, source has " + std::to_string(dim));
      }
    }
    if (config.preprocess.zscore) {
      out.source_x = preprocess::zscore(out.source_x).data;
      for (Matrix& t : out.targets) t = preprocess::zscore(t).data;
    }
    if (config.preprocess.kpca) {
      Index total = out.source_x.cols();
      for (const Matrix& t : out.targets) total += t.cols();
      Matrix pooled(dim, total);
      Index offset = 0;
      pooled.middleCols(offset, out.source_x.cols()) = out.source_x;
      offset += out.source_x.cols();
      for (const Matrix& t : out.targets) {
        pooled.middleCols(offset, t.cols()) = t;
        offset += t.cols();
      }
      const preprocess::KpcaModel model =
          preprocess::kpca_fit(pooled, *config.preprocess.kpca);
      out.source_x = preprocess::kpca_transform(model, out.source_x);
      for (Matrix& t : out.targets) t = preprocess::kpca_transform(model, t);
    }
    if (config.preprocess.append_bias) {
      out.source_x = with_bias(out.source_x);
      for (Matrix& t : out.targets) t = with_bias(t);
    }
  });
  out.feature_dim = out.source_x.rows();
  return out;
}

std::uint64_t run_seed(std::uint64_t base, int run) {
  return base + static_cast<std::uint64_t>(run);
}

std::uint64_t target_seed(std::uint64_t seed, std::size_t target) {
  // splitmix64 finalizer over (seed, target)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (target + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ExperimentResult execute(const ExperimentConfig& config,
                         const PreparedData& data) {
  config.validate();
  const slmc::SourceModel source = staged("train-source", [&] {
    return slmc::train_source_model(data.source_x, data.source_labels,
                                    config.hyper.lambda);
  });

  ExperimentResult result;
  result.feature_dim = data.feature_dim;
  result.runs.resize(config.runs);
  std::vector<std::exception_ptr> errors(config.runs);

#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < config.runs; ++r) {
    try {
      RunResult& out = result.runs[r];
      out.run = r;
      out.seed = run_seed(config.seed, r);

      // The solver sees unlabeled samples only; ground truth stays in `data`.
      std::vector<adapt::TargetDomain> domains(data.targets.size());
      for (std::size_t j = 0; j < domains.size(); ++j) {
        domains[j].x = data.targets[j];
        domains[j].categories = data.categories[j];
        domains[j].seed = target_seed(out.seed, j);
      }
      adapt::Hyperparams h = config.hyper;
      h.seed = out.seed;

      const adapt::FitReport report = staged(
          "fit", [&] { return adapt::fit(source, domains, h, config.init); });
      out.trace = report.trace;
      out.iterations = report.iterations;
      out.converged = report.converged;
      out.assignments = report.assignments;

      if (config.baseline) {
        staged("baseline", [&] {
          for (const adapt::TargetDomain& d : domains) {
            const Matrix u0 = adapt::initial_memberships(d, config.init);
            const slmc::SlmcResult base = slmc::slmc_fit(
                d.x, d.categories, u0,
                {config.hyper.lambda, config.hyper.max_outer,
                 config.hyper.tol_outer});
            const auto labels = slmc::hard_assign(base.u);
            out.baseline.push_back({});
            const auto& truth = data.truth[out.baseline.size() - 1];
            if (truth) {
              out.baseline.back() = {metrics::nmi(labels, *truth),
                                     metrics::rand_index(labels, *truth)};
            }
          }
        });
      }
      staged("score", [&] {
        for (std::size_t j = 0; j < domains.size(); ++j) {
          TargetScore score;
          if (data.truth[j]) {
            score.nmi = metrics::nmi(out.assignments[j], *data.truth[j]);
            score.ri = metrics::rand_index(out.assignments[j], *data.truth[j]);
          }
          out.adapted.push_back(score);
        }
      });
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

json summarize(const ExperimentConfig& config, const ExperimentResult& result) {
  json runs = json::array();
  for (const RunResult& r : result.runs) {
    json target_seeds = json::array();
    for (std::size_t j = 0; j < r.assignments.size(); ++j) {
      target_seeds.push_back(target_seed(r.seed, j));
    }
    runs.push_back({{"run", r.run},
                    {"seed", r.seed},
                    {"target_seeds", target_seeds},
                    {"iterations", r.iterations},
                    {"converged", r.converged},
                    {"final_objective",
                     r.trace.empty() ? json(nullptr) : json(r.trace.back())}});
  }
  const std::size_t targets =
      result.runs.empty() ? 0 : result.runs.front().assignments.size();
  json per_target = json::array();
  for (std::size_t j = 0; j < targets; ++j) {
    per_target.push_back({{"index", j},
                          {kMethodAdapted, method_summary(result, j, false)},
                          {kMethodBaseline, method_summary(result, j, true)}});
  }
  return {{"config", config_to_json(config)},
          {"feature_dim", result.feature_dim},
          {"runs", runs},
          {"targets", per_target}};
}

void write_results(const ExperimentConfig& config,
                   const ExperimentResult& result,
                   const std::filesystem::path& dir) {
  staged("write", [&] {
    OutputGuard guard;
    const std::size_t targets =
        result.runs.empty() ? 0 : result.runs.front().assignments.size();
    const auto results = dir / "results.csv";
    const auto summary = dir / "summary.json";
    const auto traces = dir / "traces.csv";
    guard.add(results);
    io::write_atomic(results, results_csv(result, targets));
    guard.add(summary);
    io::write_atomic(summary, summarize(config, result).dump(2) + "\n");
    guard.add(traces);
    io::write_atomic(traces, traces_csv(result));
    guard.release();
  });
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const PreparedData data = prepare(config);
  ExperimentResult result = execute(config, data);
  write_results(config, result, config.output_dir);
  return result;
}

GridResult run_grid(const ExperimentConfig& config, const Grid& grid) {
  const auto axis = [](const std::vector<double>& values, double fallback) {
    return values.empty() ? std::vector<double>{fallback} : values;
  };
  const auto betas = axis(grid.beta, config.hyper.beta);
  const auto gammas = axis(grid.gamma, config.hyper.gamma);
  const auto etas = axis(grid.eta, config.hyper.eta);
  const auto atoms = grid.atoms.empty()
                         ? std::vector<Index>{config.hyper.atoms}
                         : grid.atoms;

  const PreparedData data = prepare(config);
  GridResult out;
  OutputGuard guard;
  std::string long_csv = "cell,beta,gamma,eta,atoms,target,run,seed,nmi,ri\n";
  for (const double beta : betas) {
    for (const double gamma : gammas) {
      for (const double eta : etas) {
        for (const Index r : atoms) {
          ExperimentConfig cell_config = config;
          cell_config.hyper.beta = beta;
          cell_config.hyper.gamma = gamma;
          cell_config.hyper.eta = eta;
          cell_config.hyper.atoms = r;
          const std::size_t index = out.cells.size();
          char name[32];
          std::snprintf(name, sizeof(name), "cell_%04zu", index);
          cell_config.output_dir = config.output_dir / name;

          const ExperimentResult result = execute(cell_config, data);
          for (const char* f : {"results.csv", "summary.json", "traces.csv"}) {
            guard.add(cell_config.output_dir / f);
          }
          write_results(cell_config, result, cell_config.output_dir);

          for (const RunResult& run : result.runs) {
            for (std::size_t j = 0; j < run.adapted.size(); ++j) {
              long_csv += std::to_string(index) + "," + num(beta) + "," +
                          num(gamma) + "," + num(eta) + "," +
                          std::to_string(r) + "," + std::to_string(j) + "," +
                          std::to_string(run.run) + "," +
                          std::to_string(run.seed) + "," +
                          opt_num(run.adapted[j].nmi) + "," +
                          opt_num(run.adapted[j].ri) + "\n";
            }
          }
          out.cells.push_back(
              {cell_config.hyper, cell_mean_nmi(result), cell_config.output_dir});
        }
      }
    }
  }
  for (std::size_t i = 1; i < out.cells.size(); ++i) {
    if (out.cells[i].mean_nmi > out.cells[out.best].mean_nmi) out.best = i;
  }

  json cells = json::array();
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    const GridCell& c = out.cells[i];
    cells.push_back({{"cell", i},
                     {"beta", c.hyper.beta},
                     {"gamma", c.hyper.gamma},
                     {"eta", c.hyper.eta},
                     {"atoms", c.hyper.atoms},
                     {"mean_nmi", c.mean_nmi}});
  }
  const json summary = {{"config", config_to_json(config)},
                        {"cells", cells},
                        {"best", cells.at(out.best)}};
  staged("write", [&] {
    guard.add(config.output_dir / "grid.csv");
    io::write_atomic(config.output_dir / "grid.csv", long_csv);
    guard.add(config.output_dir / "grid_summary.json");
    io::write_atomic(config.output_dir / "grid_summary.json",
                     summary.dump(2) + "\n");
  });
  guard.release();
  return out;
}

}  // namespace pa1smt::experiment
