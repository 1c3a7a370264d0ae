#include "support.hpp"

#include "pa1smt/error.hpp"
#include "pa1smt/experiment.hpp"
#include "pa1smt/metrics.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace pa1smt;
using nlohmann::json;
using testing::TempDir;

namespace {

json small_config() {
  return json::parse(R"({
    "synthetic": {
      "dim": 6, "source_categories": 4, "separation": 8,
      "source_samples_per_category": 20, "target_samples_per_category": 15,
      "seed": 3,
      "targets": [
        {"categories": [0, 1, 2], "angle": 0.3, "translation": 1.0, "noise": 0.2},
        {"categories": [1, 2, 3], "rotation": "random", "translation": 0.5}
      ]
    },
    "hyperparams": {"atoms": 4, "max_outer": 30},
    "preprocess": {"zscore": false, "kpca": null},
    "runs": 2,
    "seed": 11
  })");
}

experiment::ExperimentConfig config_in(const json& doc,
                                       const std::filesystem::path& out) {
  auto c = experiment::config_from_json(doc);
  c.output_dir = out;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t line_count(const std::filesystem::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config: json round trip") {
  const auto c = experiment::config_from_json(small_config());
  CHECK(c.runs == 2);
  CHECK(c.hyper.atoms == 4);
  CHECK(c.hyper.beta == 50.0);
  CHECK(!c.preprocess.kpca);
  REQUIRE(c.synthetic);
  CHECK(c.synthetic->targets[1].shift.rotation == synth::RotationKind::kRandomOrthogonal);
  const json once = experiment::config_to_json(c);
  CHECK(experiment::config_to_json(experiment::config_from_json(once)) == once);

  json files = json::parse(R"({
    "source": {"path": "data/s.csv"},
    "targets": [{"path": "t.bin", "categories": 3, "labels": "t.txt"}],
    "preprocess": {"kpca": {"components": 5}}, "init": "kmeans"
  })");
  const auto f = experiment::config_from_json(files, "/base");
  CHECK(f.source->path == std::filesystem::path("/base/data/s.csv"));
  CHECK(f.source->label_column);
  CHECK(f.targets[0].format == io::MatrixFormat::kRaw);
  CHECK(*f.targets[0].labels == std::filesystem::path("/base/t.txt"));
  CHECK(f.init == adapt::MembershipInit::kKMeans);
  const json again = experiment::config_to_json(f);
  CHECK(experiment::config_to_json(experiment::config_from_json(again)) == again);

  const auto preset = experiment::config_from_json(json::parse(R"({"synthetic": "default"})"));
  CHECK(preset.synthetic->dim == synth::default_transfer_spec(2).dim);
  CHECK(preset.synthetic->targets.size() == 2);
}

TEST_CASE("config: errors carry the config stage") {
  const auto bad = [](const char* patch) {
    json doc = small_config();
    doc.merge_patch(json::parse(patch));
    return doc;
  };
  CHECK_THROWS_AS(experiment::config_from_json(bad(R"({"runs": 0})")), ConfigError);
  CHECK_THROWS_AS(experiment::config_from_json(bad(R"({"init": "random"})")), ConfigError);
  CHECK_THROWS_AS(experiment::config_from_json(bad(R"({"hyperparams": {"eta": -1}})")), ConfigError);
  CHECK_THROWS_AS(experiment::config_from_json(bad(R"({"preprocess": {"kpca": {"energy": 1.5}}})")), ConfigError);
  CHECK_THROWS_AS(experiment::config_from_json(bad(R"({"preprocess": {"kpca": {}}})")), ConfigError);
  CHECK_THROWS_AS(experiment::config_from_json(bad(R"({"synthetic": "other"})")), ConfigError);
  CHECK_THROWS_AS(experiment::config_from_json(json::parse(R"({"runs": 1})")), ConfigError);
  CHECK_THROWS_AS(experiment::config_from_json(json::parse(
                      R"({"source": {"path": "s.csv"}, "targets": [{"path": "t.csv", "categories": 1}]})")),
                  ConfigError);
  CHECK(message_of([&] { experiment::config_from_json(bad(R"({"runs": 0})")); })
            .rfind("[config]", 0) == 0);

  TempDir dir("exp");
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(experiment::load_config(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(experiment::load_config(dir / "absent.json"), ConfigError);
}

TEST_CASE("experiment: zero transfer weights score like plain SLMC") {
  TempDir dir("exp");
  json doc = small_config();
  doc["runs"] = 1;
  doc["hyperparams"]["beta"] = 0;
  doc["hyperparams"]["gamma"] = 0;
  doc["hyperparams"]["eta"] = 0;
  const auto c = config_in(doc, dir.path());
  const auto data = experiment::prepare(c);
  const auto result = experiment::execute(c, data);
  const std::uint64_t seed = experiment::run_seed(c.seed, 0);
  CHECK(seed == c.seed);
  for (std::size_t j = 0; j < data.targets.size(); ++j) {
    const Matrix u0 = slmc::dirichlet_memberships(
        data.categories[j], data.targets[j].cols(), experiment::target_seed(seed, j));
    const auto direct = slmc::slmc_fit(data.targets[j], data.categories[j], u0,
                                       {c.hyper.lambda, c.hyper.max_outer, c.hyper.tol_outer});
    const double nmi = metrics::nmi(slmc::hard_assign(direct.u), *data.truth[j]);
    CHECK(*result.runs[0].adapted[j].nmi == doctest::Approx(nmi).epsilon(1e-12));
    CHECK(*result.runs[0].baseline[j].nmi == doctest::Approx(nmi).epsilon(1e-12));
  }
}

TEST_CASE("experiment: files and determinism") {
  TempDir dir("exp");
  const auto a = config_in(small_config(), dir / "a");
  const auto b = config_in(small_config(), dir / "b");
  experiment::run_experiment(a);
  experiment::run_experiment(b);
  for (const char* f : {"summary.json", "results.csv", "traces.csv"}) {
    REQUIRE(std::filesystem::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  const json summary = json::parse(slurp(dir / "a" / "summary.json"));
  CHECK(summary.at("runs").size() == 2);
  CHECK(summary.at("runs")[1].at("seed") == 12);
  CHECK(summary.at("targets").size() == 2);
  CHECK(summary.at("config") == experiment::config_to_json(a));
  CHECK(!summary.at("config").contains("output_dir"));

  const std::string results = slurp(dir / "a" / "results.csv");
  CHECK(results.rfind("method,target,run,seed,nmi,ri\n", 0) == 0);
  // 2 methods x 2 targets x (2 runs + mean + std).
  CHECK(line_count(dir / "a" / "results.csv") == 1 + 2 * 2 * 4);
  std::size_t iterations = 0;
  for (const auto& r : summary.at("runs")) iterations += r.at("iterations").get<std::size_t>();
  CHECK(line_count(dir / "a" / "traces.csv") == 1 + iterations);
}

TEST_CASE("experiment: csv inputs with separate label files") {
  TempDir dir("exp");
  const auto data = synth::generate_synthetic(
      experiment::config_from_json(small_config()).synthetic.value());
  io::save_csv(dir / "source.csv", data.source.x, &*data.source.labels);
  for (std::size_t j = 0; j < data.targets.size(); ++j) {
    io::save_raw(dir / ("t" + std::to_string(j) + ".bin"), data.targets[j]);
    io::save_labels(dir / ("t" + std::to_string(j) + ".txt"), data.target_truth[j]);
  }
  json doc = small_config();
  doc.erase("synthetic");
  doc["source"] = {{"path", "source.csv"}};
  doc["targets"] = json::array({{{"path", "t0.bin"}, {"categories", 3}, {"labels", "t0.txt"}},
                                {{"path", "t1.bin"}, {"categories", 3}, {"labels", "t1.txt"}}});
  auto c = experiment::config_from_json(doc, dir.path());
  c.output_dir = dir / "files";
  const auto r1 = experiment::run_experiment(c);
  const auto r2 = experiment::execute(config_in(small_config(), dir / "x"),
                                      experiment::prepare(config_in(small_config(), dir / "x")));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(r1.runs[0].assignments[j] == r2.runs[0].assignments[j]);
  }

  c.targets[1].labels = dir / "missing.txt";
  CHECK(message_of([&] { experiment::run_experiment(c); }).rfind("[load]", 0) == 0);
  CHECK_THROWS_AS(experiment::run_experiment(c), DataError);
}

TEST_CASE("experiment: failed writes leave no partial outputs") {
  TempDir dir("exp");
  const auto c = config_in(small_config(), dir / "out");
  // A non-empty directory named like an output file makes its rename fail.
  std::filesystem::create_directories(dir / "out" / "traces.csv" / "blocker");
  CHECK_THROWS(experiment::run_experiment(c));
  CHECK(message_of([&] { experiment::run_experiment(c); }).rfind("[write]", 0) == 0);
  CHECK(!std::filesystem::exists(dir / "out" / "results.csv"));
  CHECK(!std::filesystem::exists(dir / "out" / "summary.json"));
}

TEST_CASE("grid: bookkeeping and consistency with single runs") {
  TempDir dir("exp");
  auto c = config_in(small_config(), dir / "single");
  experiment::run_experiment(c);

  auto g = config_in(small_config(), dir / "grid1");
  const auto one = experiment::run_grid(g, {});
  REQUIRE(one.cells.size() == 1);
  for (const char* f : {"summary.json", "results.csv", "traces.csv"}) {
    CHECK(slurp(dir / "single" / f) == slurp(one.cells[0].dir / f));
  }
  const std::size_t rows_one = line_count(dir / "grid1" / "grid.csv") - 1;
  CHECK(rows_one == 2 * 2);

  g.output_dir = dir / "grid2";
  experiment::Grid atoms;
  atoms.atoms = {2, 10};
  const auto two = experiment::run_grid(g, atoms);
  CHECK(two.cells.size() == 2);
  CHECK(line_count(dir / "grid2" / "grid.csv") - 1 == 2 * rows_one);
  const json s0 = json::parse(slurp(two.cells[0].dir / "summary.json"));
  const json s1 = json::parse(slurp(two.cells[1].dir / "summary.json"));
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(s0.at("runs")[r].at("target_seeds") == s1.at("runs")[r].at("target_seeds"));
  }

  g.output_dir = dir / "grid3";
  experiment::Grid sweep;
  sweep.beta = {1.0, 50.0};
  sweep.eta = {0.01, 0.1};
  const auto best = experiment::run_grid(g, sweep);
  CHECK(best.cells.size() == 4);
  const json gs = json::parse(slurp(dir / "grid3" / "grid_summary.json"));
  CHECK(gs.at("best").at("cell") == best.best);
  auto rerun = config_in(small_config(), dir / "rerun");
  rerun.hyper = best.cells[best.best].hyper;
  const auto again = experiment::run_experiment(rerun);
  double total = 0.0;
  int count = 0;
  for (const auto& r : again.runs) {
    for (const auto& s : r.adapted) {
      total += *s.nmi;
      ++count;
    }
  }
  CHECK(total / count == doctest::Approx(best.cells[best.best].mean_nmi).epsilon(1e-15));
  for (const auto& cell : best.cells) CHECK(cell.mean_nmi <= best.cells[best.best].mean_nmi);
}
