#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "mpmrf/io.hpp"
#include "test_util.hpp"

using namespace mpmrf;
namespace fs = std::filesystem;

namespace {

class Workspace {
 public:
  Workspace() {
    root_ = fs::temp_directory_path() /
            ("mpmrf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() { fs::remove_all(root_); }
  const fs::path& root() const { return root_; }

  fs::path config(const std::string& name, nlohmann::json j) const {
    const fs::path p = root_ / (name + ".json");
    std::ofstream(p) << j.dump(2);
    return p;
  }

 private:
  fs::path root_;
};

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mpmrf");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

int invoke(const std::string& sub, const fs::path& config, const fs::path& out,
           std::vector<std::string> extra = {}) {
  std::vector<std::string> args{sub, "--config", config.string(), "--out", out.string()};
  args.insert(args.end(), extra.begin(), extra.end());
  return invoke(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

nlohmann::json rainfall_config() {
  return {{"params", data_path("rainfall_params.json")},
          {"tree", data_path("rainfall_tree.csv")},
          {"severities", data_path("rainfall_severities.json")},
          {"h", 0.1},
          {"n_fft", 131072},
          {"kappas", {0.8, 0.9, 0.95, 0.99}}};
}

nlohmann::json small_config() {
  return {{"params", {{"lambda", {1.0, 1.5, 0.8}},
                      {"alpha", {{{"u", 1}, {"v", 2}, {"value", 0.5}}, {{"u", 2}, {"v", 3}, {"value", 0.6}}}}}},
          {"tree", {{1, 2}, {2, 3}}},
          {"severities", {{"type", "discrete"}, {"points", {1, 2, 3}}, {"masses", {0.5, 0.3, 0.2}}}},
          {"kappas", {0.0, 0.9, 0.99}},
          {"conditional_means", true}};
}

nlohmann::json decluster_config() {
  return {{"daily", data_path("daily_fixture.csv")},
          {"thresholds", {{"A", 25.0}, {"B", 25.0}, {"C", 27.0}}}};
}

}  // namespace

TEST(Cli, DeclusterOutputsAndDeterminism) {
  const Workspace ws;
  const auto cfg = ws.config("d", decluster_config());
  ASSERT_EQ(invoke("decluster", cfg, ws.root() / "a"), 0);
  ASSERT_EQ(invoke("decluster", cfg, ws.root() / "b"), 0);
  const auto a = snapshot(ws.root() / "a");
  EXPECT_EQ(a, snapshot(ws.root() / "b"));
  for (const char* f : {"counts.csv", "counts_wide.csv", "events.csv", "cluster_sizes.csv", "gof.csv",
                        "decluster_summary.json"}) {
    EXPECT_TRUE(a.count(f)) << f;
  }
  const auto summary = nlohmann::json::parse(a.at("decluster_summary.json"));
  EXPECT_EQ(summary.at("dropped_years"), nlohmann::json::array({1990}));
  EXPECT_EQ(summary.at("metadata").at("seed"), 1);
  EXPECT_EQ(a.at("counts.csv").rfind("# config_hash=", 0), 0u);
}

TEST(Cli, DeclusterThresholdAboveEverything) {
  const Workspace ws;
  auto j = decluster_config();
  j["thresholds"] = {{"A", 1e6}, {"B", 1e6}, {"C", 1e6}};
  ASSERT_EQ(invoke("decluster", ws.config("d", j), ws.root() / "o"), 0);
  std::istringstream events(slurp(ws.root() / "o" / "events.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(events, line)) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  EXPECT_EQ(rows, 1);
  const auto counts = read_counts_csv(ws.root() / "o" / "counts_wide.csv");
  for (const auto& row : counts.counts) {
    for (int c : row) EXPECT_EQ(c, 0);
  }
}

TEST(Cli, FitFromDailyWithSpanningTree) {
  const Workspace ws;
  auto j = decluster_config();
  j["tree"] = "mst";
  j["bootstrap_replicates"] = 20;
  j["seed"] = 11;
  const auto cfg = ws.config("f", j);
  ASSERT_EQ(invoke("fit", cfg, ws.root() / "a"), 0);
  ASSERT_EQ(invoke("fit", cfg, ws.root() / "b"), 0);
  EXPECT_EQ(snapshot(ws.root() / "a"), snapshot(ws.root() / "b"));
  const auto fit = nlohmann::json::parse(std::ifstream(ws.root() / "a" / "fit.json"));
  EXPECT_TRUE(fit.at("converged").get<bool>());
  EXPECT_EQ(fit.at("n_params"), 5);
  EXPECT_EQ(fit.at("bootstrap").at("replicates"), 20);
  const auto params = params_from_json(fit.at("params"));
  const auto means = fit.at("empirical_means").get<std::vector<double>>();
  for (int v = 0; v < 3; ++v) EXPECT_NEAR(params.lambda[v], means[v], 1e-4 * means[v]);
  EXPECT_EQ(read_tree_csv(ws.root() / "a" / "tree.csv", 3).edges().size(), 2u);
  EXPECT_TRUE(fs::exists(ws.root() / "a" / "correlation_model.csv"));
}

TEST(Cli, FitRejectsParameterFile) {
  const Workspace ws;
  EXPECT_EQ(invoke("fit", ws.config("f", rainfall_config()), ws.root() / "o"), 2);
}

TEST(Cli, AggregateRainfall) {
  const Workspace ws;
  const auto cfg = ws.config("a", rainfall_config());
  ASSERT_EQ(invoke("aggregate", cfg, ws.root() / "o"), 0);
  const auto s = nlohmann::json::parse(std::ifstream(ws.root() / "o" / "aggregate_summary.json"));
  EXPECT_NEAR(s.at("mean_fft").get<double>(), 3459.0, 35.0);
  EXPECT_NEAR(s.at("variance_fft").get<double>(), s.at("variance_closed_form").get<double>(),
              1e-5 * s.at("variance_closed_form").get<double>());
  const std::string rm = slurp(ws.root() / "o" / "risk_measures.csv");
  EXPECT_NE(rm.find("kappa,var,tvar"), std::string::npos);
  EXPECT_NE(slurp(ws.root() / "o" / "aggregate_pmf.csv").find("x,pmf,cdf"), std::string::npos);
}

TEST(Cli, SeedOverrideIsRecorded) {
  const Workspace ws;
  const auto cfg = ws.config("a", small_config());
  ASSERT_EQ(invoke("aggregate", cfg, ws.root() / "o", {"--seed", "99"}), 0);
  const auto s = nlohmann::json::parse(std::ifstream(ws.root() / "o" / "aggregate_summary.json"));
  EXPECT_EQ(s.at("metadata").at("seed"), 99);
  EXPECT_EQ(s.at("metadata").at("version"), std::string(kVersion));
}

TEST(Cli, AllocateSmallModel) {
  const Workspace ws;
  const auto cfg = ws.config("a", small_config());
  ASSERT_EQ(invoke("allocate", cfg, ws.root() / "a"), 0);
  ASSERT_EQ(invoke("allocate", cfg, ws.root() / "b"), 0);
  EXPECT_EQ(snapshot(ws.root() / "a"), snapshot(ws.root() / "b"));
  const std::string alloc = slurp(ws.root() / "a" / "allocation.csv");
  EXPECT_NE(alloc.find("vertex,kappa,euler_tvar,cov_tvar,euler_share_pct,cov_share_pct"), std::string::npos);
  EXPECT_NE(slurp(ws.root() / "a" / "conditional_means.csv").find("k,x,Ev1,Ev2,Ev3"), std::string::npos);
}

TEST(Cli, SingleVertexModel) {
  const Workspace ws;
  nlohmann::json j{{"params", {{"lambda", {2.0}}, {"alpha", nlohmann::json::array()}}},
                   {"tree", nlohmann::json::array()},
                   {"severities", {{"type", "discrete"}, {"points", {1}}, {"masses", {1}}}},
                   {"kappas", {0.5}}};
  EXPECT_EQ(invoke("aggregate", ws.config("one", j), ws.root() / "o"), 0);
  EXPECT_EQ(invoke("allocate", ws.config("one", j), ws.root() / "p"), 0);
}

TEST(Cli, ConflictingSourcesAreConfigErrors) {
  const Workspace ws;
  auto j = rainfall_config();
  j["daily"] = data_path("daily_fixture.csv");
  EXPECT_EQ(invoke("aggregate", ws.config("both", j), ws.root() / "o"), 2);
  auto k = rainfall_config();
  k["n_fft"] = "huge";
  EXPECT_EQ(invoke("aggregate", ws.config("nfft", k), ws.root() / "o"), 2);
  auto m = rainfall_config();
  m.erase("tree");
  EXPECT_EQ(invoke("aggregate", ws.config("notree", m), ws.root() / "o"), 2);
  EXPECT_EQ(invoke({"aggregate", "--config", (ws.root() / "missing.json").string()}), 2);
  EXPECT_EQ(invoke({"frobnicate"}), 2);
  std::ofstream(ws.root() / "broken.json") << "{ not json";
  EXPECT_EQ(invoke("aggregate", ws.root() / "broken.json", ws.root() / "o"), 2);
}

TEST(Cli, UndersizedGridIsNumericalFailure) {
  const Workspace ws;
  auto j = rainfall_config();
  j["n_fft"] = 1024;
  EXPECT_EQ(invoke("aggregate", ws.config("small", j), ws.root() / "o"), 3);
  const std::string diag = slurp(ws.root() / "o" / "diagnostics.txt");
  EXPECT_NE(diag.find("error=TailMassTooLarge"), std::string::npos);
  EXPECT_NE(diag.find("try n_fft"), std::string::npos);
}

TEST(Cli, InvalidParametersAreNumericalFailure) {
  const Workspace ws;
  auto j = small_config();
  j["params"]["alpha"][0]["value"] = 0.95;
  EXPECT_EQ(invoke("aggregate", ws.config("bad", j), ws.root() / "o"), 3);
  EXPECT_NE(slurp(ws.root() / "o" / "diagnostics.txt").find("InvalidParams"), std::string::npos);
}

TEST(Cli, AsymptoticsRefusesSupercriticalSplash) {
  const Workspace ws;
  nlohmann::json j{{"splash", {{"lambda_r", 1.0}, {"alpha", 0.8}, {"chi", 3}, {"replications", 100}}}};
  EXPECT_EQ(invoke("asymptotics", ws.config("sc", j), ws.root() / "o"), 3);
  EXPECT_NE(slurp(ws.root() / "o" / "diagnostics.txt").find("error=SupercriticalRegime"), std::string::npos);
}

TEST(Cli, AsymptoticsOutputs) {
  const Workspace ws;
  nlohmann::json j{{"seed", 7},
                   {"splash", {{"lambda_r", 1.0}, {"alpha", 0.5}, {"chi", 3}, {"x_max", 20}, {"replications", 20000}}},
                   {"gp_limit", {{"lambda_r", 1.0}, {"theta", 0.5}, {"chi", 50}, {"replications", 20000}}},
                   {"lln", {{"severity", {{"type", "negbinom"}, {"r", 2}, {"p", 1.0 / 3.0}}},
                            {"binary_depths", {2, 3, 4}},
                            {"cdf", true}}}};
  const auto cfg = ws.config("asy", j);
  ASSERT_EQ(invoke("asymptotics", cfg, ws.root() / "a"), 0);
  ASSERT_EQ(invoke("asymptotics", cfg, ws.root() / "b"), 0);
  const auto a = snapshot(ws.root() / "a");
  EXPECT_EQ(a, snapshot(ws.root() / "b"));
  for (const char* f : {"splash_pmf.csv", "gp_limit.csv", "lln_binary.csv", "lln_star.csv"}) {
    EXPECT_TRUE(a.count(f)) << f;
  }
  ASSERT_EQ(invoke("asymptotics", cfg, ws.root() / "c", {"--seed", "8"}), 0);
  EXPECT_NE(slurp(ws.root() / "a" / "splash_pmf.csv"), slurp(ws.root() / "c" / "splash_pmf.csv"));
}
