#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "commands.hpp"
#include "cqr/analysis.hpp"
#include "cqr/conformal.hpp"
#include "cqr/dataio.hpp"
#include "run_config.hpp"

using namespace cqr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("cqr_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::vector<std::vector<std::string>> csv_rows(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    rows.push_back(f);
  }
  return rows;
}

}  // namespace

TEST_CASE("config defaults and overrides") {
  const auto d = cli::parse_config("");
  CHECK(d.sweep.n_grid.size() == 8);
  CHECK(d.sweep.alpha_grid.size() == 9);
  CHECK(d.sweep.m_grid == std::vector<std::size_t>{5000});
  const auto c = cli::parse_config(
      "[synthetic]\ntheta0 = 1.2, 1.8\ncount = 50\n"
      "[sweep]\nmethod = cmr\nn_grid = 100,200\nalpha_grid = 0.1\ntrials = 2\nseed = 9\n"
      "[sgd]\nrate = 0.3\nschedule = inverse_time\nbatch_size = 8\nprojection_radius = 4\ntune = false\n"
      "tune_points = 5\n"
      "[output]\ndir = somewhere\n");
  CHECK(c.synthetic.theta0 == Vector{1.2, 1.8});
  CHECK(c.synth_count == 50);
  CHECK(c.sweep.method == Method::cmr);
  CHECK(c.sweep.n_grid == std::vector<std::size_t>{100, 200});
  CHECK(c.sweep.master_seed == 9);
  CHECK(std::holds_alternative<InverseTimeSchedule>(c.sweep.training.sgd.schedule));
  CHECK(schedule_rate(c.sweep.training.sgd.schedule) == 0.3);
  CHECK(c.sweep.training.sgd.batch_size == 8);
  CHECK(*c.sweep.training.sgd.projection_radius == 4.0);
  CHECK_FALSE(c.sweep.training.tune);
  CHECK(c.sweep.training.tune_grid.size() == 5);
  CHECK(c.out_dir == "somewhere");
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(cli::parse_config("[sweep]\ntrails = 3\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[swep]\ntrials = 3\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[sweep]\ntrials = three\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[sweep]\ntrials = 0\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[sgd]\nrate = -1\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[sweep]\nmethod = ols\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[synthetic]\nlayout = ring\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[sweep]\ntrials = 2\ntrials = 3\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config("stray = 1\n"), cli::ConfigError);
}

TEST_CASE("train, calibrate, predict reproduce the in-process pipeline") {
  TempDir dir;
  REQUIRE(invoke({"--out", dir.path.string(), "--seed", "4", "synth", "--count", "400"}).code == 0);
  const std::string data = dir / "data.csv";
  REQUIRE(invoke({"--out", dir.path.string(), "--seed", "4", "train", "--data", data, "--gamma", "0.05", "--name", "lo.json"}).code == 0);
  REQUIRE(invoke({"--out", dir.path.string(), "--seed", "4", "train", "--data", data, "--gamma", "0.95", "--name", "hi.json"}).code == 0);
  REQUIRE(invoke({"--out", dir.path.string(), "calibrate", "--data", data, "--alpha", "0.1", "--lower", dir / "lo.json",
               "--upper", dir / "hi.json"}).code == 0);
  REQUIRE(invoke({"--out", dir.path.string(), "predict", "--data", data, "--lower", dir / "lo.json", "--upper",
               dir / "hi.json", "--calibration", dir / "calibration.json"}).code == 0);

  const auto table = load_csv(data, TabularSchema::from_header(read_csv_header(data), "y"));
  const TrainingOptions opts;
  const auto lo = train_quantile(table.data, 0.05, opts, 4);
  const auto hi = train_quantile(table.data, 0.95, opts, 4);
  const auto model = nlohmann::json::parse(slurp(dir / "lo.json"));
  CHECK(model["theta"].get<Vector>() == lo.theta);
  CHECK(model["gamma"].get<double>() == 0.05);
  CHECK(model.contains("meta"));

  const CqrModelPair pair(lo.theta, hi.theta, 0.1);
  std::vector<double> scores;
  for (std::size_t i = 0; i < table.data.size(); ++i) scores.push_back(cqr_score(pair, table.data.x(i), table.data.y(i)));
  const double q = calibrate(scores, 0.1).q_hat;
  const auto cal = nlohmann::json::parse(slurp(dir / "calibration.json"));
  CHECK(cal["q_hat"].get<double>() == q);
  CHECK(cal["m"].get<std::size_t>() == 400);
  CHECK(cal["alpha"].get<double>() == 0.1);

  const auto rows = csv_rows(dir / "predictions.csv");
  REQUIRE(rows.size() == 401);
  CHECK(rows[0] == std::vector<std::string>{"row", "lo", "hi", "empty", "y", "covered"});
  for (std::size_t i = 0; i < table.data.size(); ++i) {
    const auto iv = cqr_interval(pair, q, table.data.x(i));
    REQUIRE_FALSE(iv.empty());
    CHECK(std::stod(rows[i + 1][1]) == iv.lo());
    CHECK(std::stod(rows[i + 1][2]) == iv.hi());
  }
}

TEST_CASE("predict writes an explicit empty interval for crossed quantiles") {
  TempDir dir;
  write(dir / "lo.json", R"({"gamma": 0.05, "theta": [2.0, 0.0], "meta": {}})");
  write(dir / "hi.json", R"({"gamma": 0.95, "theta": [1.0, 0.0], "meta": {}})");
  write(dir / "cal.json", R"({"alpha": 0.1, "m": 100, "q_hat": 0.1})");
  write(dir / "x.csv", "x1,x2\n3,1\n0,0\n");
  const auto r = invoke({"--out", dir.path.string(), "predict", "--data", dir / "x.csv", "--lower", dir / "lo.json",
                      "--upper", dir / "hi.json", "--calibration", dir / "cal.json"});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(dir / "predictions.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"row", "lo", "hi", "empty"});
  CHECK(rows[1] == std::vector<std::string>{"0", "", "", "1"});
  CHECK(rows[2][3] == "0");  // t_lo = t_hi = 0 at the origin
}

TEST_CASE("cmr median pipeline") {
  TempDir dir;
  write(dir / "med.json", R"({"gamma": 0.5, "theta": [1.0], "meta": {}})");
  write(dir / "cal.csv", "x,y\n1,1.5\n2,1\n3,3\n4,4.25\n");
  REQUIRE(invoke({"--out", dir.path.string(), "calibrate", "--data", dir / "cal.csv", "--alpha", "0.2", "--median",
               dir / "med.json"}).code == 0);
  const auto cal = nlohmann::json::parse(slurp(dir / "calibration.json"));
  CHECK(cal["q_hat"].get<double>() == 1.0);  // scores .5 1 0 .25, k = 4
  CHECK(cal["method"] == "CMR");
}

TEST_CASE("tiny sweep, determinism and fit") {
  TempDir dir;
  write(dir / "run.ini", "[sweep]\nn_grid = 200\nm_grid = 200\nalpha_grid = 0.2\ntrials = 1\n");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = invoke({"--config", dir / "run.ini", "--out", dir.path.string(), "sweep"});
  REQUIRE(r.code == 0);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(10));
  const auto rows = csv_rows(dir / "records.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"method", "n", "m", "alpha", "trial", "delta", "coverage",
                                             "mean_length", "q_hat", "regime", "seed"});

  write(dir / "multi.ini", "[sweep]\nn_grid = 200,300\nm_grid = 200\nalpha_grid = 0.1,0.2\ntrials = 2\n");
  REQUIRE(invoke({"--config", dir / "multi.ini", "--out", dir.path.string(), "--workers", "1", "sweep", "--name", "a.csv"}).code == 0);
  REQUIRE(invoke({"--config", dir / "multi.ini", "--out", dir.path.string(), "--workers", "3", "sweep", "--name", "b.csv"}).code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  const auto recs = cli::read_records(dir / "a.csv");
  CHECK(recs.size() == 8);
}

TEST_CASE("fit recovers an exact inverse law") {
  TempDir dir;
  std::vector<ExperimentRecord> recs;
  for (std::size_t n : {100, 1000, 10000}) {
    ExperimentRecord r;
    r.n = n;
    r.m = 50;
    r.alpha = 0.1;
    r.delta = 1.0 / static_cast<double>(n);
    recs.push_back(r);
  }
  cli::write_records(dir / "r.csv", recs);
  REQUIRE(invoke({"--out", dir.path.string(), "fit", "--records", dir / "r.csv"}).code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "fit.json"));
  REQUIRE(j["slope_vs_n"].size() == 1);
  CHECK(j["slope_vs_n"][0]["slope"].get<double>() == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("bounds command") {
  TempDir dir;
  REQUIRE(invoke({"--out", dir.path.string(), "bounds", "--alpha", "0.1", "--n", "2000", "--m", "2000"}).code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "bounds.json"));
  CHECK(j["cqr_bound"].get<double>() > 0);
  CHECK(j["allocation"]["train"].get<std::size_t>() + j["allocation"]["calibration"].get<std::size_t>() == 4000);
}

TEST_CASE("exit codes") {
  TempDir dir;
  write(dir / "bad.ini", "[sweep]\nunknown = 1\n");
  CHECK(invoke({"--config", dir / "bad.ini", "sweep"}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"--out", dir.path.string(), "train", "--data", dir / "missing.csv", "--gamma", "0.5"}).code == 2);
  write(dir / "broken.csv", "x1,y\n1,2\nabc,3\n");
  const auto r = invoke({"--out", dir.path.string(), "train", "--data", dir / "broken.csv", "--gamma", "0.5"});
  CHECK(r.code == 3);
  CHECK(r.err.find("line 3") != std::string::npos);
  CHECK(invoke({"--out", dir.path.string(), "train", "--data", dir / "broken.csv", "--gamma", "1.5"}).code == 2);
  write(dir / "lo.json", R"({"gamma": 0.025, "theta": [0.0], "meta": {}})");
  write(dir / "hi.json", R"({"gamma": 0.975, "theta": [1.0], "meta": {}})");
  write(dir / "small.csv", "x1,y\n1,2\n2,3\n3,1\n");
  CHECK(invoke({"--out", dir.path.string(), "calibrate", "--data", dir / "small.csv", "--alpha", "0.05", "--lower",
             dir / "lo.json", "--upper", dir / "hi.json"}).code == 4);
  write(dir / "notjson.json", "{");
  CHECK(invoke({"--out", dir.path.string(), "calibrate", "--data", dir / "small.csv", "--alpha", "0.05", "--lower",
             dir / "notjson.json", "--upper", dir / "hi.json"}).code == 3);
}
