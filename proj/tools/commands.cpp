#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cqr/bounds.hpp"
#include "cqr/conformal.hpp"
#include "cqr/dataio.hpp"
#include "cqr/errors.hpp"
#include "run_config.hpp"

namespace cqr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string out;
};

RunConfig resolve(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.seed) cfg.sweep.master_seed = *g.seed;
  if (!g.out.empty()) cfg.out_dir = g.out;
  cfg.validate();
  return cfg;
}

fs::path output_path(const RunConfig& cfg, const std::string& name) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + cfg.out_dir.string());
  return cfg.out_dir / name;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

LinearQuantileModel read_model(const fs::path& path) {
  const json j = read_json(path);
  try {
    LinearQuantileModel m{j.at("theta").get<Vector>(), j.at("gamma").get<double>()};
    if (m.theta.empty()) throw DataError(path.string() + ": empty theta");
    return m;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json model_json(const LinearQuantileModel& m, const json& meta) {
  return {{"gamma", m.gamma}, {"theta", m.theta}, {"meta", meta}};
}

// Features are every column except the label; a missing label column means
// an unlabeled table.
LoadedTable read_table(const fs::path& path, const std::string& label, bool require_label) {
  const auto header = read_csv_header(path);
  const bool has_label = std::find(header.begin(), header.end(), label) != header.end();
  if (require_label && !has_label) throw SchemaError(path.string() + ": missing column '" + label + "'");
  auto schema = TabularSchema::from_header(header, has_label ? label : "");
  return load_csv(path, schema);
}

void check_dim(const LinearQuantileModel& m, const Dataset& d, const std::string& what) {
  if (m.theta.size() != d.dim()) {
    throw DataError(what + " has dimension " + std::to_string(m.theta.size()) + " but the data has " +
                    std::to_string(d.dim()) + " features");
  }
}

bool same_level(double a, double b) { return std::abs(a - b) <= 1e-12; }

// ---- commands ----

int cmd_synth(const Globals& g, std::size_t count, std::ostream& out) {
  RunConfig cfg = resolve(g);
  if (count > 0) cfg.synth_count = count;
  const SyntheticSpec spec = cfg.resolved_spec();
  const Dataset data = sample(spec, cfg.synth_count, derive_seed(cfg.sweep.master_seed, {0x5e7}));
  const auto path = output_path(cfg, "data.csv");
  write_csv(path, data);
  write_json(output_path(cfg, "synthetic.json"),
             {{"theta0", spec.theta0},
              {"alpha0", spec.alpha0},
              {"x_low", spec.x_low},
              {"x_high", spec.x_high},
              {"layout", spec.layout == CovariateLayout::box ? "box" : "level_set"},
              {"count", cfg.synth_count},
              {"seed", cfg.sweep.master_seed}});
  out << "wrote " << data.size() << " rows to " << path.string() << '\n';
  return ok;
}

int cmd_train(const Globals& g, const std::string& data_path, double gamma, const std::string& name,
              std::ostream& out) {
  const RunConfig cfg = resolve(g);
  try {
    require_level(gamma);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const auto table = read_table(data_path, "y", true);
  double rate = 0.0;
  const auto model = train_quantile(table.data, gamma, cfg.sweep.training, cfg.sweep.master_seed, &rate);
  const auto& sgd = cfg.sweep.training.sgd;
  json meta{{"n", table.data.size()},
            {"features", table.feature_names},
            {"schedule", std::holds_alternative<ConstantSchedule>(sgd.schedule) ? "constant" : "inverse_time"},
            {"rate", rate},
            {"tuned", cfg.sweep.training.tune},
            {"batch_size", sgd.batch_size},
            {"epochs", sgd.epochs},
            {"seed", cfg.sweep.master_seed}};
  if (sgd.projection_radius) meta["projection_radius"] = *sgd.projection_radius;
  const auto path = output_path(cfg, name);
  write_json(path, model_json(model, meta));
  out << "wrote model (gamma " << gamma << ") to " << path.string() << '\n';
  return ok;
}

struct ModelArgs {
  std::string lower;
  std::string upper;
  std::string median;
};

// CQR needs lower and upper, CMR needs median.
Method method_of(const ModelArgs& m) {
  const bool cqr = !m.lower.empty() || !m.upper.empty();
  if (cqr && !m.median.empty()) throw ConfigError("give either --lower/--upper or --median, not both");
  if (cqr && (m.lower.empty() || m.upper.empty())) throw ConfigError("CQR needs both --lower and --upper");
  if (!cqr && m.median.empty()) throw ConfigError("give --lower and --upper (CQR) or --median (CMR)");
  return cqr ? Method::cqr : Method::cmr;
}

FittedModels load_models(const ModelArgs& args, double alpha, const Dataset& data) {
  FittedModels models;
  if (method_of(args) == Method::cqr) {
    auto lower = read_model(args.lower);
    auto upper = read_model(args.upper);
    check_dim(lower, data, args.lower);
    check_dim(upper, data, args.upper);
    if (!same_level(lower.gamma, alpha / 2) || !same_level(upper.gamma, 1 - alpha / 2)) {
      throw DataError("model levels (" + num(lower.gamma) + ", " + num(upper.gamma) +
                      ") do not match alpha/2 and 1-alpha/2 for alpha = " + num(alpha));
    }
    models.pair = CqrModelPair(std::move(lower.theta), std::move(upper.theta), alpha);
  } else {
    models.median = read_model(args.median);
    check_dim(models.median, data, args.median);
    if (!same_level(models.median.gamma, 0.5)) throw DataError("median model must have gamma 0.5");
  }
  return models;
}

int cmd_calibrate(const Globals& g, const std::string& data_path, const ModelArgs& margs,
                  double alpha, const std::string& name, std::ostream& out) {
  const RunConfig cfg = resolve(g);
  if (!(alpha > 0.0 && alpha <= 0.5)) throw ConfigError("--alpha must lie in (0, 0.5]");
  const Method method = method_of(margs);
  const auto table = read_table(data_path, "y", true);
  const Dataset& cal = table.data;
  const FittedModels models = load_models(margs, alpha, cal);
  std::vector<double> scores(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    scores[i] = method == Method::cqr ? cqr_score(models.pair, cal.x(i), cal.y(i))
                                      : cmr_score(models.median, cal.x(i), cal.y(i));
  }
  const CalibrationResult c = calibrate(scores, alpha);
  const auto path = output_path(cfg, name);
  write_json(path, {{"alpha", alpha}, {"m", c.m}, {"q_hat", c.q_hat},
                    {"method", std::string(method_name(method))}});
  out << "q_hat = " << num(c.q_hat) << " (k = " << c.k << " of m = " << c.m << ")\n";
  return ok;
}

int cmd_predict(const Globals& g, const std::string& data_path, const ModelArgs& margs,
                const std::string& calibration, const std::string& name, std::ostream& out) {
  const RunConfig cfg = resolve(g);
  const Method method = method_of(margs);
  const json cal = read_json(calibration);
  double alpha = 0.0;
  double q_hat = 0.0;
  try {
    alpha = cal.at("alpha").get<double>();
    q_hat = cal.at("q_hat").get<double>();
  } catch (const json::exception& e) {
    throw DataError(calibration + ": " + e.what());
  }
  if (cal.contains("method") && cal["method"].get<std::string>() != method_name(method)) {
    throw DataError(calibration + ": calibrated for " + cal["method"].get<std::string>() +
                    ", models given are " + std::string(method_name(method)));
  }
  const auto header = read_csv_header(data_path);
  const bool labeled = std::find(header.begin(), header.end(), "y") != header.end();
  const auto table = read_table(data_path, "y", false);
  const Dataset& data = table.data;
  const FittedModels models = load_models(margs, alpha, data);

  const auto path = output_path(cfg, name);
  std::ofstream csv(path);
  if (!csv) throw DataError("cannot write " + path.string());
  csv << "row,lo,hi,empty" << (labeled ? ",y,covered" : "") << '\n';
  std::size_t empties = 0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PredictionInterval iv = method == Method::cqr ? cqr_interval(models.pair, q_hat, data.x(i))
                                                        : cmr_interval(models.median, q_hat, data.x(i));
    csv << i << ',';
    if (iv.empty()) {
      csv << ",,1";
      ++empties;
    } else {
      csv << num(iv.lo()) << ',' << num(iv.hi()) << ",0";
    }
    if (labeled) {
      const bool in = iv.contains(data.y(i));
      covered += in;
      csv << ',' << num(data.y(i)) << ',' << (in ? 1 : 0);
    }
    csv << '\n';
  }
  out << "wrote " << data.size() << " intervals (" << empties << " empty) to " << path.string();
  if (labeled) out << "; coverage " << static_cast<double>(covered) / static_cast<double>(data.size());
  out << '\n';
  return ok;
}

int cmd_sweep(const Globals& g, const std::string& name, std::ostream& out) {
  const RunConfig cfg = resolve(g);
  const SyntheticSpec spec = cfg.resolved_spec();
  const auto records = run_sweep(cfg.sweep, spec, g.workers);
  const auto path = output_path(cfg, name);
  write_records(path, records);
  const auto skipped = std::count_if(records.begin(), records.end(), [](auto& r) { return r.skipped; });
  out << "wrote " << records.size() - skipped << " records to " << path.string();
  if (skipped > 0) out << " (" << skipped << " infeasible cells skipped)";
  out << '\n';
  return ok;
}

json fit_json(const FitResult& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared},
          {"points", f.point_count}};
}

int cmd_fit(const Globals& g, const std::string& records_path, const std::string& name,
            std::ostream& out) {
  const RunConfig cfg = resolve(g);
  const auto records = read_records(records_path);
  if (records.empty()) throw DataError(records_path + ": no records");
  std::map<std::pair<double, std::size_t>, std::set<std::size_t>> ns_at;  // (alpha, m) -> n values
  std::map<std::pair<double, std::size_t>, std::set<std::size_t>> ms_at;  // (alpha, n) -> m values
  for (const auto& r : records) {
    ns_at[{r.alpha, r.m}].insert(r.n);
    ms_at[{r.alpha, r.n}].insert(r.m);
  }
  json summary{{"slope_vs_n", json::array()}, {"slope_vs_m", json::array()}};
  std::map<std::size_t, std::vector<AlphaFit>> by_m;
  for (const auto& [key, ns] : ns_at) {
    if (ns.size() < 2) continue;
    const auto f = slope_vs_n(records, key.first, key.second);
    by_m[key.second].push_back({key.first, f});
    auto j = fit_json(f);
    j["alpha"] = key.first;
    j["m"] = key.second;
    summary["slope_vs_n"].push_back(j);
  }
  for (const auto& [key, ms] : ms_at) {
    if (ms.size() < 2) continue;
    std::vector<ExperimentRecord> at_n;
    for (const auto& r : records) {
      if (r.n == key.second) at_n.push_back(r);
    }
    auto j = fit_json(slope_vs_m(at_n, key.first));
    j["alpha"] = key.first;
    j["n"] = key.second;
    summary["slope_vs_m"].push_back(j);
  }
  json intercepts = json::array();
  for (const auto& [m, fits] : by_m) {
    if (fits.size() < 2) continue;
    auto j = fit_json(intercepts_vs_alpha(fits));
    j["m"] = m;
    intercepts.push_back(j);
  }
  summary["intercepts_vs_alpha"] = intercepts;
  const auto path = output_path(cfg, name);
  write_json(path, summary);
  out << "wrote " << summary["slope_vs_n"].size() << " n-fits, " << summary["slope_vs_m"].size()
      << " m-fits to " << path.string() << '\n';
  return ok;
}

int cmd_bounds(const Globals& g, double alpha, std::size_t n, std::size_t m, double delta,
               std::size_t grid, const std::string& name, std::ostream& out) {
  const RunConfig cfg = resolve(g);
  if (!(alpha > 0.0 && alpha <= 0.5)) throw ConfigError("--alpha must lie in (0, 0.5]");
  if (n == 0 || m == 0) throw ConfigError("--n and --m must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("--delta must lie in (0, 1)");
  const SyntheticSpec spec = cfg.resolved_spec();
  const DistributionSpec ds = measure_distribution_spec(spec, grid);
  const TheoryConstants c = constants(ds, alpha, n, delta);
  const auto [advice_n, advice_m] = allocation_advice(alpha, n + m);
  const json j{
      {"alpha", alpha},
      {"n", n},
      {"m", m},
      {"distribution",
       {{"B", ds.B}, {"K", ds.K}, {"d", ds.d}, {"lambda_min", ds.lambda_min},
        {"lambda_max", ds.lambda_max}, {"f_min", ds.f_min}, {"f_max", ds.f_max},
        {"y_min", ds.y_min}, {"y_max", ds.y_max}}},
      {"constants",
       {{"H", c.H}, {"R", c.R}, {"beta", c.beta}, {"A", c.A}, {"eps_n", c.eps_n}, {"delta", c.delta}}},
      {"m_condition", check_m_condition(c.H, alpha, m)},
      {"cqr_bound", cqr_bound(ds, alpha, n, m, MCondition::ignore)},
      {"cmr_bound", cmr_bound(ds, alpha, n, m, MCondition::ignore)},
      {"sgd_parameter_error", sgd_parameter_error_rate(ds, n)},
      {"regime", std::string(regime_name(classify_regime(n, m, alpha, cfg.sweep.regime_c)))},
      {"allocation", {{"train", advice_n}, {"calibration", advice_m}}},
  };
  const auto path = output_path(cfg, name);
  write_json(path, j);
  out << "cqr_bound = " << num(j["cqr_bound"].get<double>()) << ", cmr_bound = "
      << num(j["cmr_bound"].get<double>()) << " (m condition "
      << (j["m_condition"].get<bool>() ? "holds" : "fails") << ")\n";
  return ok;
}

}  // namespace

void write_records(const fs::path& path, const std::vector<ExperimentRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "method,n,m,alpha,trial,delta,coverage,mean_length,q_hat,regime,seed\n";
  for (const auto& r : records) {
    if (r.skipped) continue;
    out << method_name(r.method) << ',' << r.n << ',' << r.m << ',' << num(r.alpha) << ','
        << r.trial << ',' << num(r.delta) << ',' << num(r.coverage) << ',' << num(r.mean_length)
        << ',' << num(r.q_hat) << ',' << regime_name(r.regime) << ',' << r.seed << '\n';
  }
}

std::vector<ExperimentRecord> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string expected = "method,n,m,alpha,trial,delta,coverage,mean_length,q_hat,regime,seed";
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) throw SchemaError(path.string() + ": expected header " + expected);
  std::vector<ExperimentRecord> out;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw RowError(line_no, "expected 11 fields, found " + std::to_string(f.size()));
    try {
      ExperimentRecord r;
      r.method = parse_method(f[0]);
      r.n = std::stoull(f[1]);
      r.m = std::stoull(f[2]);
      r.alpha = std::stod(f[3]);
      r.trial = std::stoull(f[4]);
      r.delta = std::stod(f[5]);
      r.coverage = std::stod(f[6]);
      r.mean_length = std::stod(f[7]);
      r.q_hat = std::stod(f[8]);
      r.regime = parse_regime(f[9]);
      r.seed = std::stoull(f[10]);
      out.push_back(r);
    } catch (const std::exception& e) {
      throw RowError(line_no, e.what());
    }
  }
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conformalized quantile regression with SGD-trained linear models"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--workers", g.workers, "worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory (overrides the config)");

  std::size_t count = 0;
  auto* synth = app.add_subcommand("synth", "sample a synthetic dataset");
  synth->add_option("--count", count, "rows (overrides [synthetic] count)");

  std::string data_path;
  std::string output_name;
  double gamma = 0.5;
  auto* train = app.add_subcommand("train", "fit one linear quantile model");
  train->add_option("--data", data_path, "training CSV (label column y)")->required()->check(CLI::ExistingFile);
  train->add_option("--gamma", gamma, "quantile level")->required();
  train->add_option("--name", output_name, "output file name")->default_str("model.json");

  ModelArgs margs;
  double alpha = 0.1;
  auto add_models = [&](CLI::App* cmd) {
    cmd->add_option("--lower", margs.lower, "alpha/2 model JSON (CQR)")->check(CLI::ExistingFile);
    cmd->add_option("--upper", margs.upper, "1-alpha/2 model JSON (CQR)")->check(CLI::ExistingFile);
    cmd->add_option("--median", margs.median, "median model JSON (CMR)")->check(CLI::ExistingFile);
  };
  auto* calibrate_cmd = app.add_subcommand("calibrate", "compute the conformal offset");
  calibrate_cmd->add_option("--data", data_path, "calibration CSV")->required()->check(CLI::ExistingFile);
  calibrate_cmd->add_option("--alpha", alpha, "miscoverage level")->required();
  calibrate_cmd->add_option("--name", output_name, "output file name")->default_str("calibration.json");
  add_models(calibrate_cmd);

  std::string calibration_path;
  auto* predict = app.add_subcommand("predict", "emit prediction intervals");
  predict->add_option("--data", data_path, "CSV of covariates (y optional)")->required()->check(CLI::ExistingFile);
  predict->add_option("--calibration", calibration_path, "calibration JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--name", output_name, "output file name")->default_str("predictions.csv");
  add_models(predict);

  auto* sweep = app.add_subcommand("sweep", "run a synthetic (n, m, alpha) sweep");
  sweep->add_option("--name", output_name, "output file name")->default_str("records.csv");

  std::string records_path;
  auto* fit = app.add_subcommand("fit", "log-log fits over a records CSV");
  fit->add_option("--records", records_path, "records CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--name", output_name, "output file name")->default_str("fit.json");

  std::size_t n = 2000;
  std::size_t m = 2000;
  double delta = 0.1;
  std::size_t grid = 64;
  auto* bounds = app.add_subcommand("bounds", "evaluate the length-deviation bounds");
  bounds->add_option("--alpha", alpha, "miscoverage level")->default_val(0.1);
  bounds->add_option("--n", n, "training size")->default_val(2000);
  bounds->add_option("--m", m, "calibration size")->default_val(2000);
  bounds->add_option("--delta", delta, "failure probability for eps_n")->default_val(0.1);
  bounds->add_option("--grid", grid, "density grid points per axis")->default_val(64);
  bounds->add_option("--name", output_name, "output file name")->default_str("bounds.json");

  auto name_or = [&](const char* fallback) { return output_name.empty() ? std::string(fallback) : output_name; };

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return config;
  }

  try {
    if (*synth) return cmd_synth(g, count, out);
    if (*train) return cmd_train(g, data_path, gamma, name_or("model.json"), out);
    if (*calibrate_cmd) return cmd_calibrate(g, data_path, margs, alpha, name_or("calibration.json"), out);
    if (*predict) return cmd_predict(g, data_path, margs, calibration_path, name_or("predictions.csv"), out);
    if (*sweep) return cmd_sweep(g, name_or("records.csv"), out);
    if (*fit) return cmd_fit(g, records_path, name_or("fit.json"), out);
    if (*bounds) return cmd_bounds(g, alpha, n, m, delta, grid, name_or("bounds.json"), out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return config;
  } catch (const CalibrationInfeasible& e) {
    err << "infeasible calibration: " << e.what() << '\n';
    return infeasible;
  } catch (const RowError& e) {
    err << "data error: " << e.what() << '\n';
    return data;
  } catch (const SchemaError& e) {
    err << "data error: " << e.what() << '\n';
    return data;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return data;
  } catch (const InvalidArgument& e) {
    err << "data error: " << e.what() << '\n';
    return data;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return internal;
  }
  return internal;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"cqr_cli"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cqr::cli
