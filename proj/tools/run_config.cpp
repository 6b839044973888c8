#include "run_config.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace cqr::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kKeys{
    {"synthetic", {"theta0", "alpha0", "x_low", "x_high", "layout", "count"}},
    {"sweep",
     {"method", "n_grid", "m_grid", "alpha_grid", "trials", "test_size", "oracle_mode",
      "regime_c", "seed"}},
    {"sgd",
     {"schedule", "rate", "batch_size", "epochs", "projection_radius", "tune", "tune_min",
      "tune_max", "tune_points", "tune_budget"}},
    {"output", {"dir"}},
};

std::string where(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

double to_double(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(ctx + ": expected a number, got '" + s + "'");
  }
}

std::uint64_t to_uint(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(ctx + ": expected a nonnegative integer, got '" + s + "'");
  }
}

bool to_bool(const std::string& s, const std::string& ctx) {
  const auto v = boost::algorithm::to_lower_copy(s);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(ctx + ": expected true/false, got '" + s + "'");
}

std::vector<std::string> items(const std::string& s) {
  std::vector<std::string> parts;
  boost::split(parts, s, boost::is_any_of(","));
  for (auto& p : parts) boost::trim(p);
  std::erase_if(parts, [](const std::string& p) { return p.empty(); });
  return parts;
}

std::vector<double> to_doubles(const std::string& s, const std::string& ctx) {
  std::vector<double> out;
  for (const auto& p : items(s)) out.push_back(to_double(p, ctx));
  if (out.empty()) throw ConfigError(ctx + ": empty list");
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& s, const std::string& ctx) {
  std::vector<std::size_t> out;
  for (const auto& p : items(s)) out.push_back(to_uint(p, ctx));
  if (out.empty()) throw ConfigError(ctx + ": empty list");
  return out;
}

void apply(RunConfig& cfg, const std::string& section, const std::string& key,
           const std::string& value) {
  const std::string ctx = where(section, key);
  auto& plan = cfg.sweep;
  auto& sgd = plan.training.sgd;
  auto& syn = cfg.synthetic;
  try {
    if (section == "synthetic") {
      if (key == "theta0") {
        syn.theta0 = to_doubles(value, ctx);
        cfg.theta0_given = true;
      } else if (key == "alpha0") {
        syn.alpha0 = to_double(value, ctx);
      } else if (key == "x_low") {
        syn.x_low = to_double(value, ctx);
      } else if (key == "x_high") {
        syn.x_high = to_double(value, ctx);
      } else if (key == "layout") {
        if (value == "box") syn.layout = CovariateLayout::box;
        else if (value == "level_set") syn.layout = CovariateLayout::level_set;
        else throw ConfigError(ctx + ": expected box or level_set");
      } else if (key == "count") {
        cfg.synth_count = to_uint(value, ctx);
      }
    } else if (section == "sweep") {
      if (key == "method") plan.method = parse_method(boost::algorithm::to_upper_copy(value));
      else if (key == "n_grid") plan.n_grid = to_sizes(value, ctx);
      else if (key == "m_grid") plan.m_grid = to_sizes(value, ctx);
      else if (key == "alpha_grid") plan.alpha_grid = to_doubles(value, ctx);
      else if (key == "trials") plan.trials = to_uint(value, ctx);
      else if (key == "test_size") plan.test_size = to_uint(value, ctx);
      else if (key == "oracle_mode") plan.oracle_mode = parse_oracle_mode(value);
      else if (key == "regime_c") plan.regime_c = to_double(value, ctx);
      else if (key == "seed") plan.master_seed = to_uint(value, ctx);
    } else if (section == "sgd") {
      if (key == "schedule") {
        const double c = schedule_rate(sgd.schedule);
        if (value == "constant") sgd.schedule = ConstantSchedule{c};
        else if (value == "inverse_time") sgd.schedule = InverseTimeSchedule{c};
        else throw ConfigError(ctx + ": expected constant or inverse_time");
      } else if (key == "rate") {
        sgd.schedule = with_rate(sgd.schedule, to_double(value, ctx));
      } else if (key == "batch_size") {
        sgd.batch_size = to_uint(value, ctx);
      } else if (key == "epochs") {
        sgd.epochs = to_uint(value, ctx);
      } else if (key == "projection_radius") {
        if (value.empty() || value == "none") sgd.projection_radius.reset();
        else sgd.projection_radius = to_double(value, ctx);
      } else if (key == "tune") {
        plan.training.tune = to_bool(value, ctx);
      } else if (key == "tune_budget") {
        plan.training.tune_budget = to_uint(value, ctx);
      }
    } else if (section == "output") {
      cfg.out_dir = value;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

}  // namespace

SweepPlan RunConfig::default_sweep() {
  SweepPlan plan;
  for (double v : log_spaced(200, 20000, 8)) plan.n_grid.push_back(static_cast<std::size_t>(std::lround(v)));
  plan.m_grid = {5000};
  plan.alpha_grid = {0.01, 0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2};
  return plan;
}

SyntheticSpec RunConfig::resolved_spec() const {
  SyntheticSpec spec = synthetic;
  if (!theta0_given) spec.theta0 = SyntheticSpec::draw(sweep.master_seed, synthetic.layout).theta0;
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[synthetic]: ") + e.what());
  }
  return spec;
}

void RunConfig::validate() const {
  resolved_spec();
  try {
    sweep.validate();
    sweep.training.sgd.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (synth_count == 0) throw ConfigError("[synthetic] count must be >= 1");
}

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  // grid bounds are applied together once all keys are read
  double tune_min = 1e-5;
  double tune_max = 1.0;
  std::size_t tune_points = cfg.sweep.training.tune_grid.size();
  bool grid_given = false;

  // schedule before rate, so the rate lands on the chosen schedule
  auto ordered = [](const pt::ptree& sec) {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& [k, v] : sec) {
      if (!v.empty()) throw ConfigError("nested key '" + k + "'");
      kv.emplace_back(k, v.data());
    }
    std::stable_partition(kv.begin(), kv.end(), [](const auto& p) { return p.first == "schedule"; });
    return kv;
  };

  for (const auto& [section, body] : tree) {
    const auto known = kKeys.find(section);
    if (known == kKeys.end()) {
      if (body.empty()) throw ConfigError("key '" + section + "' outside a section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, raw] : ordered(body)) {
      if (!known->second.contains(key)) throw ConfigError("unknown key " + where(section, key));
      const std::string value = boost::trim_copy(raw);
      const std::string ctx = where(section, key);
      if (section == "sgd" && key == "tune_min") {
        tune_min = to_double(value, ctx);
        grid_given = true;
      } else if (section == "sgd" && key == "tune_max") {
        tune_max = to_double(value, ctx);
        grid_given = true;
      } else if (section == "sgd" && key == "tune_points") {
        tune_points = to_uint(value, ctx);
        grid_given = true;
      } else {
        apply(cfg, section, key, value);
      }
    }
  }
  if (grid_given) {
    if (!(tune_min > 0.0 && tune_min <= tune_max) || tune_points == 0) {
      throw ConfigError("[sgd] tune grid needs 0 < tune_min <= tune_max and tune_points >= 1");
    }
    cfg.sweep.training.tune_grid = log_spaced(tune_min, tune_max, tune_points);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace cqr::cli
