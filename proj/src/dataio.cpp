#include "cqr/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "cqr/errors.hpp"
#include "cqr/rng.hpp"

namespace cqr {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool getline_stripped(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

double parse_number(const std::string& text, std::size_t line, const std::string& column) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw RowError(line, "column '" + column + "': cannot parse '" + t + "' as a number");
  }
  return v;
}

double parse_bool(const std::string& text, std::size_t line, const std::string& column) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "1" || t == "true") return 1.0;
  if (t == "0" || t == "false") return 0.0;
  throw RowError(line, "column '" + column + "': cannot parse '" + t + "' as a boolean");
}

}  // namespace

void TabularSchema::validate() const {
  if (features.empty()) throw SchemaError("schema: at least one feature column is required");
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (f.name == label) throw SchemaError("schema: label column '" + label + "' is also a feature");
    if (!seen.insert(f.name).second) throw SchemaError("schema: duplicate column '" + f.name + "'");
  }
}

TabularSchema TabularSchema::from_header(const std::vector<std::string>& header,
                                         const std::string& label,
                                         const std::vector<std::string>& categorical,
                                         const std::vector<std::string>& boolean) {
  TabularSchema schema;
  schema.label = label;
  auto listed = [](const std::vector<std::string>& v, const std::string& name) {
    return std::find(v.begin(), v.end(), name) != v.end();
  };
  for (const auto& name : header) {
    if (name == label) continue;
    FeatureKind kind = FeatureKind::continuous;
    if (listed(categorical, name)) kind = FeatureKind::categorical;
    if (listed(boolean, name)) kind = FeatureKind::boolean;
    schema.features.push_back({name, kind});
  }
  return schema;
}

std::vector<std::string> read_csv_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::string line;
  if (!getline_stripped(in, line) || trim(line).empty()) {
    throw InvalidArgument(path.string() + ": empty file");
  }
  auto header = split_fields(line);
  for (auto& h : header) h = trim(h);
  return header;
}

LoadedTable load_csv(const std::filesystem::path& path, const TabularSchema& schema) {
  schema.validate();
  const auto header = read_csv_header(path);
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position[header[i]] = i;
  auto column = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw SchemaError(path.string() + ": missing column '" + name + "'");
    return it->second;
  };
  const bool labeled = !schema.label.empty();
  const std::size_t label_col = labeled ? column(schema.label) : 0;
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features) feature_cols.push_back(column(f.name));

  std::ifstream in(path);
  std::string line;
  getline_stripped(in, line);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  for (std::size_t line_no = 2; getline_stripped(in, line); ++line_no) {
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw RowError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw InvalidArgument(path.string() + ": no data rows");

  // Categorical levels, sorted lexicographically.
  std::vector<std::vector<std::string>> levels(schema.features.size());
  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    if (schema.features[f].kind != FeatureKind::categorical) continue;
    std::set<std::string> seen;
    for (const auto& row : rows) seen.insert(trim(row[feature_cols[f]]));
    levels[f].assign(seen.begin(), seen.end());
  }

  LoadedTable table;
  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    const auto& name = schema.features[f].name;
    if (schema.features[f].kind == FeatureKind::categorical) {
      for (const auto& level : levels[f]) table.feature_names.push_back(name + "=" + level);
    } else {
      table.feature_names.push_back(name);
    }
  }
  const std::size_t d = table.feature_names.size();
  std::vector<double> features;
  std::vector<double> labels;
  features.reserve(rows.size() * d);
  labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line_no = line_numbers[r];
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& col = schema.features[f];
      const std::string& cell = row[feature_cols[f]];
      switch (col.kind) {
        case FeatureKind::continuous:
          features.push_back(parse_number(cell, line_no, col.name));
          break;
        case FeatureKind::boolean:
          features.push_back(parse_bool(cell, line_no, col.name));
          break;
        case FeatureKind::categorical: {
          const std::string value = trim(cell);
          for (const auto& level : levels[f]) features.push_back(level == value ? 1.0 : 0.0);
          break;
        }
      }
    }
    labels.push_back(labeled ? parse_number(row[label_col], line_no, schema.label) : 0.0);
  }
  table.data = Dataset(d, std::move(features), std::move(labels));
  return table;
}

void write_csv(const std::filesystem::path& path, const Dataset& data,
               const std::vector<std::string>& feature_names, const std::string& label) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  if (!feature_names.empty() && feature_names.size() != data.dim()) {
    throw InvalidArgument("write_csv: feature name count does not match dimension");
  }
  for (std::size_t j = 0; j < data.dim(); ++j) {
    out << (feature_names.empty() ? "x" + std::to_string(j + 1) : feature_names[j]) << ',';
  }
  out << label << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.x(i)) out << v << ',';
    out << data.y(i) << '\n';
  }
}

DataSplit split(const Dataset& data, const SplitFractions& fr, std::uint64_t seed) {
  if (!(fr.test > 0.0) || !(fr.train > 0.0) || !(fr.calibration > 0.0)) {
    throw InvalidArgument("split: fractions must be positive");
  }
  const double total = fr.test + fr.train + fr.calibration;
  if (total > 1.0) throw InvalidArgument("split: fractions sum to more than 1");
  const auto N = static_cast<double>(data.size());
  const auto n_test = static_cast<std::size_t>(std::floor(fr.test * N));
  const auto n_cal = static_cast<std::size_t>(std::floor(fr.calibration * N));
  const auto unused = static_cast<std::size_t>(std::floor((1.0 - total) * N));
  const std::size_t n_train = data.size() - n_test - n_cal - unused;

  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(rows));
  const std::span<const std::size_t> all(rows);
  DataSplit out;
  out.test = data.subset(all.subspan(0, n_test));
  out.train = data.subset(all.subspan(n_test, n_train));
  out.calibration = data.subset(all.subspan(n_test + n_train, n_cal));
  return out;
}

Scaler Scaler::fit(const Dataset& train) {
  if (train.empty()) throw InvalidArgument("Scaler::fit: empty training set");
  const std::size_t d = train.dim();
  const auto n = static_cast<double>(train.size());
  Scaler s;
  s.mean_.assign(d, 0.0);
  s.scale_.assign(d, 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto x = train.x(i);
    for (std::size_t j = 0; j < d; ++j) s.mean_[j] += x[j];
  }
  for (double& m : s.mean_) m /= n;
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto x = train.x(i);
    for (std::size_t j = 0; j < d; ++j) var[j] += (x[j] - s.mean_[j]) * (x[j] - s.mean_[j]);
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / n);
    s.scale_[j] = sd > 1e-300 ? sd : 0.0;
  }
  return s;
}

Dataset Scaler::apply(const Dataset& data) const {
  if (data.dim() != mean_.size()) throw InvalidArgument("Scaler::apply: dimension mismatch");
  std::vector<double> f = data.features();
  const std::size_t d = mean_.size();
  for (std::size_t i = 0; i < f.size(); ++i) {
    const std::size_t j = i % d;
    f[i] = scale_[j] > 0.0 ? (f[i] - mean_[j]) / scale_[j] : 0.0;
  }
  return Dataset(d, std::move(f), data.labels());
}

Dataset Scaler::inverse(const Dataset& data) const {
  if (data.dim() != mean_.size()) throw InvalidArgument("Scaler::inverse: dimension mismatch");
  std::vector<double> f = data.features();
  const std::size_t d = mean_.size();
  for (std::size_t i = 0; i < f.size(); ++i) {
    const std::size_t j = i % d;
    f[i] = scale_[j] > 0.0 ? f[i] * scale_[j] + mean_[j] : mean_[j];
  }
  return Dataset(d, std::move(f), data.labels());
}

}  // namespace cqr
