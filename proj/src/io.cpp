#include "invbag/io.hpp"

#include "invbag/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

namespace invbag {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string normalize_header(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '#') s = trim(s.substr(1));
  return std::string(s);
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_double(std::string_view token, double& out) {
  token = trim(token);
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void CsvSchema::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& f : features) {
    if (!seen.insert(f).second) throw SchemaError("feature column '" + f + "' listed twice");
    if (f == label_column) {
      throw SchemaError("label column '" + f + "' cannot also be a feature");
    }
  }
  if (background_value == signal_value) {
    throw SchemaError("background and signal label values must differ");
  }
}

CsvSchema CsvSchema::hepmass() {
  CsvSchema s;
  s.label_column = "label";
  s.background_value = 0.0;
  s.signal_value = 1.0;
  for (int i = 0; i < 8; ++i) s.features.push_back("f" + std::to_string(i));
  return s;
}

CsvParseError::CsvParseError(std::size_t line, const std::string& what)
    : InvalidInput("line " + std::to_string(line) + ": " + what), line_(line) {}

LoadedCsv load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  schema.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      auto line = rest.substr(0, nl);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw InvalidInput("'" + path.string() + "' is empty");

  const auto header = split(lines.front(), schema.delimiter);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    column.emplace(normalize_header(header[i]), i);
  }
  const auto label_it = column.find(normalize_header(schema.label_column));
  if (label_it == column.end()) {
    throw SchemaError("missing label column '" + schema.label_column + "'");
  }
  const std::size_t label_col = label_it->second;

  LoadedCsv out;
  std::vector<std::size_t> feature_cols;
  if (schema.features.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == label_col) continue;
      feature_cols.push_back(i);
      out.feature_names.push_back(normalize_header(header[i]));
    }
  } else {
    for (const auto& name : schema.features) {
      const auto it = column.find(normalize_header(name));
      if (it == column.end()) throw SchemaError("missing feature column '" + name + "'");
      feature_cols.push_back(it->second);
      out.feature_names.push_back(normalize_header(name));
    }
  }
  if (feature_cols.empty()) throw SchemaError("no feature columns selected");

  const auto n_rows = static_cast<Index>(lines.size() - 1);
  if (n_rows < 1) throw InvalidInput("'" + path.string() + "' has no data rows");
  out.data.features.resize(n_rows, static_cast<Index>(feature_cols.size()));
  out.data.labels.resize(static_cast<std::size_t>(n_rows));

  for (Index r = 0; r < n_rows; ++r) {
    const std::size_t line_no = static_cast<std::size_t>(r) + 2;
    const auto fields = split(lines[static_cast<std::size_t>(r) + 1], schema.delimiter);
    if (fields.size() != header.size()) {
      throw CsvParseError(line_no, "expected " + std::to_string(header.size()) +
                                       " fields, found " + std::to_string(fields.size()));
    }
    double label = 0.0;
    if (!parse_double(fields[label_col], label)) {
      throw CsvParseError(line_no, "unparseable label '" +
                                       std::string(trim(fields[label_col])) + "'");
    }
    if (label == schema.signal_value) {
      out.data.labels[static_cast<std::size_t>(r)] = Label::signal;
    } else if (label == schema.background_value) {
      out.data.labels[static_cast<std::size_t>(r)] = Label::background;
    } else {
      throw CsvParseError(line_no, "label '" + std::string(trim(fields[label_col])) +
                                       "' is neither the background nor the signal value");
    }
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      const auto token = fields[feature_cols[j]];
      double v = 0.0;
      if (!parse_double(token, v)) {
        throw CsvParseError(line_no, "unparseable value '" + std::string(trim(token)) +
                                         "' in column '" + out.feature_names[j] + "'");
      }
      if (!std::isfinite(v)) {
        throw CsvParseError(line_no, "non-finite value in column '" +
                                         out.feature_names[j] + "'");
      }
      out.data.features(r, static_cast<Index>(j)) = v;
    }
  }
  return out;
}

void save_csv(const std::filesystem::path& path, const LabeledDataset& data,
              const std::vector<std::string>& feature_names, const CsvSchema& schema) {
  data.validate();
  if (static_cast<Index>(feature_names.size()) != data.n_features()) {
    throw InvalidInput("save_csv: one name per feature required");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  const char d = schema.delimiter;
  out << schema.label_column;
  for (const auto& name : feature_names) out << d << name;
  out << '\n';
  for (Index i = 0; i < data.n_events(); ++i) {
    out << format_double(data.labels[static_cast<std::size_t>(i)] == Label::signal
                             ? schema.signal_value
                             : schema.background_value);
    for (Index j = 0; j < data.n_features(); ++j) {
      out << d << format_double(data.features(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("error writing '" + path.string() + "'");
}

std::vector<std::string> default_feature_names(Index n) {
  std::vector<std::string> names;
  for (Index i = 0; i < n; ++i) names.push_back("f" + std::to_string(i));
  return names;
}

Index background_count(Index n_test, double bg_fraction) {
  if (!(bg_fraction >= 0.0 && bg_fraction <= 1.0)) {
    throw InvalidInput("background fraction must lie in [0, 1]");
  }
  return static_cast<Index>(std::floor(bg_fraction * static_cast<double>(n_test) + 0.5));
}

SubsetIndex sample_without_replacement(Index n, Index k, std::uint64_t seed) {
  if (k < 0 || k > n) throw InvalidInput("sample_without_replacement: k out of range");
  SubsetIndex idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

LabeledDataset compose_test_sample(const FeatureMatrix& bg_pool, const FeatureMatrix& sig_pool,
                                   Index n_test, double bg_fraction, std::uint64_t seed) {
  if (n_test < 1) throw InvalidInput("compose_test_sample: n_test must be positive");
  const Index n_bg = background_count(n_test, bg_fraction);
  const Index n_sig = n_test - n_bg;
  if (bg_pool.rows() < n_bg || sig_pool.rows() < n_sig) {
    std::string msg = "compose_test_sample: insufficient pool;";
    if (bg_pool.rows() < n_bg) {
      msg += " background short by " + std::to_string(n_bg - bg_pool.rows());
    }
    if (sig_pool.rows() < n_sig) {
      msg += " signal short by " + std::to_string(n_sig - sig_pool.rows());
    }
    throw InvalidInput(msg);
  }
  const Index d = n_bg > 0 ? bg_pool.cols() : sig_pool.cols();
  if (n_bg > 0 && n_sig > 0 && bg_pool.cols() != sig_pool.cols()) {
    throw InvalidInput("compose_test_sample: pools differ in feature count");
  }
  const auto bg_rows = sample_without_replacement(bg_pool.rows(), n_bg, mix_seed(seed, 1));
  const auto sig_rows = sample_without_replacement(sig_pool.rows(), n_sig, mix_seed(seed, 2));
  const auto order = sample_without_replacement(n_test, n_test, mix_seed(seed, 3));

  LabeledDataset out;
  out.features.resize(n_test, d);
  out.labels.resize(static_cast<std::size_t>(n_test));
  for (Index i = 0; i < n_test; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    if (src < n_bg) {
      out.features.row(i) = bg_pool.row(bg_rows[static_cast<std::size_t>(src)]);
      out.labels[static_cast<std::size_t>(i)] = Label::background;
    } else {
      out.features.row(i) = sig_pool.row(sig_rows[static_cast<std::size_t>(src - n_bg)]);
      out.labels[static_cast<std::size_t>(i)] = Label::signal;
    }
  }
  return out;
}

}  // namespace invbag
