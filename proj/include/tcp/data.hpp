#pragma once

#include "tcp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tcp {

// ---------------------------------------------------------------------------
// Synthetic linear-model data

enum class FeatureModel { Uncorrelated, Ar09 };
enum class NoiseModel { Gaussian, T5 };

inline std::string_view to_string(FeatureModel f) { return f == FeatureModel::Uncorrelated ? "uncorrelated" : "ar09"; }
inline std::string_view to_string(NoiseModel m) { return m == NoiseModel::Gaussian ? "gaussian" : "t5"; }

inline std::optional<FeatureModel> parse_feature_model(std::string_view s) {
  if (s == "uncorrelated") return FeatureModel::Uncorrelated;
  if (s == "ar09") return FeatureModel::Ar09;
  return std::nullopt;
}
inline std::optional<NoiseModel> parse_noise_model(std::string_view s) {
  if (s == "gaussian") return NoiseModel::Gaussian;
  if (s == "t5") return NoiseModel::T5;
  return std::nullopt;
}

struct SyntheticSpec {
  Index n = 200;
  Index p = 2000;
  Index k = 10;
  FeatureModel corr = FeatureModel::Uncorrelated;
  NoiseModel noise = NoiseModel::Gaussian;
  double beta_value = 2.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 2) throw InputError("synthetic n must be >= 2");
    if (p < 1) throw InputError("synthetic p must be >= 1");
    if (k < 0 || k > p) throw InputError("synthetic k must lie in [0, p]");
  }
};

struct SyntheticDraw {
  Dataset data;
  Vector x_new;
  double y_new = 0.0;
  Vector beta_true;
  std::vector<Index> support;  // ascending
};

/**
 * Y = X beta + eps on n training rows plus one test row. Rows of X are i.i.d.
 * N(0, I) or N(0, Sigma) with Sigma_ij = 0.9^|i-j| (drawn by the AR(1)
 * recursion); beta = beta_value on k random coordinates; eps is N(0,1) or t(5).
 */
inline SyntheticDraw gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Index> cols(static_cast<std::size_t>(spec.p));
  std::iota(cols.begin(), cols.end(), Index{0});
  std::shuffle(cols.begin(), cols.end(), rng);
  std::vector<Index> support(cols.begin(), cols.begin() + spec.k);
  std::sort(support.begin(), support.end());
  Vector beta = Vector::Zero(spec.p);
  for (Index j : support) beta(j) = spec.beta_value;

  const Index rows = spec.n + 1;
  Matrix x(rows, spec.p);
  const double innovation = std::sqrt(1.0 - 0.9 * 0.9);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < spec.p; ++j) {
      const double z = normal(rng);
      if (spec.corr == FeatureModel::Ar09 && j > 0)
        x(i, j) = 0.9 * x(i, j - 1) + innovation * z;
      else
        x(i, j) = z;
    }
  }
  Vector eps(rows);
  if (spec.noise == NoiseModel::Gaussian) {
    for (Index i = 0; i < rows; ++i) eps(i) = normal(rng);
  } else {
    std::student_t_distribution<double> t5(5.0);
    for (Index i = 0; i < rows; ++i) eps(i) = t5(rng);
  }
  const Vector y = x * beta + eps;

  return SyntheticDraw{Dataset(x.topRows(spec.n), y.head(spec.n)), x.row(spec.n).transpose(), y(spec.n),
                       std::move(beta), std::move(support)};
}

/// sqrt(n_eff log p), inflated by sqrt(5/3) for t(5) noise (natural log).
inline double default_lambda(Index n_eff, Index p, NoiseModel noise) {
  if (n_eff < 1) throw InputError("effective sample size must be >= 1");
  if (p < 2) throw InputError("default lambda needs p >= 2");
  const double base = static_cast<double>(n_eff) * std::log(static_cast<double>(p));
  return std::sqrt(noise == NoiseModel::T5 ? base * 5.0 / 3.0 : base);
}

// ---------------------------------------------------------------------------
// Dates

using Date = std::chrono::sys_days;

inline std::optional<Date> make_date(int y, unsigned m, unsigned d) {
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

inline std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

enum class TimestampFormat { Auto, Iso, Mdy };

namespace detail {

inline std::optional<int> read_int(std::string_view s, std::size_t& pos, std::size_t max_digits) {
  const std::size_t start = pos;
  while (pos < s.size() && pos - start < max_digits && s[pos] >= '0' && s[pos] <= '9') ++pos;
  if (pos == start) return std::nullopt;
  int v = 0;
  std::from_chars(s.data() + start, s.data() + pos, v);
  return v;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

// Accepts a date followed by end of string or a time separator.
inline bool date_terminated(std::string_view s, std::size_t pos) {
  return pos == s.size() || s[pos] == ' ' || s[pos] == 'T';
}

inline std::optional<Date> parse_iso(std::string_view s) {
  std::size_t pos = 0;
  auto y = read_int(s, pos, 4);
  if (!y || pos != 4 || pos >= s.size() || s[pos++] != '-') return std::nullopt;
  auto m = read_int(s, pos, 2);
  if (!m || pos >= s.size() || s[pos++] != '-') return std::nullopt;
  auto d = read_int(s, pos, 2);
  if (!d || !date_terminated(s, pos)) return std::nullopt;
  return make_date(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d));
}

inline std::optional<Date> parse_mdy(std::string_view s) {
  std::size_t pos = 0;
  auto m = read_int(s, pos, 2);
  if (!m || pos >= s.size() || s[pos++] != '/') return std::nullopt;
  auto d = read_int(s, pos, 2);
  if (!d || pos >= s.size() || s[pos++] != '/') return std::nullopt;
  const std::size_t ystart = pos;
  auto y = read_int(s, pos, 4);
  if (!y || pos - ystart != 4 || !date_terminated(s, pos)) return std::nullopt;
  return make_date(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d));
}

}  // namespace detail

/// Calendar date of a timestamp: "YYYY-MM-DD[ T]..." or "M/D/YYYY H:MM".
inline std::optional<Date> parse_timestamp_date(std::string_view text, TimestampFormat fmt = TimestampFormat::Auto) {
  const auto s = detail::trim(text);
  switch (fmt) {
    case TimestampFormat::Iso: return detail::parse_iso(s);
    case TimestampFormat::Mdy: return detail::parse_mdy(s);
    case TimestampFormat::Auto:
      if (auto d = detail::parse_iso(s)) return d;
      return detail::parse_mdy(s);
  }
  return std::nullopt;
}

inline std::optional<Date> parse_date(std::string_view text) { return parse_timestamp_date(text, TimestampFormat::Auto); }

// ---------------------------------------------------------------------------
// CSV

/// Split one CSV record on `,`, honouring double-quoted fields.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r' && ch != '\n') {
      field.push_back(ch);
    }
  }
  out.push_back(std::move(field));
  return out;
}

struct NumericTable {
  std::vector<std::string> columns;
  Matrix values;
};

/// Numeric CSV with a header row; every field must parse as a finite double.
inline NumericTable read_numeric_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty CSV");
  NumericTable t;
  for (auto& h : split_csv_line(line)) t.columns.emplace_back(detail::trim(h));
  std::vector<double> flat;
  Index rows = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != t.columns.size()) throw InputError("CSV row " + std::to_string(rows + 2) + " has wrong field count");
    for (const auto& f : fields) {
      const auto s = detail::trim(f);
      double v = 0.0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        throw InputError("non-numeric CSV field: " + std::string(f));
      flat.push_back(v);
    }
    ++rows;
  }
  const auto cols = static_cast<Index>(t.columns.size());
  t.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(), rows, cols);
  return t;
}

// ---------------------------------------------------------------------------
// Station-day counts

struct StationDayMatrix {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;  // days x stations
  std::vector<std::string> station_ids;
  std::vector<Date> dates;

  Index days() const { return counts.rows(); }
  Index stations() const { return counts.cols(); }
};

struct DateWindow {
  Date from;
  Date to;  // inclusive
};

struct IngestOptions {
  std::string col_start_time = "Start date";
  std::string col_start_station = "Start station number";
  TimestampFormat timestamp_format = TimestampFormat::Auto;
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;  // unparseable
  std::size_t rows_outside = 0;  // outside the window
};

/// Numeric ids order numerically, everything else lexicographically after them.
inline bool station_less(const std::string& a, const std::string& b) {
  auto as_num = [](const std::string& s) -> std::optional<long long> {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
  };
  const auto na = as_num(a);
  const auto nb = as_num(b);
  if (na && nb) return *na != *nb ? *na < *nb : a < b;
  if (na != nb && (na || nb)) return static_cast<bool>(na);
  return a < b;
}

namespace detail {

struct StationLess {
  bool operator()(const std::string& a, const std::string& b) const { return station_less(a, b); }
};

using CountMap = std::map<std::string, std::map<Date, std::int64_t>, StationLess>;

inline void ingest_stream(std::istream& in, const std::string& source, const DateWindow& window,
                          const IngestOptions& opts, CountMap& counts, IngestReport& report) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty trip file: " + source);
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_csv_line(line);
  auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == name) return i;
    throw InputError("missing column '" + name + "' in " + source);
  };
  const std::size_t time_col = find_col(opts.col_start_time);
  const std::size_t station_col = find_col(opts.col_start_station);
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++report.rows_read;
    const auto fields = split_csv_line(line);
    if (fields.size() <= std::max(time_col, station_col)) {
      ++report.rows_skipped;
      continue;
    }
    const auto date = parse_timestamp_date(fields[time_col], opts.timestamp_format);
    const std::string station(detail::trim(fields[station_col]));
    if (!date || station.empty()) {
      ++report.rows_skipped;
      continue;
    }
    if (*date < window.from || *date > window.to) {
      ++report.rows_outside;
      continue;
    }
    ++counts[station][*date];
  }
}

inline StationDayMatrix assemble(const CountMap& counts, const DateWindow& window) {
  StationDayMatrix m;
  for (Date d = window.from; d <= window.to; d += std::chrono::days{1}) m.dates.push_back(d);
  for (const auto& [station, per_day] : counts)
    if (!per_day.empty()) m.station_ids.push_back(station);
  m.counts.setZero(static_cast<Index>(m.dates.size()), static_cast<Index>(m.station_ids.size()));
  Index col = 0;
  for (const auto& [station, per_day] : counts) {
    if (per_day.empty()) continue;
    for (const auto& [date, c] : per_day) m.counts((date - window.from).count(), col) = c;
    ++col;
  }
  return m;
}

}  // namespace detail

/**
 * Count rentals by (start date, start station) over the inclusive window.
 * Every date in the window gets a row; stations with no rentals in the
 * window are dropped. Rows with an unparseable timestamp or empty station
 * are skipped and counted in the report.
 */
inline StationDayMatrix ingest_trips(const std::vector<std::filesystem::path>& csv_paths, const DateWindow& window,
                                     const IngestOptions& opts = {}, IngestReport* report_out = nullptr) {
  if (window.to < window.from) throw InputError("ingest window ends before it starts");
  detail::CountMap counts;
  IngestReport report;
  for (const auto& path : csv_paths) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open trip file: " + path.string());
    detail::ingest_stream(in, path.string(), window, opts, counts, report);
  }
  if (report_out) *report_out = report;
  return detail::assemble(counts, window);
}

inline StationDayMatrix ingest_trips(std::istream& in, const DateWindow& window, const IngestOptions& opts = {},
                                     IngestReport* report_out = nullptr) {
  if (window.to < window.from) throw InputError("ingest window ends before it starts");
  detail::CountMap counts;
  IngestReport report;
  detail::ingest_stream(in, "<stream>", window, opts, counts, report);
  if (report_out) *report_out = report;
  return detail::assemble(counts, window);
}

/// All *.csv files in a directory, sorted by name.
inline std::vector<std::filesystem::path> csv_files_in(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    if (std::filesystem::is_regular_file(dir)) return {dir};
    throw InputError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

/// Header `date,<station ids>`, then one row per date.
inline void write_matrix_csv(const StationDayMatrix& m, std::ostream& out) {
  out << "date";
  for (const auto& id : m.station_ids) out << ',' << id;
  out << '\n';
  for (Index r = 0; r < m.days(); ++r) {
    out << format_date(m.dates[static_cast<std::size_t>(r)]);
    for (Index c = 0; c < m.stations(); ++c) out << ',' << m.counts(r, c);
    out << '\n';
  }
}

inline StationDayMatrix read_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty matrix file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || detail::trim(header[0]) != "date") throw InputError("matrix header must start with 'date'");
  StationDayMatrix m;
  for (std::size_t i = 1; i < header.size(); ++i) m.station_ids.emplace_back(detail::trim(header[i]));
  std::vector<std::vector<std::int64_t>> rows;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) throw InputError("matrix row has wrong field count");
    const auto date = parse_date(fields[0]);
    if (!date) throw InputError("bad date in matrix: " + fields[0]);
    if (!m.dates.empty() && *date <= m.dates.back()) throw InputError("matrix dates must be strictly increasing");
    m.dates.push_back(*date);
    std::vector<std::int64_t> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto f = detail::trim(fields[i]);
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size() || v < 0) throw InputError("bad count in matrix: " + fields[i]);
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  m.counts.resize(static_cast<Index>(rows.size()), static_cast<Index>(m.station_ids.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m.counts(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return m;
}

struct RegressionTask {
  Dataset data;
  Vector x_new;
  double y_new = 0.0;
};

/// One station is the response, the rest are features; one day is held out as the test point.
inline RegressionTask make_regression_task(const StationDayMatrix& m, Index response_station, Index test_day,
                                           bool center = false) {
  if (response_station < 0 || response_station >= m.stations()) throw InputError("response station out of range");
  if (test_day < 0 || test_day >= m.days()) throw InputError("test day out of range");
  if (m.stations() < 2 || m.days() < 2) throw InputError("need at least two stations and two days");
  const Matrix all = m.counts.cast<double>();
  const Index n = m.days() - 1;
  const Index p = m.stations() - 1;
  Matrix x(n, p);
  Vector y(n);
  Vector x_new(p);
  auto feature_row = [&](Index day, auto&& row) {
    Index c = 0;
    for (Index s = 0; s < m.stations(); ++s)
      if (s != response_station) row(c++) = all(day, s);
  };
  Index r = 0;
  for (Index day = 0; day < m.days(); ++day) {
    if (day == test_day) continue;
    feature_row(day, x.row(r));
    y(r) = all(day, response_station);
    ++r;
  }
  feature_row(test_day, x_new);
  double y_new = all(test_day, response_station);
  if (center) {
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    x_new -= mean.transpose();
    const double ym = y.mean();
    y.array() -= ym;
    y_new -= ym;
  }
  return RegressionTask{Dataset(std::move(x), std::move(y)), std::move(x_new), y_new};
}

}  // namespace tcp
