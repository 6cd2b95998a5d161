#pragma once

#include "tcp/conformal.hpp"
#include "tcp/data.hpp"
#include "tcp/tcp.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace tcp {

enum class Method { MaxTrim, RidgeTrim, SplitTrim, Split };
enum class Mode { Synthetic, Bikeshare };
enum class DaySelection { RandomDay, LastDay };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::MaxTrim: return "MaxTrim";
    case Method::RidgeTrim: return "RidgeTrim";
    case Method::SplitTrim: return "SplitTrim";
    case Method::Split: return "Split";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "MaxTrim") return Method::MaxTrim;
  if (s == "RidgeTrim") return Method::RidgeTrim;
  if (s == "SplitTrim") return Method::SplitTrim;
  if (s == "Split") return Method::Split;
  return std::nullopt;
}

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::MaxTrim, Method::RidgeTrim, Method::SplitTrim, Method::Split};
  return m;
}

/// Invalid experiment configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Experiment data could not be loaded (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BikeshareSource {
  std::string matrix_csv;  // pre-aggregated station-day matrix
  std::string trips;       // or a directory / file of raw trip records
  std::optional<Date> from;
  std::optional<Date> to;
  IngestOptions ingest;
  DaySelection days = DaySelection::RandomDay;
  int random_days = 10;
  bool center = false;
};

/**
 * What to run. Fields of `tcp` apply to every method; with auto_alpha_trim the
 * trimming level is the smallest meaningful one per method (1/(n+1), or
 * 1/(|I2|+1) for split trimming), and with auto_lambda the penalties follow
 * default_lambda on n (prediction) and n/2 (split fits).
 */
struct ExperimentConfig {
  Mode mode = Mode::Synthetic;
  std::vector<Method> methods = all_methods();
  long trials = 1;
  SyntheticSpec spec;
  BikeshareSource bikeshare;
  TcpConfig tcp;
  bool auto_alpha_trim = true;
  bool auto_lambda = true;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double max_failure_rate = 0.05;
  std::string output_path;
  std::string trial_log_path;

  void validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (methods.empty()) throw ConfigError("methods must be nonempty");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (!(tcp.alpha_predict > 0.0 && tcp.alpha_predict < 1.0)) throw ConfigError("alpha_predict must lie in (0, 1)");
    if (!auto_alpha_trim && !(tcp.alpha_trim > 0.0 && tcp.alpha_trim < 1.0))
      throw ConfigError("alpha_trim must lie in (0, 1)");
    if (!(tcp.rho > 0.0)) throw ConfigError("rho must be positive");
    if (!(tcp.grid_step > 0.0)) throw ConfigError("grid_step must be positive");
    if (mode == Mode::Synthetic) {
      try {
        spec.validate();
      } catch (const InputError& e) {
        throw ConfigError(e.what());
      }
    } else {
      if (bikeshare.matrix_csv.empty() && bikeshare.trips.empty())
        throw ConfigError("bikeshare mode needs a matrix or trips path");
      if (bikeshare.matrix_csv.empty() && (!bikeshare.from || !bikeshare.to))
        throw ConfigError("ingesting trips needs from/to dates");
      if (bikeshare.random_days < 1) throw ConfigError("random_days must be >= 1");
    }
  }
};

/// One method applied to one test point.
struct MethodOutcome {
  Method method = Method::MaxTrim;
  bool ok = false;
  std::string error;
  bool covered = false;
  double pi_width = 0.0;
  std::optional<double> trial_width;  // absent for Split
  double pi_lo = 0.0;
  double pi_hi = 0.0;
  std::size_t n_intervals = 0;
  long n_slow_fits = 0;
  long n_region_evals = 0;
  double alpha_trim = 0.0;
  double seconds = 0.0;  // wall time; kept out of the trial log
};

struct TrialRecord {
  long trial = 0;
  std::optional<Index> station;  // bikeshare response column
  std::optional<Index> day;      // bikeshare test row
  double y_new = 0.0;
  std::vector<MethodOutcome> outcomes;
};

struct MethodMetrics {
  Method method = Method::MaxTrim;
  long trials = 0;
  long failures = 0;
  long covered = 0;
  double coverage_pct = 0.0;
  double mean_pi_width = 0.0;
  std::optional<double> mean_trial_width;
  double mean_n_slow_fits = 0.0;
  double wall_time_s = 0.0;  // mean per trial
};

struct ExperimentResult {
  std::vector<MethodMetrics> metrics;
  std::vector<TrialRecord> records;
};

class ExcessiveFailureError : public std::runtime_error {
 public:
  ExcessiveFailureError(const std::string& what, ExperimentResult result)
      : std::runtime_error(what), result_(std::move(result)) {}
  const ExperimentResult& result() const noexcept { return result_; }

 private:
  ExperimentResult result_;
};

/// Per-test-point parameters shared by all methods.
struct PointParams {
  TcpConfig tcp;             // lambda / split_lambda resolved
  bool auto_alpha_trim = true;
  std::uint64_t seed = 0;    // split seed
};

inline double auto_alpha_trim(Method m, Index n) {
  if (m == Method::SplitTrim) return 1.0 / static_cast<double>(n - n / 2 + 1);
  return 1.0 / static_cast<double>(n + 1);
}

/**
 * Run one method on one test point. Failures are captured in the outcome
 * rather than thrown.
 */
inline MethodOutcome run_method(Method method, const PointParams& params, const Dataset& data, const Vector& x_new,
                                double y_new) {
  MethodOutcome out;
  out.method = method;
  const auto start = std::chrono::steady_clock::now();
  try {
    if (method == Method::Split) {
      const Index n = data.n();
      const auto split = make_split(n, params.seed);
      const SplitInterval s = split_conformal(LassoFitter{params.tcp.split_lambda_for(n)}, data, x_new,
                                              params.tcp.alpha_predict, split);
      out.pi_lo = s.lo();
      out.pi_hi = s.hi();
      out.pi_width = 2.0 * s.radius;
      out.covered = s.lo() <= y_new && y_new <= s.hi();
      out.n_intervals = 1;
      out.n_slow_fits = 1;
    } else {
      TcpConfig cfg = params.tcp;
      cfg.seed = params.seed;
      cfg.trim_method = method == Method::MaxTrim     ? TrimMethod::MaxTrim
                        : method == Method::RidgeTrim ? TrimMethod::RidgeTrim
                                                      : TrimMethod::SplitTrim;
      if (params.auto_alpha_trim || method == Method::MaxTrim) cfg.alpha_trim = auto_alpha_trim(method, data.n());
      out.alpha_trim = cfg.alpha_trim;
      const TcpResult r = tcp_predict(cfg, data, x_new);
      out.trial_width = r.trial_width;
      out.pi_width = r.pi_width;
      out.covered = r.prediction_set.contains(y_new);
      out.n_intervals = r.prediction_set.intervals.size();
      if (!r.prediction_set.intervals.empty()) {
        out.pi_lo = r.prediction_set.intervals.front().lo;
        out.pi_hi = r.prediction_set.intervals.back().hi;
      }
      out.n_slow_fits = r.n_slow_fits;
      out.n_region_evals = r.n_fast_region_evals;
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Means over successful trials; coverage over all trials (failures count as not covered).
inline std::vector<MethodMetrics> aggregate(const std::vector<TrialRecord>& records, const std::vector<Method>& methods) {
  std::vector<MethodMetrics> out;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MethodMetrics m;
    m.method = methods[mi];
    double pi = 0.0, trial = 0.0, fits = 0.0, secs = 0.0;
    long ok = 0;
    for (const auto& rec : records) {
      const MethodOutcome& o = rec.outcomes[mi];
      ++m.trials;
      secs += o.seconds;
      if (!o.ok) {
        ++m.failures;
        continue;
      }
      ++ok;
      if (o.covered) ++m.covered;
      pi += o.pi_width;
      fits += static_cast<double>(o.n_slow_fits);
      if (o.trial_width) trial += *o.trial_width;
    }
    m.coverage_pct = m.trials > 0 ? 100.0 * static_cast<double>(m.covered) / static_cast<double>(m.trials) : 0.0;
    if (ok > 0) {
      m.mean_pi_width = pi / static_cast<double>(ok);
      m.mean_n_slow_fits = fits / static_cast<double>(ok);
      if (m.method != Method::Split) m.mean_trial_width = trial / static_cast<double>(ok);
    }
    m.wall_time_s = m.trials > 0 ? secs / static_cast<double>(m.trials) : 0.0;
    out.push_back(m);
  }
  return out;
}

namespace detail {

struct Unit {
  Dataset data;
  Vector x_new;
  double y_new;
  std::optional<Index> station;
  std::optional<Index> day;
  NoiseModel noise;
};

using UnitFactory = std::function<Unit(long)>;

inline ExperimentResult run_units(const ExperimentConfig& config, long count, const UnitFactory& make_unit) {
  std::vector<TrialRecord> records(static_cast<std::size_t>(count));
  std::atomic<long> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&] {
    for (;;) {
      const long t = next.fetch_add(1);
      if (t >= count) return;
      try {
        const Unit u = make_unit(t);
        PointParams params;
        params.tcp = config.tcp;
        params.auto_alpha_trim = config.auto_alpha_trim;
        params.seed = config.seed ^ static_cast<std::uint64_t>(t);
        if (config.auto_lambda) {
          params.tcp.lambda = default_lambda(u.data.n(), u.data.p(), u.noise);
          params.tcp.split_lambda = default_lambda(u.data.n() / 2, u.data.p(), u.noise);
        }
        TrialRecord rec;
        rec.trial = t;
        rec.station = u.station;
        rec.day = u.day;
        rec.y_new = u.y_new;
        for (Method m : config.methods) rec.outcomes.push_back(run_method(m, params, u.data, u.x_new, u.y_new));
        records[static_cast<std::size_t>(t)] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  const unsigned nthreads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(count)));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  ExperimentResult result;
  result.metrics = aggregate(records, config.methods);
  result.records = std::move(records);
  for (const auto& m : result.metrics) {
    if (static_cast<double>(m.failures) > config.max_failure_rate * static_cast<double>(m.trials)) {
      std::ostringstream msg;
      msg << to_string(m.method) << " failed on " << m.failures << " of " << m.trials << " trials";
      throw ExcessiveFailureError(msg.str(), std::move(result));
    }
  }
  return result;
}

}  // namespace detail

/// Monte Carlo over synthetic draws; trial t uses seed ^ t for both data and split.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.mode != Mode::Synthetic) throw ConfigError("run_experiment expects synthetic mode");
  return detail::run_units(config, config.trials, [&](long t) {
    SyntheticSpec spec = config.spec;
    spec.seed = config.seed ^ static_cast<std::uint64_t>(t);
    SyntheticDraw d = gen_synthetic(spec);
    return detail::Unit{std::move(d.data), std::move(d.x_new), d.y_new, std::nullopt, std::nullopt, spec.noise};
  });
}

inline StationDayMatrix load_station_matrix(const BikeshareSource& src, IngestReport* report = nullptr) {
  try {
    if (!src.matrix_csv.empty()) {
      std::ifstream in(src.matrix_csv);
      if (!in) throw DataError("cannot open matrix file: " + src.matrix_csv);
      return read_matrix_csv(in);
    }
    return ingest_trips(csv_files_in(src.trips), DateWindow{*src.from, *src.to}, src.ingest, report);
  } catch (const InputError& e) {
    throw DataError(e.what());
  }
}

/// Test days: the last day, or `count` distinct days drawn once from the seed.
inline std::vector<Index> select_test_days(Index days, DaySelection sel, int count, std::uint64_t seed) {
  if (sel == DaySelection::LastDay) return {days - 1};
  std::vector<Index> idx(static_cast<std::size_t>(days));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(count)));
  return idx;
}

/// Every station as the response, crossed with the selected test days.
inline ExperimentResult run_bikeshare(const ExperimentConfig& config, const StationDayMatrix& matrix) {
  config.validate();
  if (matrix.stations() < 3 || matrix.days() < 3) throw DataError("station-day matrix is too small");
  const auto days =
      select_test_days(matrix.days(), config.bikeshare.days, config.bikeshare.random_days, config.seed);
  const long count = static_cast<long>(matrix.stations()) * static_cast<long>(days.size());
  return detail::run_units(config, count, [&](long t) {
    const Index station = t / static_cast<long>(days.size());
    const Index day = days[static_cast<std::size_t>(t % static_cast<long>(days.size()))];
    RegressionTask task = make_regression_task(matrix, station, day, config.bikeshare.center);
    return detail::Unit{std::move(task.data), std::move(task.x_new), task.y_new, station, day, NoiseModel::Gaussian};
  });
}

inline ExperimentResult run_bikeshare(const ExperimentConfig& config) {
  return run_bikeshare(config, load_station_matrix(config.bikeshare));
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const MethodOutcome& o) {
  nlohmann::json j;
  j["method"] = std::string(to_string(o.method));
  j["ok"] = o.ok;
  if (!o.ok) {
    j["error"] = o.error;
    return j;
  }
  j["covered"] = o.covered;
  j["pi_width"] = o.pi_width;
  j["trial_width"] = o.trial_width ? nlohmann::json(*o.trial_width) : nlohmann::json(nullptr);
  j["pi_lo"] = o.pi_lo;
  j["pi_hi"] = o.pi_hi;
  j["n_intervals"] = o.n_intervals;
  j["n_slow_fits"] = o.n_slow_fits;
  j["n_region_evals"] = o.n_region_evals;
  if (o.method != Method::Split) j["alpha_trim"] = o.alpha_trim;
  return j;
}

/// One JSON object per (trial, method), in trial order. Contains no timings, so reruns are byte-identical.
inline void write_trial_log(const std::vector<TrialRecord>& records, std::ostream& out) {
  for (const auto& rec : records) {
    for (const auto& o : rec.outcomes) {
      nlohmann::json j = to_json(o);
      j["trial"] = rec.trial;
      if (rec.station) j["station"] = *rec.station;
      if (rec.day) j["day"] = *rec.day;
      j["y_new"] = rec.y_new;
      out << j.dump() << '\n';
    }
  }
}

/// Rebuild per-trial records from a trial log (timings are not recorded and come back as zero).
inline std::vector<TrialRecord> read_trial_log(std::istream& in, const std::vector<Method>& methods) {
  std::map<long, TrialRecord> by_trial;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    MethodOutcome o;
    const auto m = parse_method(j.at("method").get<std::string>());
    if (!m) throw DataError("unknown method in trial log");
    o.method = *m;
    o.ok = j.at("ok").get<bool>();
    if (o.ok) {
      o.covered = j.at("covered").get<bool>();
      o.pi_width = j.at("pi_width").get<double>();
      if (!j.at("trial_width").is_null()) o.trial_width = j.at("trial_width").get<double>();
      o.n_slow_fits = j.at("n_slow_fits").get<long>();
      o.n_region_evals = j.at("n_region_evals").get<long>();
    } else {
      o.error = j.value("error", "");
    }
    auto& rec = by_trial[j.at("trial").get<long>()];
    rec.trial = j.at("trial").get<long>();
    rec.y_new = j.at("y_new").get<double>();
    rec.outcomes.push_back(o);
  }
  std::vector<TrialRecord> out;
  for (auto& [t, rec] : by_trial) {
    std::vector<MethodOutcome> ordered;
    for (Method m : methods)
      for (const auto& o : rec.outcomes)
        if (o.method == m) ordered.push_back(o);
    rec.outcomes = std::move(ordered);
    out.push_back(std::move(rec));
  }
  return out;
}

inline nlohmann::json to_json(const MethodMetrics& m) {
  nlohmann::json j;
  j["method"] = std::string(to_string(m.method));
  j["trials"] = m.trials;
  j["failures"] = m.failures;
  j["covered"] = m.covered;
  j["coverage_pct"] = m.coverage_pct;
  j["mean_pi_width"] = m.mean_pi_width;
  j["mean_trial_width"] = m.mean_trial_width ? nlohmann::json(*m.mean_trial_width) : nlohmann::json(nullptr);
  j["mean_n_slow_fits"] = m.mean_n_slow_fits;
  j["wall_time_s"] = m.wall_time_s;
  return j;
}

inline nlohmann::json summary_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["methods"] = nlohmann::json::array();
  for (const auto& m : result.metrics) j["methods"].push_back(to_json(m));
  return j;
}

/// Aligned table: method, PI width, trial set width, coverage, mean slow fits, time per trial.
inline void print_summary_table(const std::vector<MethodMetrics>& metrics, std::ostream& out) {
  out << std::left << std::setw(11) << "method" << std::right << std::setw(10) << "PI width" << std::setw(12)
      << "Trial width" << std::setw(14) << "Coverage (%)" << std::setw(11) << "slow fits" << std::setw(11)
      << "sec/trial" << std::setw(10) << "failed" << '\n';
  out << std::fixed;
  for (const auto& m : metrics) {
    out << std::left << std::setw(11) << to_string(m.method) << std::right << std::setprecision(2) << std::setw(10)
        << m.mean_pi_width << std::setw(12);
    if (m.mean_trial_width)
      out << *m.mean_trial_width;
    else
      out << "---";
    out << std::setprecision(1) << std::setw(14) << m.coverage_pct << std::setprecision(1) << std::setw(11)
        << m.mean_n_slow_fits << std::setprecision(4) << std::setw(11) << m.wall_time_s << std::setw(10)
        << m.failures << '\n';
  }
  out.unsetf(std::ios::fixed);
}

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

// Returns nullopt for "auto" / absent.
inline std::optional<double> auto_or_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& v = j.at(key);
  if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
  if (!v.is_number()) throw ConfigError(std::string("'") + key + "' must be a number or \"auto\"");
  return v.get<double>();
}

inline Date require_date(const std::string& s) {
  auto d = parse_date(s);
  if (!d) throw ConfigError("bad date: " + s);
  return *d;
}

}  // namespace detail

/// Experiment configuration from JSON (see README for the schema).
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using detail::get_or;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  const auto mode = get_or<std::string>(j, "mode", "synthetic");
  if (mode == "synthetic")
    c.mode = Mode::Synthetic;
  else if (mode == "bikeshare")
    c.mode = Mode::Bikeshare;
  else
    throw ConfigError("unknown mode: " + mode);

  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) {
      if (!m.is_string()) throw ConfigError("methods must be strings");
      auto parsed = parse_method(m.get<std::string>());
      if (!parsed) throw ConfigError("unknown method: " + m.get<std::string>());
      c.methods.push_back(*parsed);
    }
  }
  c.trials = get_or<long>(j, "trials", 1);
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.threads = get_or<unsigned>(j, "threads", 1);
  c.max_failure_rate = get_or<double>(j, "max_failure_rate", 0.05);
  c.output_path = get_or<std::string>(j, "output", "");
  c.trial_log_path = get_or<std::string>(j, "trial_log", "");

  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    c.spec.n = get_or<Index>(s, "n", c.spec.n);
    c.spec.p = get_or<Index>(s, "p", c.spec.p);
    c.spec.k = get_or<Index>(s, "k", c.spec.k);
    c.spec.beta_value = get_or<double>(s, "beta_value", c.spec.beta_value);
    const auto corr = get_or<std::string>(s, "corr", "uncorrelated");
    const auto noise = get_or<std::string>(s, "noise", "gaussian");
    auto fc = parse_feature_model(corr);
    auto nm = parse_noise_model(noise);
    if (!fc) throw ConfigError("unknown feature model: " + corr);
    if (!nm) throw ConfigError("unknown noise model: " + noise);
    c.spec.corr = *fc;
    c.spec.noise = *nm;
  }
  if (j.contains("bikeshare")) {
    const auto& b = j.at("bikeshare");
    c.bikeshare.matrix_csv = get_or<std::string>(b, "matrix", "");
    c.bikeshare.trips = get_or<std::string>(b, "trips", "");
    if (b.contains("from")) c.bikeshare.from = detail::require_date(b.at("from").get<std::string>());
    if (b.contains("to")) c.bikeshare.to = detail::require_date(b.at("to").get<std::string>());
    c.bikeshare.ingest.col_start_time = get_or<std::string>(b, "col_start_time", c.bikeshare.ingest.col_start_time);
    c.bikeshare.ingest.col_start_station =
        get_or<std::string>(b, "col_start_station", c.bikeshare.ingest.col_start_station);
    const auto days = get_or<std::string>(b, "days", "random_day");
    if (days == "random_day")
      c.bikeshare.days = DaySelection::RandomDay;
    else if (days == "last_day")
      c.bikeshare.days = DaySelection::LastDay;
    else
      throw ConfigError("unknown day selection: " + days);
    c.bikeshare.random_days = get_or<int>(b, "random_days", 10);
    c.bikeshare.center = get_or<bool>(b, "center", false);
  }
  if (j.contains("tcp")) {
    const auto& t = j.at("tcp");
    if (auto a = detail::auto_or_number(t, "alpha_trim")) {
      c.auto_alpha_trim = false;
      c.tcp.alpha_trim = *a;
    }
    c.tcp.alpha_predict = get_or<double>(t, "alpha_predict", c.tcp.alpha_predict);
    if (auto l = detail::auto_or_number(t, "lambda")) {
      c.auto_lambda = false;
      c.tcp.lambda = *l;
    }
    if (auto l = detail::auto_or_number(t, "split_lambda")) c.tcp.split_lambda = *l;
    c.tcp.rho = get_or<double>(t, "rho", c.tcp.rho);
    c.tcp.grid_step = get_or<double>(t, "grid_step", c.tcp.grid_step);
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parameter sweeps (numeric series for plotting elsewhere)

struct SweepSpec {
  std::string param;  // "n", "p" or "k"
  std::vector<Index> values;
  std::string output_csv;
};

inline std::optional<SweepSpec> parse_sweep(const nlohmann::json& j) {
  if (!j.contains("sweep")) return std::nullopt;
  const auto& s = j.at("sweep");
  SweepSpec out;
  out.param = detail::get_or<std::string>(s, "param", "");
  if (out.param != "n" && out.param != "p" && out.param != "k") throw ConfigError("sweep param must be n, p or k");
  out.values = detail::get_or<std::vector<Index>>(s, "values", {});
  if (out.values.empty()) throw ConfigError("sweep needs values");
  out.output_csv = detail::get_or<std::string>(s, "output", "");
  return out;
}

/// Re-run a synthetic experiment per swept value; one CSV row per (value, method).
inline void run_sweep(const ExperimentConfig& base, const SweepSpec& sweep, std::ostream& csv) {
  csv << sweep.param << ",method,mean_pi_width,mean_trial_width,coverage_pct,mean_n_slow_fits,failures\n";
  csv << std::setprecision(17);
  for (Index v : sweep.values) {
    ExperimentConfig cfg = base;
    if (sweep.param == "n") cfg.spec.n = v;
    if (sweep.param == "p") cfg.spec.p = v;
    if (sweep.param == "k") cfg.spec.k = v;
    const auto result = run_experiment(cfg);
    for (const auto& m : result.metrics) {
      csv << v << ',' << to_string(m.method) << ',' << m.mean_pi_width << ',';
      if (m.mean_trial_width) csv << *m.mean_trial_width;
      csv << ',' << m.coverage_pct << ',' << m.mean_n_slow_fits << ',' << m.failures << '\n';
    }
  }
}

}  // namespace tcp
