#include "tcp/harness.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitFailures = 4;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tcp::ConfigError("cannot open config: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw tcp::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

void write_outputs(const tcp::ExperimentConfig& cfg, const tcp::ExperimentResult& result) {
  tcp::print_summary_table(result.metrics, std::cout);
  if (!cfg.output_path.empty()) {
    std::ofstream out(cfg.output_path);
    if (!out) throw tcp::DataError("cannot write " + cfg.output_path);
    out << tcp::summary_json(result).dump(2) << '\n';
  }
  if (!cfg.trial_log_path.empty()) {
    std::ofstream log(cfg.trial_log_path);
    if (!log) throw tcp::DataError("cannot write " + cfg.trial_log_path);
    tcp::write_trial_log(result.records, log);
  }
}

int cmd_run(const std::string& config_path) {
  const auto j = read_json_file(config_path);
  const auto cfg = tcp::parse_experiment_config(j);
  if (auto sweep = tcp::parse_sweep(j)) {
    if (cfg.mode != tcp::Mode::Synthetic) throw tcp::ConfigError("sweeps need synthetic mode");
    if (sweep->output_csv.empty()) {
      tcp::run_sweep(cfg, *sweep, std::cout);
    } else {
      std::ofstream out(sweep->output_csv);
      if (!out) throw tcp::DataError("cannot write " + sweep->output_csv);
      tcp::run_sweep(cfg, *sweep, out);
    }
    return kExitOk;
  }
  try {
    const auto result = cfg.mode == tcp::Mode::Synthetic ? tcp::run_experiment(cfg) : tcp::run_bikeshare(cfg);
    write_outputs(cfg, result);
  } catch (const tcp::ExcessiveFailureError& e) {
    write_outputs(cfg, e.result());
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailures;
  }
  return kExitOk;
}

struct PredictArgs {
  std::string data;
  std::string xnew;
  std::string method = "RidgeTrim";
  std::string response;
  double alpha = 0.1;
  std::optional<double> alpha_trim;
  std::optional<double> lambda;
  std::optional<double> split_lambda;
  double rho = 1.0;
  double grid_step = 0.01;
  std::uint64_t seed = 0;
};

int cmd_predict(const PredictArgs& a) {
  const auto method = tcp::parse_method(a.method);
  if (!method) throw tcp::ConfigError("unknown method: " + a.method);

  std::ifstream din(a.data);
  if (!din) throw tcp::DataError("cannot open " + a.data);
  const auto table = tcp::read_numeric_csv(din);
  if (table.columns.size() < 2) throw tcp::DataError("data needs at least one feature and a response column");
  Eigen::Index ycol = static_cast<Eigen::Index>(table.columns.size()) - 1;
  if (!a.response.empty()) {
    const auto it = std::find(table.columns.begin(), table.columns.end(), a.response);
    if (it == table.columns.end()) throw tcp::DataError("no response column named " + a.response);
    ycol = static_cast<Eigen::Index>(it - table.columns.begin());
  }
  const Eigen::Index p = table.values.cols() - 1;
  tcp::Matrix x(table.values.rows(), p);
  for (Eigen::Index c = 0, k = 0; c < table.values.cols(); ++c)
    if (c != ycol) x.col(k++) = table.values.col(c);
  const tcp::Dataset data(std::move(x), table.values.col(ycol));

  std::ifstream xin(a.xnew);
  if (!xin) throw tcp::DataError("cannot open " + a.xnew);
  const auto xnew = tcp::read_numeric_csv(xin);
  if (xnew.values.cols() != p) throw tcp::DataError("xnew must have one column per feature");

  tcp::PointParams params;
  params.tcp.alpha_predict = a.alpha;
  params.tcp.rho = a.rho;
  params.tcp.grid_step = a.grid_step;
  params.tcp.lambda = a.lambda.value_or(tcp::default_lambda(data.n(), p, tcp::NoiseModel::Gaussian));
  params.tcp.split_lambda = a.split_lambda;
  if (!a.lambda && !a.split_lambda)
    params.tcp.split_lambda = tcp::default_lambda(data.n() / 2, p, tcp::NoiseModel::Gaussian);
  params.auto_alpha_trim = !a.alpha_trim;
  if (a.alpha_trim) params.tcp.alpha_trim = *a.alpha_trim;
  params.seed = a.seed;

  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < xnew.values.rows(); ++r) {
    const tcp::Vector xr = xnew.values.row(r).transpose();
    const auto o = tcp::run_method(*method, params, data, xr, 0.0);
    if (!o.ok) throw tcp::DataError("prediction failed for row " + std::to_string(r) + ": " + o.error);
    nlohmann::json row;
    row["row"] = r;
    row["pi_lo"] = o.pi_lo;
    row["pi_hi"] = o.pi_hi;
    row["pi_width"] = o.pi_width;
    row["n_intervals"] = o.n_intervals;
    if (o.trial_width) row["trial_width"] = *o.trial_width;
    row["n_slow_fits"] = o.n_slow_fits;
    out.push_back(row);
  }
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

struct IngestArgs {
  std::string input;
  std::string from;
  std::string to;
  std::string out;
  std::string col_time = "Start date";
  std::string col_station = "Start station number";
  std::string time_format = "auto";
};

int cmd_ingest(const IngestArgs& a) {
  const auto from = tcp::parse_date(a.from);
  const auto to = tcp::parse_date(a.to);
  if (!from || !to) throw tcp::ConfigError("dates must be YYYY-MM-DD or M/D/YYYY");
  tcp::IngestOptions opts;
  opts.col_start_time = a.col_time;
  opts.col_start_station = a.col_station;
  if (a.time_format == "iso")
    opts.timestamp_format = tcp::TimestampFormat::Iso;
  else if (a.time_format == "mdy")
    opts.timestamp_format = tcp::TimestampFormat::Mdy;
  else if (a.time_format != "auto")
    throw tcp::ConfigError("time format must be auto, iso or mdy");

  tcp::IngestReport report;
  tcp::StationDayMatrix m;
  try {
    m = tcp::ingest_trips(tcp::csv_files_in(a.input), tcp::DateWindow{*from, *to}, opts, &report);
  } catch (const tcp::InputError& e) {
    throw tcp::DataError(e.what());
  }
  std::ofstream out(a.out);
  if (!out) throw tcp::DataError("cannot write " + a.out);
  tcp::write_matrix_csv(m, out);
  std::cerr << "read " << report.rows_read << " rows, skipped " << report.rows_skipped << ", outside window "
            << report.rows_outside << "; " << m.days() << " days x " << m.stations() << " stations\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trimmed conformal prediction with the lasso"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  run->add_option("--config", config_path, "Path to the JSON config")->required();

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Prediction sets for new feature rows");
  predict->add_option("--data", pa.data, "Training CSV with header; last column is the response")->required();
  predict->add_option("--xnew", pa.xnew, "CSV of feature rows to predict")->required();
  predict->add_option("--method", pa.method, "MaxTrim, RidgeTrim, SplitTrim or Split");
  predict->add_option("--response", pa.response, "Response column name (default: last column)");
  predict->add_option("--alpha", pa.alpha, "Prediction-step level alpha_predict");
  predict->add_option("--alpha-trim", pa.alpha_trim, "Trimming level (default: smallest valid)");
  predict->add_option("--lambda", pa.lambda, "Lasso penalty (default: sqrt(n log p))");
  predict->add_option("--split-lambda", pa.split_lambda, "Lasso penalty for split fits");
  predict->add_option("--rho", pa.rho, "Ridge penalty for RidgeTrim");
  predict->add_option("--grid-step", pa.grid_step, "Candidate grid spacing");
  predict->add_option("--seed", pa.seed, "Seed for the half split");

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Aggregate trip CSVs into a station-day count matrix");
  ingest->add_option("--input", ia.input, "Directory of trip CSVs (or a single file)")->required();
  ingest->add_option("--from", ia.from, "First date, inclusive")->required();
  ingest->add_option("--to", ia.to, "Last date, inclusive")->required();
  ingest->add_option("--out", ia.out, "Output matrix CSV")->required();
  ingest->add_option("--col-start-time", ia.col_time, "Start timestamp column name");
  ingest->add_option("--col-start-station", ia.col_station, "Start station column name");
  ingest->add_option("--time-format", ia.time_format, "auto, iso or mdy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*predict) return cmd_predict(pa);
    if (*ingest) return cmd_ingest(ia);
  } catch (const tcp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const tcp::InputError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const tcp::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
