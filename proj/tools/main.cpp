#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "implicit_sparse/baselines.hpp"
#include "implicit_sparse/config.hpp"
#include "implicit_sparse/descent.hpp"
#include "implicit_sparse/design.hpp"
#include "implicit_sparse/experiments.hpp"
#include "implicit_sparse/lemma_suite.hpp"

namespace fs = std::filesystem;
using namespace implicit_sparse;

namespace {

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config:
    case ErrorCategory::parameter:
    case ErrorCategory::dimension:
      return 2;
    case ErrorCategory::divergence:
      return 3;
    case ErrorCategory::capacity:
      return 4;
    case ErrorCategory::io:
      return 5;
    case ErrorCategory::singularity:
      return 1;
  }
  return 1;
}

std::optional<std::uint64_t> parse_seed(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size() || text.find('-') != std::string::npos) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + " is not a nonnegative integer: '" + text + "'");
  }
}

// --seed beats IMPLICIT_SPARSE_SEED, which beats whatever the config says.
std::optional<std::uint64_t> seed_override(const std::optional<std::string>& flag) {
  if (flag) return parse_seed(*flag, "--seed");
  if (const char* env = std::getenv("IMPLICIT_SPARSE_SEED"); env && *env) {
    return parse_seed(env, "IMPLICIT_SPARSE_SEED");
  }
  return std::nullopt;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

std::ofstream open_output(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw IoError("'" + path.string() + "' already exists (pass --force to overwrite)");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<std::vector<double>> read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw ConfigError(path + ": line " + std::to_string(line_no) + " is not numeric");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

DenseMatrix matrix_from_csv(const std::string& path) {
  const auto rows = read_numeric_csv(path);
  if (rows.empty()) throw ConfigError(path + ": no data rows");
  const std::size_t d = rows.front().size();
  DenseMatrix X(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw DimensionError(path + ": ragged row " + std::to_string(i + 1));
    for (std::size_t j = 0; j < d; ++j) X(i, j) = rows[i][j];
  }
  return X;
}

RealVector vector_from_csv(const std::string& path) {
  RealVector y;
  for (const auto& row : read_numeric_csv(path)) {
    if (row.size() != 1) throw DimensionError(path + ": expected one value per line");
    y.push_back(row.front());
  }
  return y;
}

struct Common {
  std::optional<std::string> config;
  std::string preset;
  std::optional<std::string> seed;
  std::string output_dir = "out";
  bool force = false;
  std::optional<std::size_t> threads;
};

ExperimentConfig load_config(const Common& opts) {
  std::optional<Preset> preset;
  if (!opts.preset.empty()) {
    try {
      preset = parse_preset(opts.preset);
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
  }
  ExperimentConfig cfg = opts.config ? parse_config_file(*opts.config, preset)
                                     : parse_config_text("{}", preset);
  if (auto s = seed_override(opts.seed)) cfg.base_seed = *s;
  if (opts.threads) cfg.threads = *opts.threads;
  return cfg;
}

int cmd_estimate(const Common& opts, const std::optional<std::string>& design_csv,
                 const std::optional<std::string>& response_csv, double eta_tilde,
                 std::optional<double> w_min, double eps, std::optional<double> maxnoise) {
  DenseMatrix X;
  RealVector y;
  std::optional<SparseSignal> truth;
  std::size_t k = 0;
  if (design_csv || response_csv) {
    if (!design_csv || !response_csv) throw ConfigError("--design-csv and --response-csv go together");
    X = matrix_from_csv(*design_csv);
    y = vector_from_csv(*response_csv);
    if (y.size() != X.rows()) throw DimensionError("response length does not match design rows");
  } else {
    const ExperimentConfig cfg = load_config(opts);
    TrialInstance inst = generate_instance(cfg, axis_points(cfg).front(), 0);
    if (!maxnoise) maxnoise = max_noise_stat(inst.X, inst.xi);
    if (!w_min) w_min = inst.truth.w_min;
    k = inst.truth.support.size();
    truth = inst.truth;
    X = std::move(inst.X);
    y = std::move(inst.y);
  }

  const WmaxEstimate est = estimate_wmax(X, y, eta_tilde);
  nlohmann::ordered_json j;
  j["n"] = X.rows();
  j["d"] = X.cols();
  j["z_hat"] = est.z_hat;
  j["f_max"] = est.f_max;
  j["eta_tilde"] = est.eta_tilde;
  j["eta"] = est.degenerate ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(est.eta);
  j["degenerate"] = est.degenerate;
  if (truth) j["w_max"] = truth->w_max;
  if (w_min && !est.degenerate) {
    if (k == 0) k = X.cols();
    const RecommendedSettings rs =
        recommended_settings(est.z_hat, *w_min, eps, X.cols(), k, maxnoise.value_or(0.0));
    j["budgets"] = {{"w_min", *w_min},
                    {"eps", eps},
                    {"maxnoise", maxnoise.value_or(0.0)},
                    {"kappa_eff", rs.kappa_eff},
                    {"delta", rs.delta_budget},
                    {"alpha", rs.alpha_budget},
                    {"eta", rs.eta_budget},
                    {"t_alg1", rs.t_budget_alg1},
                    {"t_alg2", rs.t_budget_alg2}};
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

void write_trajectory(std::ostream& os, const TrialInstance& inst, const Trajectory& traj,
                      const std::string& label) {
  for (const Snapshot& s : traj.snapshots) {
    double l2 = 0.0;
    double off = 0.0;
    std::vector<bool> on(s.w.size(), false);
    for (std::size_t j : inst.truth.support) on[j] = true;
    for (std::size_t j = 0; j < s.w.size(); ++j) {
      const double diff = s.w[j] - inst.truth.w_star[j];
      l2 += diff * diff;
      if (!on[j]) off = std::max(off, std::abs(s.w[j]));
    }
    const std::string prefix = label + ',' + std::to_string(s.t) + ',';
    os << prefix << "l2_error_sq," << format_double(l2) << '\n';
    os << prefix << "linf_off_support," << format_double(off) << '\n';
    for (std::size_t j : inst.truth.support) {
      os << prefix << "w_" << j << ',' << format_double(s.w[j]) << '\n';
    }
  }
}

int cmd_run(const Common& opts, std::size_t trial, std::optional<std::size_t> point_index,
            bool trajectory) {
  const ExperimentConfig cfg = load_config(opts);
  const std::vector<AxisPoint> points = axis_points(cfg);
  std::vector<AxisPoint> chosen;
  if (point_index) {
    if (*point_index >= points.size()) {
      throw ConfigError("--point " + std::to_string(*point_index) + " out of range (" +
                        std::to_string(points.size()) + " axis points)");
    }
    chosen.push_back(points[*point_index]);
  } else {
    chosen = points;
  }

  const fs::path dir = opts.output_dir;
  prepare_dir(dir);
  std::vector<TrialRecord> records;
  for (const AxisPoint& p : chosen) {
    auto rs = run_trial(cfg, p, trial);
    records.insert(records.end(), rs.begin(), rs.end());
  }
  const fs::path trials_path = dir / "trials.csv";
  std::ofstream out = open_output(trials_path, opts.force);
  write_trial_csv(out, records);
  finish(out, trials_path);

  if (trajectory) {
    const fs::path traj_path = dir / "trajectory.csv";
    std::ofstream tout = open_output(traj_path, opts.force);
    tout << "axis_value,t,series,value\n";
    for (const AxisPoint& p : chosen) {
      const TrialInstance inst = generate_instance(cfg, p, trial);
      const DescentConfig dc = descent_config_for(inst);
      Trajectory traj;
      try {
        traj = cfg.algorithm == Algorithm::alg1 ? run_alg1(inst.X, inst.y, dc) : run_alg2(inst.X, inst.y, dc);
      } catch (const DivergenceError& e) {
        traj = e.partial();
      }
      write_trajectory(tout, inst, traj, p.label);
    }
    finish(tout, traj_path);
  }
  std::cerr << "wrote " << records.size() << " records to " << trials_path.string() << "\n";
  return 0;
}

int cmd_sweep(const Common& opts) {
  const ExperimentConfig cfg = load_config(opts);
  const fs::path dir = opts.output_dir;
  prepare_dir(dir);
  // Refuse early, before spending the sweep's runtime.
  for (const char* name : {"trials.csv", "summary.csv", "config.json"}) {
    if (fs::exists(dir / name) && !opts.force) {
      throw IoError("'" + (dir / name).string() + "' already exists (pass --force to overwrite)");
    }
  }
  const SweepResult res = run_sweep(cfg);

  const fs::path cfg_path = dir / "config.json";
  std::ofstream cout_ = open_output(cfg_path, true);
  cout_ << serialize(cfg);
  finish(cout_, cfg_path);

  const fs::path trials_path = dir / "trials.csv";
  std::ofstream tout = open_output(trials_path, true);
  write_trial_csv(tout, res.records);
  finish(tout, trials_path);

  const fs::path summary_path = dir / "summary.csv";
  std::ofstream sout = open_output(summary_path, true);
  write_summary_csv(sout, res.summaries);
  finish(sout, summary_path);

  std::size_t failed = 0;
  for (const auto& r : res.records) failed += r.failed ? 1 : 0;
  std::cerr << "wrote " << res.summaries.size() << " summary rows to " << summary_path.string();
  if (failed > 0) std::cerr << " (" << failed << " failed records excluded)";
  std::cerr << "\n";
  return 0;
}

int cmd_lemmas(const Common& opts, std::size_t cases, const std::vector<std::string>& only) {
  dynamics::LemmaSuiteOptions lo;
  lo.cases = cases;
  if (auto s = seed_override(opts.seed)) lo.seed = *s;
  std::vector<dynamics::PropertyResult> results;
  if (only.empty()) {
    results = dynamics::run_lemma_suite(lo);
  } else {
    for (const auto& name : only) results.push_back(dynamics::run_lemma_property(name, lo));
  }

  const fs::path dir = opts.output_dir;
  prepare_dir(dir);
  const fs::path path = dir / "lemmas.csv";
  std::ofstream out = open_output(path, opts.force);
  out << "property,cases,failures,result,first_failure\n";
  bool all = true;
  for (const auto& r : results) {
    out << r.name << ',' << r.cases << ',' << r.failures << ',' << (r.passed() ? "pass" : "fail")
        << ',' << csv_quote(r.first_failure) << '\n';
    std::cerr << (r.passed() ? "PASS " : "FAIL ") << r.name << " (" << r.failures << "/" << r.cases
              << ")\n";
    all = all && r.passed();
  }
  finish(out, path);
  return all ? 0 : 1;
}

// Concatenates summary CSVs with a leading source column.
int cmd_report(const Common& opts, const std::vector<std::string>& inputs, const std::string& output) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p = in;
    if (fs::is_directory(p)) {
      if (!fs::exists(p / "summary.csv")) throw IoError("no summary.csv in '" + p.string() + "'");
      files.push_back(p / "summary.csv");
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      throw IoError("cannot read '" + p.string() + "'");
    }
  }
  const fs::path out_path = output.empty() ? fs::path(opts.output_dir) / "index.csv" : fs::path(output);
  if (out_path.has_parent_path()) prepare_dir(out_path.parent_path());
  std::ofstream out = open_output(out_path, opts.force);
  std::string header;
  for (const fs::path& f : files) {
    std::ifstream in(f);
    if (!in) throw IoError("cannot read '" + f.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("'" + f.string() + "' is empty");
    if (header.empty()) {
      header = line;
      out << "source," << header << '\n';
    } else if (line != header) {
      throw ConfigError("'" + f.string() + "' has a different header than the first input");
    }
    while (std::getline(in, line)) {
      if (!line.empty()) out << csv_quote(f.string()) << ',' << line << '\n';
    }
  }
  finish(out, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse recovery by implicitly regularized gradient descent"};
  app.require_subcommand(1);

  Common opts;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) {
      sub->add_option("-c,--config", opts.config, "JSON experiment config");
      sub->add_option("--preset", opts.preset, "desk or paper (overrides the config)");
      sub->add_option("--threads", opts.threads, "worker threads (0: all cores)");
    }
    sub->add_option("--seed", opts.seed, "base seed (beats IMPLICIT_SPARSE_SEED)");
    sub->add_option("-o,--output-dir", opts.output_dir, "output directory");
    sub->add_flag("--force", opts.force, "overwrite existing outputs");
  };

  auto* estimate = app.add_subcommand("estimate", "estimate w_max and print step/initialization budgets");
  std::optional<std::string> design_csv;
  std::optional<std::string> response_csv;
  double eta_tilde = kDefaultEtaTilde;
  std::optional<double> w_min;
  double eps = 0.01;
  std::optional<double> maxnoise;
  add_common(estimate, true);
  estimate->add_option("--design-csv", design_csv, "design matrix, one row per line");
  estimate->add_option("--response-csv", response_csv, "response, one value per line");
  estimate->add_option("--eta-tilde", eta_tilde, "probe step size");
  estimate->add_option("--w-min", w_min, "smallest signal magnitude, for the budgets");
  estimate->add_option("--eps", eps, "target accuracy, for the budgets");
  estimate->add_option("--maxnoise", maxnoise, "||X^T xi / n||_inf, for the budgets");

  auto* run = app.add_subcommand("run", "run one trial and write trials.csv");
  std::size_t trial = 0;
  std::optional<std::size_t> point;
  bool trajectory = false;
  add_common(run, true);
  run->add_option("--trial", trial, "trial index");
  run->add_option("--point", point, "axis point index (default: every point)");
  run->add_flag("--trajectory", trajectory, "also write trajectory.csv");

  auto* sweep = app.add_subcommand("sweep", "run a sweep and write trials.csv and summary.csv");
  add_common(sweep, true);

  auto* lemmas = app.add_subcommand("lemmas", "run the scalar-dynamics property suite");
  std::size_t cases = 200;
  std::vector<std::string> only;
  add_common(lemmas, false);
  lemmas->add_option("--cases", cases, "cases per property")->check(CLI::PositiveNumber);
  lemmas->add_option("--property", only, "run only these properties");

  auto* report = app.add_subcommand("report", "collate summary CSVs into index.csv");
  std::vector<std::string> inputs;
  std::string report_out;
  report->add_option("inputs", inputs, "sweep directories or summary CSVs")->required();
  report->add_option("-o,--output-dir", opts.output_dir, "output directory");
  report->add_option("--output", report_out, "output file (default <output-dir>/index.csv)");
  report->add_flag("--force", opts.force, "overwrite existing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (estimate->parsed()) return cmd_estimate(opts, design_csv, response_csv, eta_tilde, w_min, eps, maxnoise);
    if (run->parsed()) return cmd_run(opts, trial, point, trajectory);
    if (sweep->parsed()) return cmd_sweep(opts);
    if (lemmas->parsed()) return cmd_lemmas(opts, cases, only);
    if (report->parsed()) return cmd_report(opts, inputs, report_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
