// Command-line front end: acov, loglik, grad, fisher, simulate, fit, study, bench.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <cwhittle/cwhittle.hpp>

namespace {

using json = nlohmann::json;
using namespace cwhittle;

enum class Kind { integer, unsigned_integer, real, list, words, text, flag };

struct Key {
  const char* flag;
  const char* key;
  Kind kind;
  const char* help;
};

// Every option, keyed the same way in the JSON config file.
const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      {"--model", "model", Kind::text, "spectral model: ar1, expdecay, white"},
      {"--theta", "theta", Kind::list, "parameters, comma separated"},
      {"--theta0", "theta0", Kind::list, "starting point for fit/study"},
      {"--theta-true", "theta_true", Kind::list, "true parameters used to simulate data"},
      {"--n", "n", Kind::integer, "series length"},
      {"--r", "r", Kind::integer, "rank of the Whittle correction"},
      {"--p", "p", Kind::integer, "oversampling"},
      {"--seed", "seed", Kind::unsigned_integer, "random seed"},
      {"--k0", "k0", Kind::integer, "crossover lag between quadrature and expansion"},
      {"--order", "order", Kind::integer, "asymptotic expansion order"},
      {"--no-split", "no_split", Kind::flag, "do not split the tail expansion at rough points"},
      {"--method", "method", Kind::text, "whittle, debiased, dplr, dense"},
      {"--methods", "methods", Kind::words, "methods for study, comma separated"},
      {"--mode", "mode", Kind::text, "fisher mode: exact or stochastic"},
      {"--L", "L", Kind::integer, "probe vectors for the stochastic Fisher"},
      {"--count", "count", Kind::integer, "number of simulated series"},
      {"--trials", "trials", Kind::integer, "study trials"},
      {"--y-file", "y_file", Kind::text, "data file: one value per line, or CSV with one column per series"},
      {"--threads", "threads", Kind::integer, "worker threads (default: hardware concurrency)"},
      {"--out", "out", Kind::text, "write output here instead of stdout"},
      {"--reps", "reps", Kind::integer, "bench repetitions per size (median reported)"},
      {"--n-min", "n_min", Kind::integer, "bench smallest n (power of two)"},
      {"--n-max", "n_max", Kind::integer, "bench largest n (power of two)"},
      {"--max-iterations", "max_iterations", Kind::integer, "optimizer iteration cap"},
      {"--standard-errors", "standard_errors", Kind::flag, "report inverse-Fisher standard errors"},
  };
  return k;
}

const std::map<std::string, std::vector<std::string>>& subcommand_keys() {
  static const std::map<std::string, std::vector<std::string>> m = {
      {"acov", {"model", "theta", "n", "k0", "order", "no_split", "out"}},
      {"loglik", {"model", "theta", "n", "r", "p", "seed", "k0", "order", "no_split", "method", "y_file", "threads",
                  "out"}},
      {"grad", {"model", "theta", "n", "r", "p", "seed", "k0", "order", "no_split", "method", "y_file", "threads",
                "out"}},
      {"fisher", {"model", "theta", "n", "r", "p", "seed", "k0", "order", "no_split", "method", "mode", "L",
                  "threads", "out"}},
      {"simulate", {"model", "theta", "n", "count", "seed", "k0", "order", "no_split", "threads", "out"}},
      {"fit", {"model", "theta", "theta0", "theta_true", "n", "r", "p", "seed", "k0", "order", "no_split", "method",
               "y_file", "max_iterations", "standard_errors", "threads", "out"}},
      {"study", {"model", "theta0", "theta_true", "n", "r", "p", "seed", "k0", "order", "no_split", "methods",
                 "trials", "max_iterations", "threads", "out"}},
      {"bench", {"model", "theta", "r", "p", "seed", "n_min", "n_max", "reps", "L", "threads", "out"}},
  };
  return m;
}

const char* summary(const std::string& name) {
  static const std::map<std::string, const char*> m = {
      {"acov", "autocovariance table as CSV (lag,h,method)"},
      {"loglik", "negative log-likelihood as JSON"},
      {"grad", "gradient of the negative log-likelihood as JSON"},
      {"fisher", "expected Fisher information as JSON"},
      {"simulate", "simulated series as CSV, one column per series"},
      {"fit", "maximum likelihood fit as JSON"},
      {"study", "repeated simulate-and-fit study as CSV"},
      {"bench", "timing sweep over dyadic n as CSV"},
  };
  return m.at(name);
}

[[noreturn]] void usage_error(const std::string& msg) { fail(ErrorKind::usage, msg); }

double to_real(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    usage_error("option " + key + ": not a number: '" + s + "'");
  }
}

long long to_integer(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    usage_error("option " + key + ": not an integer: '" + s + "'");
  }
}

std::vector<std::string> split_commas(const std::vector<std::string>& parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) {
    std::stringstream ss(p);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
  }
  return out;
}

json flag_value(const Key& k, const std::vector<std::string>& raw) {
  switch (k.kind) {
    case Kind::flag:
      return true;
    case Kind::integer:
      return to_integer(raw.back(), k.flag);
    case Kind::unsigned_integer: {
      const long long v = to_integer(raw.back(), k.flag);
      if (v < 0) usage_error(std::string("option ") + k.flag + " must be non-negative");
      return static_cast<std::uint64_t>(v);
    }
    case Kind::real:
      return to_real(raw.back(), k.flag);
    case Kind::list: {
      json arr = json::array();
      for (const auto& s : split_commas(raw)) arr.push_back(to_real(s, k.flag));
      return arr;
    }
    case Kind::words: {
      json arr = json::array();
      for (const auto& s : split_commas(raw)) arr.push_back(s);
      return arr;
    }
    case Kind::text:
      return raw.back();
  }
  return nullptr;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::usage, "cannot open config file '" + path + "'");
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    fail(ErrorKind::usage, "config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) fail(ErrorKind::usage, "config file must hold a JSON object");
  if (!cfg.contains("schema") || cfg["schema"] != 1) fail(ErrorKind::usage, "config file needs \"schema\": 1");
  cfg.erase("schema");
  for (const auto& [key, _] : cfg.items()) {
    const bool known = std::any_of(keys().begin(), keys().end(), [&](const Key& k) { return key == k.key; });
    if (!known) fail(ErrorKind::usage, "unknown config key '" + key + "'");
  }
  return cfg;
}

// Typed view of the merged settings.
class Settings {
 public:
  explicit Settings(json j) : j_(std::move(j)) {}

  bool has(const char* key) const { return j_.contains(key) && !j_[key].is_null(); }

  template <class T>
  T get(const char* key, T fallback) const {
    if (!has(key)) return fallback;
    try {
      return j_[key].get<T>();
    } catch (const json::exception&) {
      usage_error(std::string("setting '") + key + "' has the wrong type");
    }
  }

  template <class T>
  T need(const char* key) const {
    if (!has(key)) usage_error(std::string("missing required setting '") + key + "'");
    return get<T>(key, T{});
  }

  std::vector<double> list(const char* key) const { return need<std::vector<double>>(key); }

  long size(const char* key) const {
    const long v = need<long>(key);
    if (v < 1) usage_error(std::string(key) + " must be positive");
    return v;
  }

 private:
  json j_;
};

int default_threads() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

QuadratureConfig quadrature_from(const Settings& s) {
  QuadratureConfig q;
  q.crossover_lag = s.get<int>("k0", q.crossover_lag);
  q.expansion_order = s.get<int>("order", q.expansion_order);
  q.split_expansion = !s.get<bool>("no_split", false);
  return q;
}

AssemblyConfig assembly_from(const Settings& s) {
  AssemblyConfig a;
  a.oversampling = s.get<int>("p", a.oversampling);
  a.seed = s.get<std::uint64_t>("seed", 0);
  a.quadrature = quadrature_from(s);
  a.threads = s.get<int>("threads", default_threads());
  return a;
}

std::shared_ptr<const SpectralModel> model_from(const Settings& s) { return make_model(s.need<std::string>("model")); }

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string format_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::vector<double>> read_columns(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::usage, "cannot open data file '" + path + "'");
  std::vector<std::vector<double>> cols;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& c : cells) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(c, &pos));
        if (pos != c.size() && c.find_first_not_of(" \t", pos) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      fail(ErrorKind::usage, "data file '" + path + "' has a non-numeric row: " + line);
    }
    first = false;
    if (cols.empty()) cols.resize(row.size());
    if (row.size() != cols.size()) fail(ErrorKind::usage, "data file '" + path + "' has ragged rows");
    for (std::size_t c = 0; c < row.size(); ++c) cols[c].push_back(row[c]);
  }
  if (cols.empty() || cols[0].empty()) fail(ErrorKind::usage, "data file '" + path + "' holds no data");
  return cols;
}

Eigen::MatrixXd simulate_series(const SpectralModel& model, const std::vector<double>& theta, Eigen::Index n,
                                Eigen::Index count, std::uint64_t seed, const QuadratureConfig& q, int threads) {
  const AcovTable h = acov_hybrid(model, theta, n, q);
  try {
    return circulant_embedding_sample(h.values, n, count, seed, threads);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::embedding) throw;
    warn("circulant embedding is not nonnegative; falling back to Cholesky sampling");
    return cholesky_sample(h.values, n, count, seed);
  }
}

// Data for loglik/grad/fit: the first column of --y-file, or one simulated
// series at the given parameters.
Eigen::VectorXd data_from(const Settings& s, const SpectralModel& model, const char* theta_key) {
  if (s.has("y_file")) {
    const auto cols = read_columns(s.need<std::string>("y_file"));
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(cols[0].data(), static_cast<Eigen::Index>(cols[0].size()));
    if (s.has("n") && s.size("n") != y.size()) usage_error("n does not match the data file length");
    return y;
  }
  return simulate_series(model, s.list(theta_key), s.size("n"), 1, s.get<std::uint64_t>("seed", 0),
                         quadrature_from(s), 1)
      .col(0);
}

json header(const Settings& s, Eigen::Index n, int r) {
  json out;
  out["n"] = n;
  out["r"] = r;
  out["seed"] = s.get<std::uint64_t>("seed", 0);
  return out;
}

std::vector<Eigen::MatrixXd> dense_derivatives(const SpectralModel& model, const std::vector<double>& theta,
                                               Eigen::Index n, const QuadratureConfig& q) {
  std::vector<Eigen::MatrixXd> out;
  for (int j = 0; j < model.param_count(); ++j)
    out.push_back(dense::dense_covariance(acov_hybrid(SpectralComponent(model, theta, j), n, q).values, n));
  return out;
}

void run_acov(const Settings& s, std::ostream& os) {
  const auto model = model_from(s);
  const Eigen::Index n = s.size("n");
  const AcovTable t = acov_hybrid(*model, s.list("theta"), n, quadrature_from(s));
  os << "lag,h,method\n";
  for (Eigen::Index k = 0; k < n; ++k) os << k << ',' << format_real(t.values[k]) << ',' << t.method(k) << '\n';
}

void run_loglik(const Settings& s, std::ostream& os) {
  const auto model = model_from(s);
  const auto theta = s.list("theta");
  const Eigen::VectorXd y = data_from(s, *model, "theta");
  const Eigen::Index n = y.size();
  const FitMethod method = parse_fit_method(s.get<std::string>("method", "dplr"));
  const int r = s.get<int>("r", 0);
  const AssemblyConfig cfg = assembly_from(s);
  json out = header(s, n, r);
  out["method"] = to_string(method);
  json timings;
  auto t0 = std::chrono::steady_clock::now();
  double value = 0.0;
  switch (method) {
    case FitMethod::whittle:
      value = whittle_nll(*model, theta, y);
      break;
    case FitMethod::debiased:
      value = debiased_whittle_nll(*model, theta, y, cfg.quadrature);
      break;
    case FitMethod::dense:
      value = dense::toeplitz_exact_nll(acov_hybrid(*model, theta, n, cfg.quadrature).values, y);
      break;
    case FitMethod::dplr: {
      const auto opr = assemble_correction(*model, theta, n, r, cfg);
      timings["assemble_ms"] = ms_since(t0);
      out["rank"] = opr.eig().rank();
      const auto t1 = std::chrono::steady_clock::now();
      value = nll(opr, y);
      timings["nll_ms"] = ms_since(t1);
      break;
    }
  }
  timings["total_ms"] = ms_since(t0);
  out["value"] = value;
  out["timings"] = timings;
  os << out.dump(2) << '\n';
}

void run_grad(const Settings& s, std::ostream& os) {
  const auto model = model_from(s);
  const auto theta = s.list("theta");
  const Eigen::VectorXd y = data_from(s, *model, "theta");
  const Eigen::Index n = y.size();
  const FitMethod method = parse_fit_method(s.get<std::string>("method", "dplr"));
  const int r = s.get<int>("r", 0);
  const AssemblyConfig cfg = assembly_from(s);
  json out = header(s, n, r);
  out["method"] = to_string(method);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> g;
  double value = 0.0;
  switch (method) {
    case FitMethod::whittle:
      value = whittle_nll(*model, theta, y);
      g = whittle_gradient(*model, theta, y);
      break;
    case FitMethod::debiased:
      value = debiased_whittle_nll(*model, theta, y, cfg.quadrature);
      g = debiased_whittle_gradient(*model, theta, y, cfg.quadrature);
      break;
    case FitMethod::dense: {
      const Eigen::VectorXd h = acov_hybrid(*model, theta, n, cfg.quadrature).values;
      std::vector<Eigen::VectorXd> dh;
      for (int j = 0; j < model->param_count(); ++j)
        dh.push_back(acov_hybrid(SpectralComponent(*model, theta, j), n, cfg.quadrature).values);
      const auto d = dense::toeplitz_exact_gradient(h, dh, y);
      value = d.value;
      g = d.gradient;
      break;
    }
    case FitMethod::dplr: {
      const auto res = gradient(*model, theta, y, n, r, cfg);
      value = res.value;
      g = res.gradient;
      break;
    }
  }
  out["value"] = value;
  out["values"] = g;
  out["timings"] = {{"total_ms", ms_since(t0)}};
  os << out.dump(2) << '\n';
}

void run_fisher(const Settings& s, std::ostream& os) {
  const auto model = model_from(s);
  const auto theta = s.list("theta");
  const Eigen::Index n = s.size("n");
  const int r = s.get<int>("r", 0);
  const std::string mode = s.get<std::string>("mode", "exact");
  const std::string method = s.get<std::string>("method", "dplr");
  const AssemblyConfig cfg = assembly_from(s);
  json out = header(s, n, r);
  out["mode"] = mode;
  out["method"] = method;
  const auto t0 = std::chrono::steady_clock::now();
  Eigen::MatrixXd I;
  if (method == "dense") {
    if (mode != "exact") usage_error("the dense Fisher has no stochastic mode");
    const Eigen::MatrixXd S = dense::dense_covariance(acov_hybrid(*model, theta, n, cfg.quadrature).values, n);
    I = dense::dense_fisher(S, dense_derivatives(*model, theta, n, cfg.quadrature));
  } else if (method == "dplr") {
    if (mode == "exact") {
      I = fisher_exact(*model, theta, n, r, cfg);
    } else if (mode == "stochastic") {
      const int L = s.get<int>("L", 72);
      out["L"] = L;
      I = fisher_stochastic(*model, theta, n, r, L, s.get<std::uint64_t>("seed", 0), cfg);
    } else {
      usage_error("unknown fisher mode '" + mode + "'");
    }
  } else {
    usage_error("fisher supports --method dplr or dense");
  }
  json rows = json::array();
  for (Eigen::Index i = 0; i < I.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(I.cols()));
    for (Eigen::Index j = 0; j < I.cols(); ++j) row[static_cast<std::size_t>(j)] = I(i, j);
    rows.push_back(row);
  }
  out["values"] = rows;
  out["timings"] = {{"total_ms", ms_since(t0)}};
  os << out.dump(2) << '\n';
}

void run_simulate(const Settings& s, std::ostream& os) {
  const auto model = model_from(s);
  const Eigen::Index n = s.size("n");
  const Eigen::Index count = s.get<long>("count", 1);
  if (count < 1) usage_error("count must be positive");
  const Eigen::MatrixXd Y = simulate_series(*model, s.list("theta"), n, count, s.get<std::uint64_t>("seed", 0),
                                            quadrature_from(s), s.get<int>("threads", default_threads()));
  for (Eigen::Index c = 0; c < count; ++c) os << (c ? "," : "") << 'y' << c + 1;
  os << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < count; ++c) os << (c ? "," : "") << format_real(Y(i, c));
    os << '\n';
  }
}

FitConfig fit_config_from(const Settings& s) {
  FitConfig f;
  f.assembly = assembly_from(s);
  f.max_iterations = s.get<int>("max_iterations", f.max_iterations);
  f.standard_errors = s.get<bool>("standard_errors", false);
  return f;
}

void run_fit(const Settings& s, std::ostream& os) {
  const auto model = model_from(s);
  const char* truth_key = s.has("theta_true") ? "theta_true" : "theta";
  const Eigen::VectorXd y = data_from(s, *model, truth_key);
  const std::vector<double> theta0 = s.has("theta0") ? s.list("theta0") : s.list("theta");
  const FitMethod method = parse_fit_method(s.get<std::string>("method", "dplr"));
  const int r = s.get<int>("r", 0);
  const FitConfig cfg = fit_config_from(s);
  const FitResult res = fit(method, *model, y, theta0, r, cfg);
  json out = header(s, y.size(), r);
  out["method"] = to_string(method);
  out["values"] = res.theta;
  out["nll"] = res.nll;
  out["converged"] = res.converged;
  out["iterations"] = res.iterations;
  out["evaluations"] = res.evaluations;
  out["gradient_norm"] = res.gradient_norm;
  if (!res.standard_errors.empty()) out["standard_errors"] = res.standard_errors;
  out["message"] = res.message;
  out["timings"] = {{"total_ms", 1000.0 * res.seconds},
                    {"per_evaluation_ms", res.evaluations > 0 ? 1000.0 * res.seconds / res.evaluations : 0.0}};
  os << out.dump(2) << '\n';
  if (!res.converged && res.iterations == 0 && res.evaluations == 0)
    fail(ErrorKind::numerical, "fit failed: " + res.message);
}

void run_study(const Settings& s, std::ostream& os) {
  const auto model = model_from(s);
  const auto truth = s.list("theta_true");
  const std::vector<double> theta0 = s.has("theta0") ? s.list("theta0") : truth;
  const Eigen::Index n = s.size("n");
  const int trials = s.get<int>("trials", 1);
  std::vector<FitMethod> methods;
  for (const auto& m : s.get<std::vector<std::string>>("methods", {"whittle", "dplr", "dense"}))
    methods.push_back(parse_fit_method(m));
  StudyConfig cfg;
  cfg.fit = fit_config_from(s);
  cfg.fit.assembly.threads = 1;
  cfg.r = s.get<int>("r", cfg.r);
  cfg.threads = s.get<int>("threads", default_threads());
  const StudyResult res = estimator_study(*model, truth, n, trials, methods, s.get<std::uint64_t>("seed", 0),
                                          theta0, cfg);
  const std::size_t p = truth.size();
  os << "trial,method";
  for (std::size_t j = 0; j < p; ++j) os << ",theta" << j + 1;
  os << ",nll,converged,iterations,seconds\n";
  for (const auto& row : res.rows) {
    os << row.trial << ',' << to_string(row.result.method);
    for (double v : row.result.theta) os << ',' << format_real(v);
    os << ',' << format_real(row.result.nll) << ',' << (row.result.converged ? 1 : 0) << ','
       << row.result.iterations << ',' << format_real(row.result.seconds) << '\n';
  }
  auto summary_row = [&](const char* label, const StudySummary& sm, const std::vector<double>& v) {
    if (v.empty()) return;
    os << label << ',' << to_string(sm.method);
    for (double x : v) os << ',' << format_real(x);
    os << ",,,,\n";
  };
  for (const auto& sm : res.summary) {
    summary_row("bias", sm, sm.bias);
    summary_row("sd", sm, sm.sd);
    summary_row("max_abs_diff_from_mle", sm, sm.max_abs_diff_from_mle);
  }
  if (res.used_dense_sampler) warn("study data were drawn with the Cholesky sampler");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void run_bench(const Settings& s, std::ostream& os) {
  const auto model = model_from(s);
  const auto theta = s.list("theta");
  const int r = s.get<int>("r", 64);
  const long n_min = s.get<long>("n_min", 1L << 10);
  const long n_max = s.get<long>("n_max", 1L << 14);
  const int reps = s.get<int>("reps", 3);
  const int L = s.get<int>("L", 8);
  if (n_min < 2 || n_max < n_min || reps < 1) usage_error("bench needs 2 <= n_min <= n_max and reps >= 1");
  AssemblyConfig cfg = assembly_from(s);
  os << "n,r,assemble_ms,nll_ms,grad_ms,fisher_ms\n";
  for (long n = n_min; n <= n_max; n *= 2) {
    prepare_plans(static_cast<int>(n));
    prepare_plans(static_cast<int>(2 * n - 1));
    const Eigen::VectorXd y = standard_normal_matrix(n, 1, cfg.seed + static_cast<std::uint64_t>(n)).col(0);
    std::vector<double> ta, tn, tg, tf;
    for (int rep = 0; rep < reps; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      const auto opr = assemble_correction(*model, theta, n, r, cfg);
      opr.solver();
      ta.push_back(ms_since(t0));
      t0 = std::chrono::steady_clock::now();
      volatile double v = nll(opr, y);
      (void)v;
      tn.push_back(ms_since(t0));
      t0 = std::chrono::steady_clock::now();
      gradient(*model, theta, y, n, r, cfg);
      tg.push_back(ms_since(t0));
      t0 = std::chrono::steady_clock::now();
      fisher_stochastic(*model, theta, n, r, L, cfg.seed, cfg);
      tf.push_back(ms_since(t0));
    }
    os << n << ',' << r << ',' << format_real(median(ta)) << ',' << format_real(median(tn)) << ','
       << format_real(median(tg)) << ',' << format_real(median(tf)) << '\n';
  }
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage:
    case ErrorKind::config:
    case ErrorKind::parameter_domain:
    case ErrorKind::size:
    case ErrorKind::capability:
      return 2;
    default:
      return 1;
  }
}

void report(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corrected Whittle likelihoods for stationary Gaussian time series"};
  app.require_subcommand(1);
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, wanted] : subcommand_keys()) {
    CLI::App* sub = app.add_subcommand(name, summary(name));
    sub->add_option("--config", "JSON config file with \"schema\": 1; flags override it")->type_name("FILE");
    for (const auto& k : keys()) {
      if (std::find(wanted.begin(), wanted.end(), k.key) == wanted.end()) continue;
      if (k.kind == Kind::flag)
        sub->add_flag(k.flag, k.help);
      else
        sub->add_option(k.flag, k.help)->expected(1);
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report("usage", e.what());
    return 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    json merged = json::object();
    if (auto* c = sub->get_option("--config"); c->count() > 0) merged = load_config(c->results().back());
    for (const auto& k : keys()) {
      CLI::Option* opt = nullptr;
      try {
        opt = sub->get_option(k.flag);
      } catch (const CLI::OptionNotFound&) {
        continue;
      }
      if (opt->count() > 0) merged[k.key] = flag_value(k, opt->results());
    }
    const Settings settings(merged);

    std::ofstream file;
    std::ostream* os = &std::cout;
    if (settings.has("out")) {
      file.open(settings.need<std::string>("out"));
      if (!file) fail(ErrorKind::usage, "cannot open output file");
      os = &file;
    }

    const std::string name = sub->get_name();
    if (name == "acov") run_acov(settings, *os);
    else if (name == "loglik") run_loglik(settings, *os);
    else if (name == "grad") run_grad(settings, *os);
    else if (name == "fisher") run_fisher(settings, *os);
    else if (name == "simulate") run_simulate(settings, *os);
    else if (name == "fit") run_fit(settings, *os);
    else if (name == "study") run_study(settings, *os);
    else if (name == "bench") run_bench(settings, *os);
    os->flush();
    return 0;
  } catch (const Error& e) {
    report(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report("internal", e.what());
    return 1;
  }
}
