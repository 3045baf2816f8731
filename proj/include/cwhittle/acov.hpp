#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dft.hpp"
#include "errors.hpp"
#include "quadrature.hpp"
#include "spectral_model.hpp"

namespace cwhittle {

template <class F>
concept SpectralFunction = requires(const F& f, double w, Side s, int m, double* out) {
  { f.value(w) } -> std::convertible_to<double>;
  f.derivatives(w, s, m, out);
  { f.rough_points() } -> std::convertible_to<std::span<const double>>;
  { f.symmetric() } -> std::convertible_to<bool>;
  { f.max_deriv_order() } -> std::convertible_to<int>;
  { f.nonnegative() } -> std::convertible_to<bool>;
};

struct QuadratureConfig {
  double rel_tol = 1e-13;
  double abs_tol = 1e-15;
  int crossover_lag = 2000;
  int expansion_order = 5;
  // Cap on adaptive bisections beyond the initial oscillation-resolving grid.
  int max_panels = 10000;
  // When false the tail expansion ignores rough points and only uses the
  // endpoints +-1/2.
  bool split_expansion = true;

  void validate(int max_order) const {
    if (!(rel_tol > 0.0)) fail(ErrorKind::config, "rel_tol must be positive");
    if (!(abs_tol >= 0.0)) fail(ErrorKind::config, "abs_tol must be non-negative");
    if (crossover_lag < 1) fail(ErrorKind::config, "crossover lag must be at least 1");
    if (expansion_order < 1) fail(ErrorKind::config, "expansion order must be at least 1");
    if (expansion_order > max_order)
      fail(ErrorKind::capability, "expansion order exceeds the model's derivative capability");
    if (max_panels < 1) fail(ErrorKind::config, "max_panels must be positive");
  }
};

struct AcovTable {
  enum class Source { hybrid, gauss_legendre, closed_form };

  Eigen::VectorXd values;
  int crossover_lag = 0;
  int expansion_order = 0;
  double max_imag_residual = 0.0;
  // Set by the Gauss-Legendre reference when fewer than 4n nodes were used.
  bool undersampled = false;
  Source source = Source::hybrid;

  Eigen::Index size() const { return values.size(); }
  bool from_expansion(Eigen::Index k) const { return source == Source::hybrid && k > crossover_lag; }
  const char* method(Eigen::Index k) const {
    if (source == Source::gauss_legendre) return "gauss_legendre";
    if (source == Source::closed_form) return "closed_form";
    return from_expansion(k) ? "expansion" : "quad";
  }
};

namespace detail {

inline cplx unit_phase(double turns) {
  const double t = turns - std::round(turns);
  if (t == 0.0) return {1.0, 0.0};
  if (t == 0.5 || t == -0.5) return {-1.0, 0.0};
  if (t == 0.25) return {0.0, 1.0};
  if (t == -0.25) return {0.0, -1.0};
  return std::polar(1.0, 2.0 * std::numbers::pi * t);
}

// Breakpoints of the integration domain: the folded half [0, 1/2] for
// symmetric integrands, otherwise [-1/2, 1/2]; rough points are interior
// breakpoints.
template <SpectralFunction F>
std::vector<double> quadrature_breaks(const F& f) {
  std::vector<double> b;
  const bool fold = f.symmetric();
  b.push_back(fold ? 0.0 : -0.5);
  for (double x : f.rough_points())
    if (x > b.front() && x < 0.5) b.push_back(x);
  b.push_back(0.5);
  return b;
}

template <SpectralFunction F>
double checked_value(const F& f, double w) {
  const double v = f.value(w);
  if (std::isnan(v) || (f.nonnegative() && v < 0.0))
    fail(ErrorKind::model_validity, "spectral density is NaN or negative at frequency " + std::to_string(w));
  return v;
}

// Real parts of int f(w) e^{2 pi i k w} dw over the (possibly folded) domain
// for all lags 0..K simultaneously. Returns values with the fold factor
// already applied.
template <SpectralFunction F>
std::vector<double> fourier_integrals(const F& f, int K, const QuadratureConfig& cfg) {
  static const auto rule = GaussKronrod15::all_nodes();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const auto lags = static_cast<std::size_t>(K) + 1;
  const bool fold = f.symmetric();
  const double factor = fold ? 2.0 : 1.0;
  const std::vector<double> breaks = quadrature_breaks(f);

  // Probe lags used to estimate grid panel errors.
  std::vector<int> probes = {0, K / 4, K / 2, (3 * K) / 4, K};
  probes.erase(std::unique(probes.begin(), probes.end()), probes.end());

  // Global uniform grid of panels of width 1/N, a quarter period of lag K.
  const int N = std::max(4 * K, 64);
  const double width = 1.0 / N;
  const double hw = 0.5 * width;

  struct GridPanel {
    long j;
    std::array<double, 15> v;
    double err;
    bool excluded = false;
  };
  struct DirectPanel {
    double lo, hi;
    std::vector<double> k15;
    double err;
    bool active = true;
  };
  std::vector<GridPanel> grid;
  std::vector<DirectPanel> direct;
  double abs_integral = 0.0;

  auto make_direct = [&](double lo, double hi) {
    DirectPanel p{lo, hi, std::vector<double>(lags, 0.0), 0.0};
    std::vector<double> g7(lags, 0.0);
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    double mag = 0.0;
    for (const auto& nd : rule) {
      const double w = c + h * nd.x;
      const double v = checked_value(f, w);
      mag += nd.wk * std::abs(v);
      const cplx step = unit_phase(w);
      cplx z = 1.0;
      for (std::size_t k = 0; k < lags; ++k) {
        if ((k & 63u) == 0) z = unit_phase(static_cast<double>(k) * w);
        const double re = v * z.real();
        p.k15[k] += nd.wk * re;
        g7[k] += nd.wg * re;
        z *= step;
      }
    }
    double err = 0.0;
    for (std::size_t k = 0; k < lags; ++k) {
      p.k15[k] *= h;
      err = std::max(err, std::abs(p.k15[k] - h * g7[k]));
    }
    p.err = std::max(err, 50.0 * eps * mag * h);
    return std::make_pair(p, mag * h);
  };

  // Precomputed per-node phase factors for the probe lags.
  std::vector<std::array<cplx, 15>> probe_phase(probes.size());
  for (std::size_t q = 0; q < probes.size(); ++q)
    for (std::size_t i = 0; i < 15; ++i) probe_phase[q][i] = unit_phase(probes[q] * rule[i].x * hw);

  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    const long j0 = static_cast<long>(std::ceil(a * N));
    const long j1 = static_cast<long>(std::floor(b * N));
    if (j1 <= j0) {
      auto [p, mag] = make_direct(a, b);
      direct.push_back(std::move(p));
      abs_integral += mag;
      continue;
    }
    if (static_cast<double>(j0) / N > a) {
      auto [p, mag] = make_direct(a, static_cast<double>(j0) / N);
      direct.push_back(std::move(p));
      abs_integral += mag;
    }
    for (long j = j0; j < j1; ++j) {
      GridPanel gp{j, {}, 0.0};
      const double c = (j + 0.5) * width;
      double mag = 0.0;
      for (std::size_t i = 0; i < 15; ++i) {
        gp.v[i] = checked_value(f, c + hw * rule[i].x);
        mag += rule[i].wk * std::abs(gp.v[i]);
      }
      double err = 0.0;
      for (std::size_t q = 0; q < probes.size(); ++q) {
        const cplx centre = unit_phase(probes[q] * (j + 0.5) / N);
        cplx diff = 0.0;
        for (std::size_t i = 0; i < 15; ++i) diff += (rule[i].wk - rule[i].wg) * gp.v[i] * probe_phase[q][i];
        err = std::max(err, std::abs((centre * diff).real()) * hw);
      }
      gp.err = std::max(err, 50.0 * eps * mag * hw);
      abs_integral += mag * hw;
      grid.push_back(gp);
    }
    if (b > static_cast<double>(j1) / N) {
      auto [p, mag] = make_direct(static_cast<double>(j1) / N, b);
      direct.push_back(std::move(p));
      abs_integral += mag;
    }
  }

  // Adaptive refinement: bisect the panel with the largest error until the
  // summed estimate meets the tolerance.
  const double tol = std::max(cfg.abs_tol, cfg.rel_tol * factor * abs_integral);
  struct Entry {
    double err;
    bool is_grid;
    std::size_t index;
    bool operator<(const Entry& o) const { return err < o.err; }
  };
  std::priority_queue<Entry> heap;
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    heap.push({grid[i].err, true, i});
    total += grid[i].err;
  }
  for (std::size_t i = 0; i < direct.size(); ++i) {
    heap.push({direct[i].err, false, i});
    total += direct[i].err;
  }
  int refinements = 0;
  while (factor * total > tol && !heap.empty()) {
    const Entry e = heap.top();
    double lo, hi;
    if (e.is_grid) {
      lo = grid[e.index].j * width;
      hi = lo + width;
    } else {
      lo = direct[e.index].lo;
      hi = direct[e.index].hi;
    }
    const double mid = 0.5 * (lo + hi);
    if (refinements >= cfg.max_panels || !(mid > lo && mid < hi))
      throw IntegrationError("autocovariance quadrature did not converge", lo, hi, e.err);
    heap.pop();
    if (e.is_grid) {
      grid[e.index].excluded = true;
    } else {
      direct[e.index].active = false;
      direct[e.index].k15.clear();
      direct[e.index].k15.shrink_to_fit();
    }
    total -= e.err;
    for (auto [l, r] : {std::make_pair(lo, mid), std::make_pair(mid, hi)}) {
      auto [p, mag] = make_direct(l, r);
      total += p.err;
      heap.push({p.err, false, direct.size()});
      direct.push_back(std::move(p));
    }
    ++refinements;
  }

  // Grid panels: for each of the 15 node offsets one length-N transform sums
  // all panels for every lag at once.
  std::vector<double> out(lags, 0.0);
  if (!grid.empty()) {
    Eigen::VectorXcd buf(N);
    for (std::size_t i = 0; i < 15; ++i) {
      buf.setZero();
      for (const auto& gp : grid) {
        if (gp.excluded) continue;
        const long idx = ((gp.j % N) + N) % N;
        buf[idx] += gp.v[i];
      }
      fft_inplace(buf, +1);
      const double offset = 0.5 + 0.5 * rule[i].x;
      for (std::size_t k = 0; k < lags; ++k) {
        const cplx ph = unit_phase(static_cast<double>(k) * offset / N);
        out[k] += rule[i].wk * hw * (ph * buf[static_cast<Eigen::Index>(k)]).real();
      }
    }
  }
  for (const auto& p : direct) {
    if (!p.active) continue;
    for (std::size_t k = 0; k < lags; ++k) out[k] += p.k15[k];
  }
  for (auto& v : out) v *= factor;
  return out;
}

}  // namespace detail

// Large-lag asymptotic expansion of int S(w) e^{2 pi i k w} dw built from
// one-sided derivatives at the segment boundaries.
class TailExpansion {
 public:
  template <SpectralFunction F>
  TailExpansion(const F& f, int order, bool split_at_rough_points) : order_(order) {
    if (order < 1) fail(ErrorKind::usage, "expansion order must be at least 1");
    if (order - 1 > f.max_deriv_order())
      fail(ErrorKind::capability, "expansion needs derivatives beyond the model's capability");
    points_.push_back(-0.5);
    if (split_at_rough_points)
      for (double x : f.rough_points()) points_.push_back(x);
    points_.push_back(0.5);
    const auto m = static_cast<std::size_t>(order);
    std::vector<double> left(m), right(m);
    for (std::size_t p = 0; p < points_.size(); ++p) {
      const double x = points_[p];
      std::fill(left.begin(), left.end(), 0.0);
      std::fill(right.begin(), right.end(), 0.0);
      if (p > 0) f.derivatives(x, Side::left, order - 1, left.data());
      if (p + 1 < points_.size()) f.derivatives(x, Side::right, order - 1, right.data());
      std::vector<double> jump(m);
      for (std::size_t j = 0; j < m; ++j) jump[j] = left[j] - right[j];
      jumps_.push_back(std::move(jump));
    }
  }

  // Complex value before realification.
  cplx evaluate(long k) const {
    if (k < 1) fail(ErrorKind::usage, "asymptotic expansion needs lag k >= 1");
    const cplx base = 1.0 / cplx(0.0, -2.0 * std::numbers::pi * static_cast<double>(k));
    cplx sum = 0.0;
    for (std::size_t p = 0; p < points_.size(); ++p) {
      cplx inner = 0.0, c = base;
      for (int j = 0; j < order_; ++j) {
        inner += c * jumps_[p][static_cast<std::size_t>(j)];
        c *= base;
      }
      sum -= inner * detail::unit_phase(static_cast<double>(k) * points_[p]);
    }
    return sum;
  }

  int order() const { return order_; }

 private:
  int order_;
  std::vector<double> points_;
  std::vector<std::vector<double>> jumps_;
};

template <SpectralFunction F>
double asymptotic_tail(const F& f, long k, int order, bool split_at_rough_points = true) {
  return TailExpansion(f, order, split_at_rough_points).evaluate(k).real();
}

inline double asymptotic_tail(const SpectralModel& model, std::span<const double> theta, long k, int order,
                              bool split_at_rough_points = true) {
  return asymptotic_tail(SpectralComponent(model, {theta.begin(), theta.end()}), k, order, split_at_rough_points);
}

template <SpectralFunction F>
AcovTable acov_hybrid(const F& f, Eigen::Index n, const QuadratureConfig& cfg = {}) {
  if (n < 1) fail(ErrorKind::size, "autocovariance table needs n >= 1");
  cfg.validate(f.max_deriv_order());
  AcovTable t;
  t.source = AcovTable::Source::hybrid;
  t.crossover_lag = cfg.crossover_lag;
  t.expansion_order = cfg.expansion_order;
  t.values.resize(n);
  const int K = static_cast<int>(std::min<Eigen::Index>(cfg.crossover_lag, n - 1));
  const std::vector<double> low = detail::fourier_integrals(f, K, cfg);
  for (int k = 0; k <= K; ++k) t.values[k] = low[static_cast<std::size_t>(k)];
  if (n - 1 > K) {
    const TailExpansion tail(f, cfg.expansion_order, cfg.split_expansion);
    for (Eigen::Index k = K + 1; k < n; ++k) {
      const cplx z = tail.evaluate(static_cast<long>(k));
      t.values[k] = z.real();
      t.max_imag_residual = std::max(t.max_imag_residual, std::abs(z.imag()));
    }
  }
  if (f.nonnegative()) {
    const double h0 = t.values[0];
    if (!(h0 > 0.0)) fail(ErrorKind::model_validity, "autocovariance at lag 0 is not positive");
    for (Eigen::Index k = 1; k < n; ++k)
      if (std::abs(t.values[k]) > h0 * (1.0 + 1e-10))
        fail(ErrorKind::model_validity, "autocovariance exceeds its lag-0 value");
    if (t.max_imag_residual > 1e-12 * h0)
      fail(ErrorKind::numerical, "asymptotic expansion left a large imaginary residual");
  }
  return t;
}

inline AcovTable acov_hybrid(const SpectralModel& model, std::span<const double> theta, Eigen::Index n,
                             const QuadratureConfig& cfg = {}) {
  return acov_hybrid(SpectralComponent(model, {theta.begin(), theta.end()}), n, cfg);
}

// Reference table from a panelwise Gauss-Legendre rule summed directly,
// O(n M) for M = panels * nodes_per_panel nodes.
template <SpectralFunction F>
AcovTable acov_gauss_legendre_reference(const F& f, Eigen::Index n, int nodes_per_panel, int panels) {
  if (n < 1) fail(ErrorKind::size, "autocovariance table needs n >= 1");
  if (nodes_per_panel < 2) fail(ErrorKind::usage, "need at least two nodes per panel");
  const long total_nodes = static_cast<long>(nodes_per_panel) * panels;
  if (total_nodes < n) fail(ErrorKind::usage, "fewer quadrature nodes than lags; aliasing is certain");

  std::vector<double> breaks = {-0.5};
  for (double x : f.rough_points()) breaks.push_back(x);
  breaks.push_back(0.5);
  const std::size_t segments = breaks.size() - 1;
  if (static_cast<std::size_t>(panels) < segments)
    fail(ErrorKind::usage, "need at least one panel per smooth segment");

  // Largest-remainder allocation of panels to segments by length.
  std::vector<int> count(segments, 1);
  int left = panels - static_cast<int>(segments);
  std::vector<std::pair<double, std::size_t>> rem;
  for (std::size_t s = 0; s < segments; ++s) {
    const double share = left * (breaks[s + 1] - breaks[s]);
    const int whole = static_cast<int>(std::floor(share));
    count[s] += whole;
    rem.emplace_back(share - whole, s);
  }
  int assigned = 0;
  for (int c : count) assigned += c;
  std::sort(rem.begin(), rem.end(), std::greater<>());
  for (std::size_t i = 0; assigned < panels; ++i, ++assigned) count[rem[i % rem.size()].second] += 1;

  std::vector<double> x, w;
  gauss_legendre(nodes_per_panel, x, w);
  // Neumaier-compensated accumulation per lag.
  std::vector<double> acc(static_cast<std::size_t>(n), 0.0), comp(static_cast<std::size_t>(n), 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    const double len = (breaks[s + 1] - breaks[s]) / count[s];
    for (int p = 0; p < count[s]; ++p) {
      const double lo = breaks[s] + p * len;
      const double hi = (p + 1 == count[s]) ? breaks[s + 1] : lo + len;
      const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
      for (std::size_t q = 0; q < x.size(); ++q) {
        const double om = c + h * x[q];
        const double a = h * w[q] * detail::checked_value(f, om);
        const cplx step = detail::unit_phase(om);
        cplx z = 1.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          if ((k & 63) == 0) z = detail::unit_phase(static_cast<double>(k) * om);
          const auto i = static_cast<std::size_t>(k);
          const double term = a * z.real(), sum = acc[i] + term;
          comp[i] += std::abs(acc[i]) >= std::abs(term) ? (acc[i] - sum) + term : (term - sum) + acc[i];
          acc[i] = sum;
          z *= step;
        }
      }
    }
  }
  AcovTable t;
  t.source = AcovTable::Source::gauss_legendre;
  t.values.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) t.values[k] = acc[static_cast<std::size_t>(k)] + comp[static_cast<std::size_t>(k)];
  t.crossover_lag = static_cast<int>(n - 1);
  t.undersampled = total_nodes < 4 * n;
  return t;
}

inline AcovTable acov_gauss_legendre_reference(const SpectralModel& model, std::span<const double> theta,
                                               Eigen::Index n, int nodes_per_panel, int panels) {
  return acov_gauss_legendre_reference(SpectralComponent(model, {theta.begin(), theta.end()}), n, nodes_per_panel,
                                       panels);
}

}  // namespace cwhittle
