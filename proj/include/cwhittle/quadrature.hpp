#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>
#include <vector>

#include "errors.hpp"

namespace cwhittle {

// Gauss-Kronrod 7-15 rule on [-1, 1]. Index 7 is the centre node; the Gauss
// nodes are the odd indices 1, 3, 5 and the centre.
struct GaussKronrod15 {
  static constexpr std::array<double, 8> nodes = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> kronrod_weights = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> gauss_weights = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  // All 15 abscissae in ascending order with their Kronrod and Gauss weights
  // (Gauss weight 0 for Kronrod-only nodes).
  struct Node {
    double x, wk, wg;
  };
  static std::array<Node, 15> all_nodes() {
    std::array<Node, 15> out{};
    for (int i = 0; i < 7; ++i) {
      const double wg = (i % 2 == 1) ? gauss_weights[static_cast<std::size_t>(i / 2)] : 0.0;
      out[static_cast<std::size_t>(i)] = {-nodes[static_cast<std::size_t>(i)], kronrod_weights[static_cast<std::size_t>(i)], wg};
      out[static_cast<std::size_t>(14 - i)] = {nodes[static_cast<std::size_t>(i)], kronrod_weights[static_cast<std::size_t>(i)], wg};
    }
    out[7] = {0.0, kronrod_weights[7], gauss_weights[3]};
    return out;
  }
};

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) fail(ErrorKind::usage, "Gauss-Legendre rule needs at least one node");
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = (n == 1) ? 1.0 : n * (z * p1 - p0) / (z * z - 1.0);
    const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(n - 1 - i);
    x[lo] = -z;
    x[hi] = z;
    w[lo] = w[hi] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  if (n % 2 == 1) x[static_cast<std::size_t>(n / 2)] = 0.0;
}

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int panels = 0;
};

// Globally adaptive GK7-15 for a scalar integrand over [a, b], bisecting the
// panel with the largest |G7 - K15| until the summed estimate meets tol.
template <class F>
QuadratureResult adaptive_gk15(F&& f, double a, double b, double abs_tol, double rel_tol, int max_panels = 10000) {
  static const auto rule = GaussKronrod15::all_nodes();
  struct Panel {
    double a, b, k, err;
    bool operator<(const Panel& o) const { return err < o.err; }
  };
  auto eval = [&](double lo, double hi) {
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    double k = 0.0, g = 0.0, mag = 0.0;
    for (const auto& nd : rule) {
      const double v = f(c + h * nd.x);
      k += nd.wk * v;
      g += nd.wg * v;
      mag += nd.wk * std::abs(v);
    }
    // Floor the estimate at roundoff level so it is never chased below it.
    const double floor = 50.0 * 2.220446049250313e-16 * mag * h;
    return Panel{lo, hi, k * h, std::max(std::abs((k - g) * h), floor)};
  };
  std::priority_queue<Panel> heap;
  Panel first = eval(a, b);
  heap.push(first);
  double total = first.k, err = first.err;
  int count = 1;
  if (!std::isfinite(total) || !std::isfinite(err))
    throw IntegrationError("integrand is not finite on the interval", a, b, err);
  while (err > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (count >= max_panels) {
      const Panel& worst = heap.top();
      throw IntegrationError("adaptive quadrature did not converge", worst.a, worst.b, worst.err);
    }
    Panel p = heap.top();
    heap.pop();
    const double mid = 0.5 * (p.a + p.b);
    Panel l = eval(p.a, mid), r = eval(mid, p.b);
    if (!std::isfinite(l.k + r.k + l.err + r.err))
      throw IntegrationError("integrand is not finite on the interval", p.a, p.b, p.err);
    total += l.k + r.k - p.k;
    err += l.err + r.err - p.err;
    heap.push(l);
    heap.push(r);
    ++count;
    if (!(mid > p.a && mid < p.b)) break;
  }
  // Resum to shed accumulated cancellation in the running totals.
  double sum = 0.0, esum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().k;
    esum += heap.top().err;
    heap.pop();
  }
  return {sum, esum, count};
}

}  // namespace cwhittle
