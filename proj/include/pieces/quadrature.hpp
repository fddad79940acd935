#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

namespace pieces {

struct Rule {
  std::vector<double> x, w;
};

// Gauss-Legendre rule on [-1, 1], cached per order.
inline const Rule& gauss_legendre(int n) {
  static std::map<int, Rule> cache;
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be positive");
  Rule r;
  for (double z : boost::math::legendre_p_zeros<double>(n)) {
    const double d = boost::math::legendre_p_prime(n, z);
    const double w = 2.0 / ((1.0 - z * z) * d * d);
    if (z == 0.0) {
      r.x.push_back(0.0);
      r.w.push_back(w);
    } else {
      r.x.push_back(-z);
      r.w.push_back(w);
      r.x.push_back(z);
      r.w.push_back(w);
    }
  }
  std::vector<std::size_t> idx(r.x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return r.x[a] < r.x[b]; });
  Rule s;
  for (auto i : idx) {
    s.x.push_back(r.x[i]);
    s.w.push_back(r.w[i]);
  }
  return cache.emplace(n, std::move(s)).first->second;
}

// Composite rule on [a, b]: panels split at the given breakpoints and
// further subdivided so no panel is wider than max_width.
inline Rule composite_rule(double a, double b, std::vector<double> breaks, int order,
                           double max_width = 1e300) {
  Rule out;
  if (!(b > a)) return out;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  const Rule& g = gauss_legendre(order);
  double prev = a;
  for (double c : breaks) {
    if (c <= prev || c < a) continue;
    const double hi = std::min(c, b);
    const int np = std::max(1, static_cast<int>(std::ceil((hi - prev) / max_width)));
    const double h = (hi - prev) / np;
    for (int p = 0; p < np; ++p) {
      const double lo = prev + p * h;
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        out.x.push_back(lo + 0.5 * h * (g.x[i] + 1.0));
        out.w.push_back(0.5 * h * g.w[i]);
      }
    }
    prev = hi;
    if (prev >= b) break;
  }
  return out;
}

template <class F>
double integrate(F&& f, const Rule& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(r.x[i]);
  return s;
}

// Adaptive Gauss-Kronrod on a finite interval; throws if the error
// estimate misses the requested tolerance.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-12,
                          double* err_out = nullptr) {
  double err = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, rel_tol, &err);
  if (err_out) *err_out = err;
  if (!(err <= std::max(1e3 * rel_tol * std::abs(v), 1e-300)) || !std::isfinite(v))
    throw std::runtime_error("integrate_adaptive: no convergence, residual " + std::to_string(err));
  return v;
}

// h * cos(c*m + phi) * sinc(c*h/2): the integral of cos(c*y + phi) over an
// interval of length h centred at m, stable as c -> 0.
inline double cos_interval(double c, double phi, double m, double h) {
  const double t = 0.5 * c * h;
  const double s = std::abs(t) < 1e-8 ? 1.0 - t * t / 6.0 : std::sin(t) / t;
  return h * std::cos(c * m + phi) * s;
}

}  // namespace pieces
