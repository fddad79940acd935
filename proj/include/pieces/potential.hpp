#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/minima.hpp>

#include "quadrature.hpp"

namespace pieces {

enum class Family { box, exponential, polynomial, table };

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Even, non-negative pair potential. The radial profile is one of the
// closed-form families, optionally restricted to a window rmin < |u| <= rmax
// (used for the principal/residual split) and rescaled as s * U(c u).
class Potential {
 public:
  static Potential zero() { return box(0.0, 1.0); }
  static Potential box(double height, double radius) {
    Potential p(Family::box);
    p.h_ = height;
    p.a_ = radius;
    return p;
  }
  static Potential exponential(double height, double rate) {
    Potential p(Family::exponential);
    p.h_ = height;
    p.a_ = rate;
    return p;
  }
  // height * (1 + |u|/scale)^(-exponent)
  static Potential polynomial(double height, double exponent, double scale = 1.0) {
    Potential p(Family::polynomial);
    p.h_ = height;
    p.e_ = exponent;
    p.a_ = scale;
    return p;
  }
  // Linear interpolation of values on grid (grid[0] = 0, increasing); zero
  // beyond the last node. A declared tail majorant int_v^inf U <= C v^-q
  // is required for Z when the last value is non-zero.
  static Potential table(std::vector<double> grid, std::vector<double> values,
                         std::optional<std::pair<double, double>> tail = std::nullopt) {
    if (grid.size() != values.size() || grid.size() < 2 || grid[0] != 0.0)
      throw std::invalid_argument("Potential::table: grid must start at 0 and match values");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] < 0.0) throw std::invalid_argument("Potential::table: negative value");
    Potential p(Family::table);
    p.grid_ = std::move(grid);
    p.vals_ = std::move(values);
    p.tail_ = tail;
    p.h_ = 1.0;
    return p;
  }

  Family family() const { return fam_; }
  double height() const { return h_; }
  double param() const { return a_; }
  double exponent() const { return e_; }
  double window_min() const { return rmin_; }
  double window_max() const { return rmax_; }
  bool is_zero() const { return h_ == 0.0 || rmin_ >= support(); }

  double operator()(double u) const {
    const double r = std::abs(u);
    if (r <= rmin_ && rmin_ > 0.0) return 0.0;
    if (r > rmax_) return 0.0;
    return profile(r);
  }

  // Radius beyond which U vanishes identically.
  double support() const {
    double s = rmax_;
    if (fam_ == Family::box) s = std::min(s, a_);
    if (fam_ == Family::table && !tail_) s = std::min(s, grid_.back());
    return s;
  }

  // Radius beyond which int_r^inf U < tol.
  double effective_range(double tol = 1e-16) const {
    if (is_zero()) return 0.0;
    const double s = support();
    if (std::isfinite(s)) return s;
    double r = 1.0;
    while (tail_integral(r) > tol && r < 1e12) r *= 1.25;
    return r;
  }

  // Points in |u| > 0 where U or its derivative jumps; 0 is always a kink.
  std::vector<double> kinks() const {
    std::vector<double> k{0.0};
    if (fam_ == Family::box) k.push_back(a_);
    if (fam_ == Family::table) k.insert(k.end(), grid_.begin(), grid_.end());
    if (rmin_ > 0.0) k.push_back(rmin_);
    if (std::isfinite(rmax_)) k.push_back(rmax_);
    std::sort(k.begin(), k.end());
    k.erase(std::unique(k.begin(), k.end()), k.end());
    return k;
  }

  // int_v^inf U(u) du for v >= 0 (one side only).
  double tail_integral(double v) const {
    v = std::max(v, rmin_);
    if (v >= rmax_) return 0.0;
    return base_tail(v) - (std::isfinite(rmax_) ? base_tail(rmax_) : 0.0);
  }

  // int_R |u|^k U(u) du
  double moment(int k) const {
    if (k < 0 || k > 4) throw std::invalid_argument("Potential::moment: k in 0..4");
    if (!moments_) moments_ = compute_moments();
    return (*moments_)[k];
  }

  // Same moment recomputed by quadrature: adaptive panels between kinks and
  // a double-exponential rule for an infinite tail.
  double moment_by_quadrature(int k) const {
    if (is_zero()) return 0.0;
    auto f = [&](double u) {
      const double v = (*this)(u);
      return v == 0.0 ? 0.0 : std::pow(u, k) * v;
    };
    auto br = kinks();
    const double top = support();
    if (std::isfinite(top)) br.push_back(top);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < br.size(); ++i) {
      if (br[i + 1] <= br[i] || br[i] >= top) continue;
      s += integrate_adaptive(f, br[i], std::min(br[i + 1], top), 1e-13);
    }
    if (!std::isfinite(top)) {
      boost::math::quadrature::exp_sinh<double> es;
      s += es.integrate(f, br.back(), kInf, 1e-13);
    }
    return 2.0 * s;
  }

  // s * U(c u)
  Potential scaled(double c, double s) const {
    if (!(c > 0.0) || !(s >= 0.0)) throw std::invalid_argument("Potential::scaled: bad factors");
    Potential p = *this;
    p.moments_.reset();
    p.h_ = h_ * s;
    p.rmin_ = rmin_ / c;
    p.rmax_ = rmax_ / c;
    switch (fam_) {
      case Family::box: p.a_ = a_ / c; break;
      case Family::exponential: p.a_ = a_ * c; break;
      case Family::polynomial: p.a_ = a_ / c; break;
      case Family::table:
        for (auto& g : p.grid_) g /= c;
        if (tail_) p.tail_ = std::make_pair(tail_->first * std::pow(c, -tail_->second - 1.0),
                                            tail_->second);
        break;
    }
    return p;
  }

  Potential windowed(double rmin, double rmax) const {
    Potential p = *this;
    p.moments_.reset();
    p.rmin_ = std::max(rmin_, rmin);
    p.rmax_ = std::min(rmax_, rmax);
    return p;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (fam_) {
      case Family::box: os << "box(height=" << h_ << ",radius=" << a_ << ")"; break;
      case Family::exponential: os << "exp(height=" << h_ << ",rate=" << a_ << ")"; break;
      case Family::polynomial:
        os << "poly(height=" << h_ << ",exponent=" << e_ << ",scale=" << a_ << ")";
        break;
      case Family::table: os << "table(nodes=" << grid_.size() << ")"; break;
    }
    if (rmin_ > 0.0 || std::isfinite(rmax_)) os << "[" << rmin_ << "," << rmax_ << "]";
    return os.str();
  }

  // v beyond which v^3 * tail(v) is non-increasing (infinite if never).
  double tail_decrease_point() const {
    switch (fam_) {
      case Family::box: return std::min(a_, rmax_);
      case Family::exponential: return std::min(3.0 / a_, rmax_);
      case Family::polynomial: return e_ > 4.0 ? std::min(3.0 * a_ / (e_ - 4.0), rmax_) : kInf;
      case Family::table:
        if (!tail_) return std::min(grid_.back(), rmax_);
        return tail_->second > 3.0 ? std::min(grid_.back(), rmax_) : kInf;
    }
    return kInf;
  }

  bool has_tail_descriptor() const {
    return fam_ != Family::table || tail_.has_value() || vals_.back() == 0.0;
  }

 private:
  explicit Potential(Family f) : fam_(f) {}

  double profile(double r) const {
    switch (fam_) {
      case Family::box: return r <= a_ ? h_ : 0.0;
      case Family::exponential: return h_ * std::exp(-a_ * r);
      case Family::polynomial: return h_ * std::pow(1.0 + r / a_, -e_);
      case Family::table: {
        if (r >= grid_.back()) return r == grid_.back() ? h_ * vals_.back() : 0.0;
        auto it = std::upper_bound(grid_.begin(), grid_.end(), r);
        const std::size_t i = static_cast<std::size_t>(it - grid_.begin()) - 1;
        const double t = (r - grid_[i]) / (grid_[i + 1] - grid_[i]);
        return h_ * ((1.0 - t) * vals_[i] + t * vals_[i + 1]);
      }
    }
    return 0.0;
  }

  // int_v^inf of the unwindowed profile
  double base_tail(double v) const {
    switch (fam_) {
      case Family::box: return h_ * std::max(0.0, a_ - v);
      case Family::exponential: return h_ / a_ * std::exp(-a_ * v);
      case Family::polynomial:
        if (e_ <= 1.0) return kInf;
        return h_ * a_ / (e_ - 1.0) * std::pow(1.0 + v / a_, 1.0 - e_);
      case Family::table: {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
          const double lo = std::max(v, grid_[i]), hi = grid_[i + 1];
          if (hi <= lo) continue;
          s += 0.5 * (hi - lo) * (profile(lo) + profile(hi));
        }
        if (tail_) s += h_ * tail_->first * std::pow(std::max(v, grid_.back()), -tail_->second);
        return s;
      }
    }
    return 0.0;
  }

  std::array<double, 5> compute_moments() const {
    std::array<double, 5> m{};
    const bool plain = rmin_ == 0.0 && !std::isfinite(rmax_);
    for (int k = 0; k <= 4; ++k) {
      if (is_zero()) {
        m[k] = 0.0;
        continue;
      }
      double fact = 1.0;
      for (int i = 2; i <= k; ++i) fact *= i;
      if (plain && fam_ == Family::box) {
        m[k] = 2.0 * h_ * std::pow(a_, k + 1) / (k + 1);
      } else if (plain && fam_ == Family::exponential) {
        m[k] = 2.0 * h_ * fact / std::pow(a_, k + 1);
      } else if (plain && fam_ == Family::polynomial) {
        m[k] = e_ > k + 1 ? 2.0 * h_ * std::pow(a_, k + 1) * boost::math::beta(k + 1.0, e_ - k - 1.0)
                          : kInf;
      } else if (fam_ == Family::polynomial && !std::isfinite(rmax_) && e_ <= k + 1) {
        m[k] = kInf;
      } else {
        m[k] = moment_by_quadrature(k);
      }
    }
    return m;
  }

  Family fam_;
  double h_ = 0.0, a_ = 1.0, e_ = 0.0;
  double rmin_ = 0.0, rmax_ = kInf;
  std::vector<double> grid_, vals_;
  std::optional<std::pair<double, double>> tail_;
  mutable std::optional<std::array<double, 5>> moments_;
};

// U^ell = ell^2 U(ell .)
inline Potential scale_to_unit(const Potential& U, double ell) { return U.scaled(ell, ell * ell); }
// U^mu = mu^-2 U(mu^-1 .)
inline Potential scale_mu(const Potential& U, double mu) { return U.scaled(1.0 / mu, 1.0 / (mu * mu)); }

struct PotentialSplit {
  Potential principal, residual;
};

inline PotentialSplit split_principal(const Potential& U, double B, double ell_rho) {
  if (!(B > 2.0)) throw std::domain_error("split_principal: B must exceed 2");
  const double c = B * ell_rho;
  return {U.windowed(0.0, c), U.windowed(c, kInf)};
}

// Z(x) = sup_{v >= x} v^3 int_v^inf U
inline double tail_Z(const Potential& U, double x) {
  if (x < 0.0) throw std::domain_error("tail_Z: x >= 0");
  if (U.is_zero()) return 0.0;
  if (!U.has_tail_descriptor())
    throw std::domain_error("tail_Z: tabulated potential needs a declared tail majorant");
  const double vdec = U.tail_decrease_point();
  if (!std::isfinite(vdec)) return kInf;
  auto g = [&](double v) { return v * v * v * U.tail_integral(v); };
  const double top = std::max(x, vdec);
  if (top <= x) return g(x);
  // scan then polish the best bracket
  const int n = 400;
  double best = g(x), bv = x;
  std::vector<double> vs(n + 1);
  for (int i = 0; i <= n; ++i) {
    vs[i] = x + (top - x) * i / n;
    const double gv = g(vs[i]);
    if (gv > best) best = gv, bv = vs[i];
  }
  for (double k : U.kinks())
    if (k >= x && k <= top && g(k) > best) best = g(k), bv = k;
  const double lo = std::max(x, bv - (top - x) / n), hi = std::min(top, bv + (top - x) / n);
  if (hi > lo) {
    auto r = boost::math::tools::brent_find_minima([&](double v) { return -g(v); }, lo, hi, 50);
    best = std::max(best, -r.second);
  }
  return best;
}

// min_{alpha in [0,1]} alpha^{1-eps} (Z(0) - Z(alpha X)) + Z(alpha X)
inline double f_Z(const Potential& U, double X, double eps = 0.0) {
  if (!(X > 0.0)) throw std::domain_error("f_Z: X > 0");
  const double z0 = tail_Z(U, 0.0);
  if (z0 == 0.0) return 0.0;
  auto F = [&](double a) {
    const double z = tail_Z(U, a * X);
    return std::pow(a, 1.0 - eps) * (z0 - z) + z;
  };
  // log-spaced scan; the objective can have several local minima
  const int n = 120;
  double best = z0, ba = 0.0;
  std::vector<double> as;
  for (int i = 0; i <= n; ++i) as.push_back(std::pow(10.0, -12.0 + 12.0 * i / n));
  for (double a : as) {
    const double v = F(a);
    if (v < best) best = v, ba = a;
  }
  if (ba > 0.0) {
    const double lo = ba * std::pow(10.0, -0.1), hi = std::min(1.0, ba * std::pow(10.0, 0.1));
    auto r = boost::math::tools::brent_find_minima(F, lo, hi, 40);
    best = std::min(best, r.second);
  }
  return std::min(best, z0);
}

struct HUReport {
  bool pass = true;
  std::string message;
  std::vector<std::pair<double, double>> z_samples;
};

inline HUReport check_HU(const Potential& U) {
  HUReport rep;
  for (int k = 0; k <= 3; ++k) {
    const double m = U.moment(k);
    if (!std::isfinite(m)) {
      rep.pass = false;
      rep.message = "moment " + std::to_string(k) + " diverges";
      return rep;
    }
  }
  double prev = kInf;
  for (double x = 1.0; x <= 1e3 * 1.0001; x *= std::sqrt(10.0)) {
    const double z = tail_Z(U, x);
    rep.z_samples.emplace_back(x, z);
    if (!std::isfinite(z)) {
      rep.pass = false;
      rep.message = "Z(x) infinite at x=" + std::to_string(x);
      return rep;
    }
    prev = z;
  }
  // Z must keep decreasing towards zero on the grid
  const double z1 = rep.z_samples.front().second;
  if (z1 > 0.0 && !(prev < 0.5 * z1 || prev < 1e-12)) {
    rep.pass = false;
    rep.message = "Z(x) does not decay: Z(1e3)=" + std::to_string(prev);
  }
  return rep;
}

}  // namespace pieces
