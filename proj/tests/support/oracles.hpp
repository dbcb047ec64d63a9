// Reference implementations used only by tests. Nothing here calls the
// production solvers, so agreement between the two is meaningful.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "geofm/geo_core.hpp"
#include "geofm/interpolate.hpp"

namespace oracle {

inline double spherical(double nugget, double sill, double range, double h) {
  if (h == 0.0) return 0.0;
  if (h >= range) return sill;
  const double t = h / range;
  return nugget + (sill - nugget) * (1.5 * t - 0.5 * t * t * t);
}

/// Dense Gaussian elimination with partial pivoting on a copy of [A | b].
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) throw std::runtime_error("singular");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

struct KrigingAnswer {
  double value;
  std::vector<double> weights;
};

/// Ordinary kriging from the augmented system [[Gamma, 1], [1', 0]].
inline KrigingAnswer kriging(const std::vector<geofm::SamplePoint>& train, const geofm::GeoPoint& q,
                             double nugget, double sill, double range) {
  const std::size_t n = train.size();
  std::vector<std::vector<double>> a(n + 1, std::vector<double>(n + 1, 0.0));
  std::vector<double> b(n + 1, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      a[i][j] = spherical(nugget, sill, range,
                          geofm::distance_km(train[i].location, train[j].location));
    a[i][n] = a[n][i] = 1.0;
    b[i] = spherical(nugget, sill, range, geofm::distance_km(train[i].location, q));
  }
  const auto x = gauss_solve(a, b);
  KrigingAnswer out{0.0, std::vector<double>(x.begin(), x.begin() + static_cast<long>(n))};
  for (std::size_t i = 0; i < n; ++i) out.value += out.weights[i] * train[i].value;
  return out;
}

/// Random points in a box around Malawi-like coordinates, at least `min_sep_km` apart.
inline std::vector<geofm::GeoPoint> random_points(std::mt19937_64& rng, std::size_t n,
                                                  double half_width_deg, double min_sep_km) {
  std::uniform_real_distribution<double> u(-half_width_deg, half_width_deg);
  std::vector<geofm::GeoPoint> pts;
  while (pts.size() < n) {
    const geofm::GeoPoint p{34.0 + u(rng), -13.0 + u(rng)};
    bool ok = true;
    for (const auto& o : pts) ok = ok && geofm::distance_km(p, o) >= min_sep_km;
    if (ok) pts.push_back(p);
  }
  return pts;
}

/// Gaussian sample whose covariance is sill - gamma(h) (spherical), with the
/// nugget as white noise. Dense Cholesky written out here.
inline std::vector<double> spherical_field(const std::vector<geofm::GeoPoint>& pts, double nugget,
                                           double sill, double range, std::mt19937_64& rng) {
  const std::size_t n = pts.size();
  const double psill = sill - nugget;
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double c;
      if (i == j) {
        c = psill + 1e-10;
      } else {
        const double h = geofm::distance_km(pts[i], pts[j]);
        c = h >= range ? 0.0 : psill * (1.0 - (1.5 * h / range - 0.5 * std::pow(h / range, 3)));
      }
      for (std::size_t k = 0; k < j; ++k) c -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = i == j ? std::sqrt(std::max(c, 0.0)) : c / l[j * n + j];
    }
  }
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> e(n), out(n, 0.0);
  for (auto& v : e) v = z(rng);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k <= i; ++k) out[i] += l[i * n + k] * e[k];
    out[i] += std::sqrt(nugget) * z(rng);
  }
  return out;
}

/// Best single split by brute force: every feature, every midpoint between
/// consecutive distinct values, SSE computed from scratch.
struct Split {
  int feature = -1;
  double threshold = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

inline Split best_split(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  Split best;
  const std::size_t n = y.size(), d = x.front().size();
  for (std::size_t f = 0; f < d; ++f) {
    std::vector<double> vals;
    for (const auto& row : x) vals.push_back(row[f]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double thr = vals[k] + 0.5 * (vals[k + 1] - vals[k]);
      double sl = 0, sr = 0;
      int nl = 0, nr = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (x[i][f] >= thr) {
          sr += y[i];
          ++nr;
        } else {
          sl += y[i];
          ++nl;
        }
      }
      const double ml = sl / nl, mr = sr / nr;
      double sse = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double m = x[i][f] >= thr ? mr : ml;
        sse += (y[i] - m) * (y[i] - m);
      }
      if (sse < best.sse - 1e-12) best = {static_cast<int>(f), thr, sse};
    }
  }
  return best;
}

}  // namespace oracle
