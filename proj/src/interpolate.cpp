#include "geofm/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include <gsl/gsl_multimin.h>

#include "geofm/errors.hpp"

namespace geofm {

double VariogramModel::operator()(double h) const noexcept {
  if (h <= 0.0) return 0.0;
  if (h >= range_km) return sill;
  const double t = h / range_km;
  return nugget + (sill - nugget) * (1.5 * t - 0.5 * t * t * t);
}

void validate(const VariogramModel& m) {
  if (!(std::isfinite(m.nugget) && std::isfinite(m.sill) && std::isfinite(m.range_km)))
    throw ContractError("variogram parameters must be finite");
  if (m.nugget < 0.0) throw ContractError("variogram nugget must be >= 0");
  if (m.sill < m.nugget) throw ContractError("variogram sill must be >= nugget");
  if (!(m.range_km > 0.0)) throw ContractError("variogram range must be > 0");
}

double idw_predict(std::span<const SamplePoint> train, const GeoPoint& query, double power, int k,
                   DistanceMetric metric) {
  if (train.empty()) throw ContractError("idw_predict: empty training set");
  if (!(power > 0.0)) throw ContractError("idw_predict: power must be > 0");
  if (k < 1) throw ContractError("idw_predict: k must be >= 1");

  std::vector<std::pair<double, std::size_t>> by_distance(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    by_distance[i] = {distance_km(query, train[i].location, metric), i};
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), train.size());
  std::partial_sort(by_distance.begin(), by_distance.begin() + take, by_distance.end());

  if (by_distance.front().first < kIdwExactHitKm) return train[by_distance.front().second].value;
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < take; ++j) {
    const auto [d, i] = by_distance[j];
    const double w = std::pow(d, -power);
    num += w * train[i].value;
    den += w;
  }
  return num / den;
}

double default_max_lag(std::span<const SamplePoint> train, DistanceMetric metric) {
  double far = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i)
    for (std::size_t j = i + 1; j < train.size(); ++j)
      far = std::max(far, distance_km(train[i].location, train[j].location, metric));
  return 0.5 * far;
}

EmpiricalVariogram empirical_variogram(std::span<const SamplePoint> train, int n_bins,
                                       double max_lag_km, DistanceMetric metric) {
  if (train.size() < 2) throw ContractError("empirical_variogram: need at least 2 points");
  if (n_bins < 1) throw ContractError("empirical_variogram: n_bins must be >= 1");
  if (!(max_lag_km > 0.0)) throw ContractError("empirical_variogram: max_lag must be > 0");

  const auto bins = static_cast<std::size_t>(n_bins);
  const double width = max_lag_km / static_cast<double>(n_bins);
  std::vector<double> sq(bins, 0.0), dist(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (std::size_t j = i + 1; j < train.size(); ++j) {
      const double h = distance_km(train[i].location, train[j].location, metric);
      if (h > max_lag_km) continue;
      const auto b = std::min(bins - 1, static_cast<std::size_t>(h / width));
      const double dv = train[i].value - train[j].value;
      sq[b] += dv * dv;
      dist[b] += h;
      ++count[b];
    }
  }

  EmpiricalVariogram ev;
  ev.max_lag_km = max_lag_km;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const auto c = static_cast<double>(count[b]);
    ev.bins.push_back({dist[b] / c, sq[b] / (2.0 * c), count[b]});
  }

  double mean = 0.0;
  for (const auto& s : train) mean += s.value;
  mean /= static_cast<double>(train.size());
  double var = 0.0;
  for (const auto& s : train) var += (s.value - mean) * (s.value - mean);
  ev.sample_variance = var / static_cast<double>(train.size() - 1);
  return ev;
}

double variogram_objective(const EmpiricalVariogram& ev, const VariogramModel& model) noexcept {
  double acc = 0.0;
  for (const auto& b : ev.bins) {
    const double r = model(b.lag_km) - b.semivariance;
    acc += static_cast<double>(b.pair_count) * r * r;
  }
  return acc;
}

namespace {

// Work in units of (scale, scale, max_lag) so the simplex is well conditioned.
struct FitContext {
  const EmpiricalVariogram* ev;
  double scale;
  double max_range;
};

VariogramModel project(const FitContext& ctx, double nugget_u, double sill_u, double range_u) {
  double n = nugget_u, s = sill_u;
  if (n > s) n = s = 0.5 * (n + s);
  n = std::max(0.0, n);
  s = std::max(n, s);
  const double r = std::clamp(range_u, 1e-6, 2.0);
  return {n * ctx.scale, s * ctx.scale, r * ctx.max_range * 0.5};
}

double nm_objective(const gsl_vector* x, void* params) {
  const auto& ctx = *static_cast<const FitContext*>(params);
  const VariogramModel m =
      project(ctx, gsl_vector_get(x, 0), gsl_vector_get(x, 1), gsl_vector_get(x, 2));
  return variogram_objective(*ctx.ev, m) / (ctx.scale * ctx.scale);
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

}  // namespace

VariogramModel fit_spherical(const EmpiricalVariogram& ev) {
  if (ev.bins.size() < 3)
    throw FitError("fit_spherical: need at least 3 populated bins, got " +
                   std::to_string(ev.bins.size()));
  const double max_range = 2.0 * ev.max_lag_km;
  const bool all_zero = std::all_of(ev.bins.begin(), ev.bins.end(),
                                    [](const VariogramBin& b) { return b.semivariance == 0.0; });
  if (all_zero) return {0.0, 0.0, ev.max_lag_km};

  double s2 = ev.sample_variance;
  if (!(s2 > 0.0)) {
    for (const auto& b : ev.bins) s2 = std::max(s2, b.semivariance);
  }
  const FitContext ctx{&ev, s2, max_range};

  // Coarse grid in scaled units: nugget in [0, 1], sill in [0, 2], range in (0, 2].
  constexpr int kGrid = 20;
  double best = std::numeric_limits<double>::infinity();
  double bn = 0.0, bs = 1.0, br = 1.0;
  for (int i = 0; i < kGrid; ++i) {
    const double n = static_cast<double>(i) / (kGrid - 1);
    for (int j = 0; j < kGrid; ++j) {
      const double s = 2.0 * static_cast<double>(j) / (kGrid - 1);
      if (n > s) continue;
      for (int k = 0; k < kGrid; ++k) {
        const double r = 2.0 * static_cast<double>(k + 1) / kGrid;
        const double obj = variogram_objective(ev, project(ctx, n, s, r));
        if (obj < best) {
          best = obj;
          bn = n;
          bs = s;
          br = r;
        }
      }
    }
  }

  gsl_multimin_function fn{&nm_objective, 3, const_cast<FitContext*>(&ctx)};
  std::unique_ptr<gsl_vector, VectorDeleter> x(gsl_vector_alloc(3));
  std::unique_ptr<gsl_vector, VectorDeleter> step(gsl_vector_alloc(3));
  gsl_vector_set(x.get(), 0, bn);
  gsl_vector_set(x.get(), 1, bs);
  gsl_vector_set(x.get(), 2, br);
  gsl_vector_set(step.get(), 0, 1.0 / (kGrid - 1));
  gsl_vector_set(step.get(), 1, 2.0 / (kGrid - 1));
  gsl_vector_set(step.get(), 2, 2.0 / kGrid);
  std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> nm(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3));
  gsl_multimin_fminimizer_set(nm.get(), &fn, x.get(), step.get());
  for (int iter = 0; iter < 1000; ++iter) {
    if (gsl_multimin_fminimizer_iterate(nm.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm.get()), 1e-9) == GSL_SUCCESS)
      break;
  }
  const gsl_vector* xm = gsl_multimin_fminimizer_x(nm.get());
  const VariogramModel refined =
      project(ctx, gsl_vector_get(xm, 0), gsl_vector_get(xm, 1), gsl_vector_get(xm, 2));
  const VariogramModel coarse = project(ctx, bn, bs, br);
  return variogram_objective(ev, refined) <= variogram_objective(ev, coarse) ? refined : coarse;
}

namespace {

constexpr double kJitter = 1e-10;
constexpr double kSingularRcond = 1e-12;

}  // namespace

OrdinaryKriging::OrdinaryKriging(std::span<const SamplePoint> train, const VariogramModel& model,
                                 DistanceMetric metric)
    : train_(train.begin(), train.end()), model_(model), metric_(metric) {
  if (train_.empty()) throw ContractError("kriging: empty training set");
  validate(model_);
  const std::size_t n = train_.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (distance_km(train_[i].location, train_[j].location, metric_) < kIdwExactHitKm)
        throw DuplicateLocation("kriging: training points " + std::to_string(i) + " and " +
                                std::to_string(j) + " share a location");
  // A zero-sill model makes every unbiased combination equally good.
  if (model_.sill == 0.0) {
    equal_weights_ = true;
    return;
  }

  Eigen::MatrixXd a(n + 1, n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double g = model_(distance_km(train_[i].location, train_[j].location, metric_));
      a(i, j) = g;
      a(j, i) = g;
    }
    a(i, n) = 1.0;
    a(n, i) = 1.0;
  }
  a(n, n) = 0.0;

  lu_.compute(a);
  if (!(lu_.rcond() > kSingularRcond)) {
    for (std::size_t i = 0; i < n; ++i) a(i, i) += kJitter;
    lu_.compute(a);
    jittered_ = true;
    if (!(lu_.rcond() > kSingularRcond))
      throw DuplicateLocation("kriging: system singular after diagonal jitter");
  }
}

Eigen::VectorXd OrdinaryKriging::solve(const GeoPoint& query) const {
  const std::size_t n = train_.size();
  Eigen::VectorXd rhs(n + 1);
  for (std::size_t i = 0; i < n; ++i)
    rhs(i) = model_(distance_km(query, train_[i].location, metric_));
  rhs(n) = 1.0;
  return lu_.solve(rhs);
}

KrigingPrediction OrdinaryKriging::predict(const GeoPoint& query) const {
  const std::size_t n = train_.size();
  KrigingPrediction out;
  out.weights.resize(n);
  if (equal_weights_) {
    std::fill(out.weights.begin(), out.weights.end(), 1.0 / static_cast<double>(n));
  } else {
    const Eigen::VectorXd sol = solve(query);
    for (std::size_t i = 0; i < n; ++i) out.weights[i] = sol(i);
  }
  for (std::size_t i = 0; i < n; ++i) out.value += out.weights[i] * train_[i].value;
  return out;
}

double OrdinaryKriging::predict_value(const GeoPoint& query) const { return predict(query).value; }

KrigingPrediction kriging_predict(std::span<const SamplePoint> train, const GeoPoint& query,
                                  const VariogramModel& model, DistanceMetric metric) {
  return OrdinaryKriging(train, model, metric).predict(query);
}

}  // namespace geofm
