#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "geofm/geo_core.hpp"

namespace geofm {

struct SamplePoint {
  GeoPoint location;
  double value = 0.0;
};

/// Spherical variogram. gamma(0) = 0; gamma(h) = sill for h > range.
struct VariogramModel {
  double nugget = 0.0;
  double sill = 0.0;
  double range_km = 1.0;

  double operator()(double h_km) const noexcept;
  friend bool operator==(const VariogramModel&, const VariogramModel&) = default;
};

/// Throws ContractError unless 0 <= nugget <= sill and range_km > 0.
void validate(const VariogramModel& model);

struct VariogramBin {
  double lag_km;  // mean separation of the pairs in the bin
  double semivariance;
  std::size_t pair_count;
};

struct EmpiricalVariogram {
  std::vector<VariogramBin> bins;
  double max_lag_km = 0.0;
  double sample_variance = 0.0;
};

inline constexpr double kIdwExactHitKm = 1e-9;

/// Inverse distance weighting over the k nearest samples. A sample closer than
/// 1e-9 km is returned exactly.
double idw_predict(std::span<const SamplePoint> train, const GeoPoint& query, double power = 2.0,
                   int k = 6, DistanceMetric metric = DistanceMetric::kHaversine);

/// Half of the largest pairwise separation.
double default_max_lag(std::span<const SamplePoint> train,
                       DistanceMetric metric = DistanceMetric::kHaversine);

/// Matheron estimator over equal-width lag bins on (0, max_lag_km]; empty bins
/// are dropped.
EmpiricalVariogram empirical_variogram(std::span<const SamplePoint> train, int n_bins,
                                       double max_lag_km,
                                       DistanceMetric metric = DistanceMetric::kHaversine);

/// Pair-count weighted least squares: 20x20x20 grid, then Nelder-Mead from the
/// best cell, with every candidate projected onto the feasible set.
VariogramModel fit_spherical(const EmpiricalVariogram& ev);

/// Weighted squared error minimized by fit_spherical.
double variogram_objective(const EmpiricalVariogram& ev, const VariogramModel& model) noexcept;

struct KrigingPrediction {
  double value = 0.0;
  std::vector<double> weights;
};

/// Ordinary kriging with the system factored once for many queries.
class OrdinaryKriging {
 public:
  OrdinaryKriging(std::span<const SamplePoint> train, const VariogramModel& model,
                  DistanceMetric metric = DistanceMetric::kHaversine);

  KrigingPrediction predict(const GeoPoint& query) const;
  double predict_value(const GeoPoint& query) const;

  /// True when the one-shot diagonal jitter was needed.
  bool jittered() const noexcept { return jittered_; }

 private:
  Eigen::VectorXd solve(const GeoPoint& query) const;

  std::vector<SamplePoint> train_;
  VariogramModel model_;
  DistanceMetric metric_;
  bool equal_weights_ = false;
  bool jittered_ = false;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

KrigingPrediction kriging_predict(std::span<const SamplePoint> train, const GeoPoint& query,
                                  const VariogramModel& model,
                                  DistanceMetric metric = DistanceMetric::kHaversine);

}  // namespace geofm
