#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geofm/gbt.hpp"
#include "geofm/geo_core.hpp"
#include "geofm/ingest.hpp"
#include "geofm/qc_aggregate.hpp"

namespace geofm {

// ---- split ----

enum class FoldMode { kRandom, kGeographic };

struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<std::string> test_ids;
  std::vector<std::vector<std::string>> folds;

  /// Union of the folds, in fold order.
  std::vector<std::string> train_ids() const;
  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// Fisher-Yates shuffle (mt19937_64), first floor(test_fraction * n) ids (at
/// least one) go to test and the rest are dealt round-robin into folds.
SplitPlan make_split(std::span<const std::string> ids, std::uint64_t seed,
                     double test_fraction = 0.2, int n_folds = 5);

/// Same test set as make_split; the training ids are cut into latitude bands
/// of near-equal size instead of dealt at random.
SplitPlan make_geographic_split(std::span<const std::string> ids,
                                const std::map<std::string, GeoPoint>& centroids,
                                std::uint64_t seed, double test_fraction = 0.2, int n_folds = 5);

// ---- metrics ----

/// 1 - SSres / SStot. Throws UndefinedMetric for a constant truth vector and
/// ContractError for mismatched or too-short inputs.
double r_squared(std::span<const double> y_true, std::span<const double> y_pred);

// ---- features ----

/// Concatenates rows over the common id set in PDFM, ALPHAEARTH, CDR order.
EmbeddingTable fuse_embeddings(std::span<const EmbeddingTable> tables);

// ---- leakage instrument ----

/// Counts test ids handed to any fitting call.
class LeakageMonitor {
 public:
  explicit LeakageMonitor(std::span<const std::string> test_ids)
      : test_(test_ids.begin(), test_ids.end()) {}

  void record_fit(std::span<const std::string> ids) noexcept;
  std::size_t contacts() const noexcept { return contacts_.load(); }
  std::size_t fit_calls() const noexcept { return calls_.load(); }

 private:
  std::set<std::string> test_;
  std::atomic<std::size_t> contacts_{0};
  std::atomic<std::size_t> calls_{0};
};

// ---- grid search ----

struct GridSpec {
  std::vector<double> learning_rates{0.01, 0.05, 0.1, 0.3};
  std::vector<int> max_depths{2, 3, 4, 6, 8};
  std::vector<int> n_rounds{50, 100, 200, 400};

  std::size_t size() const noexcept {
    return learning_rates.size() * max_depths.size() * n_rounds.size();
  }
};

void validate(const GridSpec& grid);

struct CvOutcome {
  gbt::GBTParams best;
  std::vector<double> per_fold_r2;  // NaN for skipped folds
  double mean_r2 = 0.0;
  bool evaluable = false;
};

/// Every grid cell is scored on all folds (transformed target in, raw-scale R²
/// out). Highest mean wins; ties go to fewer rounds, then shallower trees, then
/// the smaller learning rate.
CvOutcome cv_grid_search(const EmbeddingTable& features, const IndicatorTarget& target,
                         const SplitPlan& plan, const GridSpec& grid,
                         LeakageMonitor* monitor = nullptr);

// ---- methods and results ----

enum class Method { kIdw, kKriging, kPdfm, kAlphaEarth, kCdr, kMulti };
inline constexpr Method kAllMethods[] = {Method::kIdw,  Method::kKriging,    Method::kPdfm,
                                         Method::kAlphaEarth, Method::kCdr, Method::kMulti};

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view text);
bool is_embedding_method(Method method) noexcept;
EmbeddingSource source_of(Method method);

struct MethodResult {
  std::string target;
  Method method = Method::kIdw;
  double cv_r2_mean = 0.0;
  double cv_r2_sd = 0.0;
  std::vector<double> per_fold_r2;
  double test_r2 = 0.0;
  std::optional<gbt::GBTParams> best_params;
  std::size_t n_catchments = 0;
  IndicatorKind kind = IndicatorKind::kRate;
  /// ok | fallback | not_applicable | unevaluable | error:<code>
  std::string status = "ok";
};

/// Field-wise equality where NaN equals NaN.
bool same_result(const MethodResult& a, const MethodResult& b) noexcept;

struct BaselineParams {
  double idw_power = 2.0;
  int idw_k = 6;
  int variogram_bins = 15;
  DistanceMetric metric = DistanceMetric::kHaversine;
};

/// Per-fold R² on the raw target scale; kriging refits its variogram on each
/// fold's training points. Test R² predicts test ids from every training id.
MethodResult evaluate_baseline(Method method, const IndicatorTarget& target,
                               const SplitPlan& plan,
                               const std::map<std::string, GeoPoint>& centroids,
                               const BaselineParams& params = {},
                               LeakageMonitor* monitor = nullptr);

/// Grid search, then a refit on every training id to score the test set.
MethodResult evaluate_embedding(Method method, const EmbeddingTable& features,
                                const IndicatorTarget& target, const SplitPlan& plan,
                                const GridSpec& grid, LeakageMonitor* monitor = nullptr);

// ---- full run ----

struct RunReport {
  std::uint64_t seed = 0;
  std::vector<std::string> config_echo;  // "key = value" lines
  std::vector<MethodResult> results;
  std::size_t n_folds = 5;
};

struct ExperimentInputs {
  std::vector<Catchment> catchments;
  std::vector<EmbeddingTable> embeddings;  // any subset of PDFM, ALPHAEARTH, CDR
  std::vector<IndicatorTarget> targets;
};

struct ExperimentOptions {
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  int n_folds = 5;
  FoldMode fold_mode = FoldMode::kRandom;
  GridSpec grid;
  BaselineParams baselines;
  unsigned threads = 0;  // 0 = worker_threads()
  std::vector<std::string> config_echo;
  std::function<void(std::string_view)> progress;
};

struct ExperimentStats {
  std::size_t leakage_contacts = 0;
  std::size_t fit_calls = 0;
};

/// Every method on every target over one shared split. Per-target failures land
/// in the status column. Results are ordered by target, then method.
RunReport run_experiment(const ExperimentInputs& inputs, const ExperimentOptions& options,
                         ExperimentStats* stats = nullptr);

std::string report_to_csv(const RunReport& report);
RunReport parse_report_csv(std::string_view csv);
void write_report(const std::string& path, const RunReport& report);
RunReport read_report(const std::string& path);

// ---- parallelism ----

/// GEOFM_BENCH_THREADS when set to a positive integer, else hardware concurrency.
unsigned worker_threads();

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Each index runs
/// exactly once; the first exception is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace geofm
