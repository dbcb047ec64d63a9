#include "geofm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "geofm/errors.hpp"
#include "geofm/interpolate.hpp"
#include "geofm/text.hpp"

namespace geofm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct TestCut {
  std::vector<std::string> test;
  std::vector<std::string> rest;
};

TestCut shuffle_and_cut(std::span<const std::string> ids, std::uint64_t seed,
                        double test_fraction, int n_folds) {
  if (ids.size() < 10)
    throw ContractError("make_split needs at least 10 ids, got " + std::to_string(ids.size()));
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ContractError("test_fraction must be in (0, 1)");
  if (n_folds < 2) throw ContractError("n_folds must be >= 2");

  std::vector<std::string> order(ids.begin(), ids.end());
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end())
    throw ContractError("make_split: ids are not unique");

  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  auto n_test = static_cast<std::size_t>(
      std::floor(static_cast<double>(order.size()) * test_fraction + 1e-9));
  n_test = std::max<std::size_t>(1, n_test);
  if (order.size() - n_test < static_cast<std::size_t>(n_folds))
    throw ContractError("too few training ids for the requested folds");

  TestCut cut;
  cut.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  cut.rest.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  return cut;
}

}  // namespace

std::vector<std::string> SplitPlan::train_ids() const {
  std::vector<std::string> out;
  for (const auto& f : folds) out.insert(out.end(), f.begin(), f.end());
  return out;
}

SplitPlan make_split(std::span<const std::string> ids, std::uint64_t seed, double test_fraction,
                     int n_folds) {
  TestCut cut = shuffle_and_cut(ids, seed, test_fraction, n_folds);
  SplitPlan plan;
  plan.seed = seed;
  plan.test_ids = std::move(cut.test);
  plan.folds.resize(static_cast<std::size_t>(n_folds));
  for (std::size_t i = 0; i < cut.rest.size(); ++i)
    plan.folds[i % plan.folds.size()].push_back(std::move(cut.rest[i]));
  return plan;
}

SplitPlan make_geographic_split(std::span<const std::string> ids,
                                const std::map<std::string, GeoPoint>& centroids,
                                std::uint64_t seed, double test_fraction, int n_folds) {
  TestCut cut = shuffle_and_cut(ids, seed, test_fraction, n_folds);
  auto loc = [&](const std::string& id) {
    const auto it = centroids.find(id);
    if (it == centroids.end()) throw ContractError("no centroid for " + id);
    return it->second;
  };
  std::sort(cut.rest.begin(), cut.rest.end(), [&](const std::string& a, const std::string& b) {
    const GeoPoint pa = loc(a), pb = loc(b);
    if (pa.lat != pb.lat) return pa.lat < pb.lat;
    if (pa.lon != pb.lon) return pa.lon < pb.lon;
    return a < b;
  });
  SplitPlan plan;
  plan.seed = seed;
  plan.test_ids = std::move(cut.test);
  const std::size_t k = static_cast<std::size_t>(n_folds);
  const std::size_t base = cut.rest.size() / k, extra = cut.rest.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    plan.folds.emplace_back(cut.rest.begin() + static_cast<std::ptrdiff_t>(pos),
                            cut.rest.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return plan;
}

double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size())
    throw ContractError("r_squared: length mismatch " + std::to_string(y_true.size()) + " vs " +
                        std::to_string(y_pred.size()));
  if (y_true.size() < 2) throw ContractError("r_squared: need at least 2 values");
  const bool constant = std::all_of(y_true.begin(), y_true.end(),
                                    [&](double v) { return v == y_true.front(); });
  if (constant) throw UndefinedMetric("r_squared: truth vector is constant");
  const double mean =
      std::accumulate(y_true.begin(), y_true.end(), 0.0) / static_cast<double>(y_true.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

EmbeddingTable fuse_embeddings(std::span<const EmbeddingTable> tables) {
  if (tables.empty()) throw ContractError("fuse_embeddings: no tables");
  std::vector<const EmbeddingTable*> order;
  for (const auto& t : tables) {
    if (t.source == EmbeddingSource::kMulti)
      throw ContractError("fuse_embeddings: input is already fused");
    order.push_back(&t);
  }
  std::stable_sort(order.begin(), order.end(), [](const EmbeddingTable* a, const EmbeddingTable* b) {
    return static_cast<int>(a->source) < static_cast<int>(b->source);
  });

  EmbeddingTable out;
  out.source = EmbeddingSource::kMulti;
  for (const auto* t : order) out.dim += t->dim;
  for (const auto& [id, first] : order.front()->rows) {
    bool everywhere = true;
    for (const auto* t : order) everywhere = everywhere && t->rows.contains(id);
    if (!everywhere) continue;
    std::vector<double> row;
    row.reserve(out.dim);
    for (const auto* t : order) {
      const auto& v = t->rows.at(id);
      row.insert(row.end(), v.begin(), v.end());
    }
    out.rows.emplace(id, std::move(row));
  }
  std::set<std::string> all;
  for (const auto* t : order)
    for (const auto& [id, v] : t->rows) all.insert(id);
  const std::size_t dropped = all.size() - out.rows.size();
  if (out.rows.empty()) throw ContractError("fuse_embeddings: no catchment is in every table");
  if (dropped > 0) spdlog::info("fusion kept {} catchments, dropped {}", out.rows.size(), dropped);
  return out;
}

void LeakageMonitor::record_fit(std::span<const std::string> ids) noexcept {
  calls_.fetch_add(1);
  std::size_t hits = 0;
  for (const auto& id : ids)
    if (test_.contains(id)) ++hits;
  if (hits > 0) contacts_.fetch_add(hits);
}

void validate(const GridSpec& grid) {
  if (grid.learning_rates.empty() || grid.max_depths.empty() || grid.n_rounds.empty())
    throw ContractError("grid has an empty axis");
  for (double lr : grid.learning_rates)
    if (!(lr > 0.0 && lr <= 1.0)) throw ContractError("grid learning rate outside (0, 1]");
  for (int d : grid.max_depths)
    if (d < 1) throw ContractError("grid depth must be >= 1");
  for (int r : grid.n_rounds)
    if (r < 1) throw ContractError("grid rounds must be >= 1");
}

// ---- shared helpers for the method evaluators ----

namespace {

struct FoldSummary {
  double mean = kNaN;
  double sd = kNaN;
};

FoldSummary summarize(std::span<const double> per_fold) {
  std::vector<double> v;
  for (double x : per_fold)
    if (!std::isnan(x)) v.push_back(x);
  FoldSummary s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() >= 2) {
    double acc = 0.0;
    for (double x : v) acc += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
  }
  return s;
}

double r2_or_nan(std::span<const double> y, std::span<const double> p) {
  try {
    return r_squared(y, p);
  } catch (const UndefinedMetric&) {
    return kNaN;
  }
}

/// Ids of `group` that the predicate accepts, in group order.
template <typename Pred>
std::vector<std::string> filter_ids(std::span<const std::string> group, Pred&& keep) {
  std::vector<std::string> out;
  for (const auto& id : group)
    if (keep(id)) out.push_back(id);
  return out;
}

gbt::FeatureMatrix rows_of(const EmbeddingTable& table, std::span<const std::string> ids) {
  gbt::FeatureMatrix x(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(table.dim));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& v = table.rows.at(ids[i]);
    for (std::size_t j = 0; j < table.dim; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
  }
  return x;
}

std::vector<double> values_of(const IndicatorTarget& target, std::span<const std::string> ids) {
  std::vector<double> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(target.values.at(id));
  return out;
}

std::vector<double> transformed(std::span<const double> raw, IndicatorKind kind) {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = transform(raw[i], kind);
  return out;
}

void inverse_in_place(std::vector<double>& v, IndicatorKind kind) {
  for (double& x : v) x = inverse_transform(x, kind);
}

void check_coverage(const IndicatorTarget& target, const SplitPlan& plan,
                    std::size_t usable_train) {
  const std::size_t total = plan.train_ids().size();
  if (total > 0 && static_cast<double>(usable_train) < 0.8 * static_cast<double>(total))
    spdlog::warn("target {}: only {} of {} training catchments have values",
                 target.indicator.name, usable_train, total);
}

}  // namespace

CvOutcome cv_grid_search(const EmbeddingTable& features, const IndicatorTarget& target,
                         const SplitPlan& plan, const GridSpec& grid, LeakageMonitor* monitor) {
  validate(grid);
  const IndicatorKind kind = target.indicator.kind;
  auto usable = [&](const std::string& id) {
    return target.values.contains(id) && features.rows.contains(id);
  };
  {
    std::size_t n = 0;
    for (const auto& f : plan.folds) n += filter_ids(f, usable).size();
    check_coverage(target, plan, n);
  }

  std::vector<int> rounds = grid.n_rounds;
  std::sort(rounds.begin(), rounds.end());
  rounds.erase(std::unique(rounds.begin(), rounds.end()), rounds.end());
  std::vector<int> depths = grid.max_depths;
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
  std::vector<double> lrs = grid.learning_rates;
  std::sort(lrs.begin(), lrs.end());
  lrs.erase(std::unique(lrs.begin(), lrs.end()), lrs.end());

  const std::size_t n_folds = plan.folds.size();
  // score[fold][lr][depth][rounds]
  const std::size_t cells = lrs.size() * depths.size() * rounds.size();
  std::vector<std::vector<double>> score(n_folds, std::vector<double>(cells, kNaN));
  auto cell = [&](std::size_t l, std::size_t d, std::size_t r) {
    return (l * depths.size() + d) * rounds.size() + r;
  };

  for (std::size_t f = 0; f < n_folds; ++f) {
    const auto val_ids = filter_ids(plan.folds[f], usable);
    std::vector<std::string> train_ids;
    for (std::size_t g = 0; g < n_folds; ++g)
      if (g != f) {
        const auto part = filter_ids(plan.folds[g], usable);
        train_ids.insert(train_ids.end(), part.begin(), part.end());
      }
    if (val_ids.size() < 2 || train_ids.size() < 2) {
      spdlog::warn("target {}: fold {} skipped ({} validation rows)", target.indicator.name,
                   f + 1, val_ids.size());
      continue;
    }
    const std::vector<double> y_val = values_of(target, val_ids);
    if (std::all_of(y_val.begin(), y_val.end(), [&](double v) { return v == y_val.front(); }))
      continue;
    const auto x_train = rows_of(features, train_ids);
    const auto x_val = rows_of(features, val_ids);
    const auto y_train = transformed(values_of(target, train_ids), kind);

    for (std::size_t l = 0; l < lrs.size(); ++l) {
      for (std::size_t d = 0; d < depths.size(); ++d) {
        const gbt::GBTParams params{lrs[l], depths[d], rounds.back(), 1};
        if (monitor) monitor->record_fit(train_ids);
        const auto model = gbt::fit(x_train, y_train, params);
        auto staged = gbt::staged_predict(model, x_val, rounds);
        for (std::size_t r = 0; r < rounds.size(); ++r) {
          inverse_in_place(staged[r], kind);
          score[f][cell(l, d, r)] = r2_or_nan(y_val, staged[r]);
        }
      }
    }
  }

  CvOutcome out;
  double best = -std::numeric_limits<double>::infinity();
  // Visiting order encodes the tie-break: fewer rounds, shallower, smaller lr.
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    for (std::size_t d = 0; d < depths.size(); ++d) {
      for (std::size_t l = 0; l < lrs.size(); ++l) {
        std::vector<double> per_fold(n_folds);
        for (std::size_t f = 0; f < n_folds; ++f) per_fold[f] = score[f][cell(l, d, r)];
        const FoldSummary s = summarize(per_fold);
        if (std::isnan(s.mean)) continue;
        if (s.mean > best) {
          best = s.mean;
          out.best = {lrs[l], depths[d], rounds[r], 1};
          out.per_fold_r2 = per_fold;
          out.mean_r2 = s.mean;
          out.evaluable = true;
        }
      }
    }
  }
  if (!out.evaluable) out.per_fold_r2.assign(n_folds, kNaN);
  return out;
}

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::kIdw: return "IDW";
    case Method::kKriging: return "KRIGING";
    case Method::kPdfm: return "PDFM";
    case Method::kAlphaEarth: return "ALPHAEARTH";
    case Method::kCdr: return "CDR";
    case Method::kMulti: return "MULTI";
  }
  return "";
}

Method parse_method(std::string_view text) {
  for (Method m : kAllMethods)
    if (to_string(m) == text) return m;
  throw ParseError("unknown method: " + std::string(text));
}

bool is_embedding_method(Method method) noexcept {
  return method != Method::kIdw && method != Method::kKriging;
}

EmbeddingSource source_of(Method method) {
  switch (method) {
    case Method::kPdfm: return EmbeddingSource::kPdfm;
    case Method::kAlphaEarth: return EmbeddingSource::kAlphaEarth;
    case Method::kCdr: return EmbeddingSource::kCdr;
    case Method::kMulti: return EmbeddingSource::kMulti;
    default: throw ContractError("method has no embedding source");
  }
}

namespace {

bool same_double(double a, double b) noexcept {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

}  // namespace

bool same_result(const MethodResult& a, const MethodResult& b) noexcept {
  if (a.target != b.target || a.method != b.method || a.kind != b.kind || a.status != b.status ||
      a.n_catchments != b.n_catchments || a.best_params != b.best_params ||
      a.per_fold_r2.size() != b.per_fold_r2.size())
    return false;
  for (std::size_t i = 0; i < a.per_fold_r2.size(); ++i)
    if (!same_double(a.per_fold_r2[i], b.per_fold_r2[i])) return false;
  return same_double(a.cv_r2_mean, b.cv_r2_mean) && same_double(a.cv_r2_sd, b.cv_r2_sd) &&
         same_double(a.test_r2, b.test_r2);
}

namespace {

std::vector<SamplePoint> samples_of(const IndicatorTarget& target,
                                    const std::map<std::string, GeoPoint>& centroids,
                                    std::span<const std::string> ids) {
  std::vector<SamplePoint> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back({centroids.at(id), target.values.at(id)});
  return out;
}

/// Predictions at `queries` from `train`, or nullopt when the kriging
/// variogram cannot be fit and the caller must fall back.
std::optional<std::vector<double>> interpolate(Method method, std::span<const SamplePoint> train,
                                               std::span<const GeoPoint> queries,
                                               const BaselineParams& params) {
  std::vector<double> out;
  out.reserve(queries.size());
  if (method == Method::kIdw) {
    for (const auto& q : queries)
      out.push_back(idw_predict(train, q, params.idw_power, params.idw_k, params.metric));
    return out;
  }
  try {
    const double max_lag = default_max_lag(train, params.metric);
    if (!(max_lag > 0.0)) return std::nullopt;
    const auto ev = empirical_variogram(train, params.variogram_bins, max_lag, params.metric);
    const VariogramModel model = fit_spherical(ev);
    const OrdinaryKriging ok(train, model, params.metric);
    for (const auto& q : queries) out.push_back(ok.predict_value(q));
    return out;
  } catch (const FitError&) {
    return std::nullopt;
  } catch (const DuplicateLocation&) {
    return std::nullopt;
  }
}

}  // namespace

MethodResult evaluate_baseline(Method method, const IndicatorTarget& target,
                               const SplitPlan& plan,
                               const std::map<std::string, GeoPoint>& centroids,
                               const BaselineParams& params, LeakageMonitor* monitor) {
  if (is_embedding_method(method)) throw ContractError("evaluate_baseline: not a baseline method");
  auto usable = [&](const std::string& id) {
    return target.values.contains(id) && centroids.contains(id);
  };
  const auto all_train = filter_ids(plan.train_ids(), usable);
  const auto test_ids = filter_ids(plan.test_ids, usable);
  if (all_train.size() + test_ids.size() < 8)
    throw ContractError("evaluate_baseline: fewer than 8 catchments with values");
  check_coverage(target, plan, all_train.size());

  MethodResult res;
  res.target = target.indicator.name;
  res.method = method;
  res.kind = target.indicator.kind;
  res.n_catchments = all_train.size() + test_ids.size();
  bool fell_back = false;

  auto predict_group = [&](std::span<const std::string> train_ids,
                           std::span<const std::string> query_ids) {
    if (monitor) monitor->record_fit(train_ids);
    const auto train = samples_of(target, centroids, train_ids);
    std::vector<GeoPoint> queries;
    for (const auto& id : query_ids) queries.push_back(centroids.at(id));
    auto pred = interpolate(method, train, queries, params);
    if (pred) return std::move(*pred);
    fell_back = true;
    double mean = 0.0;
    for (const auto& s : train) mean += s.value;
    mean /= static_cast<double>(train.size());
    return std::vector<double>(queries.size(), mean);
  };

  const std::size_t n_folds = plan.folds.size();
  res.per_fold_r2.assign(n_folds, kNaN);
  for (std::size_t f = 0; f < n_folds; ++f) {
    const auto val_ids = filter_ids(plan.folds[f], usable);
    std::vector<std::string> train_ids;
    for (std::size_t g = 0; g < n_folds; ++g)
      if (g != f) {
        const auto part = filter_ids(plan.folds[g], usable);
        train_ids.insert(train_ids.end(), part.begin(), part.end());
      }
    if (val_ids.size() < 2 || train_ids.empty()) continue;
    const auto pred = predict_group(train_ids, val_ids);
    res.per_fold_r2[f] = r2_or_nan(values_of(target, val_ids), pred);
  }
  const FoldSummary s = summarize(res.per_fold_r2);
  res.cv_r2_mean = s.mean;
  res.cv_r2_sd = s.sd;

  res.test_r2 = kNaN;
  if (test_ids.size() >= 2 && !all_train.empty())
    res.test_r2 = r2_or_nan(values_of(target, test_ids), predict_group(all_train, test_ids));

  if (std::isnan(res.cv_r2_mean) && std::isnan(res.test_r2))
    res.status = "not_applicable";
  else if (fell_back)
    res.status = "fallback";
  return res;
}

MethodResult evaluate_embedding(Method method, const EmbeddingTable& features,
                                const IndicatorTarget& target, const SplitPlan& plan,
                                const GridSpec& grid, LeakageMonitor* monitor) {
  MethodResult res;
  res.target = target.indicator.name;
  res.method = method;
  res.kind = target.indicator.kind;
  auto usable = [&](const std::string& id) {
    return target.values.contains(id) && features.rows.contains(id);
  };
  const auto all_train = filter_ids(plan.train_ids(), usable);
  const auto test_ids = filter_ids(plan.test_ids, usable);
  res.n_catchments = all_train.size() + test_ids.size();

  const CvOutcome cv = cv_grid_search(features, target, plan, grid, monitor);
  res.per_fold_r2 = cv.per_fold_r2;
  const FoldSummary s = summarize(res.per_fold_r2);
  res.cv_r2_mean = s.mean;
  res.cv_r2_sd = s.sd;
  res.test_r2 = kNaN;
  if (!cv.evaluable) {
    res.status = "unevaluable";
    return res;
  }
  res.best_params = cv.best;

  if (test_ids.size() >= 2 && all_train.size() >= 2) {
    if (monitor) monitor->record_fit(all_train);
    const auto model = gbt::fit(rows_of(features, all_train),
                                transformed(values_of(target, all_train), target.indicator.kind),
                                cv.best);
    auto pred = gbt::predict(model, rows_of(features, test_ids));
    inverse_in_place(pred, target.indicator.kind);
    res.test_r2 = r2_or_nan(values_of(target, test_ids), pred);
  }
  return res;
}

// ---- run_experiment ----

RunReport run_experiment(const ExperimentInputs& inputs, const ExperimentOptions& options,
                         ExperimentStats* stats) {
  std::vector<std::string> ids;
  std::map<std::string, GeoPoint> centroids;
  for (const auto& c : inputs.catchments) {
    ids.push_back(c.id);
    centroids.emplace(c.id, centroid(c.geometry));
  }
  const SplitPlan plan =
      options.fold_mode == FoldMode::kGeographic
          ? make_geographic_split(ids, centroids, options.seed, options.test_fraction,
                                  options.n_folds)
          : make_split(ids, options.seed, options.test_fraction, options.n_folds);
  validate(options.grid);

  std::map<EmbeddingSource, const EmbeddingTable*> by_source;
  for (const auto& t : inputs.embeddings) {
    validate(t);
    if (t.source == EmbeddingSource::kMulti)
      throw ContractError("run_experiment: pass single-source tables only");
    if (!by_source.emplace(t.source, &t).second)
      throw ContractError("run_experiment: duplicate embedding source");
  }
  std::optional<EmbeddingTable> multi;
  if (!inputs.embeddings.empty()) multi = fuse_embeddings(inputs.embeddings);
  auto features_for = [&](Method m) -> const EmbeddingTable* {
    if (m == Method::kMulti) return multi ? &*multi : nullptr;
    const auto it = by_source.find(source_of(m));
    return it == by_source.end() ? nullptr : it->second;
  };

  LeakageMonitor monitor(plan.test_ids);
  const std::size_t n_methods = std::size(kAllMethods);
  const std::size_t n_tasks = inputs.targets.size() * n_methods;
  std::vector<MethodResult> results(n_tasks);

  // Largest feature sets first so the tail of the queue is short.
  auto cost = [&](std::size_t task) -> std::size_t {
    const Method m = kAllMethods[task % n_methods];
    if (!is_embedding_method(m)) return 1;
    const auto* f = features_for(m);
    return f ? 8 + f->dim : 0;
  };
  std::vector<std::size_t> order(n_tasks);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cost(a) > cost(b); });

  std::mutex progress_mu;
  std::size_t done = 0;
  const unsigned threads = options.threads > 0 ? options.threads : worker_threads();

  parallel_for(n_tasks, threads, [&](std::size_t k) {
    const std::size_t task = order[k];
    const IndicatorTarget& target = inputs.targets[task / n_methods];
    const Method method = kAllMethods[task % n_methods];
    MethodResult res;
    try {
      if (!is_embedding_method(method)) {
        res = evaluate_baseline(method, target, plan, centroids, options.baselines, &monitor);
      } else if (const auto* f = features_for(method)) {
        res = evaluate_embedding(method, *f, target, plan, options.grid, &monitor);
      } else {
        throw ContractError("no embedding table for " + std::string(to_string(method)));
      }
    } catch (const Error& e) {
      res = MethodResult{};
      res.target = target.indicator.name;
      res.method = method;
      res.kind = target.indicator.kind;
      res.cv_r2_mean = res.cv_r2_sd = res.test_r2 = kNaN;
      res.per_fold_r2.assign(plan.folds.size(), kNaN);
      res.status = "error:" + e.code();
      spdlog::warn("{} / {}: {}", target.indicator.name, to_string(method), e.what());
    }
    results[task] = std::move(res);
    if (options.progress) {
      std::lock_guard lock(progress_mu);
      ++done;
      options.progress(std::to_string(done) + "/" + std::to_string(n_tasks) + " " +
                       target.indicator.name + " " + std::string(to_string(method)));
    }
  });

  if (stats) {
    stats->leakage_contacts = monitor.contacts();
    stats->fit_calls = monitor.fit_calls();
  }
  RunReport report;
  report.seed = options.seed;
  report.config_echo = options.config_echo;
  report.results = std::move(results);
  report.n_folds = plan.folds.size();
  return report;
}

// ---- report CSV ----

namespace {

std::string cell(double v) { return std::isnan(v) ? std::string() : text::format_double(v); }

double parse_cell(std::string_view field, std::size_t line, const char* name) {
  if (text::trim(field).empty()) return kNaN;
  const auto v = text::parse_double(field);
  if (!v) throw ParseError("row " + std::to_string(line) + ": bad " + name + " '" +
                           std::string(field) + "'");
  return *v;
}

}  // namespace

std::string report_to_csv(const RunReport& report) {
  std::ostringstream out;
  out << "# seed = " << report.seed << '\n';
  for (const auto& line : report.config_echo) out << "# " << line << '\n';
  out << "target,method,cv_r2_mean,cv_r2_sd";
  for (std::size_t f = 0; f < report.n_folds; ++f) out << ",fold" << (f + 1);
  out << ",test_r2,best_lr,best_depth,best_rounds,n_catchments,kind,status\n";
  for (const auto& r : report.results) {
    if (r.per_fold_r2.size() != report.n_folds)
      throw ContractError("report row has the wrong number of folds");
    out << r.target << ',' << to_string(r.method) << ',' << cell(r.cv_r2_mean) << ','
        << cell(r.cv_r2_sd);
    for (double v : r.per_fold_r2) out << ',' << cell(v);
    out << ',' << cell(r.test_r2) << ',';
    if (r.best_params)
      out << text::format_double(r.best_params->learning_rate) << ',' << r.best_params->max_depth
          << ',' << r.best_params->n_rounds;
    else
      out << ",,";
    out << ',' << r.n_catchments << ',' << to_string(r.kind) << ',' << r.status << '\n';
  }
  return out.str();
}

RunReport parse_report_csv(std::string_view csv) {
  RunReport report;
  bool have_header = false;
  bool have_seed = false;
  std::size_t line_no = 0, start = 0;
  while (start < csv.size()) {
    std::size_t end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    std::string_view line = csv.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty()) continue;
    if (line.front() == '#') {
      std::string_view body = line.substr(1);
      if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      if (!have_seed && body.starts_with("seed = ")) {
        const auto seed = text::parse_int(body.substr(7));
        if (!seed || *seed < 0) throw ParseError("row " + std::to_string(line_no) + ": bad seed");
        report.seed = static_cast<std::uint64_t>(*seed);
        have_seed = true;
      } else {
        report.config_echo.emplace_back(body);
      }
      continue;
    }
    const auto f = text::split_csv(line);
    if (!have_header) {
      if (f.size() < 12 || f[0] != "target" || f[1] != "method")
        throw ParseError("row " + std::to_string(line_no) + ": missing report header");
      report.n_folds = f.size() - 11;
      for (std::size_t k = 0; k < report.n_folds; ++k)
        if (f[4 + k] != "fold" + std::to_string(k + 1))
          throw ParseError("row " + std::to_string(line_no) + ": unexpected column " +
                           std::string(f[4 + k]));
      have_header = true;
      continue;
    }
    const std::size_t nf = report.n_folds;
    if (f.size() != nf + 11)
      throw ParseError("row " + std::to_string(line_no) + ": expected " +
                       std::to_string(nf + 11) + " fields, got " + std::to_string(f.size()));
    MethodResult r;
    r.target = std::string(f[0]);
    try {
      r.method = parse_method(f[1]);
      r.kind = parse_kind(f[nf + 9]);
    } catch (const Error& e) {
      throw ParseError("row " + std::to_string(line_no) + ": " + e.what());
    }
    r.cv_r2_mean = parse_cell(f[2], line_no, "cv_r2_mean");
    r.cv_r2_sd = parse_cell(f[3], line_no, "cv_r2_sd");
    for (std::size_t k = 0; k < nf; ++k) r.per_fold_r2.push_back(parse_cell(f[4 + k], line_no, "fold"));
    r.test_r2 = parse_cell(f[nf + 4], line_no, "test_r2");
    if (!text::trim(f[nf + 5]).empty()) {
      const auto lr = text::parse_double(f[nf + 5]);
      const auto depth = text::parse_int(f[nf + 6]);
      const auto rounds = text::parse_int(f[nf + 7]);
      if (!lr || !depth || !rounds)
        throw ParseError("row " + std::to_string(line_no) + ": bad best_* parameters");
      r.best_params = gbt::GBTParams{*lr, static_cast<int>(*depth), static_cast<int>(*rounds), 1};
    }
    const auto n = text::parse_int(f[nf + 8]);
    if (!n || *n < 0) throw ParseError("row " + std::to_string(line_no) + ": bad n_catchments");
    r.n_catchments = static_cast<std::size_t>(*n);
    r.status = std::string(f[nf + 10]);
    report.results.push_back(std::move(r));
  }
  if (!have_header) throw ParseError("report has no header row");
  return report;
}

void write_report(const std::string& path, const RunReport& report) {
  text::write_file(path, report_to_csv(report));
}

RunReport read_report(const std::string& path) {
  return parse_report_csv(text::read_file(path));
}

// ---- parallelism ----

unsigned worker_threads() {
  if (const char* env = std::getenv("GEOFM_BENCH_THREADS")) {
    const auto v = text::parse_int(env);
    if (v && *v > 0) return static_cast<unsigned>(*v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace geofm
