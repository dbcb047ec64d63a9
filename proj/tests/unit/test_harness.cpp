#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "geofm/errors.hpp"
#include "geofm/harness.hpp"

using namespace geofm;

namespace {

std::vector<std::string> make_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("K" + std::to_string(1000 + i));
  return ids;
}

struct GridFixture {
  std::vector<std::string> ids;
  std::map<std::string, GeoPoint> centroids;
};

/// side x side lattice with ~5 km spacing.
GridFixture lattice(int side) {
  GridFixture g;
  g.ids = make_ids(side * side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      g.centroids[g.ids[static_cast<std::size_t>(r * side + c)]] = {33.0 + 0.045 * c,
                                                                    -14.0 + 0.045 * r};
  return g;
}

IndicatorTarget make_target(const std::string& name, IndicatorKind kind) {
  IndicatorTarget t;
  t.indicator = {name, kind, Cadence::kMonthly};
  return t;
}

EmbeddingTable random_table(const std::vector<std::string>& ids, EmbeddingSource src,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  EmbeddingTable t;
  t.source = src;
  t.dim = source_dim(src);
  for (const auto& id : ids) {
    std::vector<double> row(t.dim);
    for (auto& v : row) v = z(rng);
    t.rows[id] = row;
  }
  return t;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("make_split sizes") {
  const auto ids = make_ids(100);
  const auto plan = make_split(ids, 1);
  CHECK(plan.test_ids.size() == 20);
  REQUIRE(plan.folds.size() == 5);
  for (const auto& f : plan.folds) CHECK(f.size() == 16);

  const auto big = make_split(make_ids(552), 7);
  CHECK(big.test_ids.size() == 110);
  std::vector<std::size_t> sizes;
  for (const auto& f : big.folds) sizes.push_back(f.size());
  CHECK(sizes == std::vector<std::size_t>{89, 89, 88, 88, 88});
}

TEST_CASE("make_split is deterministic and a partition") {
  auto ids = make_ids(137);
  const auto a = make_split(ids, 99);
  CHECK(a == make_split(ids, 99));
  CHECK_FALSE(a.test_ids == make_split(ids, 100).test_ids);
  std::shuffle(ids.begin(), ids.end(), std::mt19937_64(3));
  CHECK(a == make_split(ids, 99));  // input order does not matter

  std::multiset<std::string> all(a.test_ids.begin(), a.test_ids.end());
  for (const auto& f : a.folds) all.insert(f.begin(), f.end());
  CHECK(all.size() == 137);
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == 137);
  std::size_t lo = 1000, hi = 0;
  for (const auto& f : a.folds) {
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
  }
  CHECK(hi - lo <= 1);
  CHECK(a.train_ids().size() == 137 - a.test_ids.size());
}

TEST_CASE("make_split contracts") {
  CHECK_THROWS_AS(make_split(make_ids(9), 1), ContractError);
  auto dup = make_ids(12);
  dup[3] = dup[4];
  CHECK_THROWS_AS(make_split(dup, 1), ContractError);
  CHECK(make_split(make_ids(10), 1, 0.01).test_ids.size() == 1);
}

TEST_CASE("geographic split keeps the test set and bands the rest by latitude") {
  const auto g = lattice(12);
  const auto random = make_split(g.ids, 5);
  const auto geo = make_geographic_split(g.ids, g.centroids, 5);
  CHECK(geo.test_ids == random.test_ids);
  REQUIRE(geo.folds.size() == 5);
  double prev_max = -90.0;
  for (const auto& f : geo.folds) {
    double lo = 90.0, hi = -90.0;
    for (const auto& id : f) {
      lo = std::min(lo, g.centroids.at(id).lat);
      hi = std::max(hi, g.centroids.at(id).lat);
    }
    CHECK(lo >= prev_max);
    prev_max = hi;
  }
}

TEST_CASE("r_squared examples") {
  const std::vector<double> y{1, 2, 3};
  CHECK(r_squared(y, y) == 1.0);
  CHECK(r_squared(y, std::vector<double>{2, 2, 2}) == 0.0);
  CHECK(r_squared(y, std::vector<double>{1, 2, 4}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r_squared(y, std::vector<double>{3, 2, 1}) < 0.0);
  CHECK_THROWS_AS(r_squared(std::vector<double>{4, 4, 4}, y), UndefinedMetric);
  CHECK_THROWS_AS(r_squared(std::vector<double>{1}, std::vector<double>{1}), ContractError);
  CHECK_THROWS_AS(r_squared(y, std::vector<double>{1, 2}), ContractError);
}

TEST_CASE("fuse_embeddings concatenates in fixed order over the common ids") {
  std::mt19937_64 rng(4);
  const auto ids = make_ids(20);
  auto p = random_table(ids, EmbeddingSource::kPdfm, rng);
  auto a = random_table(ids, EmbeddingSource::kAlphaEarth, rng);
  auto c = random_table(ids, EmbeddingSource::kCdr, rng);
  c.rows.erase(ids[5]);

  const std::vector<EmbeddingTable> shuffled{c, p, a};
  const auto m = fuse_embeddings(shuffled);
  CHECK(m.source == EmbeddingSource::kMulti);
  CHECK(m.dim == 90);
  CHECK(m.rows.size() == 19);
  CHECK_FALSE(m.rows.contains(ids[5]));
  const auto& row = m.rows.at(ids[0]);
  CHECK(row[0] == p.rows.at(ids[0])[0]);
  CHECK(row[16] == a.rows.at(ids[0])[0]);
  CHECK(row[80] == c.rows.at(ids[0])[0]);

  const std::vector<EmbeddingTable> single{p};
  const auto one = fuse_embeddings(single);
  CHECK(one.dim == 16);
  CHECK(one.source == EmbeddingSource::kMulti);

  auto disjoint = a;
  disjoint.rows.clear();
  disjoint.rows["zzz"] = std::vector<double>(64, 0.0);
  const std::vector<EmbeddingTable> none{p, disjoint};
  CHECK_THROWS_AS(fuse_embeddings(none), ContractError);
}

TEST_CASE("grid spec defaults") {
  const GridSpec g;
  CHECK(g.size() == 80);
  GridSpec bad;
  bad.learning_rates = {0.0};
  CHECK_THROWS_AS(validate(bad), ContractError);
}

TEST_CASE("ties go to fewer rounds, then shallower trees, then smaller learning rate") {
  // A step on one feature is fit exactly by one stump at lr 1; every
  // additional round or level leaves the predictions unchanged.
  const auto ids = make_ids(60);
  EmbeddingTable feats;
  feats.source = EmbeddingSource::kCdr;
  feats.dim = 10;
  auto target = make_target("step", IndicatorKind::kRate);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<double> row(10);
    for (auto& v : row) v = u(rng);
    row[0] = i % 2 == 0 ? 0.25 : 0.75;
    feats.rows[ids[i]] = row;
    target.values[ids[i]] = i % 2 == 0 ? 0.1 : 0.6;
  }
  const auto plan = make_split(ids, 3);
  GridSpec grid;
  grid.learning_rates = {1.0};
  grid.max_depths = {3, 1, 2};
  grid.n_rounds = {5, 1, 3};
  const auto out = cv_grid_search(feats, target, plan, grid);
  REQUIRE(out.evaluable);
  CHECK(out.mean_r2 == doctest::Approx(1.0));
  CHECK(out.best.n_rounds == 1);
  CHECK(out.best.max_depth == 1);
  CHECK(out.best.learning_rate == 1.0);
}

TEST_CASE("cv_grid_search finds a depth-2 interaction") {
  std::mt19937_64 rng(21);
  const auto ids = make_ids(200);
  auto feats = random_table(ids, EmbeddingSource::kPdfm, rng);
  auto target = make_target("interaction", IndicatorKind::kRate);
  for (const auto& id : ids) {
    const auto& r = feats.rows.at(id);
    target.values[id] = r[0] > 0.0 ? (r[1] > 0.5 ? 0.8 : 0.4) : 0.1;
  }
  const auto plan = make_split(ids, 8);
  LeakageMonitor mon(plan.test_ids);
  const auto out = cv_grid_search(feats, target, plan, GridSpec{}, &mon);
  CHECK(out.mean_r2 > 0.9);
  CHECK(out.best.max_depth >= 2);
  CHECK(out.best.max_depth <= 4);
  CHECK(mon.contacts() == 0);
  CHECK(mon.fit_calls() > 0);
}

TEST_CASE("cv_grid_search on noise stays near zero") {
  double total = 0.0;
  GridSpec grid;
  grid.learning_rates = {0.01, 0.1};
  grid.max_depths = {2, 4};
  grid.n_rounds = {50, 200};
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed + 40);
    std::normal_distribution<double> z(0.0, 1.0);
    const auto ids = make_ids(100);
    auto feats = random_table(ids, EmbeddingSource::kCdr, rng);
    auto target = make_target("noise", IndicatorKind::kRate);
    for (const auto& id : ids) target.values[id] = 0.5 + 0.1 * z(rng);
    total += cv_grid_search(feats, target, make_split(ids, seed), grid).mean_r2;
  }
  CHECK(total / 3.0 <= 0.1);
}

TEST_CASE("GBT fold scores are computed on the raw scale") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto ids = make_ids(80);
  auto feats = random_table(ids, EmbeddingSource::kCdr, rng);
  auto target = make_target("skewed", IndicatorKind::kCount);
  for (const auto& id : ids) target.values[id] = std::round(std::exp(2.0 + 1.5 * feats.rows.at(id)[0] + 0.5 * z(rng)));
  const auto plan = make_split(ids, 2);
  GridSpec one;
  one.learning_rates = {0.1};
  one.max_depths = {3};
  one.n_rounds = {50};
  const auto out = cv_grid_search(feats, target, plan, one);

  // Fold 0 by hand.
  std::vector<std::string> train;
  for (std::size_t f = 1; f < plan.folds.size(); ++f)
    train.insert(train.end(), plan.folds[f].begin(), plan.folds[f].end());
  auto rows = [&](const std::vector<std::string>& which) {
    gbt::FeatureMatrix x(static_cast<Eigen::Index>(which.size()), 10);
    for (std::size_t i = 0; i < which.size(); ++i)
      for (int j = 0; j < 10; ++j) x(static_cast<Eigen::Index>(i), j) = feats.rows.at(which[i])[j];
    return x;
  };
  std::vector<double> ytr;
  for (const auto& id : train) ytr.push_back(std::log1p(target.values.at(id)));
  const auto model = gbt::fit(rows(train), ytr, gbt::GBTParams{0.1, 3, 50, 1});
  const auto pred_t = gbt::predict(model, rows(plan.folds[0]));
  std::vector<double> truth, truth_t, pred_raw;
  for (std::size_t i = 0; i < plan.folds[0].size(); ++i) {
    const double v = target.values.at(plan.folds[0][i]);
    truth.push_back(v);
    truth_t.push_back(std::log1p(v));
    pred_raw.push_back(std::expm1(pred_t[i]));
  }
  const double raw = r_squared(truth, pred_raw);
  const double transformed = r_squared(truth_t, pred_t);
  CHECK(out.per_fold_r2[0] == doctest::Approx(raw).epsilon(1e-9));
  CHECK(std::abs(raw - transformed) > 1e-3);
}

TEST_CASE("baselines on a smooth target") {
  const auto g = lattice(15);
  auto target = make_target("smooth", IndicatorKind::kRate);
  for (const auto& [id, p] : g.centroids) target.values[id] = 0.01 * (p.lon + p.lat) + 0.5;
  const auto plan = make_split(g.ids, 4);
  LeakageMonitor mon(plan.test_ids);
  const auto idw = evaluate_baseline(Method::kIdw, target, plan, g.centroids, {}, &mon);
  REQUIRE(idw.per_fold_r2.size() == 5);
  for (double r : idw.per_fold_r2) CHECK(r > 0.9);
  CHECK(idw.status == "ok");
  CHECK(idw.test_r2 > 0.9);
  const auto kr = evaluate_baseline(Method::kKriging, target, plan, g.centroids, {}, &mon);
  CHECK(kr.cv_r2_mean > 0.9);
  CHECK(mon.contacts() == 0);
  CHECK(mon.fit_calls() == 12);
}

TEST_CASE("baselines on a constant target are not applicable") {
  const auto g = lattice(6);
  auto target = make_target("flat", IndicatorKind::kRate);
  for (const auto& id : g.ids) target.values[id] = 0.3;
  const auto res = evaluate_baseline(Method::kIdw, target, make_split(g.ids, 1), g.centroids);
  CHECK(res.status == "not_applicable");
  CHECK(std::isnan(res.cv_r2_mean));
  for (double r : res.per_fold_r2) CHECK(std::isnan(r));
}

TEST_CASE("kriging on spatial white noise scores near zero") {
  std::vector<double> means;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    std::mt19937_64 rng(seed + 100);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    const auto ids = make_ids(200);
    std::map<std::string, GeoPoint> cent;
    auto target = make_target("white", IndicatorKind::kRate);
    for (const auto& id : ids) {
      cent[id] = {34.0 + u(rng), -13.0 + u(rng)};
      target.values[id] = z(rng);
    }
    const auto res = evaluate_baseline(Method::kKriging, target, make_split(ids, seed), cent);
    means.push_back(res.cv_r2_mean);
  }
  const double avg = mean_of(means);
  CHECK(avg > -0.15);
  CHECK(avg < 0.15);
}

TEST_CASE("baseline contracts") {
  const auto g = lattice(3);
  auto target = make_target("tiny", IndicatorKind::kRate);
  for (int i = 0; i < 7; ++i) target.values[g.ids[static_cast<std::size_t>(i)]] = i;
  CHECK_THROWS_AS(
      evaluate_baseline(Method::kIdw, target, make_split(make_ids(10), 1), g.centroids),
      ContractError);
  CHECK_THROWS_AS(evaluate_baseline(Method::kPdfm, target, make_split(g.ids, 1), g.centroids),
                  ContractError);
}

TEST_CASE("method names round-trip") {
  for (Method m : kAllMethods) CHECK(parse_method(to_string(m)) == m);
  CHECK(to_string(Method::kMulti) == "MULTI");
  CHECK_THROWS_AS(parse_method("GBT"), ParseError);
  CHECK(is_embedding_method(Method::kCdr));
  CHECK_FALSE(is_embedding_method(Method::kKriging));
  CHECK(source_of(Method::kAlphaEarth) == EmbeddingSource::kAlphaEarth);
}

namespace {

ExperimentInputs small_inputs(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto g = lattice(8);
  ExperimentInputs in;
  for (const auto& id : g.ids) {
    Catchment c;
    c.id = id;
    const auto p = g.centroids.at(id);
    const double h = 0.02;
    c.geometry.exterior = {{p.lon - h, p.lat - h}, {p.lon + h, p.lat - h}, {p.lon + h, p.lat + h},
                           {p.lon - h, p.lat + h}};
    c.population = 100;
    c.area_km2 = 20;
    in.catchments.push_back(c);
  }
  in.embeddings.push_back(random_table(g.ids, EmbeddingSource::kPdfm, rng));
  in.embeddings.push_back(random_table(g.ids, EmbeddingSource::kCdr, rng));
  auto rate = make_target("rate_a", IndicatorKind::kRate);
  auto count = make_target("count_b", IndicatorKind::kCount);
  auto flat = make_target("flat_c", IndicatorKind::kRate);
  for (const auto& id : g.ids) {
    const auto& e = in.embeddings[0].rows.at(id);
    rate.values[id] = 0.3 + 0.1 * std::tanh(e[0]);
    count.values[id] = std::round(20.0 * std::exp(e[1]));
    flat.values[id] = 0.5;
  }
  in.targets = {rate, count, flat};
  return in;
}

ExperimentOptions small_options() {
  ExperimentOptions o;
  o.seed = 17;
  o.grid.learning_rates = {0.1, 0.3};
  o.grid.max_depths = {2, 3};
  o.grid.n_rounds = {20, 50};
  o.config_echo = {"split.seed = 17", "note = small"};
  return o;
}

}  // namespace

TEST_CASE("run_experiment: six methods per target, consistent summaries, no leakage") {
  const auto in = small_inputs(5);
  ExperimentStats stats;
  const auto rep = run_experiment(in, small_options(), &stats);
  REQUIRE(rep.results.size() == 18);
  CHECK(stats.leakage_contacts == 0);
  CHECK(stats.fit_calls > 0);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t m = 0; m < 6; ++m)
      CHECK(rep.results[t * 6 + m].method == kAllMethods[m]);

  const auto alpha = std::find_if(rep.results.begin(), rep.results.end(), [](const auto& r) {
    return r.method == Method::kAlphaEarth;
  });
  CHECK(alpha->status.starts_with("error:"));

  for (const auto& r : rep.results) {
    if (r.status != "ok") continue;
    std::vector<double> folds;
    for (double v : r.per_fold_r2)
      if (!std::isnan(v)) folds.push_back(v);
    const double m = mean_of(folds);
    double ss = 0.0;
    for (double v : folds) ss += (v - m) * (v - m);
    CHECK(r.cv_r2_mean == doctest::Approx(m).epsilon(1e-12));
    CHECK(r.cv_r2_sd == doctest::Approx(std::sqrt(ss / (folds.size() - 1))).epsilon(1e-12));
  }
  for (const auto& r : rep.results)
    if (r.target == "flat_c" && !is_embedding_method(r.method)) CHECK(r.status == "not_applicable");

  // Reruns are identical, including through the CSV.
  const auto again = run_experiment(in, small_options());
  CHECK(report_to_csv(again) == report_to_csv(rep));
  const auto parsed = parse_report_csv(report_to_csv(rep));
  REQUIRE(parsed.results.size() == rep.results.size());
  for (std::size_t i = 0; i < rep.results.size(); ++i)
    CHECK(same_result(parsed.results[i], rep.results[i]));
  CHECK(parsed.seed == 17);
  CHECK(parsed.config_echo == rep.config_echo);
  CHECK(report_to_csv(parsed) == report_to_csv(rep));
}

TEST_CASE("report CSV header and parse errors") {
  RunReport rep;
  rep.seed = 3;
  MethodResult r;
  r.target = "x";
  r.method = Method::kKriging;
  r.per_fold_r2 = {0.1, 0.2, NAN, 0.4, 0.5};
  r.cv_r2_mean = 0.3;
  r.cv_r2_sd = 0.18;
  r.test_r2 = -0.25;
  r.n_catchments = 40;
  rep.results.push_back(r);
  const auto csv = report_to_csv(rep);
  CHECK(csv.find("target,method,cv_r2_mean,cv_r2_sd,fold1,fold2,fold3,fold4,fold5,test_r2,best_lr,"
                 "best_depth,best_rounds,n_catchments") != std::string::npos);
  const auto back = parse_report_csv(csv);
  CHECK(same_result(back.results[0], r));
  CHECK_THROWS_AS(parse_report_csv("nonsense\n"), ParseError);
  auto broken = csv;
  broken.insert(broken.rfind("x,"), "y,IDW,oops\n");
  try {
    parse_report_csv(broken);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("row") != std::string::npos);
  }
}

TEST_CASE("parallel_for runs every index once and rethrows") {
  std::vector<std::atomic<int>> hits(500);
  parallel_for(500, 4, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw ContractError("boom");
                               }),
                  ContractError);
  CHECK(worker_threads() >= 1);
}
