#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "geofm/errors.hpp"
#include "geofm/gbt.hpp"
#include "oracles.hpp"

using namespace geofm;
using gbt::FeatureMatrix;
using gbt::GBTParams;

namespace {

struct Fixture {
  FeatureMatrix x;
  std::vector<double> y;
};

Fixture random_fixture(std::mt19937_64& rng, int n, int d, bool integer_features = false) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> k(0, 5);
  Fixture f{FeatureMatrix(n, d), std::vector<double>(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) f.x(i, j) = integer_features ? k(rng) : z(rng);
    f.y[i] = std::sin(f.x(i, 0)) + 0.5 * f.x(i, d > 1 ? 1 : 0) * f.x(i, 0) + 0.3 * z(rng);
  }
  return f;
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / a.size();
}

}  // namespace

TEST_CASE("constant target is predicted exactly") {
  std::mt19937_64 rng(1);
  auto f = random_fixture(rng, 50, 3);
  std::fill(f.y.begin(), f.y.end(), 4.25);
  const auto m = gbt::fit(f.x, f.y, {0.3, 4, 20, 1});
  for (double p : gbt::predict(m, f.x)) CHECK(p == 4.25);
  for (const auto& t : m.trees) CHECK(t.nodes.size() == 1);
}

TEST_CASE("one stump recovers a step") {
  FeatureMatrix x(100, 2);
  std::vector<double> y(100);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = (i + 0.5) / 100.0;
    x(i, 1) = u(rng);
    y[i] = x(i, 0) > 0.5 ? 1.0 : 0.0;
  }
  const auto m = gbt::fit(x, y, {1.0, 2, 1, 1});
  CHECK(mse(gbt::predict(m, x), y) < 1e-12);
  REQUIRE(m.trees.size() == 1);
  const auto& root = m.trees[0].nodes[0];
  CHECK(root.feature == 0);
  CHECK(root.threshold > 0.495);
  CHECK(root.threshold < 0.505);
}

TEST_CASE("root split agrees with a brute-force search") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 40; ++t) {
    auto f = random_fixture(rng, 30 + t, 4, t % 2 == 0);
    const auto m = gbt::fit(f.x, f.y, {1.0, 1, 1, 1});
    std::vector<std::vector<double>> rows(f.y.size(), std::vector<double>(4));
    for (std::size_t i = 0; i < f.y.size(); ++i)
      for (int j = 0; j < 4; ++j) rows[i][j] = f.x(static_cast<Eigen::Index>(i), j);
    const double mean = std::accumulate(f.y.begin(), f.y.end(), 0.0) / f.y.size();
    std::vector<double> resid(f.y.size());
    for (std::size_t i = 0; i < f.y.size(); ++i) resid[i] = f.y[i] - mean;
    const auto want = oracle::best_split(rows, resid);
    const auto pred = gbt::predict(m, f.x);
    double sse = 0.0;
    for (std::size_t i = 0; i < f.y.size(); ++i) sse += (f.y[i] - pred[i]) * (f.y[i] - pred[i]);
    CHECK(sse == doctest::Approx(want.sse).epsilon(1e-9));
    CHECK(m.trees[0].nodes[0].feature == want.feature);
    CHECK(m.trees[0].nodes[0].threshold == doctest::Approx(want.threshold).epsilon(1e-12));
  }
}

TEST_CASE("xor needs depth two") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureMatrix x(300, 2);
  std::vector<double> y(300);
  for (int i = 0; i < 300; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    y[i] = (x(i, 0) > 0.5) != (x(i, 1) > 0.5) ? 1.0 : 0.0;
  }
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 300.0;
  const double var = mse(std::vector<double>(300, mean), y);
  const auto stumps = gbt::fit(x, y, {0.3, 1, 400, 1});
  const auto deep = gbt::fit(x, y, {0.3, 2, 400, 1});
  CHECK(mse(gbt::predict(stumps, x), y) > 0.5 * var);
  CHECK(mse(gbt::predict(deep, x), y) < 1e-3);
}

TEST_CASE("a perfectly balanced xor offers no greedy root split") {
  FeatureMatrix x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  const std::vector<double> y{0, 1, 1, 0};
  const auto m = gbt::fit(x, y, {1.0, 2, 3, 1});
  for (const auto& t : m.trees) CHECK(t.nodes.size() == 1);
}

TEST_CASE("learning rate near zero keeps the base score") {
  std::mt19937_64 rng(4);
  const auto f = random_fixture(rng, 80, 3);
  const auto m = gbt::fit(f.x, f.y, {1e-12, 4, 50, 1});
  const double mean = std::accumulate(f.y.begin(), f.y.end(), 0.0) / f.y.size();
  for (double p : gbt::predict(m, f.x)) CHECK(std::abs(p - mean) < 1e-6);
}

TEST_CASE("permuting rows gives an identical model") {
  std::mt19937_64 rng(5);
  for (bool ints : {false, true}) {
    const auto f = random_fixture(rng, 120, 5, ints);
    const GBTParams p{0.1, 4, 30, 1};
    const auto base = gbt::fit(f.x, f.y, p);
    std::vector<int> perm(120);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    FeatureMatrix x2(120, 5);
    std::vector<double> y2(120);
    for (int i = 0; i < 120; ++i) {
      x2.row(i) = f.x.row(perm[i]);
      y2[i] = f.y[perm[i]];
    }
    CHECK(gbt::fit(x2, y2, p) == base);
  }
}

TEST_CASE("scaling a feature keeps every prediction") {
  std::mt19937_64 rng(6);
  const auto f = random_fixture(rng, 100, 4);
  const GBTParams p{0.3, 3, 40, 1};
  const auto base = gbt::predict(gbt::fit(f.x, f.y, p), f.x);
  FeatureMatrix scaled = f.x;
  scaled.col(1) *= 37.5;
  const auto after = gbt::predict(gbt::fit(scaled, f.y, p), scaled);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(base[i] - after[i]) < 1e-9);
}

TEST_CASE("training loss never increases") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 10; ++t) {
    const auto f = random_fixture(rng, 60, 3, t % 3 == 0);
    for (int depth : {1, 2, 5}) {
      gbt::FitTrace trace;
      gbt::fit(f.x, f.y, {0.3, depth, 60, 1}, &trace);
      REQUIRE(trace.train_mse.size() == 61);
      for (std::size_t r = 1; r < trace.train_mse.size(); ++r)
        CHECK(trace.train_mse[r] <= trace.train_mse[r - 1]);
    }
  }
}

TEST_CASE("tree structure invariants") {
  std::mt19937_64 rng(8);
  const auto f = random_fixture(rng, 90, 3);
  for (int depth : {1, 3, 6}) {
    const auto m = gbt::fit(f.x, f.y, {0.1, depth, 10, 3});
    for (const auto& t : m.trees) {
      CHECK(t.depth() <= depth);
      for (const auto& n : t.nodes) {
        if (n.is_leaf()) continue;
        int left = 0, right = 0;
        for (Eigen::Index i = 0; i < f.x.rows(); ++i) (f.x(i, n.feature) >= n.threshold ? right : left)++;
        CHECK(left > 0);
        CHECK(right > 0);
      }
    }
  }
}

TEST_CASE("min_samples_leaf is respected at the root") {
  std::mt19937_64 rng(9);
  auto f = random_fixture(rng, 40, 2);
  f.y.assign(40, 0.0);
  f.y[0] = 100.0;  // an outlier a free split would isolate
  const auto m = gbt::fit(f.x, f.y, {1.0, 1, 1, 10});
  const auto& root = m.trees[0].nodes[0];
  REQUIRE_FALSE(root.is_leaf());
  int left = 0, right = 0;
  for (Eigen::Index i = 0; i < 40; ++i) (f.x(i, root.feature) >= root.threshold ? right : left)++;
  CHECK(std::min(left, right) >= 10);
}

TEST_CASE("truncated and staged predictions agree with shorter fits") {
  std::mt19937_64 rng(10);
  const auto f = random_fixture(rng, 70, 3);
  const auto full = gbt::fit(f.x, f.y, {0.1, 3, 40, 1});
  const auto short_fit = gbt::fit(f.x, f.y, {0.1, 3, 15, 1});
  const auto a = gbt::predict(full, f.x, 15);
  const auto b = gbt::predict(short_fit, f.x);
  CHECK(a == b);
  const std::vector<int> cps{0, 15, 40};
  const auto staged = gbt::staged_predict(full, f.x, cps);
  CHECK(staged[1] == b);
  CHECK(staged[2] == gbt::predict(full, f.x));
  for (double p : staged[0]) CHECK(p == full.base_score);
  const std::vector<int> unsorted{5, 2};
  CHECK_THROWS_AS(gbt::staged_predict(full, f.x, unsorted), ContractError);
}

TEST_CASE("empty tree list predicts the base score") {
  gbt::GBTModel m;
  m.base_score = 1.5;
  m.n_features = 2;
  FeatureMatrix x(3, 2);
  x.setZero();
  for (double p : gbt::predict(m, x)) CHECK(p == 1.5);
}

TEST_CASE("JSON round trip and malformed documents") {
  std::mt19937_64 rng(11);
  const auto f = random_fixture(rng, 50, 3);
  const auto m = gbt::fit(f.x, f.y, {0.05, 3, 12, 2});
  const auto doc = gbt::to_json(m);
  CHECK(gbt::model_from_json(nlohmann::json::parse(doc.dump())) == m);
  auto bad = doc;
  bad["trees"][0]["left"] = std::vector<int>{5};
  CHECK_THROWS_AS(gbt::model_from_json(bad), ParseError);
  bad = doc;
  bad["format"] = "other";
  CHECK_THROWS_AS(gbt::model_from_json(bad), ParseError);
}

TEST_CASE("input contracts") {
  FeatureMatrix x(3, 1);
  x << 1, 2, 3;
  CHECK_THROWS_AS(gbt::fit(x, std::vector<double>{1, 2}, {}), ContractError);
  CHECK_THROWS_AS(gbt::fit(x, std::vector<double>{1, NAN, 2}, {}), ContractError);
  CHECK_THROWS_AS(gbt::fit(x.topRows(1), std::vector<double>{1}, {}), ContractError);
  CHECK_THROWS_AS(gbt::fit(x, std::vector<double>{1, 2, 3}, {0.0, 2, 1, 1}), ContractError);
  CHECK_THROWS_AS(gbt::fit(x, std::vector<double>{1, 2, 3}, {0.1, 0, 1, 1}), ContractError);
  const auto m = gbt::fit(x, std::vector<double>{1, 2, 3}, {0.1, 1, 1, 1});
  FeatureMatrix wrong(2, 2);
  wrong.setZero();
  CHECK_THROWS_AS(gbt::predict(m, wrong), ContractError);
}

TEST_CASE("ties at the threshold go right") {
  FeatureMatrix x(6, 1);
  x << 1, 1, 1, 2, 2, 2;
  const std::vector<double> y{0, 0, 0, 1, 1, 1};
  const auto m = gbt::fit(x, y, {1.0, 1, 1, 1});
  FeatureMatrix q(1, 1);
  q << m.trees[0].nodes[0].threshold;
  CHECK(gbt::predict(m, q)[0] == doctest::Approx(1.0));
}
