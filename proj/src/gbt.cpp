#include "geofm/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#if defined(__AVX512F__) && defined(__AVX512VL__)
#include <immintrin.h>
#endif

#include <nlohmann/json.hpp>

#include "geofm/errors.hpp"

namespace geofm::gbt {

void validate(const GBTParams& p) {
  if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0))
    throw ContractError("learning_rate must be in (0, 1]");
  if (p.max_depth < 1) throw ContractError("max_depth must be >= 1");
  if (p.n_rounds < 1) throw ContractError("n_rounds must be >= 1");
  if (p.min_samples_leaf < 1) throw ContractError("min_samples_leaf must be >= 1");
}

double RegressionTree::predict(std::span<const double> row) const noexcept {
  int i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = row[n.feature] >= n.threshold ? n.right : n.left;
  }
  return nodes[i].value;
}

int RegressionTree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[nodes[i].left] = level[i] + 1;
      level[nodes[i].right] = level[i] + 1;
    }
  }
  return deepest;
}

namespace {

using Index = std::uint32_t;

// Feature lanes are padded to a multiple of this so the split kernels never
// need a tail loop. Padding lanes mirror feature 0 and are never selected.
constexpr std::size_t kLanes = 8;

// Training rows reordered canonically, plus per-feature sort orders laid out
// position-major: slot p*stride + f holds the row at sorted position p of
// feature f. rank() is row-major (row*stride + f) and holds dense value ranks,
// consulted only for lane blocks that contain tied values.
class Presorted {
 public:
  Presorted(const FeatureMatrix& X, std::span<const double> y)
      : n_(X.rows()), d_(X.cols()), stride_((d_ + kLanes - 1) / kLanes * kLanes) {
    std::vector<Index> rows(n_);
    std::iota(rows.begin(), rows.end(), Index{0});
    std::sort(rows.begin(), rows.end(), [&](Index a, Index b) {
      for (std::size_t f = 0; f < d_; ++f) {
        if (X(a, f) != X(b, f)) return X(a, f) < X(b, f);
      }
      if (y[a] != y[b]) return y[a] < y[b];
      return a < b;
    });
    x_.resize(n_ * d_);
    y_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t f = 0; f < d_; ++f) x_[i * d_ + f] = X(rows[i], f);
      y_[i] = y[rows[i]];
    }

    order_.resize(n_ * stride_);
    rank_.assign(n_ * stride_, 0);
    block_has_ties_.assign(stride_ / kLanes, 0);
    std::vector<Index> by_value(n_);
    for (std::size_t f = 0; f < d_; ++f) {
      std::iota(by_value.begin(), by_value.end(), Index{0});
      std::stable_sort(by_value.begin(), by_value.end(),
                       [&](Index a, Index b) { return value(a, f) < value(b, f); });
      Index rank = 0;
      for (std::size_t p = 0; p < n_; ++p) {
        if (p > 0) {
          if (value(by_value[p], f) != value(by_value[p - 1], f))
            ++rank;
          else
            block_has_ties_[f / kLanes] = 1;
        }
        order_[p * stride_ + f] = by_value[p];
        rank_[by_value[p] * stride_ + f] = rank;
      }
    }
    for (std::size_t p = 0; p < n_; ++p) {
      for (std::size_t f = d_; f < stride_; ++f) {
        order_[p * stride_ + f] = order_[p * stride_];
        rank_[p * stride_ + f] = rank_[p * stride_];
      }
    }
    if (d_ % kLanes != 0 && block_has_ties_[0]) block_has_ties_.back() = 1;
  }

  std::size_t rows() const noexcept { return n_; }
  std::size_t cols() const noexcept { return d_; }
  std::size_t stride() const noexcept { return stride_; }
  double value(Index row, std::size_t f) const noexcept { return x_[row * d_ + f]; }
  std::span<const double> targets() const noexcept { return y_; }
  const std::vector<Index>& order() const noexcept { return order_; }
  const std::vector<Index>& rank() const noexcept { return rank_; }
  const std::vector<std::uint8_t>& block_has_ties() const noexcept { return block_has_ties_; }

 private:
  std::size_t n_, d_, stride_;
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<Index> order_;
  std::vector<Index> rank_;
  std::vector<std::uint8_t> block_has_ties_;
};

struct Segment {
  std::size_t begin, end;
  double sum;
  int node;
};

struct SplitChoice {
  int feature = -1;
  std::size_t last_left = 0;  // position of the last row going left
  double left_sum = 0.0;
};

// Per-feature running state of one split sweep.
struct SweepState {
  double* prefix;
  double* best_gain;
  double* best_sum;
  Index* best_pos;
};

struct SweepInput {
  const Index* idx;
  const Index* rank;
  const std::uint8_t* block_has_ties;
  std::size_t stride;
  const double* grad;
  const double* inv_count;
};

// Accumulates prefix sums over positions [from, to) without scoring.
void accumulate(const SweepInput& in, std::size_t from, std::size_t to, SweepState st) {
  const std::size_t stride = in.stride;
  for (std::size_t p = from; p < to; ++p) {
    const Index* row = in.idx + p * stride;
#if defined(__AVX512F__) && defined(__AVX512VL__)
    for (std::size_t f = 0; f < stride; f += kLanes) {
      const __m256i vi = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(row + f));
      const __m512d g = _mm512_i32gather_pd(vi, in.grad, 8);
      _mm512_storeu_pd(st.prefix + f, _mm512_add_pd(_mm512_loadu_pd(st.prefix + f), g));
    }
#else
    for (std::size_t f = 0; f < stride; ++f) st.prefix[f] += in.grad[row[f]];
#endif
  }
}

// Scores every candidate boundary after positions [from, to]. A boundary is
// valid only between distinct values; the first best position per feature wins.
void sweep(const SweepInput& in, std::size_t seg_begin, std::size_t m, double total,
           std::size_t from, std::size_t to, SweepState st) {
  const std::size_t stride = in.stride;
  for (std::size_t p = from; p <= to; ++p) {
    const std::size_t n_left = p - seg_begin + 1;
    const double inv_l = in.inv_count[n_left];
    const double inv_r = in.inv_count[m - n_left];
    const Index* row = in.idx + p * stride;
    const Index* next = row + stride;
    const auto pos = static_cast<Index>(p);
#if defined(__AVX512F__) && defined(__AVX512VL__)
    const __m512d vl = _mm512_set1_pd(inv_l);
    const __m512d vr = _mm512_set1_pd(inv_r);
    const __m512d vt = _mm512_set1_pd(total);
    const __m256i vp = _mm256_set1_epi32(static_cast<int>(pos));
    const __m256i lane = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
    const __m256i vstride = _mm256_set1_epi32(static_cast<int>(stride));
    for (std::size_t f = 0; f < stride; f += kLanes) {
      const __m256i vi = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(row + f));
      const __m512d g = _mm512_i32gather_pd(vi, in.grad, 8);
      const __m512d s = _mm512_add_pd(_mm512_loadu_pd(st.prefix + f), g);
      _mm512_storeu_pd(st.prefix + f, s);
      const __m512d r = _mm512_sub_pd(vt, s);
      const __m512d gain = _mm512_add_pd(_mm512_mul_pd(_mm512_mul_pd(s, s), vl),
                                         _mm512_mul_pd(_mm512_mul_pd(r, r), vr));
      const __m512d best = _mm512_loadu_pd(st.best_gain + f);
      __mmask8 take = _mm512_cmp_pd_mask(gain, best, _CMP_GT_OQ);
      if (in.block_has_ties[f / kLanes]) {
        const __m256i vn = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(next + f));
        const __m256i col = _mm256_add_epi32(lane, _mm256_set1_epi32(static_cast<int>(f)));
        const __m256i ka = _mm256_i32gather_epi32(
            reinterpret_cast<const int*>(in.rank), _mm256_add_epi32(_mm256_mullo_epi32(vi, vstride), col), 4);
        const __m256i kb = _mm256_i32gather_epi32(
            reinterpret_cast<const int*>(in.rank), _mm256_add_epi32(_mm256_mullo_epi32(vn, vstride), col), 4);
        take &= _mm256_cmpneq_epu32_mask(ka, kb);
      }
      _mm512_storeu_pd(st.best_gain + f, _mm512_mask_mov_pd(best, take, gain));
      _mm512_storeu_pd(st.best_sum + f,
                       _mm512_mask_mov_pd(_mm512_loadu_pd(st.best_sum + f), take, s));
      auto* bp = reinterpret_cast<__m256i*>(st.best_pos + f);
      _mm256_storeu_si256(bp, _mm256_mask_mov_epi32(_mm256_loadu_si256(bp), take, vp));
    }
#else
    for (std::size_t f = 0; f < stride; ++f) {
      const double s = st.prefix[f] + in.grad[row[f]];
      st.prefix[f] = s;
      const double r = total - s;
      const double gain = s * s * inv_l + r * r * inv_r;
      const bool distinct = !in.block_has_ties[f / kLanes] ||
                            in.rank[row[f] * stride + f] != in.rank[next[f] * stride + f];
      if (distinct && gain > st.best_gain[f]) {
        st.best_gain[f] = gain;
        st.best_sum[f] = s;
        st.best_pos[f] = pos;
      }
    }
#endif
  }
}

// Stable partition of every feature column of positions [begin, end) by
// go_right. Cursors hold output slot offsets (position * stride + f).
void partition(const Index* idx, std::size_t stride, const Index* go_right, std::size_t begin,
               std::size_t end, Index* cursor_left, Index* cursor_right, Index* out) {
  for (std::size_t p = begin; p < end; ++p) {
    const Index* row = idx + p * stride;
#if defined(__AVX512F__) && defined(__AVX512VL__)
    const __m256i vstride = _mm256_set1_epi32(static_cast<int>(stride));
    for (std::size_t f = 0; f < stride; f += kLanes) {
      const __m256i r = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(row + f));
      const __m256i fl = _mm256_i32gather_epi32(reinterpret_cast<const int*>(go_right), r, 4);
      const __mmask8 right = _mm256_test_epi32_mask(fl, fl);
      auto* lc = reinterpret_cast<__m256i*>(cursor_left + f);
      auto* rc = reinterpret_cast<__m256i*>(cursor_right + f);
      const __m256i lcv = _mm256_loadu_si256(lc);
      const __m256i rcv = _mm256_loadu_si256(rc);
      const __m256i dest = _mm256_mask_blend_epi32(right, lcv, rcv);
      _mm256_i32scatter_epi32(reinterpret_cast<int*>(out), dest, r, 4);
      _mm256_storeu_si256(rc, _mm256_mask_add_epi32(rcv, right, rcv, vstride));
      _mm256_storeu_si256(lc, _mm256_mask_add_epi32(lcv, static_cast<__mmask8>(~right), lcv, vstride));
    }
#else
    for (std::size_t f = 0; f < stride; ++f) {
      const Index r = row[f];
      Index* cursor = go_right[r] ? cursor_right : cursor_left;
      out[cursor[f]] = r;
      cursor[f] += static_cast<Index>(stride);
    }
#endif
  }
}

class TreeBuilder {
 public:
  TreeBuilder(const Presorted& data, const GBTParams& params)
      : data_(data),
        params_(params),
        n_(data.rows()),
        d_(data.cols()),
        stride_(data.stride()),
        idx_(n_ * stride_),
        idx_next_(n_ * stride_),
        inv_count_(n_ + 1, 0.0),
        go_right_(n_, 0),
        leaf_of_(n_, 0),
        prefix_(stride_),
        best_gain_(stride_),
        best_sum_(stride_),
        best_pos_(stride_),
        cursor_left_(stride_),
        cursor_right_(stride_) {
    for (std::size_t k = 1; k <= n_; ++k) inv_count_[k] = 1.0 / static_cast<double>(k);
  }

  // Grows one tree on residuals `g` and records each row's leaf in leaf_of().
  RegressionTree grow(std::span<const double> g) {
    std::copy(data_.order().begin(), data_.order().end(), idx_.begin());

    RegressionTree tree;
    double root_sum = 0.0;
    for (std::size_t r = 0; r < n_; ++r) root_sum += g[r];
    tree.nodes.push_back({});
    std::fill(leaf_of_.begin(), leaf_of_.end(), 0);

    std::vector<Segment> level{{0, n_, root_sum, 0}};
    std::vector<Segment> next;
    for (int depth = 0; depth < params_.max_depth && !level.empty(); ++depth) {
      const bool last_level = depth + 1 == params_.max_depth;
      next.clear();
      for (const Segment& seg : level) {
        const SplitChoice split = best_split(seg, g);
        if (split.feature < 0) {
          tree.nodes[seg.node].value = seg.sum * inv_count_[seg.end - seg.begin];
          continue;
        }
        const auto f = static_cast<std::size_t>(split.feature);
        const Index lo = idx_[split.last_left * stride_ + f];
        const Index hi = idx_[(split.last_left + 1) * stride_ + f];
        const double a = data_.value(lo, f);
        const double b = data_.value(hi, f);
        double threshold = a + 0.5 * (b - a);
        if (!(threshold > a)) threshold = b;

        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        TreeNode& node = tree.nodes[seg.node];
        node.feature = split.feature;
        node.threshold = threshold;
        node.left = left;
        node.right = left + 1;

        for (std::size_t p = seg.begin; p < seg.end; ++p) {
          const Index r = idx_[p * stride_ + f];
          const bool right = p > split.last_left;
          go_right_[r] = right ? 1 : 0;
          leaf_of_[r] = right ? left + 1 : left;
        }
        const std::size_t mid = split.last_left + 1;
        const Segment lseg{seg.begin, mid, split.left_sum, left};
        const Segment rseg{mid, seg.end, seg.sum - split.left_sum, left + 1};
        if (last_level) {
          tree.nodes[left].value = lseg.sum * inv_count_[lseg.end - lseg.begin];
          tree.nodes[left + 1].value = rseg.sum * inv_count_[rseg.end - rseg.begin];
          continue;
        }
        for (std::size_t k = 0; k < stride_; ++k) {
          cursor_left_[k] = static_cast<Index>(seg.begin * stride_ + k);
          cursor_right_[k] = static_cast<Index>(mid * stride_ + k);
        }
        partition(idx_.data(), stride_, go_right_.data(), seg.begin, seg.end,
                  cursor_left_.data(), cursor_right_.data(), idx_next_.data());
        next.push_back(lseg);
        next.push_back(rseg);
      }
      // Segments that continue were written to the alternate buffer.
      if (!last_level) idx_.swap(idx_next_);
      level.swap(next);
    }
    return tree;
  }

  const std::vector<int>& leaf_of() const noexcept { return leaf_of_; }

 private:
  SplitChoice best_split(const Segment& seg, std::span<const double> g) {
    SplitChoice out;
    const std::size_t m = seg.end - seg.begin;
    const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    if (m < 2 || m < 2 * min_leaf) return out;

    double sum_sq = 0.0;
    for (std::size_t p = seg.begin; p < seg.end; ++p) {
      const double v = g[idx_[p * stride_]];
      sum_sq += v * v;
    }
    const double parent_score = seg.sum * seg.sum * inv_count_[m];
    const double node_sse = sum_sq - parent_score;
    if (!(node_sse > 0.0)) return out;

    std::fill(prefix_.begin(), prefix_.end(), 0.0);
    std::fill(best_gain_.begin(), best_gain_.end(), -1.0);
    std::fill(best_sum_.begin(), best_sum_.end(), 0.0);
    std::fill(best_pos_.begin(), best_pos_.end(), Index{0});
    const SweepState st{prefix_.data(), best_gain_.data(), best_sum_.data(), best_pos_.data()};
    const SweepInput in{idx_.data(),      data_.rank().data(), data_.block_has_ties().data(),
                        stride_,          g.data(),            inv_count_.data()};

    const std::size_t first = seg.begin + min_leaf - 1;
    const std::size_t last = seg.end - min_leaf - 1;
    accumulate(in, seg.begin, first, st);
    sweep(in, seg.begin, m, seg.sum, first, last, st);

    double best = -1.0;
    for (std::size_t f = 0; f < d_; ++f) {
      if (best_gain_[f] > best) {
        best = best_gain_[f];
        out.feature = static_cast<int>(f);
        out.last_left = best_pos_[f];
        out.left_sum = best_sum_[f];
      }
    }
    // Reductions at rounding level do not count as a split.
    if (out.feature >= 0 && !(best - parent_score > 1e-12 * node_sse)) out.feature = -1;
    return out;
  }

  const Presorted& data_;
  const GBTParams& params_;
  std::size_t n_, d_, stride_;
  std::vector<Index> idx_, idx_next_;
  std::vector<double> inv_count_;
  std::vector<Index> go_right_;
  std::vector<int> leaf_of_;
  std::vector<double> prefix_, best_gain_, best_sum_;
  std::vector<Index> best_pos_;
  std::vector<Index> cursor_left_, cursor_right_;
};

double mean_squared(std::span<const double> r) {
  double acc = 0.0;
  for (double v : r) acc += v * v;
  return acc / static_cast<double>(r.size());
}

}  // namespace

GBTModel fit(const FeatureMatrix& X, std::span<const double> y, const GBTParams& params,
             FitTrace* trace) {
  validate(params);
  const auto n = static_cast<std::size_t>(X.rows());
  const auto d = static_cast<std::size_t>(X.cols());
  if (n < 2) throw ContractError("gbt::fit needs at least 2 rows");
  if (d < 1) throw ContractError("gbt::fit needs at least 1 feature");
  if (y.size() != n) throw ContractError("gbt::fit: X and y row counts differ");
  if (!X.allFinite()) throw ContractError("gbt::fit: non-finite feature value");
  for (double v : y)
    if (!std::isfinite(v)) throw ContractError("gbt::fit: non-finite target value");

  const Presorted data(X, y);
  const auto targets = data.targets();

  GBTModel model;
  model.params = params;
  model.n_features = d;
  double sum = 0.0;
  for (double v : targets) sum += v;
  model.base_score = sum / static_cast<double>(n);

  std::vector<double> pred(n, model.base_score), next_pred(n);
  std::vector<double> residual(n), next_residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = targets[i] - pred[i];
  double mse = mean_squared(residual);
  if (trace) {
    trace->train_mse.clear();
    trace->train_mse.push_back(mse);
  }

  TreeBuilder builder(data, params);
  model.trees.reserve(params.n_rounds);
  const double lr = params.learning_rate;
  for (int round = 0; round < params.n_rounds; ++round) {
    RegressionTree tree = builder.grow(residual);
    const auto& leaf = builder.leaf_of();
    for (std::size_t i = 0; i < n; ++i) {
      next_pred[i] = pred[i] + lr * tree.nodes[leaf[i]].value;
      next_residual[i] = targets[i] - next_pred[i];
    }
    // Once the residuals are rounding noise a tree can nudge the loss up by an
    // ulp; such a round is replaced by an empty tree.
    const double next_mse = mean_squared(next_residual);
    if (next_mse <= mse) {
      pred.swap(next_pred);
      residual.swap(next_residual);
      mse = next_mse;
    } else {
      tree.nodes.assign(1, TreeNode{});
    }
    model.trees.push_back(std::move(tree));
    if (trace) trace->train_mse.push_back(mse);
  }
  return model;
}

std::vector<double> predict(const GBTModel& model, const FeatureMatrix& X, std::size_t n_trees) {
  if (static_cast<std::size_t>(X.cols()) != model.n_features)
    throw ContractError("gbt::predict: expected " + std::to_string(model.n_features) +
                        " features, got " + std::to_string(X.cols()));
  n_trees = std::min(n_trees, model.trees.size());
  const double lr = model.params.learning_rate;
  std::vector<double> out(X.rows(), model.base_score);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const std::span<const double> row(X.row(i).data(), model.n_features);
    double p = model.base_score;
    for (std::size_t t = 0; t < n_trees; ++t) p += lr * model.trees[t].predict(row);
    out[i] = p;
  }
  return out;
}

std::vector<double> predict(const GBTModel& model, const FeatureMatrix& X) {
  return predict(model, X, model.trees.size());
}

std::vector<std::vector<double>> staged_predict(const GBTModel& model, const FeatureMatrix& X,
                                                std::span<const int> checkpoints) {
  if (static_cast<std::size_t>(X.cols()) != model.n_features)
    throw ContractError("gbt::staged_predict: feature count mismatch");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()))
    throw ContractError("gbt::staged_predict: checkpoints must be ascending");
  const double lr = model.params.learning_rate;
  std::vector<std::vector<double>> out(checkpoints.size(), std::vector<double>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const std::span<const double> row(X.row(i).data(), model.n_features);
    double p = model.base_score;
    std::size_t t = 0;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      const auto upto = std::min(static_cast<std::size_t>(std::max(checkpoints[c], 0)),
                                 model.trees.size());
      for (; t < upto; ++t) p += lr * model.trees[t].predict(row);
      out[c][i] = p;
    }
  }
  return out;
}

nlohmann::json to_json(const GBTModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json t;
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& n : tree.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    t["feature"] = feature;
    t["threshold"] = threshold;
    t["left"] = left;
    t["right"] = right;
    t["value"] = value;
    trees.push_back(std::move(t));
  }
  return {{"format", "geofm-gbt"},
          {"version", 1},
          {"base_score", model.base_score},
          {"n_features", model.n_features},
          {"params",
           {{"learning_rate", model.params.learning_rate},
            {"max_depth", model.params.max_depth},
            {"n_rounds", model.params.n_rounds},
            {"min_samples_leaf", model.params.min_samples_leaf}}},
          {"trees", std::move(trees)}};
}

GBTModel model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "geofm-gbt") throw ParseError("not a geofm-gbt document");
    if (doc.at("version").get<int>() != 1) throw ParseError("unsupported gbt model version");
    GBTModel m;
    m.base_score = doc.at("base_score").get<double>();
    m.n_features = doc.at("n_features").get<std::size_t>();
    const auto& p = doc.at("params");
    m.params.learning_rate = p.at("learning_rate").get<double>();
    m.params.max_depth = p.at("max_depth").get<int>();
    m.params.n_rounds = p.at("n_rounds").get<int>();
    m.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    for (const auto& t : doc.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto value = t.at("value").get<std::vector<double>>();
      const std::size_t k = feature.size();
      if (threshold.size() != k || left.size() != k || right.size() != k || value.size() != k ||
          k == 0)
        throw ParseError("gbt tree arrays have inconsistent lengths");
      RegressionTree tree;
      for (std::size_t i = 0; i < k; ++i) {
        if (feature[i] >= 0 &&
            (feature[i] >= static_cast<int>(m.n_features) || left[i] <= static_cast<int>(i) ||
             right[i] <= static_cast<int>(i) || left[i] >= static_cast<int>(k) ||
             right[i] >= static_cast<int>(k)))
          throw ParseError("gbt tree node " + std::to_string(i) + " is malformed");
        tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
      }
      m.trees.push_back(std::move(tree));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("gbt model json: ") + e.what());
  }
}

}  // namespace geofm::gbt
