#include "fgwin/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fgwin/error.hpp"
#include "fgwin/eval.hpp"
#include "fgwin/rng.hpp"

namespace fgwin::baselines {

namespace {

void check_labels(const FeatureMatrix& x, std::span<const int> labels) {
  if (labels.size() != x.rows) {
    throw DimensionError(std::to_string(x.rows) + " rows for " + std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw LabelError("label " + std::to_string(y) + " is not 0 or 1");
  }
}

void check_width(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.cols != b.cols) {
    throw DimensionError("feature width " + std::to_string(b.cols) + " does not match training width " +
                         std::to_string(a.cols));
  }
}

double gini(std::size_t ones, std::size_t n) {
  if (n == 0) return 0.0;
  const double p = static_cast<double>(ones) / static_cast<double>(n);
  return 2.0 * p * (1.0 - p);
}

int majority(std::size_t ones, std::size_t n) { return 2 * ones > n ? 1 : 0; }

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child Gini
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const int> labels, const ForestOptions& options, SeededRng& rng)
      : x_(x), labels_(labels), options_(options), rng_(rng) {
    const auto root = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(x.cols))));
    mtry_ = std::clamp<std::size_t>(options.max_features.value_or(root), 1, x.cols);
    features_.resize(x.cols);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  std::size_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t id = tree_.nodes.size();
    tree_.nodes.emplace_back();
    std::size_t ones = 0;
    for (auto r : rows) ones += static_cast<std::size_t>(labels_[r]);
    tree_.nodes[id].label = majority(ones, rows.size());

    const bool pure = ones == 0 || ones == rows.size();
    const bool at_depth = options_.max_depth && depth >= *options_.max_depth;
    if (pure || at_depth || rows.size() < 2) return id;

    const Split split = choose(rows, ones);
    if (!split.found) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (x_.row(r)[split.feature] <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const std::size_t l = grow(left, depth + 1);
    const std::size_t r = grow(right, depth + 1);
    TreeNode& node = tree_.nodes[id];
    node.leaf = false;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Draws mtry candidate features; if none of them separates the rows, keeps
  // drawing from the remaining features until one does or all are exhausted.
  Split choose(const std::vector<std::size_t>& rows, std::size_t ones) {
    Split best;
    best.impurity = gini(ones, rows.size());
    std::size_t drawn = 0;
    for (std::size_t i = 0; i < features_.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_.below(features_.size() - i));
      std::swap(features_[i], features_[j]);
      const Split s = best_on_feature(rows, features_[i]);
      ++drawn;
      if (s.found && (!best.found || s.impurity < best.impurity)) best = s;
      if (drawn >= mtry_ && best.found) break;
    }
    return best;
  }

  Split best_on_feature(const std::vector<std::size_t>& rows, std::size_t f) {
    order_.assign(rows.begin(), rows.end());
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      const double va = x_.row(a)[f], vb = x_.row(b)[f];
      return va < vb || (va == vb && a < b);
    });
    std::size_t total_ones = 0;
    for (auto r : order_) total_ones += static_cast<std::size_t>(labels_[r]);
    const std::size_t n = order_.size();

    Split best;
    std::size_t left_ones = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_ones += static_cast<std::size_t>(labels_[order_[i]]);
      const double v = x_.row(order_[i])[f];
      const double next = x_.row(order_[i + 1])[f];
      if (v == next) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      const double imp = (static_cast<double>(nl) * gini(left_ones, nl) +
                          static_cast<double>(nr) * gini(total_ones - left_ones, nr)) /
                         static_cast<double>(n);
      if (!best.found || imp < best.impurity) {
        best.found = true;
        best.feature = f;
        best.impurity = imp;
        best.threshold = v + (next - v) / 2.0;
        // Midpoint rounding can land on `next` for adjacent doubles.
        if (!(best.threshold < next)) best.threshold = v;
      }
    }
    return best;
  }

  const FeatureMatrix& x_;
  std::span<const int> labels_;
  const ForestOptions& options_;
  SeededRng& rng_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> order_;
  DecisionTree tree_;
};

}  // namespace

FeatureMatrix featurize(std::span<const Round> rounds, std::size_t t_ref) {
  if (t_ref == 0) throw ParameterError("reference length must be at least 1");
  FeatureMatrix m;
  m.rows = rounds.size();
  m.cols = 2 * t_ref;
  m.values.assign(m.rows * m.cols, 0.0);
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    const auto& f = rounds[i].features;
    const std::size_t steps = std::min(t_ref, f.size());
    for (std::size_t t = 0; t < steps; ++t) {
      m.values[i * m.cols + 2 * t] = f[t].p1;
      m.values[i * m.cols + 2 * t + 1] = f[t].p2;
    }
  }
  return m;
}

std::size_t reference_length(std::span<const Round> rounds) {
  std::size_t t = 0;
  for (const auto& r : rounds) t = std::max(t, r.length());
  return t;
}

std::vector<double> knn_predict(const FeatureMatrix& train, std::span<const int> labels, const FeatureMatrix& query,
                                std::size_t k) {
  if (train.rows == 0) throw DataError("KNN needs a non-empty training set");
  check_labels(train, labels);
  check_width(train, query);
  if (k == 0 || k > train.rows) {
    throw ParameterError("k = " + std::to_string(k) + " must be in [1, " + std::to_string(train.rows) + "]");
  }
  std::vector<double> out(query.rows);
  std::vector<std::pair<double, std::size_t>> dist(train.rows);
  for (std::size_t q = 0; q < query.rows; ++q) {
    const auto xq = query.row(q);
    for (std::size_t i = 0; i < train.rows; ++i) {
      const auto xi = train.row(i);
      double d = 0.0;
      for (std::size_t c = 0; c < train.cols; ++c) d += (xq[c] - xi[c]) * (xq[c] - xi[c]);
      dist[i] = {d, i};
    }
    // Pairs compare by distance, then by index.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::size_t ones = 0;
    for (std::size_t j = 0; j < k; ++j) ones += static_cast<std::size_t>(labels[dist[j].second]);
    out[q] = static_cast<double>(ones) / static_cast<double>(k);
  }
  return out;
}

LinearSvm svm_train(const FeatureMatrix& x, std::span<const int> labels, const SvmOptions& options) {
  if (x.rows == 0) throw DataError("SVM needs a non-empty training set");
  check_labels(x, labels);
  const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (ones == 0 || ones == x.rows) throw LabelError("SVM needs both classes in the training set");
  if (!(options.lambda > 0.0)) throw ParameterError("SVM lambda must be positive");
  if (options.epochs == 0) throw ParameterError("SVM needs at least one epoch");

  const std::size_t n = x.rows, d = x.cols;
  LinearSvm m;
  m.mean.assign(d, 0.0);
  m.scale.assign(d, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) m.mean[c] += x.row(i)[c];
  }
  for (auto& v : m.mean) v /= static_cast<double>(n);
  for (std::size_t c = 0; c < d; ++c) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (x.row(i)[c] - m.mean[c]) * (x.row(i)[c] - m.mean[c]);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd > 0.0) m.scale[c] = 1.0 / sd;
  }
  std::vector<double> z(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) z[i * d + c] = (x.row(i)[c] - m.mean[c]) * m.scale[c];
  }

  std::vector<double> w(d, 0.0), gw(d), w_sum(d, 0.0);
  double b = 0.0, b_sum = 0.0;
  for (std::size_t t = 1; t <= options.epochs; ++t) {
    for (std::size_t c = 0; c < d; ++c) gw[c] = 2.0 * options.lambda * w[c];
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = labels[i] ? 1.0 : -1.0;
      double margin = b;
      for (std::size_t c = 0; c < d; ++c) margin += w[c] * z[i * d + c];
      if (y * margin < 1.0) {
        for (std::size_t c = 0; c < d; ++c) gw[c] -= y * z[i * d + c] / static_cast<double>(n);
        gb -= y / static_cast<double>(n);
      }
    }
    const double step = 1.0 / (2.0 * options.lambda * static_cast<double>(t));
    for (std::size_t c = 0; c < d; ++c) {
      w[c] -= step * gw[c];
      w_sum[c] += w[c];
    }
    b -= step * gb;
    b_sum += b;
  }
  const double T = static_cast<double>(options.epochs);
  m.weights.resize(d);
  for (std::size_t c = 0; c < d; ++c) m.weights[c] = w_sum[c] / T;
  m.bias = b_sum / T;
  return m;
}

std::vector<double> svm_predict(const LinearSvm& model, const FeatureMatrix& x) {
  if (x.cols != model.weights.size()) {
    throw DimensionError("feature width " + std::to_string(x.cols) + " does not match SVM width " +
                         std::to_string(model.weights.size()));
  }
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double m = model.bias;
    const auto r = x.row(i);
    for (std::size_t c = 0; c < x.cols; ++c) m += model.weights[c] * (r[c] - model.mean[c]) * model.scale[c];
    out[i] = m;
  }
  return out;
}

int DecisionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].leaf) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].label;
}

RandomForest rf_train(const FeatureMatrix& x, std::span<const int> labels, const ForestOptions& options,
                      std::uint64_t seed) {
  if (x.rows == 0) throw DataError("random forest needs a non-empty training set");
  if (x.cols == 0) throw DimensionError("random forest needs at least one feature");
  check_labels(x, labels);
  if (options.n_trees == 0) throw ParameterError("random forest needs at least one tree");

  RandomForest forest;
  forest.trees.reserve(options.n_trees);
  forest.samples.reserve(options.n_trees);
  for (std::size_t t = 0; t < options.n_trees; ++t) {
    SeededRng rng(derive_seed(seed, t));
    std::vector<std::size_t> rows(x.rows);
    if (options.bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(x.rows));
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.samples.push_back(rows);
    TreeBuilder builder(x, labels, options, rng);
    forest.trees.push_back(builder.build(std::move(rows)));
  }
  return forest;
}

std::vector<double> rf_predict(const RandomForest& forest, const FeatureMatrix& x) {
  if (forest.trees.empty()) throw ContractError("forest has no trees");
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::size_t votes = 0;
    for (const auto& tree : forest.trees) votes += static_cast<std::size_t>(tree.predict(x.row(i)));
    out[i] = static_cast<double>(votes) / static_cast<double>(forest.trees.size());
  }
  return out;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kKnn:
      return "knn";
    case Method::kSvm:
      return "svm";
    case Method::kForest:
      return "rf";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "knn") return Method::kKnn;
  if (name == "svm") return Method::kSvm;
  if (name == "rf") return Method::kForest;
  throw UsageError("unknown baseline '" + name + "' (expected knn, svm or rf)");
}

BaselineReport cross_validate(std::span<const Round> rounds, Method method, const BaselineConfig& config) {
  const std::vector<Round> truncated = truncate_rounds(rounds, config.progression);
  const auto sheets = sheet_ids_of(truncated);
  if (sheets.size() < config.folds.k) {
    throw DataError("need at least " + std::to_string(config.folds.k) + " sheets, found " +
                    std::to_string(sheets.size()));
  }
  const auto splits = make_folds(sheets, config.folds);

  BaselineReport report;
  report.method = method;
  for (std::size_t f = 0; f < splits.size(); ++f) {
    const std::set<std::string> test_ids(splits[f].test_sheet_ids.begin(), splits[f].test_sheet_ids.end());
    std::vector<Round> train, test;
    for (const auto& r : truncated) (test_ids.count(r.sheet_id) ? test : train).push_back(r);
    if (train.empty() || test.empty()) throw DataError("fold " + std::to_string(f) + " has an empty split");

    const std::size_t t_ref = reference_length(train);
    const FeatureMatrix xtr = featurize(train, t_ref);
    const FeatureMatrix xte = featurize(test, t_ref);
    const auto ytr = eval::labels_of(std::span<const Round>(train));
    const auto yte = eval::labels_of(std::span<const Round>(test));

    std::vector<double> scores;
    double threshold = 0.5;
    switch (method) {
      case Method::kKnn:
        scores = knn_predict(xtr, ytr, xte, std::min(config.k, xtr.rows));
        break;
      case Method::kSvm:
        scores = svm_predict(svm_train(xtr, ytr, config.svm), xte);
        threshold = 0.0;
        break;
      case Method::kForest:
        scores = rf_predict(rf_train(xtr, ytr, config.forest, derive_seed(config.seed, f, 3)), xte);
        break;
    }
    BaselineFold fold;
    fold.split = splits[f];
    SeededRng boot(derive_seed(config.seed, f, 0, 2));
    const auto ci = eval::roc_auc_ci(scores, yte, config.bootstrap_resamples, boot);
    fold.auc = ci.auc;
    fold.ci_lo = ci.lo;
    fold.ci_hi = ci.hi;
    fold.accuracy = eval::accuracy_at(scores, yte, threshold);
    report.mean_auc += fold.auc / static_cast<double>(splits.size());
    report.folds.push_back(std::move(fold));
  }
  return report;
}

}  // namespace fgwin::baselines
