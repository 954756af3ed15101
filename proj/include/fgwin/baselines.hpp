#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fgwin/data.hpp"

namespace fgwin::baselines {

/// Dense row-major matrix of fixed-length round features.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

/// Each round becomes p1(0), p2(0), p1(1), p2(1), ... over the first t_ref
/// steps; shorter rounds are zero-filled. t_ref = 0 is a ParameterError.
FeatureMatrix featurize(std::span<const Round> rounds, std::size_t t_ref);

/// Longest round in the set (the reference length for featurize).
std::size_t reference_length(std::span<const Round> rounds);

/// Fraction of label-1 rows among the k nearest training rows (Euclidean).
/// Equal distances go to the lower training row index.
std::vector<double> knn_predict(const FeatureMatrix& train, std::span<const int> labels, const FeatureMatrix& query,
                                std::size_t k = 5);

struct SvmOptions {
  std::size_t epochs = 200;
  double lambda = 1e-2;
};

/// Linear SVM over standardized features.
struct LinearSvm {
  std::vector<double> mean;
  std::vector<double> scale;  // 1 / std, or 1 for constant columns
  std::vector<double> weights;
  double bias = 0.0;
};

/// Full-batch subgradient descent on mean hinge loss + lambda * |w|^2 with
/// step 1 / (2 lambda t); returns the averaged iterate. No randomness.
LinearSvm svm_train(const FeatureMatrix& x, std::span<const int> labels, const SvmOptions& options = {});
/// Signed margins; positive means label 1.
std::vector<double> svm_predict(const LinearSvm& model, const FeatureMatrix& x);

struct TreeNode {
  bool leaf = true;
  int label = 0;
  std::size_t feature = 0;
  double threshold = 0.0;  // go left when x[feature] <= threshold
  std::size_t left = 0;
  std::size_t right = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int predict(std::span<const double> x) const;
};

struct ForestOptions {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;     // unset = grow until pure
  std::optional<std::size_t> max_features;  // unset = floor(sqrt(d))
  bool bootstrap = true;
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  /// Row indices each tree was fitted on (with repeats).
  std::vector<std::vector<std::size_t>> samples;
};

/// Tree t draws from its own generator derive_seed(seed, t).
RandomForest rf_train(const FeatureMatrix& x, std::span<const int> labels, const ForestOptions& options,
                      std::uint64_t seed);
/// Fraction of trees voting 1.
std::vector<double> rf_predict(const RandomForest& forest, const FeatureMatrix& x);

enum class Method { kKnn, kSvm, kForest };
std::string to_string(Method m);
/// "knn", "svm" or "rf"; anything else is a UsageError.
Method parse_method(const std::string& name);

struct BaselineConfig {
  double progression = 0.75;
  FoldScheme folds;
  std::uint64_t seed = 0;
  std::size_t k = 5;
  SvmOptions svm;
  ForestOptions forest;
  std::size_t bootstrap_resamples = 1000;
};

struct BaselineFold {
  FoldSplit split;
  double auc = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double accuracy = 0.0;
};

struct BaselineReport {
  Method method = Method::kKnn;
  std::vector<BaselineFold> folds;
  double mean_auc = 0.0;
};

/// Same truncation and sheet-grouped folds as the sequence models. The
/// reference length comes from each fold's training split. Accuracy uses
/// threshold 0.5 for KNN/RF scores and 0 for SVM margins.
BaselineReport cross_validate(std::span<const Round> rounds, Method method, const BaselineConfig& config);

}  // namespace fgwin::baselines
