#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "fgwin/data.hpp"
#include "fgwin/nn/classifier.hpp"
#include "fgwin/rng.hpp"

namespace fgwin::eval {

struct RocPoint {
  double threshold = 0.0;
  double false_positive_rate = 0.0;
  double true_positive_rate = 0.0;
};

struct AucInterval {
  double auc = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double std = 0.0;
  std::size_t resamples = 0;
};

struct LatencyStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  std::size_t repetitions = 0;
  std::size_t batch_size = 0;
  std::size_t steps = 0;
  double progression = 0.0;
};

/// Mann-Whitney form: (correctly ordered positive/negative pairs + ties / 2)
/// / (#pos * #neg), computed by sorting. Labels must be 0/1 and contain
/// both classes (MetricUndefinedError otherwise).
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Stratified bootstrap: positives and negatives are resampled separately.
/// The interval is the percentile interval at `level`; std is the standard
/// deviation of the resampled AUCs.
AucInterval roc_auc_ci(std::span<const double> scores, std::span<const int> labels, std::size_t resamples,
                       SeededRng& rng, double level = 0.95);

/// (0, 0) at threshold +inf, then one point per distinct score from high to
/// low, ending at (1, 1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(std::span<const RocPoint> curve);
void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve);

/// Fraction of samples where (score >= threshold) agrees with the label.
double accuracy_at(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// Times `repetitions` inference passes after `warmup` untimed ones.
/// repetitions < 2 is a ParameterError.
LatencyStats bench_inference(const nn::SequenceClassifier& model, const RoundBatch& batch, std::size_t repetitions,
                             std::size_t warmup);

std::vector<int> labels_of(const RoundBatch& batch);
std::vector<int> labels_of(std::span<const Round> rounds);

}  // namespace fgwin::eval
