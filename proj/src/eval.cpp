#include "fgwin/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>

#include "fgwin/error.hpp"

namespace fgwin::eval {

namespace {

struct ClassCounts {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
};

ClassCounts validate(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::to_string(scores.size()) + " scores for " + std::to_string(labels.size()) + " labels");
  }
  ClassCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw LabelError("label " + std::to_string(labels[i]) + " is not 0 or 1");
    if (std::isnan(scores[i])) throw NumericError("score " + std::to_string(i) + " is NaN");
    (labels[i] ? c.pos : c.neg)++;
  }
  if (c.pos == 0 || c.neg == 0) throw MetricUndefinedError("ROC-AUC needs both classes present");
  return c;
}

std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Twice the Mann-Whitney U statistic as an exact integer, from a
// descending-score order.
std::uint64_t doubled_u(std::span<const double> scores, std::span<const int> labels,
                        std::span<const std::size_t> order) {
  std::uint64_t doubled = 0;
  std::uint64_t pos_above = 0;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    std::uint64_t pos = 0, neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[g]]) {
      (labels[order[end]] ? pos : neg)++;
      ++end;
    }
    // Each negative in the group ranks below every positive seen so far and
    // ties with the group's positives.
    doubled += neg * (2 * pos_above + pos);
    pos_above += pos;
    g = end;
  }
  return doubled;
}

double quantile(std::vector<double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = validate(scores, labels);
  const auto order = order_descending(scores);
  return static_cast<double>(doubled_u(scores, labels, order)) / (2.0 * static_cast<double>(c.pos * c.neg));
}

AucInterval roc_auc_ci(std::span<const double> scores, std::span<const int> labels, std::size_t resamples,
                       SeededRng& rng, double level) {
  validate(scores, labels);
  if (resamples < 2) throw ParameterError("bootstrap needs at least 2 resamples");
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("confidence level must be in (0, 1)");
  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos_idx : neg_idx).push_back(i);

  AucInterval out;
  out.auc = roc_auc(scores, labels);
  out.resamples = resamples;
  std::vector<double> aucs;
  aucs.reserve(resamples);
  std::vector<double> s(scores.size());
  std::vector<int> l(labels.size());
  for (std::size_t r = 0; r < resamples; ++r) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < pos_idx.size(); ++i, ++k) {
      s[k] = scores[pos_idx[rng.below(pos_idx.size())]];
      l[k] = 1;
    }
    for (std::size_t i = 0; i < neg_idx.size(); ++i, ++k) {
      s[k] = scores[neg_idx[rng.below(neg_idx.size())]];
      l[k] = 0;
    }
    aucs.push_back(roc_auc(s, l));
  }
  const double mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
  double ss = 0.0;
  for (double a : aucs) ss += (a - mean) * (a - mean);
  out.std = std::sqrt(ss / static_cast<double>(aucs.size() - 1));
  std::sort(aucs.begin(), aucs.end());
  const double tail = (1.0 - level) / 2.0;
  out.lo = quantile(aucs, tail);
  out.hi = quantile(aucs, 1.0 - tail);
  return out;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = validate(scores, labels);
  const auto order = order_descending(scores);
  std::vector<RocPoint> curve;
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t g = 0; g < order.size();) {
    const double threshold = scores[order[g]];
    while (g < order.size() && scores[order[g]] == threshold) {
      (labels[order[g]] ? tp : fp)++;
      ++g;
    }
    curve.push_back({threshold, static_cast<double>(fp) / static_cast<double>(c.neg),
                     static_cast<double>(tp) / static_cast<double>(c.pos)});
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double dx = curve[i].false_positive_rate - curve[i - 1].false_positive_rate;
    area += dx * (curve[i].true_positive_rate + curve[i - 1].true_positive_rate) / 2.0;
  }
  return area;
}

void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve) {
  out << "threshold,fpr,tpr\n";
  const auto old = out.precision(17);
  for (const auto& p : curve) {
    if (std::isinf(p.threshold)) {
      out << (p.threshold > 0 ? "inf" : "-inf");
    } else {
      out << p.threshold;
    }
    out << ',' << p.false_positive_rate << ',' << p.true_positive_rate << '\n';
  }
  out.precision(old);
}

double accuracy_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::to_string(scores.size()) + " scores for " + std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int predicted = scores[i] >= threshold ? 1 : 0;
    correct += predicted == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

LatencyStats bench_inference(const nn::SequenceClassifier& model, const RoundBatch& batch, std::size_t repetitions,
                             std::size_t warmup) {
  if (repetitions < 2) throw ParameterError("latency benchmark needs at least 2 repetitions");
  using clock = std::chrono::steady_clock;
  double sink = 0.0;
  for (std::size_t i = 0; i < warmup; ++i) sink += model.predict(batch)[0];
  std::vector<double> ms;
  ms.reserve(repetitions);
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto t0 = clock::now();
    const Tensor logits = model.predict(batch);
    const auto t1 = clock::now();
    sink += logits[0];
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  // Keep the passes observable so they cannot be elided.
  if (std::isnan(sink)) throw NumericError("benchmark produced a NaN logit");

  LatencyStats st;
  st.repetitions = repetitions;
  st.batch_size = batch.batch_size();
  st.steps = batch.max_length();
  st.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  double ss = 0.0;
  for (double v : ms) ss += (v - st.mean_ms) * (v - st.mean_ms);
  st.std_ms = std::sqrt(ss / static_cast<double>(ms.size() - 1));
  return st;
}

std::vector<int> labels_of(const RoundBatch& batch) {
  std::vector<int> out(batch.batch_size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = batch.labels[i] > 0.5 ? 1 : 0;
  return out;
}

std::vector<int> labels_of(std::span<const Round> rounds) {
  std::vector<int> out;
  out.reserve(rounds.size());
  for (const auto& r : rounds) out.push_back(r.winner);
  return out;
}

}  // namespace fgwin::eval
