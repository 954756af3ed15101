#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgwin/data.hpp"
#include "fgwin/eval.hpp"
#include "fgwin/nn/classifier.hpp"
#include "fgwin/nn/params.hpp"
#include "fgwin/tensor.hpp"

namespace fgwin::optim {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // dL/dlogits, same shape as the logits
};

/// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets, in the
/// overflow-free form max(z, 0) - z*y + log(1 + exp(-|z|)). The gradient is
/// (sigmoid(z) - y) / N. Targets outside {0, 1} raise LabelError.
LossResult bce_with_logits(const Tensor& logits, const Tensor& targets);

/// Adam moments for one ParamSet. beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  static AdamState for_params(const nn::ParamSet& params);
};

/// One Adam update with coupled L2 (g += weight_decay * theta before the
/// moments), then zeroes the gradients. A non-finite gradient raises
/// NumericError naming the parameter and leaves everything untouched.
void adam_step(nn::ParamSet& params, AdamState& state, double learning_rate, double weight_decay);

struct TrainConfig {
  nn::Architecture architecture = nn::Architecture::kLstm;
  double learning_rate = 0.001;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 500;
  FoldScheme folds;
  double progression = 0.75;
  std::uint64_t seed = 0;
  std::size_t runs = 1;  // repeated trainings per fold, averaged
  std::size_t bootstrap_resamples = 1000;
  std::size_t jobs = 1;  // folds trained concurrently
  nlohmann::json model = nlohmann::json::object();

  /// LSTM: lr 0.001, batch 64. Transformer: lr 0.0006, batch 28.
  static TrainConfig defaults_for(nn::Architecture arch);
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Keys missing from `j` keep the architecture's defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Shuffles the rounds with a generator seeded from `epoch_seed`, then runs
/// forward / loss / backward / adam_step over mini-batches of
/// config.batch_size (the last one may be smaller), each padded to its own
/// longest round. Returns the batch-size-weighted mean loss.
double train_epoch(nn::SequenceClassifier& model, AdamState& state, std::span<const Round> rounds,
                   const TrainConfig& config, std::uint64_t epoch_seed);

/// Inference-mode logits for every round, in order, evaluated in chunks.
std::vector<double> predict_logits(const nn::SequenceClassifier& model, std::span<const Round> rounds,
                                   std::size_t chunk = 256);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double wall_ms = 0.0;
};

struct RunReport {
  std::size_t run = 0;
  std::vector<EpochLog> epochs;
  std::vector<double> test_logits;
  double test_auc = 0.0;
  eval::AucInterval test_ci;
  double test_accuracy = 0.0;
};

struct FoldReport {
  FoldSplit split;
  std::size_t train_rounds = 0;
  std::size_t test_rounds = 0;
  std::vector<int> test_labels;
  std::vector<RunReport> runs;
  // Averages over runs.
  double auc = 0.0;
  double auc_run_std = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double bootstrap_std = 0.0;
  double accuracy = 0.0;
  std::vector<EpochLog> mean_epochs;
  std::shared_ptr<const nn::SequenceClassifier> model;  // last run's final weights
};

struct TrainReport {
  TrainConfig config;
  std::vector<FoldReport> folds;
  double mean_auc = 0.0;
  double std_auc = 0.0;  // sample std across folds
};

using ProgressFn = std::function<void(const std::string&)>;

/// Truncates every round to config.progression, builds the sheet-grouped
/// folds and trains a fresh model per fold (and per run) for config.epochs.
/// A pure function of (rounds, config): output does not depend on jobs.
TrainReport train_kfold(std::span<const Round> rounds, const TrainConfig& config, const ProgressFn& progress = {});

}  // namespace fgwin::optim
