#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgwin/data.hpp"
#include "fgwin/nn/attention.hpp"
#include "fgwin/nn/layers.hpp"
#include "fgwin/nn/lstm.hpp"
#include "fgwin/nn/params.hpp"
#include "fgwin/rng.hpp"
#include "fgwin/tensor.hpp"

namespace fgwin::nn {

enum class Architecture { kLstm, kTransformer };

std::string to_string(Architecture arch);
/// "lstm" or "transformer"; anything else is a UsageError.
Architecture parse_architecture(const std::string& name);

struct LstmConfig {
  std::size_t input_dim = 2;
  std::size_t hidden_dim = 8;
  double dropout = 0.30;
  // Fixed multiplier applied to raw damage percentages before the first layer.
  double input_scale = 0.01;
};

struct TransformerConfig {
  std::size_t input_dim = 2;
  std::size_t d_model = 8;
  std::size_t heads = 4;
  std::size_t ffn_dim = 8;
  std::size_t layers = 1;
  std::size_t max_positions = 722;
  double dropout = 0.30;
  double input_scale = 0.01;
};

nlohmann::json to_json(const LstmConfig& c);
nlohmann::json to_json(const TransformerConfig& c);
LstmConfig lstm_config_from_json(const nlohmann::json& j);
TransformerConfig transformer_config_from_json(const nlohmann::json& j);

/// Per-architecture intermediates a backward pass needs.
struct ForwardCache {
  virtual ~ForwardCache() = default;
};

struct ForwardPass {
  Tensor logits;  // [B]
  std::unique_ptr<ForwardCache> cache;
};

/// A model mapping a padded RoundBatch to one raw logit per round.
///
/// Training mode enables dropout, which then draws from the generator passed
/// to forward(). Instances are single-owner while training; const methods
/// are safe to call concurrently.
class SequenceClassifier {
 public:
  virtual ~SequenceClassifier() = default;

  virtual Architecture architecture() const = 0;
  virtual double pad_value() const = 0;
  virtual double dropout_rate() const = 0;
  virtual nlohmann::json config_json() const = 0;
  virtual std::unique_ptr<SequenceClassifier> clone() const = 0;

  /// Logits in the current mode; `keep_cache` retains what backward() needs.
  ForwardPass forward(const RoundBatch& batch, SeededRng* rng, bool keep_cache) const {
    return run(batch, training_, rng, keep_cache);
  }
  /// Accumulates dL/dtheta for dL/dlogits into params().
  virtual void backward(const ForwardCache& cache, const Tensor& grad_logits) = 0;

  /// Inference-mode logits regardless of the current mode.
  Tensor predict(const RoundBatch& batch) const;

  void set_training(bool on) noexcept { training_ = on; }
  bool training() const noexcept { return training_; }
  /// True when forward() output depends on a random generator.
  bool stochastic() const { return training_ && dropout_rate() > 0.0; }

  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

 protected:
  virtual ForwardPass run(const RoundBatch& batch, bool training, SeededRng* rng, bool keep_cache) const = 0;
  void check_batch(const RoundBatch& batch) const;

  ParamSet params_;
  bool training_ = false;
};

/// LSTM -> dropout -> mean over valid steps -> linear head.
class LstmClassifier final : public SequenceClassifier {
 public:
  explicit LstmClassifier(const LstmConfig& config = {}, std::uint64_t seed = 0);

  Architecture architecture() const override { return Architecture::kLstm; }
  double pad_value() const override { return kLstmPad; }
  double dropout_rate() const override { return config_.dropout; }
  nlohmann::json config_json() const override { return to_json(config_); }
  std::unique_ptr<SequenceClassifier> clone() const override;

  void backward(const ForwardCache& cache, const Tensor& grad_logits) override;

  const LstmConfig& config() const noexcept { return config_; }
  const LstmLayer& lstm() const noexcept { return lstm_; }
  const Linear& head() const noexcept { return head_; }

 protected:
  ForwardPass run(const RoundBatch& batch, bool training, SeededRng* rng, bool keep_cache) const override;

 private:
  LstmConfig config_;
  LstmLayer lstm_;
  Linear head_;
};

/// Linear embedding + sinusoidal positions (with dropout) -> encoder layers
/// -> mean over valid steps -> linear head.
class TransformerClassifier final : public SequenceClassifier {
 public:
  explicit TransformerClassifier(const TransformerConfig& config = {}, std::uint64_t seed = 0);

  Architecture architecture() const override { return Architecture::kTransformer; }
  double pad_value() const override { return kTransformerPad; }
  double dropout_rate() const override { return config_.dropout; }
  nlohmann::json config_json() const override { return to_json(config_); }
  std::unique_ptr<SequenceClassifier> clone() const override;

  void backward(const ForwardCache& cache, const Tensor& grad_logits) override;

  const TransformerConfig& config() const noexcept { return config_; }
  const Tensor& positions() const noexcept { return positions_; }
  const std::vector<EncoderLayer>& encoder() const noexcept { return encoder_; }

 protected:
  ForwardPass run(const RoundBatch& batch, bool training, SeededRng* rng, bool keep_cache) const override;

 private:
  TransformerConfig config_;
  Tensor positions_;  // [max_positions x d_model], not trained
  Linear embed_;
  std::vector<EncoderLayer> encoder_;
  Linear head_;
};

/// Fresh model with default hyperparameters overridden by `config` keys.
std::unique_ptr<SequenceClassifier> make_classifier(Architecture arch, const nlohmann::json& config,
                                                    std::uint64_t seed);

}  // namespace fgwin::nn
