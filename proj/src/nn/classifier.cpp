#include "fgwin/nn/classifier.hpp"

#include "fgwin/error.hpp"

namespace fgwin::nn {

std::string to_string(Architecture arch) {
  return arch == Architecture::kLstm ? "lstm" : "transformer";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "lstm") return Architecture::kLstm;
  if (name == "transformer") return Architecture::kTransformer;
  throw UsageError("unknown architecture '" + name + "' (expected lstm or transformer)");
}

nlohmann::json to_json(const LstmConfig& c) {
  return {{"input_dim", c.input_dim},
          {"hidden_dim", c.hidden_dim},
          {"dropout", c.dropout},
          {"input_scale", c.input_scale}};
}

nlohmann::json to_json(const TransformerConfig& c) {
  return {{"input_dim", c.input_dim}, {"d_model", c.d_model},   {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},     {"layers", c.layers},     {"max_positions", c.max_positions},
          {"dropout", c.dropout},     {"input_scale", c.input_scale}};
}

LstmConfig lstm_config_from_json(const nlohmann::json& j) {
  LstmConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.input_scale = j.value("input_scale", c.input_scale);
  return c;
}

TransformerConfig transformer_config_from_json(const nlohmann::json& j) {
  TransformerConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.layers = j.value("layers", c.layers);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.dropout = j.value("dropout", c.dropout);
  c.input_scale = j.value("input_scale", c.input_scale);
  return c;
}

Tensor SequenceClassifier::predict(const RoundBatch& batch) const {
  return run(batch, false, nullptr, false).logits;
}

void SequenceClassifier::check_batch(const RoundBatch& batch) const {
  if (batch.features.rank() != 3 || batch.features.dim(2) != 2) {
    throw DimensionError("batch features must be [B x T x 2], got " + shape_string(batch.features.shape()));
  }
  if (batch.mask.shape() != Shape{batch.features.dim(0), batch.features.dim(1)} ||
      batch.lengths.size() != batch.features.dim(0)) {
    throw DimensionError("batch mask/lengths do not match features " + shape_string(batch.features.shape()));
  }
  if (batch.pad_value != pad_value()) {
    throw DataError("batch padded with " + std::to_string(batch.pad_value) + " but the " +
                    to_string(architecture()) + " model expects " + std::to_string(pad_value()));
  }
}

namespace {

void check_dropout(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout rate must be in [0, 1), got " + std::to_string(p));
}

Tensor scaled(const Tensor& x, double s) {
  Tensor y = x;
  for (double& v : y.values()) v *= s;
  return y;
}

Tensor flatten_logits(const Tensor& head_out) { return head_out.reshaped({head_out.dim(0)}); }

Tensor logits_grad_as_column(const Tensor& grad_logits, std::size_t b) {
  if (grad_logits.size() != b) {
    throw DimensionError("logit gradient " + shape_string(grad_logits.shape()) + " does not match batch of " +
                         std::to_string(b));
  }
  return grad_logits.reshaped({b, 1});
}

struct LstmForwardCache final : ForwardCache {
  LstmCache lstm;
  DropoutMask dropout;
  Mask mask;
  Tensor pooled;
};

struct TransformerForwardCache final : ForwardCache {
  Tensor scaled_input;
  DropoutMask position_dropout;
  std::vector<EncoderLayer::Cache> layers;
  Mask mask;
  std::size_t steps = 0;
  Tensor pooled;
};

}  // namespace

// --- LSTM -------------------------------------------------------------------

LstmClassifier::LstmClassifier(const LstmConfig& config, std::uint64_t seed) : config_(config) {
  check_dropout(config.dropout);
  if (config.input_dim == 0 || config.hidden_dim == 0) throw ParameterError("LSTM dimensions must be positive");
  SeededRng rng(seed);
  lstm_ = LstmLayer::create(params_, "lstm", config.input_dim, config.hidden_dim, rng);
  head_ = Linear::create(params_, "head", config.hidden_dim, 1, rng);
}

std::unique_ptr<SequenceClassifier> LstmClassifier::clone() const { return std::make_unique<LstmClassifier>(*this); }

ForwardPass LstmClassifier::run(const RoundBatch& batch, bool training, SeededRng* rng, bool keep_cache) const {
  check_batch(batch);
  auto cache = keep_cache ? std::make_unique<LstmForwardCache>() : nullptr;
  const Tensor hidden = lstm_forward(lstm_, params_, scaled(batch.features, config_.input_scale), batch.lengths,
                                     cache ? &cache->lstm : nullptr);
  const Tensor dropped = dropout(hidden, config_.dropout, rng, training, cache ? &cache->dropout : nullptr);
  Tensor pooled = masked_mean_pool(dropped, batch.mask);
  ForwardPass pass;
  pass.logits = flatten_logits(head_.forward(params_, pooled));
  if (cache) {
    cache->mask = batch.mask;
    cache->pooled = std::move(pooled);
    pass.cache = std::move(cache);
  }
  return pass;
}

void LstmClassifier::backward(const ForwardCache& base, const Tensor& grad_logits) {
  const auto* cache = dynamic_cast<const LstmForwardCache*>(&base);
  if (cache == nullptr) throw ContractError("LstmClassifier::backward given a foreign cache");
  const std::size_t b = cache->pooled.dim(0);
  const Tensor d_pooled = head_.backward(params_, cache->pooled, logits_grad_as_column(grad_logits, b));
  const Tensor d_dropped = masked_mean_pool_backward(cache->mask, d_pooled, cache->lstm.hidden.dim(1));
  const Tensor d_hidden = dropout_backward(cache->dropout, d_dropped);
  lstm_backward(lstm_, params_, cache->lstm, d_hidden);
}

// --- Transformer ------------------------------------------------------------

TransformerClassifier::TransformerClassifier(const TransformerConfig& config, std::uint64_t seed) : config_(config) {
  check_dropout(config.dropout);
  if (config.layers == 0) throw ParameterError("transformer needs at least one encoder layer");
  if (config.heads == 0 || config.d_model % config.heads != 0) {
    throw DimensionError("model width " + std::to_string(config.d_model) + " is not divisible by " +
                         std::to_string(config.heads) + " heads");
  }
  positions_ = positional_encoding(config.max_positions, config.d_model);
  SeededRng rng(seed);
  embed_ = Linear::create(params_, "embed", config.input_dim, config.d_model, rng);
  for (std::size_t l = 0; l < config.layers; ++l) {
    encoder_.push_back(EncoderLayer::create(params_, "encoder" + std::to_string(l), config.d_model, config.heads,
                                            config.ffn_dim, config.dropout, rng));
  }
  head_ = Linear::create(params_, "head", config.d_model, 1, rng);
}

std::unique_ptr<SequenceClassifier> TransformerClassifier::clone() const {
  return std::make_unique<TransformerClassifier>(*this);
}

ForwardPass TransformerClassifier::run(const RoundBatch& batch, bool training, SeededRng* rng,
                                       bool keep_cache) const {
  check_batch(batch);
  const std::size_t b = batch.features.dim(0), t = batch.features.dim(1), d = config_.d_model;
  if (t > config_.max_positions) {
    throw CapacityError("sequence length " + std::to_string(t) + " exceeds the positional table of " +
                        std::to_string(config_.max_positions));
  }
  auto cache = keep_cache ? std::make_unique<TransformerForwardCache>() : nullptr;

  Tensor input = scaled(batch.features, config_.input_scale);
  Tensor x = embed_.forward(params_, input);
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t p = 0; p < t; ++p) {
      for (std::size_t k = 0; k < d; ++k) x.at(s, p, k) += positions_.at(p, k);
    }
  }
  x = dropout(x, config_.dropout, rng, training, cache ? &cache->position_dropout : nullptr);
  if (cache) cache->layers.resize(encoder_.size());
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    x = encoder_[l].forward(params_, x, batch.mask, training, rng, cache ? &cache->layers[l] : nullptr);
  }
  Tensor pooled = masked_mean_pool(x, batch.mask);
  ForwardPass pass;
  pass.logits = flatten_logits(head_.forward(params_, pooled));
  if (cache) {
    cache->scaled_input = std::move(input);
    cache->mask = batch.mask;
    cache->steps = t;
    cache->pooled = std::move(pooled);
    pass.cache = std::move(cache);
  }
  return pass;
}

void TransformerClassifier::backward(const ForwardCache& base, const Tensor& grad_logits) {
  const auto* cache = dynamic_cast<const TransformerForwardCache*>(&base);
  if (cache == nullptr) throw ContractError("TransformerClassifier::backward given a foreign cache");
  const std::size_t b = cache->pooled.dim(0);
  const Tensor d_pooled = head_.backward(params_, cache->pooled, logits_grad_as_column(grad_logits, b));
  Tensor dx = masked_mean_pool_backward(cache->mask, d_pooled, cache->steps);
  for (std::size_t l = encoder_.size(); l-- > 0;) dx = encoder_[l].backward(params_, cache->layers[l], dx);
  dx = dropout_backward(cache->position_dropout, dx);
  embed_.backward(params_, cache->scaled_input, dx);
}

std::unique_ptr<SequenceClassifier> make_classifier(Architecture arch, const nlohmann::json& config,
                                                    std::uint64_t seed) {
  const nlohmann::json cfg = config.is_null() ? nlohmann::json::object() : config;
  if (arch == Architecture::kLstm) return std::make_unique<LstmClassifier>(lstm_config_from_json(cfg), seed);
  return std::make_unique<TransformerClassifier>(transformer_config_from_json(cfg), seed);
}

}  // namespace fgwin::nn
