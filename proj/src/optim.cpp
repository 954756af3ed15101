#include "fgwin/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <atomic>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_set>

#include "fgwin/error.hpp"
#include "fgwin/rng.hpp"

namespace fgwin::optim {

LossResult bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.size() != targets.size()) {
    throw DimensionError("bce_with_logits: logits " + shape_string(logits.shape()) + " vs targets " +
                         shape_string(targets.shape()));
  }
  LossResult r;
  r.grad = Tensor(logits.shape());
  const double n = static_cast<double>(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double y = targets[i];
    if (y != 0.0 && y != 1.0) throw LabelError("bce_with_logits: target " + std::to_string(y) + " is not 0 or 1");
    const double z = logits[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    r.grad[i] = (sigmoid(z) - y) / n;
  }
  r.loss = total / n;
  return r;
}

AdamState AdamState::for_params(const nn::ParamSet& params) {
  AdamState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.value.shape(), 0.0);
    s.second_moment.emplace_back(p.value.shape(), 0.0);
  }
  return s;
}

void adam_step(nn::ParamSet& params, AdamState& state, double learning_rate, double weight_decay) {
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("Adam state tracks " + std::to_string(state.first_moment.size()) + " tensors, model has " +
                         std::to_string(params.size()));
  }
  for (const auto& p : params) {
    if (!p.grad.all_finite()) throw NumericError("non-finite gradient in parameter " + p.name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    double* m = state.first_moment[k].data();
    double* v = state.second_moment[k].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] + weight_decay * p.value[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p.value[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
    }
    p.grad.fill(0.0);
  }
}

TrainConfig TrainConfig::defaults_for(nn::Architecture arch) {
  TrainConfig c;
  c.architecture = arch;
  if (arch == nn::Architecture::kTransformer) {
    c.learning_rate = 0.0006;
    c.batch_size = 28;
  } else {
    c.learning_rate = 0.001;
    c.batch_size = 64;
  }
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ParameterError("learning rate must be >= 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ParameterError("weight decay must be >= 0");
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  if (epochs == 0) throw ParameterError("epoch count must be positive");
  if (!(progression > 0.0 && progression <= 1.0)) {
    throw ParameterError("progression must be in (0, 1], got " + std::to_string(progression));
  }
  if (runs == 0) throw ParameterError("runs per fold must be positive");
  if (bootstrap_resamples < 2) throw ParameterError("bootstrap needs at least 2 resamples");
  if (folds.k < 2) throw ParameterError("fold count must be at least 2");
}

namespace {

nlohmann::json optional_json(const std::optional<std::size_t>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<std::size_t> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::size_t>();
}

}  // namespace

nlohmann::json to_json(const TrainConfig& c) {
  return {{"architecture", nn::to_string(c.architecture)},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"folds",
           {{"k", c.folds.k},
            {"block_size", optional_json(c.folds.block_size)},
            {"stride", optional_json(c.folds.stride)},
            {"offset", c.folds.offset}}},
          {"progression", c.progression},
          {"seed", c.seed},
          {"runs", c.runs},
          {"bootstrap_resamples", c.bootstrap_resamples},
          {"jobs", c.jobs},
          {"model", c.model}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  const auto arch = nn::parse_architecture(j.value("architecture", std::string("lstm")));
  TrainConfig c = TrainConfig::defaults_for(arch);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("folds")) {
    const auto& f = j.at("folds");
    c.folds.k = f.value("k", c.folds.k);
    c.folds.block_size = optional_from(f, "block_size");
    c.folds.stride = optional_from(f, "stride");
    c.folds.offset = f.value("offset", c.folds.offset);
  }
  c.progression = j.value("progression", c.progression);
  c.seed = j.value("seed", c.seed);
  c.runs = j.value("runs", c.runs);
  c.bootstrap_resamples = j.value("bootstrap_resamples", c.bootstrap_resamples);
  c.jobs = j.value("jobs", c.jobs);
  c.model = j.value("model", nlohmann::json::object());
  return c;
}

double train_epoch(nn::SequenceClassifier& model, AdamState& state, std::span<const Round> rounds,
                   const TrainConfig& config, std::uint64_t epoch_seed) {
  if (rounds.empty()) throw DataError("cannot train on an empty training set");
  if (config.batch_size == 0) throw ParameterError("batch size must be positive");
  SeededRng rng(epoch_seed);
  std::vector<const Round*> order;
  order.reserve(rounds.size());
  for (const auto& r : rounds) order.push_back(&r);
  rng.shuffle(std::span<const Round*>(order));

  const bool was_training = model.training();
  model.set_training(true);
  double weighted = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t n = std::min(config.batch_size, order.size() - start);
    const RoundBatch batch = pad_batch(std::span<const Round* const>(order.data() + start, n), model.pad_value());
    auto pass = model.forward(batch, &rng, true);
    const LossResult loss = bce_with_logits(pass.logits, batch.labels);
    model.backward(*pass.cache, loss.grad);
    adam_step(model.params(), state, config.learning_rate, config.weight_decay);
    weighted += loss.loss * static_cast<double>(n);
  }
  model.set_training(was_training);
  return weighted / static_cast<double>(rounds.size());
}

std::vector<double> predict_logits(const nn::SequenceClassifier& model, std::span<const Round> rounds,
                                   std::size_t chunk) {
  std::vector<double> out;
  out.reserve(rounds.size());
  for (std::size_t start = 0; start < rounds.size(); start += chunk) {
    const std::size_t n = std::min(chunk, rounds.size() - start);
    const RoundBatch batch = pad_batch(rounds.subspan(start, n), model.pad_value());
    const Tensor logits = model.predict(batch);
    out.insert(out.end(), logits.values().begin(), logits.values().end());
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

RunReport train_one_run(const std::vector<Round>& train, const std::vector<Round>& test,
                        const std::vector<int>& test_labels, const TrainConfig& config, std::size_t fold,
                        std::size_t run, std::shared_ptr<const nn::SequenceClassifier>* model_out) {
  auto model = nn::make_classifier(config.architecture, config.model, derive_seed(config.seed, fold, run, 1));
  AdamState state = AdamState::for_params(model->params());
  RunReport report;
  report.run = run;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto t0 = Clock::now();
    const double loss = train_epoch(*model, state, train, config, derive_seed(config.seed, fold, run, 1000 + e));
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    report.epochs.push_back({e + 1, loss, ms});
  }
  report.test_logits = predict_logits(*model, test);
  report.test_auc = eval::roc_auc(report.test_logits, test_labels);
  SeededRng boot(derive_seed(config.seed, fold, run, 2));
  report.test_ci = eval::roc_auc_ci(report.test_logits, test_labels, config.bootstrap_resamples, boot);
  std::vector<double> probs(report.test_logits.size());
  std::transform(report.test_logits.begin(), report.test_logits.end(), probs.begin(),
                 [](double z) { return sigmoid(z); });
  report.test_accuracy = eval::accuracy_at(probs, test_labels, 0.5);
  if (model_out) *model_out = std::move(model);
  return report;
}

FoldReport train_fold(std::span<const Round> rounds, const FoldSplit& split, const TrainConfig& config) {
  const std::unordered_set<std::string> test_ids(split.test_sheet_ids.begin(), split.test_sheet_ids.end());
  FoldReport fold;
  fold.split = split;
  std::vector<Round> train, test;
  for (const auto& r : rounds) (test_ids.count(r.sheet_id) ? test : train).push_back(r);
  if (train.empty() || test.empty()) {
    throw DataError("fold " + std::to_string(split.fold_index + 1) + " has an empty train or test set");
  }
  fold.train_rounds = train.size();
  fold.test_rounds = test.size();
  fold.test_labels = eval::labels_of(test);

  for (std::size_t run = 0; run < config.runs; ++run) {
    fold.runs.push_back(train_one_run(train, test, fold.test_labels, config, split.fold_index, run,
                                      run + 1 == config.runs ? &fold.model : nullptr));
  }

  const double r = static_cast<double>(fold.runs.size());
  for (const auto& run : fold.runs) {
    fold.auc += run.test_auc / r;
    fold.ci_lo += run.test_ci.lo / r;
    fold.ci_hi += run.test_ci.hi / r;
    fold.bootstrap_std += run.test_ci.std / r;
    fold.accuracy += run.test_accuracy / r;
  }
  if (fold.runs.size() > 1) {
    double ss = 0.0;
    for (const auto& run : fold.runs) ss += (run.test_auc - fold.auc) * (run.test_auc - fold.auc);
    fold.auc_run_std = std::sqrt(ss / (r - 1.0));
  }
  fold.mean_epochs.resize(config.epochs);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    fold.mean_epochs[e].epoch = e + 1;
    for (const auto& run : fold.runs) {
      fold.mean_epochs[e].train_loss += run.epochs[e].train_loss / r;
      fold.mean_epochs[e].wall_ms += run.epochs[e].wall_ms / r;
    }
  }
  return fold;
}

}  // namespace

TrainReport train_kfold(std::span<const Round> rounds, const TrainConfig& config, const ProgressFn& progress) {
  config.validate();
  const std::vector<Round> truncated = truncate_rounds(rounds, config.progression);
  const auto sheets = sheet_ids_of(truncated);
  if (sheets.size() < config.folds.k) {
    throw DataError("need at least " + std::to_string(config.folds.k) + " sheets for " +
                    std::to_string(config.folds.k) + "-fold training, found " + std::to_string(sheets.size()));
  }
  const auto splits = make_folds(sheets, config.folds);

  TrainReport report;
  report.config = config;
  report.folds.resize(splits.size());
  std::vector<std::exception_ptr> errors(splits.size());
  std::mutex log_mutex;
  auto work = [&](std::size_t f) {
    try {
      report.folds[f] = train_fold(truncated, splits[f], config);
      if (progress) {
        std::lock_guard lock(log_mutex);
        progress("fold " + std::to_string(f + 1) + "/" + std::to_string(splits.size()) +
                 ": test AUC " + std::to_string(report.folds[f].auc));
      }
    } catch (...) {
      errors[f] = std::current_exception();
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(config.jobs, splits.size()));
  if (jobs == 1) {
    for (std::size_t f = 0; f < splits.size(); ++f) work(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) {
      pool.emplace_back([&] {
        for (std::size_t f = next++; f < splits.size(); f = next++) work(f);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const double k = static_cast<double>(report.folds.size());
  for (const auto& f : report.folds) report.mean_auc += f.auc / k;
  double ss = 0.0;
  for (const auto& f : report.folds) ss += (f.auc - report.mean_auc) * (f.auc - report.mean_auc);
  report.std_auc = std::sqrt(ss / (k - 1.0));
  return report;
}

}  // namespace fgwin::optim
