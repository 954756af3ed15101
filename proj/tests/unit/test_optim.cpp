#include <doctest.h>

#include <cmath>
#include <set>

#include "fgwin/error.hpp"
#include "fgwin/optim.hpp"
#include "support.hpp"

using namespace fgwin;
using namespace fgwin::optim;

namespace {

nn::ParamSet one_param(double theta, double grad) {
  nn::ParamSet ps;
  ps.add("theta", Tensor({1}, theta));
  ps[0].grad[0] = grad;
  return ps;
}

std::vector<Round> balanced_synth(std::size_t n, std::uint64_t seed) {
  SynthOptions o;
  o.n_rounds = n;
  o.seed = seed;
  return synth_generate(o);
}

}  // namespace

TEST_CASE("bce_with_logits examples") {
  SUBCASE("symmetry point") {
    const auto r = bce_with_logits(Tensor({1}, 0.0), Tensor({1}, 1.0));
    CHECK(std::abs(r.loss - std::log(2.0)) < 1e-15);
    CHECK(r.grad[0] == -0.5);
  }
  SUBCASE("saturation") {
    const auto hi = bce_with_logits(Tensor({1}, 100.0), Tensor({1}, 1.0));
    CHECK(std::isfinite(hi.loss));
    CHECK(hi.loss < 1e-40);
    const auto lo = bce_with_logits(Tensor({1}, -100.0), Tensor({1}, 1.0));
    CHECK(std::isfinite(lo.loss));
    CHECK(std::abs(lo.loss - 100.0) < 1e-12);
    CHECK(std::isfinite(bce_with_logits(Tensor({1}, 1e6), Tensor({1}, 0.0)).loss));
  }
  SUBCASE("averaging over two") {
    const auto r = bce_with_logits(Tensor({2}, 0.0), Tensor({2}, std::vector<double>{1, 0}));
    CHECK(std::abs(r.loss - std::log(2.0)) < 1e-15);
    CHECK(r.grad[0] == -0.25);
    CHECK(r.grad[1] == 0.25);
  }
  SUBCASE("labels must be 0/1") {
    CHECK_THROWS_AS(bce_with_logits(Tensor({1}, 0.0), Tensor({1}, 0.5)), LabelError);
    CHECK_THROWS_AS(bce_with_logits(Tensor({2}, 0.0), Tensor({1}, 1.0)), DimensionError);
  }
}

TEST_CASE("bce_with_logits matches the textbook form and its finite differences") {
  SeededRng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    Tensor z = rng_uniform(rng, {n}, -8, 8);
    Tensor y({n});
    for (std::size_t i = 0; i < n; ++i) y[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const auto r = bce_with_logits(z, y);
    double textbook = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-z[i]));
      textbook -= (y[i] * std::log(p) + (1 - y[i]) * std::log(1 - p)) / static_cast<double>(n);
    }
    CHECK(std::abs(r.loss - textbook) < 1e-12);
    for (std::size_t i = 0; i < n; ++i) {
      const double keep = z[i];
      z[i] = keep + 1e-5;
      const double up = bce_with_logits(z, y).loss;
      z[i] = keep - 1e-5;
      const double down = bce_with_logits(z, y).loss;
      z[i] = keep;
      CHECK(nn::relative_error(r.grad[i], (up - down) / 2e-5, 1e-4) < 1e-6);
    }
  }
}

TEST_CASE("adam_step hand-computed examples") {
  SUBCASE("first step") {
    auto ps = one_param(1.0, 0.5);
    auto st = AdamState::for_params(ps);
    adam_step(ps, st, 0.001, 0.0);
    // m_hat = 0.5, v_hat = 0.25
    CHECK(std::abs(ps[0].value[0] - (1.0 - 0.001 * 0.5 / (0.5 + 1e-8))) < 1e-15);
    CHECK(std::abs(ps[0].value[0] - 0.999000) < 1e-10);
    CHECK(st.step == 1);
    CHECK(ps[0].grad[0] == 0.0);
  }
  SUBCASE("zero gradient") {
    auto ps = one_param(1.0, 0.0);
    auto st = AdamState::for_params(ps);
    adam_step(ps, st, 0.001, 0.0);
    CHECK(ps[0].value[0] == 1.0);
    CHECK(st.step == 1);
  }
  SUBCASE("coupled decay alone") {
    auto ps = one_param(1.0, 0.0);
    auto st = AdamState::for_params(ps);
    adam_step(ps, st, 0.001, 1e-4);
    // g = 1e-4 -> m_hat = 1e-4, v_hat = 1e-8
    CHECK(std::abs(ps[0].value[0] - (1.0 - 0.001 * 1e-4 / (1e-4 + 1e-8))) < 1e-15);
    CHECK(ps[0].value[0] < 1.0);
  }
  SUBCASE("second step follows the recurrence") {
    auto ps = one_param(1.0, 0.5);
    auto st = AdamState::for_params(ps);
    adam_step(ps, st, 0.01, 0.0);
    const double theta1 = ps[0].value[0];
    ps[0].grad[0] = -0.2;
    adam_step(ps, st, 0.01, 0.0);
    const double m = 0.9 * 0.05 + 0.1 * -0.2;
    const double v = 0.999 * 0.00025 + 0.001 * 0.04;
    const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
    CHECK(std::abs(ps[0].value[0] - (theta1 - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8))) < 1e-15);
  }
  SUBCASE("non-finite gradient") {
    auto ps = one_param(1.0, std::nan(""));
    auto st = AdamState::for_params(ps);
    try {
      adam_step(ps, st, 0.001, 0.0);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("theta") != std::string::npos);
    }
    CHECK(ps[0].value[0] == 1.0);
    CHECK(st.step == 0);
  }
}

TEST_CASE("adam with lr=0 changes nothing") {
  SeededRng rng(2);
  auto model = nn::make_classifier(nn::Architecture::kTransformer, nlohmann::json::object(), 3);
  nn::ParamSet before = model->params();
  for (auto& p : model->params()) {
    for (auto& g : p.grad.values()) g = rng.uniform(-1, 1);
  }
  auto st = AdamState::for_params(model->params());
  adam_step(model->params(), st, 0.0, 1e-4);
  for (std::size_t k = 0; k < before.size(); ++k) CHECK(model->params()[k].value == before[k].value);
}

TEST_CASE("fresh models score near ln 2 on balanced labels") {
  SeededRng rng(4);
  auto rounds = testing::random_rounds(rng, 200, 20, 80);
  for (auto arch : {nn::Architecture::kLstm, nn::Architecture::kTransformer}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto model = nn::make_classifier(arch, nlohmann::json::object(), seed);
      const auto batch = pad_batch(std::span<const Round>(rounds), model->pad_value());
      CHECK(std::abs(bce_with_logits(model->predict(batch), batch.labels).loss - std::log(2.0)) < 0.05);
    }
  }
}

TEST_CASE("train config defaults and JSON") {
  const auto lstm = TrainConfig::defaults_for(nn::Architecture::kLstm);
  CHECK(lstm.learning_rate == 0.001);
  CHECK(lstm.batch_size == 64);
  CHECK(lstm.epochs == 500);
  CHECK(lstm.weight_decay == 1e-4);
  const auto tr = TrainConfig::defaults_for(nn::Architecture::kTransformer);
  CHECK(tr.learning_rate == 0.0006);
  CHECK(tr.batch_size == 28);

  TrainConfig c = tr;
  c.folds.block_size = 4;
  c.folds.stride = 1;
  c.folds.offset = 1;
  c.seed = 99;
  c.model = {{"dropout", 0.1}};
  const auto back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  TrainConfig bad = lstm;
  bad.progression = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = lstm;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("train_epoch") {
  const auto rounds = balanced_synth(60, 5);
  auto cfg = TrainConfig::defaults_for(nn::Architecture::kLstm);
  cfg.batch_size = 16;

  SUBCASE("lr=0 and no decay leaves parameters bit-identical") {
    auto model = nn::make_classifier(cfg.architecture, cfg.model, 1);
    const nn::ParamSet before = model->params();
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 0.0;
    auto st = AdamState::for_params(model->params());
    model->set_training(true);
    train_epoch(*model, st, rounds, cfg, 7);
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(model->params()[k].value == before[k].value);
  }
  SUBCASE("same seed, same loss") {
    double losses[2];
    for (double& l : losses) {
      auto model = nn::make_classifier(cfg.architecture, cfg.model, 1);
      auto st = AdamState::for_params(model->params());
      model->set_training(true);
      l = train_epoch(*model, st, rounds, cfg, 7);
    }
    CHECK(losses[0] == losses[1]);
  }
  SUBCASE("single batch loss equals that batch's loss") {
    cfg.batch_size = 100;
    cfg.model = {{"dropout", 0.0}};
    auto model = nn::make_classifier(cfg.architecture, cfg.model, 1);
    const auto batch = pad_batch(std::span<const Round>(rounds), model->pad_value());
    const double direct = bce_with_logits(model->predict(batch), batch.labels).loss;
    auto st = AdamState::for_params(model->params());
    model->set_training(true);
    CHECK(std::abs(train_epoch(*model, st, rounds, cfg, 7) - direct) < 1e-12);
  }
  SUBCASE("empty training set") {
    auto model = nn::make_classifier(cfg.architecture, cfg.model, 1);
    auto st = AdamState::for_params(model->params());
    CHECK_THROWS_AS(train_epoch(*model, st, std::span<const Round>(), cfg, 7), DataError);
  }
}

TEST_CASE("train_kfold") {
  const auto rounds = balanced_synth(200, 6);
  auto cfg = TrainConfig::defaults_for(nn::Architecture::kLstm);
  cfg.epochs = 60;
  cfg.bootstrap_resamples = 50;
  cfg.progression = 0.95;

  SUBCASE("five disjoint folds, loss trends down, AUC above chance") {
    const auto rep = train_kfold(rounds, cfg);
    REQUIRE(rep.folds.size() == 5);
    std::set<std::string> seen;
    std::size_t tested = 0;
    for (const auto& f : rep.folds) {
      for (const auto& s : f.split.test_sheet_ids) CHECK(seen.insert(s).second);
      tested += f.test_rounds;
      CHECK(f.train_rounds + f.test_rounds == rounds.size());
      // 20-epoch window means never rise.
      double prev = 1e9;
      for (std::size_t w = 0; w + 20 <= f.mean_epochs.size(); w += 20) {
        double mean = 0.0;
        for (std::size_t e = w; e < w + 20; ++e) mean += f.mean_epochs[e].train_loss / 20.0;
        CHECK(mean <= prev);
        prev = mean;
      }
    }
    CHECK(tested == rounds.size());
    CHECK(seen.size() == 10);
    CHECK(rep.mean_auc > 0.8);
  }
  SUBCASE("result does not depend on job count") {
    cfg.epochs = 3;
    cfg.runs = 2;
    const auto a = train_kfold(rounds, cfg);
    cfg.jobs = 3;
    const auto b = train_kfold(rounds, cfg);
    for (std::size_t f = 0; f < a.folds.size(); ++f) {
      CHECK(a.folds[f].auc == b.folds[f].auc);
      CHECK(a.folds[f].runs.size() == 2);
      for (std::size_t k = 0; k < a.folds[f].model->params().size(); ++k) {
        CHECK(a.folds[f].model->params()[k].value == b.folds[f].model->params()[k].value);
      }
    }
  }
  SUBCASE("fewer sheets than folds") {
    std::vector<Round> few;
    for (const auto& r : rounds) {
      if (r.sheet_id == "Sheet_1" || r.sheet_id == "Sheet_2") few.push_back(r);
    }
    CHECK_THROWS_AS(train_kfold(few, cfg), DataError);
  }
}
