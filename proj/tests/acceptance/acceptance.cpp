// Acceptance suite: one PASS / FAIL / SKIP line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fgwin/cli.hpp"
#include "fgwin/eval.hpp"
#include "fgwin/nn/checkpoint.hpp"
#include "fgwin/nn/gradient_check.hpp"
#include "fgwin/optim.hpp"
#include "support.hpp"

using namespace fgwin;
namespace fs = std::filesystem;

namespace {

enum class Outcome { kPass, kFail, kSkip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

Verdict pass(std::string d) { return {Outcome::kPass, std::move(d)}; }
Verdict fail(std::string d) { return {Outcome::kFail, std::move(d)}; }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

const std::vector<nn::Architecture> kArchs{nn::Architecture::kLstm, nn::Architecture::kTransformer};

// 1
Verdict gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  SeededRng rng(101);
  double worst = 0.0;
  std::string where;
  for (auto arch : kArchs) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto model = nn::make_classifier(arch, {{"dropout", 0.0}}, seed);
      auto rounds = testing::random_rounds(rng, 2, 1, 4);
      rounds[0].features.resize(4, {rng.uniform(0, 100), rng.uniform(0, 100)});
      const auto batch = pad_batch(std::span<const Round>(rounds), model->pad_value());
      const auto r = nn::gradient_check(*model, batch, testing::bce_loss(batch.labels), {.eps = 1e-5});
      if (r.checked != model->params().scalar_count()) return fail("not every parameter was checked");
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        where = nn::to_string(arch) + " " + r.worst_parameter;
      }
    }
  }
  const double secs = seconds_since(t0);
  const std::string d = "max rel error " + fmt(worst) + " (" + where + "), " + fmt(secs) + " s";
  return worst < 1e-6 && secs < 30.0 ? pass(d) : fail(d);
}

// 2
Verdict masking_invariance() {
  SeededRng rng(202);
  double worst = 0.0;
  for (auto arch : kArchs) {
    for (int trial = 0; trial < 100; ++trial) {
      auto model = nn::make_classifier(arch, nlohmann::json::object(), static_cast<std::uint64_t>(trial));
      auto rounds = testing::random_rounds(rng, 1, 1, 200);
      // A second, longer round pads the first by 1..50 steps.
      const std::size_t extra = 1 + rng.below(50);
      Round longer = rounds[0];
      longer.features.resize(rounds[0].length() + extra, {1, 1});
      const auto alone = model->predict(pad_batch(std::span<const Round>(rounds), model->pad_value()));
      const std::vector<Round> both{rounds[0], longer};
      const auto padded = model->predict(pad_batch(std::span<const Round>(both), model->pad_value()));
      worst = std::max(worst, std::abs(alone[0] - padded[0]));
    }
  }
  const std::string d = "max logit change " + fmt(worst);
  return worst < 1e-9 ? pass(d) : fail(d);
}

// 3
Verdict auc_oracle() {
  SeededRng rng(303);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const std::uint64_t levels = 1 + rng.below(n);  // few levels means many ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(levels)) * 0.125;
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    y[0] = 0;
    y[1] = 1;
    double num = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] != 1 || y[j] != 0) continue;
        pairs += 1.0;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
    if (eval::roc_auc(s, y) != num / pairs) return fail("mismatch at trial " + std::to_string(trial));
  }
  return pass("500 instances identical");
}

// 4
Verdict adam_correctness() {
  nn::ParamSet ps;
  ps.add("theta", Tensor({1}, 1.0));
  ps[0].grad[0] = 0.5;
  auto st = optim::AdamState::for_params(ps);
  optim::adam_step(ps, st, 0.001, 0.0);
  const double theta = ps[0].value[0];
  const bool step_ok = std::abs(theta - 0.999000) <= 1e-10;

  auto model = nn::make_classifier(nn::Architecture::kLstm, nlohmann::json::object(), 4);
  const auto before = model->params();
  for (auto& p : model->params()) std::fill(p.grad.values().begin(), p.grad.values().end(), 0.3);
  auto st2 = optim::AdamState::for_params(model->params());
  optim::adam_step(model->params(), st2, 0.0, 0.0);
  bool noop = true;
  for (std::size_t i = 0; i < before.size(); ++i) noop = noop && before[i].value == model->params()[i].value;

  const std::string d = "theta' = " + fmt(theta) + (noop ? ", lr=0 no-op" : ", lr=0 moved parameters");
  return step_ok && noop ? pass(d) : fail(d);
}

// 5
Verdict loss_sanity() {
  SeededRng rng(505);
  const auto rounds = testing::random_rounds(rng, 200, 20, 80);
  double worst = 0.0;
  for (auto arch : kArchs) {
    auto model = nn::make_classifier(arch, nlohmann::json::object(), 5);
    const auto batch = pad_batch(std::span<const Round>(rounds), model->pad_value());
    worst = std::max(worst, std::abs(optim::bce_with_logits(model->predict(batch), batch.labels).loss - std::log(2.0)));
  }
  const auto extreme = optim::bce_with_logits(Tensor({4}, std::vector<double>{100, -100, 100, -100}),
                                              Tensor({4}, std::vector<double>{1, 0, 0, 1}));
  const bool finite = std::isfinite(extreme.loss) && extreme.grad.all_finite();
  const std::string d = "|BCE - ln 2| = " + fmt(worst) + ", BCE at +-100 = " + fmt(extreme.loss);
  return worst < 0.05 && finite ? pass(d) : fail(d);
}

// 6
Verdict synthetic_learning() {
  const auto t0 = std::chrono::steady_clock::now();
  auto run = [](double noise, double p) {
    SynthOptions so;
    so.n_rounds = 1000;
    so.seed = 1;
    so.noise_level = noise;
    const auto rounds = synth_generate(so);
    auto c = optim::TrainConfig::defaults_for(nn::Architecture::kLstm);
    c.epochs = 100;
    c.progression = p;
    c.seed = 3;
    c.bootstrap_resamples = 100;
    return optim::train_kfold(rounds, c).mean_auc;
  };
  const double a95 = run(0.0, 0.95);
  const double a75 = run(0.0, 0.75);
  const double n75 = run(0.5, 0.75);
  const double n25 = run(0.5, 0.25);
  const double secs = seconds_since(t0);
  const std::string d = "AUC p=0.95 " + fmt(a95) + ", p=0.75 " + fmt(a75) + "; noise 0.5: p=0.25 " + fmt(n25) +
                        " vs p=0.75 " + fmt(n75) + "; " + fmt(secs) + " s";
  return a95 >= 0.95 && a75 >= 0.85 && n25 < n75 && secs < 600.0 ? pass(d) : fail(d);
}

// 7
Verdict dataset_reproduction() {
  std::optional<fs::path> dir;
  if (const char* env = std::getenv(cli::kDataDirEnv); env && *env) dir = env;
  else if (fs::exists("data")) dir = fs::path("data");
  if (!dir || !fs::exists(*dir)) return {Outcome::kSkip, "dataset not present"};

  const auto rounds = cli::load_rounds(*dir);
  std::size_t rows = 0, max_len = 0;
  for (const auto& r : rounds) {
    rows += r.length();
    max_len = std::max(max_len, truncate_round(r, 0.75).length());
  }
  const auto dist = class_distribution(rounds);
  const double f1 = dist.label1.fraction.value_or(0.0) * 100.0;
  const double f0 = dist.label0.fraction.value_or(0.0) * 100.0;
  const bool balance = (std::round(f1 * 100) == 5036 && std::round(f0 * 100) == 4964) ||
                       (std::round(f0 * 100) == 5036 && std::round(f1 * 100) == 4964);

  auto c = optim::TrainConfig::defaults_for(nn::Architecture::kLstm);
  c.progression = 0.75;
  const double auc = optim::train_kfold(rounds, c).mean_auc;
  const std::string d = std::to_string(rows) + " rows, max length " + std::to_string(max_len) + ", balance " +
                        fmt(f1) + "/" + fmt(f0) + ", AUC " + fmt(auc);
  return rows == 274002 && max_len == 320 && balance && auc >= 0.88 ? pass(d) : fail(d);
}

// 8
Verdict determinism() {
  const auto root = testing::scratch_dir("acceptance_determinism");
  cli::SynthArgs sa;
  sa.rounds = 200;
  sa.seed = 8;
  sa.out = root / "data";
  std::ostringstream sink;
  cli::cmd_synth(sa, sink);

  auto train = [&](const std::string& name) {
    cli::TrainArgs ta;
    ta.data = sa.out;
    ta.epochs = 10;
    ta.seed = 8;
    ta.out = root / name;
    ta.bench_reps = 5;
    cli::cmd_train(ta, sink, sink);
  };
  train("a");
  train("b");

  for (std::size_t f = 0; f < 5; ++f) {
    const auto name = cli::checkpoint_name(f);
    if (slurp(root / "a" / name) != slurp(root / "b" / name)) return fail(name + " differs");
  }
  if (slurp(root / "a" / cli::kResolvedConfigFile) != slurp(root / "b" / cli::kResolvedConfigFile))
    return fail("resolved config differs");
  auto ma = nlohmann::json::parse(slurp(root / "a" / cli::kMetricsFile));
  auto mb = nlohmann::json::parse(slurp(root / "b" / cli::kMetricsFile));
  ma.erase("latency");
  mb.erase("latency");
  if (ma.dump() != mb.dump()) return fail("metrics differ");
  return pass("5 checkpoints, config and metrics identical");
}

// 9
Verdict latency_harness() {
  const auto root = testing::scratch_dir("acceptance_latency");
  auto model = nn::make_classifier(nn::Architecture::kLstm, nlohmann::json::object(), 9);
  nn::save_checkpoint(root / "lstm.json", *model, {{"progression", 0.75}});

  cli::BenchArgs ba;
  ba.checkpoint = root / "lstm.json";
  ba.reps = 1000;
  ba.batch = 32;
  ba.out = root;
  std::ostringstream table, err;
  const auto rows = cli::cmd_bench(ba, table, err);
  const auto doc = nlohmann::json::parse(slurp(root / cli::kLatencyFile));

  std::istringstream lines(table.str());
  std::string header;
  std::getline(lines, header);
  const bool shaped = header == "model,progression,batch,steps,mean_ms,std_ms" && rows.size() == 3 &&
                      doc.at("rows").size() == 3;
  const double lo = rows.front().mean_ms, hi = rows.back().mean_ms;
  const std::string d = "p=0.25 " + fmt(lo) + " ms, p=0.95 " + fmt(hi) + " ms";
  return shaped && hi > lo ? pass(d) : fail(d);
}

// 10
Verdict fold_hygiene() {
  std::size_t checked = 0;
  auto verify = [&](const std::vector<std::string>& sheets, const FoldScheme& scheme) {
    const std::set<std::string> all(sheets.begin(), sheets.end());
    for (const auto& f : make_folds(sheets, scheme)) {
      std::set<std::string> u(f.train_sheet_ids.begin(), f.train_sheet_ids.end());
      for (const auto& t : f.test_sheet_ids) {
        if (u.count(t)) return false;
        u.insert(t);
      }
      if (u != all || f.test_sheet_ids.empty()) return false;
      ++checked;
    }
    return true;
  };
  for (std::size_t n = 5; n <= 20; ++n) {
    std::vector<std::string> sheets;
    for (std::size_t i = 1; i <= n; ++i) sheets.push_back("Sheet_" + std::to_string(i));
    for (std::size_t k = 2; k <= n; ++k) {
      if (!verify(sheets, {.k = k})) return fail("partition n=" + std::to_string(n) + " k=" + std::to_string(k));
      for (std::size_t block = 1; block < n; ++block) {
        for (std::size_t stride = 1; stride <= block; ++stride) {
          for (std::size_t offset = 0; offset + (k - 1) * stride + block <= n; ++offset) {
            FoldScheme s{.k = k, .block_size = block, .stride = stride, .offset = offset};
            if (!verify(sheets, s)) return fail("window n=" + std::to_string(n));
          }
        }
      }
    }
  }
  return pass(std::to_string(checked) + " folds checked");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"masking invariance", masking_invariance},
      {"AUC oracle equivalence", auc_oracle},
      {"Adam correctness", adam_correctness},
      {"loss sanity", loss_sanity},
      {"synthetic learning", synthetic_learning},
      {"dataset reproduction", dataset_reproduction},
      {"determinism", determinism},
      {"latency harness", latency_harness},
      {"fold hygiene", fold_hygiene},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const char* tag = v.outcome == Outcome::kPass ? "PASS" : v.outcome == Outcome::kFail ? "FAIL" : "SKIP";
    if (v.outcome == Outcome::kFail) ++failures;
    std::cout << tag << " " << (i + 1) << " " << criteria[i].first << ": " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
