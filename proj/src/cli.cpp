#include "fgwin/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "fgwin/baselines.hpp"
#include "fgwin/error.hpp"
#include "fgwin/eval.hpp"
#include "fgwin/nn/checkpoint.hpp"
#include "fgwin/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fgwin::cli {

namespace {

void check_progression(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw UsageError("--progression must be in (0, 1], got " + std::to_string(p));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const json& doc) {
  auto f = open_out(path);
  f << doc.dump(2) << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string fmt(double v, int precision = 17) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::vector<Round> rounds_in(std::span<const Round> rounds, const std::vector<std::string>& sheets) {
  const std::set<std::string> keep(sheets.begin(), sheets.end());
  std::vector<Round> out;
  for (const auto& r : rounds) {
    if (keep.count(r.sheet_id)) out.push_back(r);
  }
  return out;
}

json uncertainty_note(std::size_t resamples) {
  return "stratified bootstrap, 95% percentile interval, " + std::to_string(resamples) + " resamples";
}

}  // namespace

std::string checkpoint_name(std::size_t fold_index) { return "fold_" + std::to_string(fold_index + 1) + ".ckpt.json"; }

fs::path resolve_data_path(const std::optional<fs::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return fs::path(env);
  throw UsageError(std::string("no data given: pass --data or set ") + kDataDirEnv);
}

std::vector<Round> load_rounds(const fs::path& source) {
  if (source.extension() == ".jsonl") {
    std::ifstream f(source);
    if (!f) throw IoError("cannot read " + source.string());
    return read_rounds_jsonl(f, source.string());
  }
  const auto sheets = parse_frames(source);
  return split_rounds(sheets);
}

// --- synth ------------------------------------------------------------------

void cmd_synth(const SynthArgs& args, std::ostream& out) {
  if (args.out.empty()) throw UsageError("synth needs --out");
  SynthOptions o;
  o.n_rounds = args.rounds;
  o.seed = args.seed;
  o.noise_level = args.noise;
  const auto rounds = synth_generate(o);

  std::map<std::string, std::vector<Round>> by_sheet;
  for (const auto& r : rounds) by_sheet[r.sheet_id].push_back(r);
  ensure_dir(args.out);
  for (const auto& [sheet, rs] : by_sheet) {
    const fs::path path = args.out / (sheet + ".csv");
    auto f = open_out(path);
    write_frames_csv(f, rounds_to_frames(rs));
    if (!f) throw IoError("write failed: " + path.string());
  }
  out << "wrote " << rounds.size() << " rounds in " << by_sheet.size() << " sheets to " << args.out.string() << '\n';
}

// --- train ------------------------------------------------------------------

optim::TrainConfig resolve_train_config(const TrainArgs& args) {
  optim::TrainConfig c;
  if (args.config) {
    json j = read_json(*args.config);
    if (args.arch) j["architecture"] = *args.arch;
    try {
      c = optim::train_config_from_json(j);
    } catch (const json::exception& e) {
      throw FormatError(args.config->string() + ": " + e.what());
    }
  } else {
    c = optim::TrainConfig::defaults_for(nn::parse_architecture(args.arch.value_or("lstm")));
  }
  if (args.progression) c.progression = *args.progression;
  check_progression(c.progression);
  if (args.folds) c.folds.k = *args.folds;
  if (args.epochs) c.epochs = *args.epochs;
  if (args.seed) c.seed = *args.seed;
  if (args.jobs) c.jobs = *args.jobs;
  if (args.runs) c.runs = *args.runs;
  if (args.batch_size) c.batch_size = *args.batch_size;
  if (args.learning_rate) c.learning_rate = *args.learning_rate;
  c.validate();
  return c;
}

optim::TrainReport cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  const optim::TrainConfig config = resolve_train_config(args);
  if (args.bench_reps < 2) throw ParameterError("--bench-reps must be at least 2");
  const fs::path data = resolve_data_path(args.data);
  const auto rounds = load_rounds(data);
  ensure_dir(args.out);
  write_json(args.out / kResolvedConfigFile, optim::to_json(config));

  const auto report = optim::train_kfold(rounds, config, [&](const std::string& msg) { err << msg << '\n'; });

  auto log = open_out(args.out / kTrainLogFile);
  log << "fold,epoch,train_loss,wall_ms\n";
  json folds = json::array();
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    const auto& fold = report.folds[f];
    for (const auto& e : fold.mean_epochs) {
      log << (f + 1) << ',' << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.wall_ms, 6) << '\n';
    }
    json meta = {{"progression", config.progression},
                 {"fold", f + 1},
                 {"test_sheets", fold.split.test_sheet_ids},
                 {"train_sheets", fold.split.train_sheet_ids},
                 {"seed", config.seed},
                 {"epochs", config.epochs},
                 {"test_auc", fold.runs.back().test_auc}};
    nn::save_checkpoint(args.out / checkpoint_name(f), *fold.model, meta);
    folds.push_back({{"fold", f + 1},
                     {"test_sheets", fold.split.test_sheet_ids},
                     {"train_rounds", fold.train_rounds},
                     {"test_rounds", fold.test_rounds},
                     {"auc", fold.auc},
                     {"ci_lo", fold.ci_lo},
                     {"ci_hi", fold.ci_hi},
                     {"bootstrap_std", fold.bootstrap_std},
                     {"auc_run_std", fold.auc_run_std},
                     {"accuracy", fold.accuracy}});
  }
  if (!log) throw IoError("write failed: " + (args.out / kTrainLogFile).string());

  // Latency of the last fold's model on its own (truncated) test rounds.
  const auto& last = report.folds.back();
  const auto test = truncate_rounds(rounds_in(rounds, last.split.test_sheet_ids), config.progression);
  const auto batch = pad_batch(std::span<const Round>(test), last.model->pad_value());
  const auto lat = eval::bench_inference(*last.model, batch, args.bench_reps, 5);

  const json metrics = {{"model", nn::to_string(config.architecture)},
                        {"progression", config.progression},
                        {"uncertainty", uncertainty_note(config.bootstrap_resamples)},
                        {"folds", folds},
                        {"mean_auc", report.mean_auc},
                        {"std_auc", report.std_auc},
                        {"latency",
                         {{"mean_ms", lat.mean_ms},
                          {"std_ms", lat.std_ms},
                          {"repetitions", lat.repetitions},
                          {"batch_size", lat.batch_size},
                          {"steps", lat.steps}}}};
  write_json(args.out / kMetricsFile, metrics);
  out << nn::to_string(config.architecture) << " p=" << fmt(config.progression, 6) << " mean AUC "
      << fmt(report.mean_auc, 4) << " +- " << fmt(report.std_auc, 4) << " over " << report.folds.size()
      << " folds\n";
  return report;
}

// --- eval -------------------------------------------------------------------

json cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  const auto ckpt = nn::load_checkpoint(args.checkpoint);
  const auto& meta = ckpt.metadata;
  std::optional<double> recorded;
  if (meta.contains("progression") && meta.at("progression").is_number()) recorded = meta.at("progression").get<double>();
  const std::optional<double> chosen = args.progression ? args.progression : recorded;
  if (!chosen) throw UsageError("checkpoint records no progression; pass --progression");
  const double p = *chosen;
  check_progression(p);
  if (recorded && *recorded != p) {
    err << "warning: checkpoint was trained at progression " << fmt(*recorded, 6) << ", evaluating at "
        << fmt(p, 6) << '\n';
  }

  auto rounds = load_rounds(resolve_data_path(args.data));
  if (args.held_out) {
    if (!meta.contains("test_sheets")) throw UsageError("checkpoint records no test sheets; drop --held-out");
    rounds = rounds_in(rounds, meta.at("test_sheets").get<std::vector<std::string>>());
  }
  if (rounds.empty()) throw DataError("no rounds to evaluate");
  const auto truncated = truncate_rounds(rounds, p);
  const auto logits = optim::predict_logits(*ckpt.model, truncated);
  const auto labels = eval::labels_of(std::span<const Round>(truncated));

  SeededRng boot(derive_seed(args.seed, 0, 0, 2));
  const auto ci = eval::roc_auc_ci(logits, labels, args.bootstrap_resamples, boot);
  std::vector<double> probs(logits.size());
  std::transform(logits.begin(), logits.end(), probs.begin(), [](double z) { return sigmoid(z); });

  ensure_dir(args.out);
  {
    auto f = open_out(args.out / kRocFile);
    const auto curve = eval::roc_curve(logits, labels);
    eval::write_roc_csv(f, curve);
  }
  const json metrics = {{"model", nn::to_string(ckpt.model->architecture())},
                        {"progression", p},
                        {"uncertainty", uncertainty_note(args.bootstrap_resamples)},
                        {"rounds", truncated.size()},
                        {"folds",
                         json::array({{{"auc", ci.auc},
                                       {"ci_lo", ci.lo},
                                       {"ci_hi", ci.hi},
                                       {"bootstrap_std", ci.std},
                                       {"accuracy", eval::accuracy_at(probs, labels, 0.5)}}})},
                        {"latency", nullptr}};
  write_json(args.out / kMetricsFile, metrics);
  out << "AUC " << fmt(ci.auc, 4) << " [" << fmt(ci.lo, 4) << ", " << fmt(ci.hi, 4) << "] on " << truncated.size()
      << " rounds\n";
  return metrics;
}

// --- predict ----------------------------------------------------------------

void cmd_predict(const PredictArgs& args, std::istream& in, std::ostream& out) {
  const auto ckpt = nn::load_checkpoint(args.checkpoint);
  std::vector<Round> rounds;
  if (args.round_file == "-") {
    rounds = read_rounds_jsonl(in, "<stdin>");
  } else {
    std::ifstream f(args.round_file);
    if (!f) throw IoError("cannot read " + args.round_file.string());
    rounds = read_rounds_jsonl(f, args.round_file.string());
  }
  for (const auto& r : rounds) {
    const auto batch = pad_batch(std::span<const Round>(&r, 1), ckpt.model->pad_value());
    const double prob = sigmoid(ckpt.model->predict(batch)[0]);
    out << r.sheet_id << ',' << r.round_index << ',' << fmt(prob) << '\n';
  }
}

// --- bench ------------------------------------------------------------------

std::vector<eval::LatencyStats> cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  if (args.progressions.empty()) throw UsageError("bench needs at least one --progression");
  for (double p : args.progressions) check_progression(p);
  if (args.reps < 2) throw ParameterError("--reps must be at least 2, got " + std::to_string(args.reps));
  const auto ckpt = nn::load_checkpoint(args.checkpoint);
  std::vector<Round> rounds;
  if (args.data) {
    rounds = load_rounds(*args.data);
  } else {
    SynthOptions o;
    o.n_rounds = 200;
    rounds = synth_generate(o);
  }
  if (args.batch > 0 && args.batch < rounds.size()) rounds.resize(args.batch);
  if (rounds.empty()) throw DataError("no rounds to benchmark");

  const std::string model = nn::to_string(ckpt.model->architecture());
  std::vector<eval::LatencyStats> rows;
  out << "model,progression,batch,steps,mean_ms,std_ms\n";
  for (double p : args.progressions) {
    const auto truncated = truncate_rounds(rounds, p);
    const auto batch = pad_batch(std::span<const Round>(truncated), ckpt.model->pad_value());
    auto st = eval::bench_inference(*ckpt.model, batch, args.reps, args.warmup);
    st.progression = p;
    out << model << ',' << fmt(p, 6) << ',' << st.batch_size << ',' << st.steps << ',' << fmt(st.mean_ms, 6) << ','
        << fmt(st.std_ms, 6) << '\n';
    rows.push_back(st);
  }
  // Longer prefixes should not be faster; timing noise makes this advisory.
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rows[a].progression < rows[b].progression; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (rows[order[i]].mean_ms < rows[order[i - 1]].mean_ms) {
      err << "warning: mean latency at p=" << fmt(rows[order[i]].progression, 6) << " is below p="
          << fmt(rows[order[i - 1]].progression, 6) << '\n';
    }
  }

  if (args.out) {
    json table = json::array();
    for (const auto& st : rows) {
      table.push_back({{"progression", st.progression},
                       {"batch_size", st.batch_size},
                       {"steps", st.steps},
                       {"mean_ms", st.mean_ms},
                       {"std_ms", st.std_ms},
                       {"repetitions", st.repetitions}});
    }
    ensure_dir(*args.out);
    write_json(*args.out / kLatencyFile, {{"model", model}, {"warmup", args.warmup}, {"rows", table}});
  }
  return rows;
}

// --- baselines --------------------------------------------------------------

json cmd_baselines(const BaselineArgs& args, std::ostream& out) {
  check_progression(args.progression);
  std::vector<baselines::Method> methods;
  for (const auto& m : args.methods) methods.push_back(baselines::parse_method(m));
  const auto rounds = load_rounds(resolve_data_path(args.data));

  baselines::BaselineConfig config;
  config.progression = args.progression;
  config.folds.k = args.folds;
  config.seed = args.seed;

  json reports = json::array();
  for (auto m : methods) {
    const auto rep = baselines::cross_validate(rounds, m, config);
    json folds = json::array();
    for (const auto& f : rep.folds) {
      folds.push_back({{"auc", f.auc}, {"ci_lo", f.ci_lo}, {"ci_hi", f.ci_hi}, {"accuracy", f.accuracy}});
    }
    reports.push_back({{"model", baselines::to_string(m)},
                       {"progression", args.progression},
                       {"folds", folds},
                       {"mean_auc", rep.mean_auc}});
    out << baselines::to_string(m) << " p=" << fmt(args.progression, 6) << " mean AUC " << fmt(rep.mean_auc, 4)
        << '\n';
  }
  const json doc = {{"uncertainty", uncertainty_note(config.bootstrap_resamples)}, {"models", reports}};
  if (args.out) {
    ensure_dir(*args.out);
    write_json(*args.out / kBaselineFile, doc);
  }
  return doc;
}

// --- entry point ------------------------------------------------------------

namespace {

template <typename T>
void set_if(const CLI::Option* opt, const T& value, std::optional<T>& target) {
  if (opt->count() > 0) target = value;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Round-winner prediction from fighting-game damage time series"};
  app.require_subcommand(1);

  SynthArgs synth;
  std::string synth_out;
  auto* sc = app.add_subcommand("synth", "Generate a synthetic dataset (one CSV per sheet)");
  sc->add_option("--rounds", synth.rounds, "Number of rounds (>= 10)")->capture_default_str();
  sc->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  sc->add_option("--noise", synth.noise, "Misleading-opening level in [0, 1]")->capture_default_str();
  sc->add_option("--out", synth_out, "Output directory")->required();

  TrainArgs train;
  std::string t_arch, t_data, t_config, t_out = "run";
  double t_prog = 0, t_lr = 0;
  std::size_t t_folds = 0, t_epochs = 0, t_jobs = 0, t_runs = 0, t_batch = 0;
  std::uint64_t t_seed = 0;
  auto* tc = app.add_subcommand("train", "Grouped k-fold training of a sequence model");
  auto* o_arch = tc->add_option("--arch", t_arch, "lstm or transformer");
  auto* o_prog = tc->add_option("--progression", t_prog, "Fraction of each round kept, in (0, 1]");
  auto* o_data = tc->add_option("--data", t_data, "Dataset directory, CSV or .jsonl file");
  auto* o_folds = tc->add_option("--folds", t_folds, "Number of folds");
  auto* o_epochs = tc->add_option("--epochs", t_epochs, "Training epochs");
  auto* o_seed = tc->add_option("--seed", t_seed, "Master seed");
  auto* o_jobs = tc->add_option("--jobs", t_jobs, "Folds trained concurrently");
  auto* o_runs = tc->add_option("--runs", t_runs, "Repeated trainings per fold");
  auto* o_batch = tc->add_option("--batch-size", t_batch, "Mini-batch size");
  auto* o_lr = tc->add_option("--lr", t_lr, "Learning rate");
  auto* o_config = tc->add_option("--config", t_config, "Replay a config_resolved.json");
  tc->add_option("--out", t_out, "Output directory")->capture_default_str();
  tc->add_option("--bench-reps", train.bench_reps, "Latency repetitions for metrics.json")->capture_default_str();

  EvalArgs ev;
  std::string e_ckpt, e_data, e_out = ".";
  double e_prog = 0;
  auto* ec = app.add_subcommand("eval", "Evaluate a checkpoint: metrics JSON and ROC CSV");
  ec->add_option("--checkpoint", e_ckpt, "Checkpoint file")->required();
  auto* oe_data = ec->add_option("--data", e_data, "Dataset directory, CSV or .jsonl file");
  auto* oe_prog = ec->add_option("--progression", e_prog, "Defaults to the checkpoint's");
  ec->add_flag("--held-out", ev.held_out, "Only the checkpoint's test sheets");
  ec->add_option("--out", e_out, "Output directory")->capture_default_str();
  ec->add_option("--resamples", ev.bootstrap_resamples, "Bootstrap resamples")->capture_default_str();
  ec->add_option("--seed", ev.seed, "Bootstrap seed")->capture_default_str();

  PredictArgs pr;
  std::string p_ckpt, p_file;
  auto* pc = app.add_subcommand("predict", "Win probability per round (sheet_id,round_index,probability)");
  pc->add_option("--checkpoint", p_ckpt, "Checkpoint file")->required();
  pc->add_option("--round-file", p_file, "JSON-lines rounds, or - for standard input")->required();

  BenchArgs bench;
  std::string b_ckpt, b_data, b_out;
  auto* bc = app.add_subcommand("bench", "Inference latency per progression");
  bc->add_option("--checkpoint", b_ckpt, "Checkpoint file")->required();
  bc->add_option("--progression", bench.progressions, "One or more fractions")->capture_default_str();
  bc->add_option("--reps", bench.reps, "Timed repetitions (>= 2)")->capture_default_str();
  bc->add_option("--warmup", bench.warmup, "Untimed warmup passes")->capture_default_str();
  bc->add_option("--batch", bench.batch, "Rounds per batch, 0 = all")->capture_default_str();
  auto* ob_data = bc->add_option("--data", b_data, "Dataset (synthetic rounds when omitted)");
  auto* ob_out = bc->add_option("--out", b_out, "Directory for latency.json");

  BaselineArgs base;
  std::string bl_data, bl_out;
  auto* blc = app.add_subcommand("baselines", "Grouped k-fold KNN / linear SVM / random forest");
  blc->add_option("--method", base.methods, "knn, svm, rf")->capture_default_str();
  auto* obl_data = blc->add_option("--data", bl_data, "Dataset directory, CSV or .jsonl file");
  blc->add_option("--progression", base.progression, "Fraction of each round kept")->capture_default_str();
  blc->add_option("--folds", base.folds, "Number of folds")->capture_default_str();
  blc->add_option("--seed", base.seed, "Seed")->capture_default_str();
  auto* obl_out = blc->add_option("--out", bl_out, "Directory for baseline_metrics.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sc->parsed()) {
      synth.out = synth_out;
      cmd_synth(synth, out);
    } else if (tc->parsed()) {
      set_if(o_arch, t_arch, train.arch);
      set_if(o_prog, t_prog, train.progression);
      if (o_data->count()) train.data = t_data;
      set_if(o_folds, t_folds, train.folds);
      set_if(o_epochs, t_epochs, train.epochs);
      set_if(o_seed, t_seed, train.seed);
      set_if(o_jobs, t_jobs, train.jobs);
      set_if(o_runs, t_runs, train.runs);
      set_if(o_batch, t_batch, train.batch_size);
      set_if(o_lr, t_lr, train.learning_rate);
      if (o_config->count()) train.config = t_config;
      train.out = t_out;
      cmd_train(train, out, err);
    } else if (ec->parsed()) {
      ev.checkpoint = e_ckpt;
      if (oe_data->count()) ev.data = e_data;
      set_if(oe_prog, e_prog, ev.progression);
      ev.out = e_out;
      cmd_eval(ev, out, err);
    } else if (pc->parsed()) {
      pr.checkpoint = p_ckpt;
      pr.round_file = p_file;
      cmd_predict(pr, in, out);
    } else if (bc->parsed()) {
      bench.checkpoint = b_ckpt;
      if (ob_data->count()) bench.data = b_data;
      if (ob_out->count()) bench.out = b_out;
      cmd_bench(bench, out, err);
    } else if (blc->parsed()) {
      if (obl_data->count()) base.data = bl_data;
      if (obl_out->count()) base.out = bl_out;
      cmd_baselines(base, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(ErrorKind::kFormat);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
  out.flush();
  return 0;
}

}  // namespace fgwin::cli
