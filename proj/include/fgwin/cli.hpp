#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgwin/data.hpp"
#include "fgwin/optim.hpp"

namespace fgwin::cli {

/// Environment variable naming the default data directory.
inline constexpr const char* kDataDirEnv = "FGWIN_DATA_DIR";

// Output file names.
inline constexpr const char* kResolvedConfigFile = "config_resolved.json";
inline constexpr const char* kTrainLogFile = "training_log.csv";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kRocFile = "roc.csv";
inline constexpr const char* kLatencyFile = "latency.json";
inline constexpr const char* kBaselineFile = "baseline_metrics.json";

/// fold_1.ckpt.json, fold_2.ckpt.json, ...
std::string checkpoint_name(std::size_t fold_index);

/// --data if given, else $FGWIN_DATA_DIR, else UsageError.
std::filesystem::path resolve_data_path(const std::optional<std::filesystem::path>& flag);

/// A *.jsonl file is read as canonical rounds; anything else (a directory of
/// per-sheet CSVs or one CSV) goes through the frame parser and round split.
std::vector<Round> load_rounds(const std::filesystem::path& source);

struct SynthArgs {
  std::size_t rounds = 1000;
  std::uint64_t seed = 1;
  double noise = 0.0;
  std::filesystem::path out;
};

/// Writes Sheet_<n>.csv per sheet.
void cmd_synth(const SynthArgs& args, std::ostream& out);

struct TrainArgs {
  std::optional<std::string> arch;
  std::optional<double> progression;
  std::optional<std::filesystem::path> data;
  std::optional<std::size_t> folds;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = "run";
  std::size_t bench_reps = 100;
};

/// Effective configuration: architecture defaults, then --config, then
/// individual flags. A progression outside (0, 1] is a UsageError.
optim::TrainConfig resolve_train_config(const TrainArgs& args);

/// Trains every fold and writes config_resolved.json, one checkpoint per
/// fold, training_log.csv and metrics.json into args.out.
optim::TrainReport cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> data;
  std::optional<double> progression;  // defaults to the checkpoint's
  bool held_out = false;              // only the checkpoint's test sheets
  std::filesystem::path out = ".";
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t seed = 0;
};

/// Writes metrics.json and roc.csv; warns on `err` when the progression
/// differs from the one recorded in the checkpoint.
nlohmann::json cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

struct PredictArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path round_file;  // "-" reads standard input
};

/// One `sheet_id,round_index,probability` line per round.
void cmd_predict(const PredictArgs& args, std::istream& in, std::ostream& out);

struct BenchArgs {
  std::filesystem::path checkpoint;
  std::vector<double> progressions{0.25, 0.75, 0.95};
  std::size_t reps = 1000;
  std::size_t warmup = 10;
  std::optional<std::filesystem::path> data;  // synthetic rounds when unset
  std::size_t batch = 0;                      // 0 = every round
  std::optional<std::filesystem::path> out;
};

/// Prints `model,progression,batch,steps,mean_ms,std_ms` rows and, with
/// --out, writes latency.json. Non-increasing latency is a warning only.
std::vector<eval::LatencyStats> cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err);

struct BaselineArgs {
  std::vector<std::string> methods{"knn", "svm", "rf"};
  std::optional<std::filesystem::path> data;
  double progression = 0.75;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
};

nlohmann::json cmd_baselines(const BaselineArgs& args, std::ostream& out);

/// Builds the CLI11 app and runs it; returns the process exit code.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace fgwin::cli
