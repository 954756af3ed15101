#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fgwin/tensor.hpp"

namespace fgwin {

// Column names of the frame table, in file order.
inline constexpr const char* kColWinner = "Winner";
inline constexpr const char* kColProgression = "Round_Progression";
inline constexpr const char* kColP1Damage = "Player1_Damaged%";
inline constexpr const char* kColP2Damage = "Player2_Damaged%";
inline constexpr const char* kColSheet = "Sheet";

/// Feature value used to pad Transformer inputs; real damage percentages are
/// never negative, so it cannot collide with data.
inline constexpr double kTransformerPad = -1.0;
inline constexpr double kLstmPad = 0.0;

/// One sampled video frame (5 fps).
struct FrameRecord {
  int winner = 0;  // 1 = Player 1 won the round, 0 = Player 2 won
  double round_progression = 0.0;
  double p1_damaged_pct = 0.0;
  double p2_damaged_pct = 0.0;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct SheetFrames {
  std::string sheet_id;
  std::vector<FrameRecord> frames;
};

struct DamageStep {
  double p1 = 0.0;
  double p2 = 0.0;
  friend bool operator==(const DamageStep&, const DamageStep&) = default;
};

struct Round {
  std::string sheet_id;
  int round_index = 0;
  std::vector<DamageStep> features;
  int winner = 0;

  std::size_t length() const noexcept { return features.size(); }
  friend bool operator==(const Round&, const Round&) = default;
};

/// Padded model input. mask[i][t] is true iff t < lengths[i]; features at
/// masked positions equal pad_value exactly.
struct RoundBatch {
  Tensor features;  // [B x T_max x 2]
  Mask mask;        // [B x T_max]
  std::vector<std::size_t> lengths;
  Tensor labels;  // [B]
  double pad_value = 0.0;

  std::size_t batch_size() const noexcept { return lengths.size(); }
  std::size_t max_length() const { return features.dim(1); }
};

struct FoldSplit {
  std::size_t fold_index = 0;
  std::vector<std::string> test_sheet_ids;
  std::vector<std::string> train_sheet_ids;
};

/// Fold layout. Unset block_size selects a contiguous balanced partition of
/// the ordered sheets (every sheet tested exactly once). With block_size set,
/// fold j tests sheets [offset + j*stride, offset + j*stride + block_size),
/// and the last window must fit inside the sheet list.
struct FoldScheme {
  std::size_t k = 5;
  std::optional<std::size_t> block_size;
  std::optional<std::size_t> stride;  // defaults to block_size
  std::size_t offset = 0;             // 0-based index of the first test sheet
};

struct LabelCount {
  std::size_t count = 0;
  std::optional<double> fraction;  // empty for an empty set
};

struct ClassDistribution {
  std::size_t total = 0;
  LabelCount label0;
  LabelCount label1;
};

// --- ingest -----------------------------------------------------------------

/// Parses one CSV stream. `origin` names the source in error messages. When
/// the header carries a leading Sheet column, rows are grouped by it (in order
/// of first appearance); otherwise all rows belong to `default_sheet`.
std::vector<SheetFrames> parse_frames_csv(std::istream& in, const std::string& origin,
                                          const std::string& default_sheet);

/// Reads every *.csv under `source` (one file per sheet, sheet id = file stem,
/// sheets in natural order), or a single CSV file.
std::vector<SheetFrames> parse_frames(const std::filesystem::path& source);

void write_frames_csv(std::ostream& out, std::span<const FrameRecord> frames);

/// "Sheet_2" < "Sheet_10": digit runs compare numerically.
bool natural_less(const std::string& a, const std::string& b);

// --- rounds -----------------------------------------------------------------

/// A new round starts wherever progression strictly decreases.
std::vector<Round> split_rounds(const SheetFrames& sheet);
std::vector<Round> split_rounds(std::span<const SheetFrames> sheets);

/// Inverse of split_rounds for data that carries no progression column:
/// progression runs linearly 0..100 over each round.
std::vector<FrameRecord> rounds_to_frames(std::span<const Round> rounds);

/// Keeps the first ceil(p * T) timesteps; p in (0, 1].
Round truncate_round(const Round& round, double p);
std::vector<Round> truncate_rounds(std::span<const Round> rounds, double p);

RoundBatch pad_batch(std::span<const Round> rounds, double pad_value);
RoundBatch pad_batch(std::span<const Round* const> rounds, double pad_value);

std::vector<FoldSplit> make_folds(std::span<const std::string> sheet_ids, const FoldScheme& scheme);

/// Distinct sheet ids in natural order.
std::vector<std::string> sheet_ids_of(std::span<const Round> rounds);

ClassDistribution class_distribution(std::span<const Round> rounds);

// --- canonical rounds file (JSON lines) -------------------------------------

void write_rounds_jsonl(std::ostream& out, std::span<const Round> rounds);
std::vector<Round> read_rounds_jsonl(std::istream& in, const std::string& origin = "<stream>");

// --- synthetic ground truth -------------------------------------------------

inline constexpr std::size_t kSynthSheets = 10;

struct SynthOptions {
  std::size_t n_rounds = 1000;
  std::uint64_t seed = 1;
  double noise_level = 0.0;  // in [0, 1]
  std::size_t min_steps = 40;
  std::size_t max_steps = 90;
};

/// Simulated rounds spread round-robin across Sheet_1..Sheet_10. Damage
/// curves are nondecreasing in [0, 100]; the winner is the player whose
/// opponent reaches 100 first, or who has inflicted more damage at timeout.
/// noise_level (in [0, 1]) adds an opening phase, noise_level / 2 of the
/// nominal round length, whose dominant player is chosen independently of the
/// eventual winner.
std::vector<Round> synth_generate(const SynthOptions& options);

}  // namespace fgwin
