#include "fgwin/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "fgwin/error.hpp"
#include "fgwin/rng.hpp"

namespace fgwin {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::string location(const std::string& origin, std::size_t line) {
  return origin + ":" + std::to_string(line);
}

double parse_number(std::string_view cell, const std::string& origin, std::size_t line,
                    const char* column) {
  double v = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(location(origin, line) + ": column " + column + ": not a finite number: '" +
                     std::string(cell) + "'");
  }
  return v;
}

double parse_percent(std::string_view cell, const std::string& origin, std::size_t line,
                     const char* column) {
  const double v = parse_number(cell, origin, line, column);
  if (v < 0.0 || v > 100.0) {
    throw ParseError(location(origin, line) + ": column " + column + ": " + std::string(cell) +
                     " is outside [0, 100]");
  }
  return v;
}

}  // namespace

bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string_view na(a.data() + i, ie - i), nb(b.data() + j, je - j);
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

std::vector<SheetFrames> parse_frames_csv(std::istream& in, const std::string& origin,
                                          const std::string& default_sheet) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw SchemaError(origin + ": missing header row");
  }
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_csv_line(line);
  auto column_of = [&](const char* name) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    return std::nullopt;
  };
  std::size_t cols[4];
  const char* names[4] = {kColWinner, kColProgression, kColP1Damage, kColP2Damage};
  for (int c = 0; c < 4; ++c) {
    const auto idx = column_of(names[c]);
    if (!idx) throw SchemaError(origin + ": header is missing column " + names[c]);
    cols[c] = *idx;
  }
  const auto sheet_col = column_of(kColSheet);
  const std::size_t width = header.size();

  std::vector<SheetFrames> sheets;
  std::unordered_map<std::string, std::size_t> sheet_index;
  auto sheet_for = [&](const std::string& id) -> SheetFrames& {
    auto [it, inserted] = sheet_index.try_emplace(id, sheets.size());
    if (inserted) sheets.push_back({id, {}});
    return sheets[it->second];
  };
  if (!sheet_col) sheet_for(default_sheet);

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != width) {
      throw ParseError(location(origin, line_no) + ": expected " + std::to_string(width) +
                       " cells, found " + std::to_string(cells.size()));
    }
    FrameRecord rec;
    const double w = parse_number(cells[cols[0]], origin, line_no, kColWinner);
    if (w != 0.0 && w != 1.0) {
      throw ParseError(location(origin, line_no) + ": column Winner must be 0 or 1, got '" +
                       std::string(cells[cols[0]]) + "'");
    }
    rec.winner = static_cast<int>(w);
    rec.round_progression = parse_percent(cells[cols[1]], origin, line_no, kColProgression);
    rec.p1_damaged_pct = parse_percent(cells[cols[2]], origin, line_no, kColP1Damage);
    rec.p2_damaged_pct = parse_percent(cells[cols[3]], origin, line_no, kColP2Damage);
    const std::string sheet = sheet_col ? std::string(cells[*sheet_col]) : default_sheet;
    sheet_for(sheet).frames.push_back(rec);
  }
  return sheets;
}

std::vector<SheetFrames> parse_frames(const fs::path& source) {
  std::error_code ec;
  if (!fs::exists(source, ec)) throw IoError("no such file or directory: " + source.string());

  std::vector<fs::path> files;
  if (fs::is_directory(source)) {
    for (const auto& entry : fs::directory_iterator(source)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
      return natural_less(a.stem().string(), b.stem().string());
    });
  } else {
    files.push_back(source);
  }

  std::vector<SheetFrames> all;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    auto sheets = parse_frames_csv(in, file.string(), file.stem().string());
    for (auto& s : sheets) all.push_back(std::move(s));
  }
  return all;
}

void write_frames_csv(std::ostream& out, std::span<const FrameRecord> frames) {
  out << kColWinner << ',' << kColProgression << ',' << kColP1Damage << ',' << kColP2Damage << '\n';
  char buf[64];
  auto put = [&](double v) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  for (const auto& f : frames) {
    out << f.winner << ',';
    put(f.round_progression);
    out << ',';
    put(f.p1_damaged_pct);
    out << ',';
    put(f.p2_damaged_pct);
    out << '\n';
  }
}

std::vector<Round> split_rounds(const SheetFrames& sheet) {
  std::vector<Round> rounds;
  const auto& frames = sheet.frames;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (i == 0 || f.round_progression < frames[i - 1].round_progression) {
      Round r;
      r.sheet_id = sheet.sheet_id;
      r.round_index = static_cast<int>(rounds.size());
      r.winner = f.winner;
      rounds.push_back(std::move(r));
    }
    Round& cur = rounds.back();
    if (f.winner != cur.winner) {
      throw IntegrityError("sheet " + sheet.sheet_id + " round " + std::to_string(cur.round_index) +
                           ": winner label changes mid-round at frame " + std::to_string(i));
    }
    cur.features.push_back({f.p1_damaged_pct, f.p2_damaged_pct});
  }
  return rounds;
}

std::vector<Round> split_rounds(std::span<const SheetFrames> sheets) {
  std::vector<Round> out;
  for (const auto& s : sheets) {
    auto rounds = split_rounds(s);
    out.insert(out.end(), std::make_move_iterator(rounds.begin()), std::make_move_iterator(rounds.end()));
  }
  return out;
}

std::vector<FrameRecord> rounds_to_frames(std::span<const Round> rounds) {
  std::vector<FrameRecord> frames;
  for (const auto& r : rounds) {
    const std::size_t n = r.features.size();
    for (std::size_t t = 0; t < n; ++t) {
      FrameRecord f;
      f.winner = r.winner;
      f.round_progression = n > 1 ? 100.0 * static_cast<double>(t) / static_cast<double>(n - 1) : 0.0;
      f.p1_damaged_pct = r.features[t].p1;
      f.p2_damaged_pct = r.features[t].p2;
      frames.push_back(f);
    }
  }
  return frames;
}

Round truncate_round(const Round& round, double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ParameterError("truncation fraction must be in (0, 1], got " + std::to_string(p));
  }
  const double exact = p * static_cast<double>(round.features.size());
  // Absorb representation error such as 0.95 * 100 = 95.00000000000001.
  auto keep = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  keep = std::clamp<std::size_t>(keep, std::min<std::size_t>(1, round.features.size()),
                                 round.features.size());
  Round out;
  out.sheet_id = round.sheet_id;
  out.round_index = round.round_index;
  out.winner = round.winner;
  out.features.assign(round.features.begin(), round.features.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

std::vector<Round> truncate_rounds(std::span<const Round> rounds, double p) {
  std::vector<Round> out;
  out.reserve(rounds.size());
  for (const auto& r : rounds) out.push_back(truncate_round(r, p));
  return out;
}

RoundBatch pad_batch(std::span<const Round* const> rounds, double pad_value) {
  if (rounds.empty()) throw DataError("cannot pad an empty list of rounds");
  std::size_t t_max = 0;
  for (const Round* r : rounds) {
    if (r->features.empty()) {
      throw DataError("round " + r->sheet_id + "/" + std::to_string(r->round_index) + " is empty");
    }
    t_max = std::max(t_max, r->features.size());
  }
  const std::size_t b = rounds.size();
  RoundBatch batch;
  batch.pad_value = pad_value;
  batch.features = Tensor({b, t_max, 2}, pad_value);
  batch.labels = Tensor({b});
  batch.lengths.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    const Round& r = *rounds[i];
    batch.lengths[i] = r.features.size();
    batch.labels[i] = static_cast<double>(r.winner);
    for (std::size_t t = 0; t < r.features.size(); ++t) {
      batch.features.at(i, t, 0) = r.features[t].p1;
      batch.features.at(i, t, 1) = r.features[t].p2;
    }
  }
  batch.mask = Mask::from_lengths(batch.lengths, t_max);
  return batch;
}

RoundBatch pad_batch(std::span<const Round> rounds, double pad_value) {
  std::vector<const Round*> ptrs;
  ptrs.reserve(rounds.size());
  for (const auto& r : rounds) ptrs.push_back(&r);
  return pad_batch(std::span<const Round* const>(ptrs), pad_value);
}

std::vector<FoldSplit> make_folds(std::span<const std::string> sheet_ids, const FoldScheme& scheme) {
  const std::size_t s = sheet_ids.size();
  const std::size_t k = scheme.k;
  if (k < 2) throw ParameterError("fold count must be at least 2, got " + std::to_string(k));
  if (s < k) {
    throw DataError("need at least " + std::to_string(k) + " sheets for " + std::to_string(k) +
                    " folds, found " + std::to_string(s));
  }

  // Half-open [begin, end) test windows.
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  if (!scheme.block_size) {
    if (scheme.stride || scheme.offset != 0) {
      throw ParameterError("fold stride/offset require an explicit block size");
    }
    const std::size_t base = s / k, extra = s % k;
    std::size_t begin = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t len = base + (j < extra ? 1 : 0);
      windows.emplace_back(begin, begin + len);
      begin += len;
    }
  } else {
    const std::size_t block = *scheme.block_size;
    const std::size_t stride = scheme.stride.value_or(block);
    if (block == 0 || stride == 0) throw ParameterError("fold block size and stride must be positive");
    if (block >= s) {
      throw ParameterError("fold block size " + std::to_string(block) + " leaves no training sheets out of " +
                           std::to_string(s));
    }
    const std::size_t last_end = scheme.offset + (k - 1) * stride + block;
    if (last_end > s) {
      throw ParameterError("fold windows (offset " + std::to_string(scheme.offset) + ", block " +
                           std::to_string(block) + ", stride " + std::to_string(stride) + ", k " +
                           std::to_string(k) + ") run past the last of " + std::to_string(s) + " sheets");
    }
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t begin = scheme.offset + j * stride;
      windows.emplace_back(begin, begin + block);
    }
  }

  std::vector<FoldSplit> folds;
  for (std::size_t j = 0; j < k; ++j) {
    FoldSplit f;
    f.fold_index = j;
    for (std::size_t i = 0; i < s; ++i) {
      const bool test = i >= windows[j].first && i < windows[j].second;
      (test ? f.test_sheet_ids : f.train_sheet_ids).push_back(sheet_ids[i]);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

std::vector<std::string> sheet_ids_of(std::span<const Round> rounds) {
  std::vector<std::string> ids;
  for (const auto& r : rounds) ids.push_back(r.sheet_id);
  std::sort(ids.begin(), ids.end(), natural_less);
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

ClassDistribution class_distribution(std::span<const Round> rounds) {
  ClassDistribution d;
  d.total = rounds.size();
  for (const auto& r : rounds) (r.winner == 1 ? d.label1 : d.label0).count++;
  if (d.total > 0) {
    d.label0.fraction = static_cast<double>(d.label0.count) / static_cast<double>(d.total);
    d.label1.fraction = static_cast<double>(d.label1.count) / static_cast<double>(d.total);
  }
  return d;
}

void write_rounds_jsonl(std::ostream& out, std::span<const Round> rounds) {
  for (const auto& r : rounds) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& step : r.features) features.push_back({step.p1, step.p2});
    nlohmann::json j = {{"sheet_id", r.sheet_id},
                        {"round_index", r.round_index},
                        {"winner", r.winner},
                        {"features", std::move(features)}};
    out << j.dump() << '\n';
  }
}

std::vector<Round> read_rounds_jsonl(std::istream& in, const std::string& origin) {
  std::vector<Round> rounds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Round r;
      r.sheet_id = j.at("sheet_id").get<std::string>();
      r.round_index = j.at("round_index").get<int>();
      r.winner = j.value("winner", 0);
      for (const auto& step : j.at("features")) {
        if (step.size() != 2) throw ParseError("feature step must have two values");
        r.features.push_back({step[0].get<double>(), step[1].get<double>()});
      }
      if (r.features.empty()) throw ParseError("round has no timesteps");
      for (const auto& step : r.features) {
        if (!std::isfinite(step.p1) || !std::isfinite(step.p2) || step.p1 < 0.0 || step.p2 < 0.0) {
          throw ParseError("feature values must be finite and non-negative");
        }
      }
      rounds.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(location(origin, line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(location(origin, line_no) + ": " + e.what());
    }
  }
  return rounds;
}

std::vector<Round> synth_generate(const SynthOptions& o) {
  if (!(o.noise_level >= 0.0 && o.noise_level <= 1.0)) {
    throw ParameterError("noise_level must be in [0, 1], got " + std::to_string(o.noise_level));
  }
  if (o.n_rounds < kSynthSheets) {
    throw DataError("synthetic dataset needs at least " + std::to_string(kSynthSheets) + " rounds, got " +
                    std::to_string(o.n_rounds));
  }
  if (o.min_steps < 2 || o.max_steps < o.min_steps) {
    throw ParameterError("synthetic round length range is invalid");
  }

  std::vector<Round> rounds;
  rounds.reserve(o.n_rounds);
  std::vector<int> per_sheet(kSynthSheets, 0);
  for (std::size_t r = 0; r < o.n_rounds; ++r) {
    SeededRng rng(derive_seed(o.seed, r));
    const std::size_t sheet = r % kSynthSheets;
    const auto nominal = static_cast<std::size_t>(o.min_steps + rng.below(o.max_steps - o.min_steps + 1));

    // Per-step hit probabilities. A fair coin picks the favourite, who gets
    // the larger share of the round's hits.
    const bool p1_favoured = rng.bernoulli(0.5);
    const double share = rng.uniform(0.62, 0.85);
    const double activity = rng.uniform(0.30, 0.45);
    const double q1 = activity * (p1_favoured ? share : 1.0 - share);
    const double q2 = activity * (p1_favoured ? 1.0 - share : share);
    // During the misleading opening a second, independent coin decides who
    // dominates, so early exchanges say nothing about the eventual winner.
    const auto opening = static_cast<std::size_t>(std::llround(o.noise_level * 0.5 * static_cast<double>(nominal)));
    const bool p1_opens = rng.bernoulli(0.5);
    const double open1 = activity * (p1_opens ? share : 1.0 - share);
    const double open2 = activity * (p1_opens ? 1.0 - share : share);

    Round round;
    round.sheet_id = "Sheet_" + std::to_string(sheet + 1);
    round.round_index = per_sheet[sheet]++;
    double d1 = 0.0, d2 = 0.0;  // health lost by player 1 / player 2
    for (std::size_t t = 0;; ++t) {
      const bool early = t < opening;
      const double p_hit1 = early ? open1 : q1;  // player 1 lands a hit on player 2
      const double p_hit2 = early ? open2 : q2;
      if (t > 0) {
        if (rng.bernoulli(p_hit1)) d2 = std::min(100.0, d2 + rng.uniform(4.0, 12.0));
        if (d2 < 100.0 && rng.bernoulli(p_hit2)) d1 = std::min(100.0, d1 + rng.uniform(4.0, 12.0));
      }
      round.features.push_back({d1, d2});
      if (d1 >= 100.0 || d2 >= 100.0) break;
      // Timeout; a level score continues into sudden death.
      if (t + 1 >= nominal && d1 != d2) break;
    }
    round.winner = d2 > d1 ? 1 : 0;
    rounds.push_back(std::move(round));
  }
  return rounds;
}

}  // namespace fgwin
