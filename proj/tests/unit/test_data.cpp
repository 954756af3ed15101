#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "fgwin/data.hpp"
#include "fgwin/error.hpp"
#include "support.hpp"

using namespace fgwin;

namespace {

const char* kHeader = "Winner,Round_Progression,Player1_Damaged%,Player2_Damaged%\n";

std::vector<SheetFrames> parse(const std::string& text, const std::string& sheet = "S") {
  std::istringstream in(text);
  return parse_frames_csv(in, "test.csv", sheet);
}

SheetFrames sheet_with_progressions(std::initializer_list<double> prog, int winner = 1) {
  SheetFrames s{"Sheet_1", {}};
  for (double p : prog) s.frames.push_back({winner, p, 0.0, 0.0});
  return s;
}

Round round_of_length(std::size_t n) {
  Round r;
  r.sheet_id = "s";
  for (std::size_t t = 0; t < n; ++t) r.features.push_back({static_cast<double>(t), 2.0 * static_cast<double>(t)});
  return r;
}

std::vector<std::string> sheet_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back("Sheet_" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("parse_frames_csv") {
  SUBCASE("rows in order") {
    const auto sheets = parse(std::string(kHeader) + "1,0,0,0\n1,50.5,10,20.25\n");
    REQUIRE(sheets.size() == 1);
    REQUIRE(sheets[0].frames.size() == 2);
    CHECK(sheets[0].frames[1] == FrameRecord{1, 50.5, 10, 20.25});
  }
  SUBCASE("empty file with header") {
    const auto sheets = parse(kHeader);
    REQUIRE(sheets.size() == 1);
    CHECK(sheets[0].frames.empty());
  }
  SUBCASE("columns found by name") {
    const auto sheets = parse("Player2_Damaged%,Winner,Player1_Damaged%,Round_Progression\n7,0,3,40\n");
    CHECK(sheets[0].frames[0] == FrameRecord{0, 40, 3, 7});
  }
  SUBCASE("missing Winner column") {
    CHECK_THROWS_AS(parse("Round_Progression,Player1_Damaged%,Player2_Damaged%\n0,0,0\n"), SchemaError);
    CHECK_THROWS_AS(parse(""), SchemaError);
  }
  SUBCASE("bad cells report file and line") {
    try {
      parse(std::string(kHeader) + "1,0,0,0\n1,abc,0,0\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("test.csv:3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse(std::string(kHeader) + "2,0,0,0\n"), ParseError);
    CHECK_THROWS_AS(parse(std::string(kHeader) + "1,0,101,0\n"), ParseError);
    CHECK_THROWS_AS(parse(std::string(kHeader) + "1,0,0\n"), ParseError);
    CHECK_THROWS_AS(parse(std::string(kHeader) + "1,0,nan,0\n"), ParseError);
  }
  SUBCASE("sheet column groups rows") {
    const auto sheets = parse("Sheet,Winner,Round_Progression,Player1_Damaged%,Player2_Damaged%\n"
                              "B,1,0,0,0\nA,0,0,0,0\nB,1,10,0,0\n");
    REQUIRE(sheets.size() == 2);
    CHECK(sheets[0].sheet_id == "B");
    CHECK(sheets[0].frames.size() == 2);
    CHECK(sheets[1].sheet_id == "A");
  }
}

TEST_CASE("parse_frames reads a directory in natural order") {
  const auto dir = testing::scratch_dir("frames");
  for (int i : {10, 2, 1}) {
    std::ofstream f(dir / ("Sheet_" + std::to_string(i) + ".csv"));
    f << kHeader << "1,0," << i << ",0\n";
  }
  std::ofstream(dir / "notes.txt") << "ignored";
  const auto sheets = parse_frames(dir);
  REQUIRE(sheets.size() == 3);
  CHECK(sheets[0].sheet_id == "Sheet_1");
  CHECK(sheets[1].sheet_id == "Sheet_2");
  CHECK(sheets[2].sheet_id == "Sheet_10");
  CHECK(sheets[2].frames[0].p1_damaged_pct == 10);
  CHECK(parse_frames(dir / "Sheet_2.csv").size() == 1);
  CHECK_THROWS_AS(parse_frames(dir / "missing"), IoError);
}

TEST_CASE("natural_less") {
  CHECK(natural_less("Sheet_2", "Sheet_10"));
  CHECK_FALSE(natural_less("Sheet_10", "Sheet_2"));
  CHECK(natural_less("a", "b"));
  CHECK_FALSE(natural_less("x1", "x1"));
}

TEST_CASE("split_rounds") {
  SUBCASE("textbook reset") {
    const auto rounds = split_rounds(sheet_with_progressions({0, 50, 100, 0, 60, 100}));
    REQUIRE(rounds.size() == 2);
    CHECK(rounds[0].length() == 3);
    CHECK(rounds[1].length() == 3);
    CHECK(rounds[1].round_index == 1);
  }
  SUBCASE("no terminal 100") {
    const auto rounds = split_rounds(sheet_with_progressions({0, 40, 90}));
    REQUIRE(rounds.size() == 1);
    CHECK(rounds[0].length() == 3);
  }
  SUBCASE("imperfect reset") {
    CHECK(split_rounds(sheet_with_progressions({0, 70, 99, 3, 50})).size() == 2);
  }
  SUBCASE("winner changing mid-round") {
    auto s = sheet_with_progressions({0, 50, 100});
    s.frames[1].winner = 0;
    CHECK_THROWS_AS(split_rounds(s), IntegrityError);
  }
  SUBCASE("boundaries agree with a linear scan for descents") {
    SeededRng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
      SheetFrames s{"x", {}};
      std::size_t descents = 0;
      double prev = 0;
      for (int i = 0; i < 40; ++i) {
        const double p = std::floor(rng.uniform(0, 100));
        if (i > 0 && p < prev) ++descents;
        s.frames.push_back({1, p, 0, 0});
        prev = p;
      }
      CHECK(split_rounds(s).size() == descents + 1);
    }
  }
}

TEST_CASE("rounds to frames and back") {
  SynthOptions o;
  o.n_rounds = 100;
  const auto rounds = synth_generate(o);
  std::vector<SheetFrames> sheets;
  for (const auto& id : sheet_ids_of(rounds)) {
    std::vector<Round> mine;
    for (const auto& r : rounds) {
      if (r.sheet_id == id) mine.push_back(r);
    }
    std::ostringstream csv;
    write_frames_csv(csv, rounds_to_frames(mine));
    std::istringstream in(csv.str());
    auto parsed = parse_frames_csv(in, id, id);
    const auto back = split_rounds(parsed[0]);
    REQUIRE(back.size() == mine.size());
    for (std::size_t i = 0; i < mine.size(); ++i) {
      CHECK(back[i].features == mine[i].features);
      CHECK(back[i].winner == mine[i].winner);
    }
  }
}

TEST_CASE("truncate_round") {
  CHECK(truncate_round(round_of_length(100), 0.75).length() == 75);
  CHECK(truncate_round(round_of_length(100), 0.95).length() == 95);
  CHECK(truncate_round(round_of_length(1), 0.25).length() == 1);
  CHECK(truncate_round(round_of_length(10), 0.25).length() == 3);
  CHECK_THROWS_AS(truncate_round(round_of_length(5), 0.0), ParameterError);
  CHECK_THROWS_AS(truncate_round(round_of_length(5), 1.5), ParameterError);

  SeededRng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    Round r = round_of_length(1 + rng.below(300));
    r.winner = 1;
    CHECK(truncate_round(r, 1.0) == r);
    const double p1 = rng.uniform(0.01, 1.0), p2 = rng.uniform(p1, 1.0);
    const Round a = truncate_round(r, p1), b = truncate_round(r, p2);
    CHECK(a.length() <= b.length());
    CHECK(a.length() >= 1);
    CHECK(std::equal(a.features.begin(), a.features.end(), b.features.begin()));
    CHECK(a.winner == 1);
  }
}

TEST_CASE("pad_batch") {
  SUBCASE("two lengths, transformer pad") {
    const std::vector<Round> rs{round_of_length(3), round_of_length(5)};
    const auto b = pad_batch(std::span<const Round>(rs), kTransformerPad);
    CHECK(b.max_length() == 5);
    const bool want[2][5] = {{true, true, true, false, false}, {true, true, true, true, true}};
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t t = 0; t < 5; ++t) CHECK(b.mask.at(i, t) == want[i][t]);
    }
    CHECK(b.features.at(0, 3, 0) == -1.0);
    CHECK(b.features.at(0, 4, 1) == -1.0);
    CHECK(b.features.at(1, 4, 1) == 8.0);
  }
  SUBCASE("single round needs no padding") {
    const std::vector<Round> rs{round_of_length(4)};
    const auto b = pad_batch(std::span<const Round>(rs), kLstmPad);
    CHECK(b.mask.count() == 4);
    CHECK(b.features.at(0, 3, 1) == 6.0);
  }
  SUBCASE("lstm pad keeps lengths") {
    const std::vector<Round> rs{round_of_length(2), round_of_length(6)};
    const auto b = pad_batch(std::span<const Round>(rs), kLstmPad);
    CHECK(b.lengths == std::vector<std::size_t>{2, 6});
    CHECK(b.features.at(0, 5, 0) == 0.0);
  }
  SUBCASE("empty list") { CHECK_THROWS_AS(pad_batch(std::span<const Round>(), 0.0), DataError); }
  SUBCASE("mask and padding invariants on random batches") {
    SeededRng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const auto rs = testing::random_rounds(rng, 1 + rng.below(8), 1, 30);
      const double pad = rng.bernoulli(0.5) ? kTransformerPad : kLstmPad;
      const auto b = pad_batch(std::span<const Round>(rs), pad);
      for (std::size_t i = 0; i < rs.size(); ++i) {
        std::size_t valid = 0;
        for (std::size_t t = 0; t < b.max_length(); ++t) {
          valid += b.mask.at(i, t) ? 1 : 0;
          CHECK(b.mask.at(i, t) == (t < b.lengths[i]));
          if (!b.mask.at(i, t)) {
            CHECK(b.features.at(i, t, 0) == pad);
            CHECK(b.features.at(i, t, 1) == pad);
          }
        }
        CHECK(valid == b.lengths[i]);
        CHECK(b.labels[i] == rs[i].winner);
      }
    }
  }
}

TEST_CASE("make_folds") {
  const auto ids = sheet_names(10);
  SUBCASE("default partition of ten sheets") {
    const auto folds = make_folds(ids, {});
    REQUIRE(folds.size() == 5);
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(folds[j].test_sheet_ids == std::vector<std::string>{ids[2 * j], ids[2 * j + 1]});
      CHECK(folds[j].train_sheet_ids.size() == 8);
    }
  }
  SUBCASE("sliding four-sheet windows starting at the second sheet") {
    FoldScheme s;
    s.block_size = 4;
    s.stride = 1;
    s.offset = 1;
    const auto folds = make_folds(ids, s);
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(folds[j].test_sheet_ids.front() == "Sheet_" + std::to_string(j + 2));
      CHECK(folds[j].test_sheet_ids.back() == "Sheet_" + std::to_string(j + 5));
    }
  }
  SUBCASE("windows past the end") {
    FoldScheme s;
    s.block_size = 4;
    s.stride = 2;
    CHECK_THROWS_AS(make_folds(ids, s), ParameterError);
    s.block_size = 10;
    s.stride = 1;
    CHECK_THROWS_AS(make_folds(ids, s), ParameterError);
  }
  SUBCASE("too few sheets") { CHECK_THROWS_AS(make_folds(sheet_names(3), {}), DataError); }
  SUBCASE("partition property for every sheet count") {
    for (std::size_t n = 5; n <= 20; ++n) {
      const auto names = sheet_names(n);
      const auto folds = make_folds(names, {});
      std::multiset<std::string> tested;
      for (const auto& f : folds) {
        tested.insert(f.test_sheet_ids.begin(), f.test_sheet_ids.end());
        CHECK(f.test_sheet_ids.size() + f.train_sheet_ids.size() == n);
      }
      CHECK(tested == std::multiset<std::string>(names.begin(), names.end()));
    }
  }
}

TEST_CASE("class_distribution") {
  std::vector<Round> rs(4);
  for (std::size_t i = 0; i < 4; ++i) rs[i].winner = i < 2 ? 0 : 1;
  const auto d = class_distribution(rs);
  CHECK(d.total == 4);
  CHECK(d.label0.count == 2);
  CHECK(*d.label1.fraction == 0.5);
  const auto e = class_distribution(std::span<const Round>());
  CHECK(e.total == 0);
  CHECK_FALSE(e.label0.fraction.has_value());
  CHECK_FALSE(e.label1.fraction.has_value());
}

TEST_CASE("rounds JSON lines") {
  SeededRng rng(4);
  auto rs = testing::random_rounds(rng, 5, 1, 10);
  std::ostringstream out;
  write_rounds_jsonl(out, rs);
  std::istringstream in(out.str());
  CHECK(read_rounds_jsonl(in) == rs);
  std::istringstream empty("");
  CHECK(read_rounds_jsonl(empty).empty());
  std::istringstream bad("{\"sheet_id\":\"a\",\"round_index\":0,\"winner\":1,\"features\":[[1]]}\n");
  CHECK_THROWS_AS(read_rounds_jsonl(bad), ParseError);
  std::istringstream neg("{\"sheet_id\":\"a\",\"round_index\":0,\"winner\":1,\"features\":[[-1,0]]}\n");
  CHECK_THROWS_AS(read_rounds_jsonl(neg), ParseError);
}

TEST_CASE("synth_generate") {
  SynthOptions o;
  o.n_rounds = 1000;
  o.seed = 1;
  const auto rounds = synth_generate(o);
  REQUIRE(rounds.size() == 1000);

  SUBCASE("same seed, same data") { CHECK(synth_generate(o) == rounds); }
  SUBCASE("ten sheets") { CHECK(sheet_ids_of(rounds).size() == kSynthSheets); }
  SUBCASE("labels balanced") {
    const double f = *class_distribution(rounds).label1.fraction;
    CHECK(f > 0.45);
    CHECK(f < 0.55);
  }
  SUBCASE("curves are monotone, bounded and never hit the pad sentinel") {
    for (const auto& r : rounds) {
      REQUIRE(r.length() >= 1);
      for (std::size_t t = 0; t < r.length(); ++t) {
        const auto& s = r.features[t];
        CHECK(s.p1 >= 0.0);
        CHECK(s.p2 <= 100.0);
        CHECK(s.p1 != kTransformerPad);
        if (t > 0) {
          CHECK(s.p1 >= r.features[t - 1].p1);
          CHECK(s.p2 >= r.features[t - 1].p2);
        }
      }
    }
  }
  SUBCASE("noise-free labels follow the final damage") {
    for (const auto& r : rounds) {
      const auto& last = r.features.back();
      // winner = 1 means player 1 won: player 2 took more damage.
      CHECK(last.p1 != last.p2);
      CHECK(r.winner == (last.p2 > last.p1 ? 1 : 0));
      const bool ko = last.p1 >= 100.0 || last.p2 >= 100.0;
      if (ko) CHECK(r.winner == (last.p2 >= 100.0 ? 1 : 0));
    }
  }
  SUBCASE("noisy labels also follow the final damage") {
    o.noise_level = 0.5;
    for (const auto& r : synth_generate(o)) CHECK(r.winner == (r.features.back().p2 > r.features.back().p1 ? 1 : 0));
  }
  SUBCASE("invalid options") {
    o.noise_level = 1.5;
    CHECK_THROWS_AS(synth_generate(o), ParameterError);
    o.noise_level = 0.0;
    o.n_rounds = 5;
    CHECK_THROWS_AS(synth_generate(o), DataError);
  }
}
