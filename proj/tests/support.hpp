#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fgwin/data.hpp"
#include "fgwin/nn/gradient_check.hpp"
#include "fgwin/optim.hpp"
#include "fgwin/rng.hpp"

namespace fgwin::testing {

// Rounds of random length in [min_len, max_len] with damage in [0, 100].
inline std::vector<Round> random_rounds(SeededRng& rng, std::size_t n, std::size_t min_len, std::size_t max_len,
                                        const std::string& sheet = "Sheet_1") {
  std::vector<Round> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].sheet_id = sheet;
    out[i].round_index = static_cast<int>(i);
    out[i].winner = static_cast<int>(i % 2);
    const std::size_t len = min_len + static_cast<std::size_t>(rng.below(max_len - min_len + 1));
    for (std::size_t t = 0; t < len; ++t) out[i].features.push_back({rng.uniform(0, 100), rng.uniform(0, 100)});
  }
  return out;
}

inline nn::LogitLoss bce_loss(const Tensor& labels) {
  return [labels](const Tensor& z) {
    auto r = optim::bce_with_logits(z, labels);
    return std::make_pair(r.loss, r.grad);
  };
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fgwin_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fgwin::testing
