#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "fgwin/nn/classifier.hpp"

namespace fgwin::nn {

inline constexpr int kCheckpointFormatVersion = 1;

/// A model plus whatever the producer recorded next to it (progression,
/// fold, seed...).
struct Checkpoint {
  std::unique_ptr<SequenceClassifier> model;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Hex bit pattern of a double, e.g. 1.0 -> "3ff0000000000000".
std::string double_to_hex(double v);
double hex_to_double(const std::string& hex);

/// {format_version, architecture, config: {model, metadata}, parameters:
/// [{name, shape, values}]} with every value stored as its bit pattern so a
/// load reproduces the parameters exactly.
nlohmann::json checkpoint_to_json(const SequenceClassifier& model, const nlohmann::json& metadata = {});
/// Throws FormatError (mentioning the format version) on malformed input.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const SequenceClassifier& model,
                     const nlohmann::json& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fgwin::nn
