#include "fgwin/nn/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "fgwin/error.hpp"

namespace fgwin::nn {

std::string double_to_hex(double v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

double hex_to_double(const std::string& hex) {
  std::uint64_t bits = 0;
  const auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), bits, 16);
  if (hex.size() != 16 || ec != std::errc() || ptr != hex.data() + hex.size()) {
    throw FormatError("checkpoint value '" + hex + "' is not a 16-digit hex bit pattern");
  }
  return std::bit_cast<double>(bits);
}

nlohmann::json checkpoint_to_json(const SequenceClassifier& model, const nlohmann::json& metadata) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.params()) {
    nlohmann::json values = nlohmann::json::array();
    for (double v : p.value.values()) values.push_back(double_to_hex(v));
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"values", std::move(values)}});
  }
  return {{"format_version", kCheckpointFormatVersion},
          {"architecture", to_string(model.architecture())},
          {"config",
           {{"model", model.config_json()},
            {"metadata", metadata.is_null() ? nlohmann::json::object() : metadata}}},
          {"parameters", std::move(params)}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  const std::string where = "checkpoint (reader supports format_version " + std::to_string(kCheckpointFormatVersion) + ")";
  if (!doc.is_object() || !doc.contains("format_version")) {
    throw FormatError(where + ": missing format_version");
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw FormatError(where + ": unsupported format_version " + std::to_string(version));
    }
    Architecture arch;
    try {
      arch = parse_architecture(doc.at("architecture").get<std::string>());
    } catch (const UsageError& e) {
      throw FormatError(where + ": " + e.what());
    }
    const auto& config = doc.at("config");
    Checkpoint ck;
    ck.model = make_classifier(arch, config.at("model"), 0);
    ck.metadata = config.value("metadata", nlohmann::json::object());

    const auto& params = doc.at("parameters");
    if (params.size() != ck.model->params().size()) {
      throw FormatError(where + ": expected " + std::to_string(ck.model->params().size()) + " parameters, found " +
                        std::to_string(params.size()));
    }
    for (const auto& entry : params) {
      const auto name = entry.at("name").get<std::string>();
      Parameter* p = ck.model->params().find(name);
      if (p == nullptr) throw FormatError(where + ": unknown parameter " + name);
      const auto shape = entry.at("shape").get<Shape>();
      if (shape != p->value.shape()) {
        throw FormatError(where + ": parameter " + name + " has shape " + shape_string(shape) + ", model expects " +
                          shape_string(p->value.shape()));
      }
      const auto& values = entry.at("values");
      if (values.size() != p->value.size()) throw FormatError(where + ": parameter " + name + " has wrong value count");
      for (std::size_t i = 0; i < values.size(); ++i) p->value[i] = hex_to_double(values[i].get<std::string>());
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": " + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(where + ": " + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(where + ": " + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const SequenceClassifier& model,
                     const nlohmann::json& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(model, metadata).dump(1) << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path.string() + " (reader supports format_version " +
                      std::to_string(kCheckpointFormatVersion) + ") is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace fgwin::nn
