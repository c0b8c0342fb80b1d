#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "scenerecon/fit.hpp"
#include "scenerecon/losses.hpp"
#include "scenerecon/metrics.hpp"

namespace scenerecon {

struct BinConfig {
  BinSpec yaw = BinSpec::uniform(-std::numbers::pi, std::numbers::pi, 8, true);
  BinSpec layout_yaw = BinSpec::uniform(-std::numbers::pi, std::numbers::pi, 8, true);
  BinSpec pitch = BinSpec::uniform(-std::numbers::pi / 2, std::numbers::pi / 2, 8);
  BinSpec roll = BinSpec::uniform(-std::numbers::pi / 2, std::numbers::pi / 2, 8);
  BinSpec distance = BinSpec::uniform(0.0, 12.0, 8);
};

struct MetricConfig {
  double iou_threshold{kDefaultIouThreshold};
  std::string ap_interpolation{"all_point"};
  std::string scale_error{"mean_abs_ratio_minus_one"};
  PoseThresholds pose{};
  int surface_samples{kDefaultSurfaceSamples};
  IcpOptions icp{};
};

// Every tunable of the tool. Defaults carry the published constants.
struct ToolConfig {
  LossWeights weights{};
  BinConfig bins{};
  FitConfig fit{};
  MetricConfig metrics{};
  std::uint64_t seed{0};

  // Fit settings with the shared weights and seed applied.
  FitConfig fit_config() const;
  void validate() const;

  nlohmann::json to_json() const;
  // Applies the fields present in `doc` on top of `base`. Unknown fields are
  // rejected with their JSON path.
  static ToolConfig from_json(const nlohmann::json& doc, const ToolConfig& base);
  static ToolConfig from_json(const nlohmann::json& doc);
  static ToolConfig load(const std::filesystem::path& path, const ToolConfig& base);
  static ToolConfig load(const std::filesystem::path& path);
};

}  // namespace scenerecon
