#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sclera/data_pipeline.hpp"
#include "sclera/train_config.hpp"

namespace sclera::cli {

/// Environment variable naming the default dataset root.
inline constexpr const char* kDataRootEnv = "SCLERA_DATA_ROOT";

/// Everything a training run needs: dataset location and layout, the labeled
/// budget and the full trainer configuration. Serialized as one flat JSON
/// object with dotted keys (data.*, train.*, net.*, loss.*, aug.*, xform.*).
struct RunConfig {
  std::filesystem::path data_root;
  data::DatasetLayout layout;
  /// Number of labeled training images kept; -1 keeps all.
  int x_l = -1;
  ssl::TrainConfig train;

  /// Throws ConfigError listing every problem.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);

/// Applies a flat JSON object on top of `config`; returns one message per
/// rejected key (unknown key, wrong type, unknown namespace).
std::vector<std::string> apply_json(RunConfig& config, const nlohmann::json& flat);

/// Parses `key=value`; the value is read as JSON when possible, else as a string.
std::vector<std::string> apply_override(RunConfig& config, const std::string& assignment);

/// Reads a JSON config file; throws ConfigError on parse failure or bad keys.
void load_run_config(RunConfig& config, const std::filesystem::path& path);

/// The data root from the environment, or "data" when unset.
std::filesystem::path default_data_root();

}  // namespace sclera::cli
