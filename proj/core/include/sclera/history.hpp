#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sclera/losses.hpp"

namespace sclera::ssl {

/// Loss components of one step, or their mean over an epoch.
struct StepLosses {
  double ce = 0;       ///< boundary-weighted CE on the fused map
  double dice = 0;
  double surface = 0;
  double side = 0;     ///< mean CE + Dice over side maps (deep supervision)
  double l_s = 0;
  double l_u = 0;
  double l_ss = 0;
  double total = 0;
};

struct EpochRecord {
  int epoch = 0;
  int steps = 0;
  StepLosses losses;
  double val_miou = 0;
  double val_f1 = 0;
  loss::LossWeights weights;
  double seconds = 0;
};

struct TrainHistory {
  /// Free-form labels describing the run (x_l, seed, mode...).
  nlohmann::json meta = nlohmann::json::object();
  std::vector<EpochRecord> epochs;
};

nlohmann::json to_json(const StepLosses& l);
nlohmann::json to_json(const EpochRecord& r);
nlohmann::json to_json(const TrainHistory& h);
TrainHistory history_from_json(const nlohmann::json& j);

void save_history(const TrainHistory& history, const std::filesystem::path& path);
/// Throws LoadError on unreadable or malformed files.
TrainHistory load_history(const std::filesystem::path& path);

}  // namespace sclera::ssl
