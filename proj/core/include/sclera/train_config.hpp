#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sclera/augment.hpp"
#include "sclera/losses.hpp"
#include "sclera/network.hpp"
#include "sclera/spatial_transform.hpp"

namespace sclera::ssl {

/// Which model produces the SSL-SS guessed labels.
enum class SsldTarget {
  Live,      ///< the model being trained
  Snapshot,  ///< a copy refreshed at the start of every epoch
};

struct TrainConfig {
  int epochs = 100;
  int labeled_per_batch = 2;
  int unlabeled_per_batch = 2;
  double learning_rate = 1e-3;
  /// Augmented copies per unlabeled image.
  int k = 2;
  std::uint64_t seed = 0;
  /// Rotation / translation probabilities of the SSL-SS transform.
  double p1 = 0.5;
  double p2 = 0.5;
  SsldTarget ssld_target = SsldTarget::Live;
  /// Intra-op threads; results are reproducible for a fixed value.
  int threads = 1;
  /// false trains on labeled data only, whatever the unlabeled pool holds.
  bool use_unlabeled = true;
  int eval_batch = 8;

  net::U2NetPlusConfig network;
  loss::LossConfig loss;
  aug::AugmentConfig augment;
  xform::TransformRanges ranges;

  /// One message per violated constraint; empty when valid.
  std::vector<std::string> validation_errors() const;
  /// Throws ConfigError listing every violated constraint.
  void validate() const;
};

/// Flat dotted-key form, e.g. {"train.epochs": 100, "net.base_channels": 64}.
nlohmann::json to_json(const TrainConfig& config);

/// Sets the keys present in `flat` and returns one message per unknown key
/// or ill-typed value. Keys outside the train/net/loss/aug/xform namespaces
/// are ignored.
std::vector<std::string> apply_json(TrainConfig& config, const nlohmann::json& flat);

/// Keys understood by apply_json.
std::vector<std::string> train_config_keys();

}  // namespace sclera::ssl
