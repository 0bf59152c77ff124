#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <torch/optim/adam.h>

#include "sclera/data_pipeline.hpp"
#include "sclera/history.hpp"
#include "sclera/label_guessing.hpp"
#include "sclera/network.hpp"
#include "sclera/train_config.hpp"

namespace sclera::ssl {

struct TrainOptions {
  /// Checkpoints, history and the step log go here; empty keeps everything in memory.
  std::filesystem::path run_dir;
  /// Called after each completed epoch.
  std::function<void(const EpochRecord&)> on_epoch;
  /// Stop after this epoch index (exclusive) instead of config.epochs; -1 disables.
  int stop_after = -1;
};

/// Semi-supervised trainer: supervised loss on labeled pairs, SSLD
/// consistency on augmented unlabeled copies and SSL-SS consistency on
/// spatially transformed copies, combined as L_s + lambda_u L_u + lambda_ss L_ss.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const { return config_; }
  net::U2NetPlus& model() { return model_; }
  const TrainHistory& history() const { return history_; }
  TrainHistory& history() { return history_; }
  int next_epoch() const { return next_epoch_; }
  double best_val_miou() const { return best_val_miou_; }

  /// One optimizer step. `unlabeled` may be empty (supervised-only step).
  StepLosses train_step(std::span<const data::ImageSample* const> labeled,
                        std::span<const data::ImageSample* const> unlabeled, const loss::LossWeights& weights);

  /// Runs epochs next_epoch() .. config.epochs - 1. Unlabeled data is ignored
  /// when config.use_unlabeled is false.
  const TrainHistory& train(const data::DatasetSplit& data, const TrainOptions& options = {});

  /// Eval-mode, gradient-free fused probabilities of the live model.
  metrics::Predictor predictor();
  /// Same for the weights that scored the best validation mIoU so far
  /// (the live model before any validation has run).
  metrics::Predictor best_predictor();

  void save_checkpoint(const std::filesystem::path& path) const;
  void load_checkpoint(const std::filesystem::path& path);

 private:
  struct LabelMaps {
    torch::Tensor gt;   // [H,W] int64
    torch::Tensor bal;  // [H,W] float
    torch::Tensor sdm;  // [H,W] float
  };
  const LabelMaps& label_maps(const data::ImageSample& sample);

  struct SupervisedParts {
    loss::SupervisedLoss fused;
    torch::Tensor side;
    torch::Tensor total;
  };
  SupervisedParts supervised_pass(std::span<const data::ImageSample* const> labeled, const loss::LossWeights& w);

  struct UnsupervisedParts {
    torch::Tensor l_u;
    torch::Tensor l_ss;
  };
  UnsupervisedParts unsupervised_pass(std::span<const data::ImageSample* const> unlabeled);

  EpochRecord run_epoch(int epoch, const std::vector<const data::ImageSample*>& labeled,
                        const std::vector<const data::ImageSample*>& unlabeled,
                        const std::vector<data::ImageSample>& validation, std::ostream* step_log);

  TrainConfig config_;
  net::U2NetPlus model_{nullptr};
  net::U2NetPlus snapshot_{nullptr};
  net::U2NetPlus best_model_{nullptr};
  std::unique_ptr<torch::optim::Adam> optimizer_;
  // Separate streams keep the labeled path identical whether or not
  // unlabeled data is in play.
  Rng labeled_aug_rng_;
  Rng unlabeled_aug_rng_;
  Rng labeled_order_rng_;
  Rng unlabeled_order_rng_;
  TrainHistory history_;
  int next_epoch_ = 0;
  double best_val_miou_ = -1.0;
  std::unordered_map<std::string, LabelMaps> label_cache_;
};

/// Rebuilds a model from a checkpoint for inference (eval mode).
net::U2NetPlus load_model(const std::filesystem::path& checkpoint, TrainConfig* config_out = nullptr);

/// Predictor over an eval-mode model.
metrics::Predictor make_predictor(net::U2NetPlus model);

/// Version string and build revision written into checkpoint metadata.
std::string version_string();

}  // namespace sclera::ssl
