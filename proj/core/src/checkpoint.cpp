#include <fstream>

#include <torch/serialize.h>
#include <torch/torch.h>

#include "sclera/error.hpp"
#include "sclera/trainer.hpp"

#ifndef SCLERA_VERSION
#define SCLERA_VERSION "0.0.0"
#endif
#ifndef SCLERA_GIT_REV
#define SCLERA_GIT_REV "unknown"
#endif

namespace sclera::ssl {

std::string version_string() { return std::string(SCLERA_VERSION) + " (" + SCLERA_GIT_REV + ")"; }

namespace {

std::string read_string(torch::serialize::InputArchive& archive, const std::string& key) {
  c10::IValue v;
  if (!archive.try_read(key, v) || !v.isString()) throw LoadError("checkpoint is missing '" + key + "'");
  return v.toStringRef();
}

TrainConfig config_from_string(const std::string& text) {
  TrainConfig config;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  const auto errors = apply_json(config, j);
  if (!errors.empty()) throw LoadError("checkpoint config rejected: " + errors.front());
  return config;
}

}  // namespace

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  torch::serialize::OutputArchive archive;
  torch::serialize::OutputArchive model_archive, optim_archive;
  model_->save(model_archive);
  optimizer_->save(optim_archive);
  archive.write("model", model_archive);
  archive.write("optimizer", optim_archive);
  if (best_model_) {
    torch::serialize::OutputArchive best_archive;
    best_model_->save(best_archive);
    archive.write("best_model", best_archive);
  }
  archive.write("config", c10::IValue(to_json(config_).dump()));
  archive.write("next_epoch", c10::IValue(static_cast<int64_t>(next_epoch_)));
  archive.write("best_val_miou", c10::IValue(best_val_miou_));
  archive.write("history", c10::IValue(to_json(history_).dump()));
  archive.write("rng.labeled_aug", c10::IValue(serialize_rng(labeled_aug_rng_)));
  archive.write("rng.unlabeled_aug", c10::IValue(serialize_rng(unlabeled_aug_rng_)));
  archive.write("rng.labeled_order", c10::IValue(serialize_rng(labeled_order_rng_)));
  archive.write("rng.unlabeled_order", c10::IValue(serialize_rng(unlabeled_order_rng_)));
  archive.write("version", c10::IValue(version_string()));
  archive.save_to(path.string());

  nlohmann::json meta;
  meta["version"] = version_string();
  meta["format"] = "torch serialized archive (model, optimizer, config, next_epoch, history, rng.*)";
  meta["next_epoch"] = next_epoch_;
  meta["best_val_miou"] = best_val_miou_;
  meta["config"] = to_json(config_);
  std::ofstream os(path.string() + ".json");
  os << meta.dump(2) << "\n";
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw LoadError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw LoadError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  const TrainConfig saved = config_from_string(read_string(archive, "config"));
  const auto a = to_json(saved), b = to_json(config_);
  for (const auto& [key, value] : a.items())
    if (key.rfind("net.", 0) == 0 && (!b.contains(key) || b[key] != value))
      throw ConfigError("checkpoint " + key + " differs from the trainer's configuration");

  torch::serialize::InputArchive model_archive, optim_archive;
  archive.read("model", model_archive);
  archive.read("optimizer", optim_archive);
  model_->load(model_archive);
  optimizer_->load(optim_archive);
  torch::serialize::InputArchive best_archive;
  if (archive.try_read("best_model", best_archive)) {
    best_model_ = net::build_model(config_.network);
    best_model_->load(best_archive);
  } else {
    best_model_ = nullptr;
  }

  c10::IValue v;
  archive.read("next_epoch", v);
  next_epoch_ = static_cast<int>(v.toInt());
  archive.read("best_val_miou", v);
  best_val_miou_ = v.toDouble();
  history_ = history_from_json(nlohmann::json::parse(read_string(archive, "history")));
  labeled_aug_rng_ = deserialize_rng(read_string(archive, "rng.labeled_aug"));
  unlabeled_aug_rng_ = deserialize_rng(read_string(archive, "rng.unlabeled_aug"));
  labeled_order_rng_ = deserialize_rng(read_string(archive, "rng.labeled_order"));
  unlabeled_order_rng_ = deserialize_rng(read_string(archive, "rng.unlabeled_order"));
  if (snapshot_) copy_weights(snapshot_, model_);
}

net::U2NetPlus load_model(const std::filesystem::path& checkpoint, TrainConfig* config_out) {
  if (!std::filesystem::exists(checkpoint)) throw LoadError("checkpoint not found: " + checkpoint.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(checkpoint.string());
  } catch (const c10::Error& e) {
    throw LoadError("cannot read checkpoint " + checkpoint.string() + ": " + e.what_without_backtrace());
  }
  const TrainConfig config = config_from_string(read_string(archive, "config"));
  auto model = net::build_model(config.network);
  torch::serialize::InputArchive model_archive;
  archive.read("model", model_archive);
  model->load(model_archive);
  model->eval();
  if (config_out) *config_out = config;
  return model;
}

}  // namespace sclera::ssl
