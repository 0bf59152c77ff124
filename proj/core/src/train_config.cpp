#include "sclera/train_config.hpp"

#include <functional>
#include <map>
#include <type_traits>

#include "sclera/error.hpp"

namespace sclera::ssl {

namespace {

using Setter = std::function<void(TrainConfig&, const nlohmann::json&)>;
using Getter = std::function<nlohmann::json(const TrainConfig&)>;

struct Field {
  Getter get;
  Setter set;
};

template <typename T, typename Access>
Field field(Access access) {
  return {[access](const TrainConfig& c) { return nlohmann::json(access(const_cast<TrainConfig&>(c))); },
          [access](TrainConfig& c, const nlohmann::json& v) {
            if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
              if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
              if (!v.is_number_integer()) throw ConfigError("expected an integer");
            }
            access(c) = v.get<T>();
          }};
}

const std::map<std::string, Field>& schema() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    f["train.epochs"] = field<int>([](TrainConfig& c) -> int& { return c.epochs; });
    f["train.labeled_per_batch"] = field<int>([](TrainConfig& c) -> int& { return c.labeled_per_batch; });
    f["train.unlabeled_per_batch"] = field<int>([](TrainConfig& c) -> int& { return c.unlabeled_per_batch; });
    f["train.learning_rate"] = field<double>([](TrainConfig& c) -> double& { return c.learning_rate; });
    f["train.k"] = field<int>([](TrainConfig& c) -> int& { return c.k; });
    f["train.seed"] = field<std::uint64_t>([](TrainConfig& c) -> std::uint64_t& { return c.seed; });
    f["train.p1"] = field<double>([](TrainConfig& c) -> double& { return c.p1; });
    f["train.p2"] = field<double>([](TrainConfig& c) -> double& { return c.p2; });
    f["train.threads"] = field<int>([](TrainConfig& c) -> int& { return c.threads; });
    f["train.use_unlabeled"] = field<bool>([](TrainConfig& c) -> bool& { return c.use_unlabeled; });
    f["train.eval_batch"] = field<int>([](TrainConfig& c) -> int& { return c.eval_batch; });
    f["train.ssld_target"] = {
        [](const TrainConfig& c) { return nlohmann::json(c.ssld_target == SsldTarget::Live ? "live" : "snapshot"); },
        [](TrainConfig& c, const nlohmann::json& v) {
          const auto s = v.get<std::string>();
          if (s == "live")
            c.ssld_target = SsldTarget::Live;
          else if (s == "snapshot")
            c.ssld_target = SsldTarget::Snapshot;
          else
            throw ConfigError("expected \"live\" or \"snapshot\"");
        }};

    f["net.in_channels"] = field<int>([](TrainConfig& c) -> int& { return c.network.in_channels; });
    f["net.num_classes"] = field<int>([](TrainConfig& c) -> int& { return c.network.num_classes; });
    f["net.base_channels"] = field<int>([](TrainConfig& c) -> int& { return c.network.base_channels; });
    f["net.height"] = field<int>([](TrainConfig& c) -> int& { return c.network.height; });
    f["net.width"] = field<int>([](TrainConfig& c) -> int& { return c.network.width; });
    f["net.norm"] = {
        [](const TrainConfig& c) { return nlohmann::json(c.network.norm == net::Norm::Batch ? "batch" : "group"); },
        [](TrainConfig& c, const nlohmann::json& v) {
          const auto s = v.get<std::string>();
          if (s == "batch")
            c.network.norm = net::Norm::Batch;
          else if (s == "group")
            c.network.norm = net::Norm::Group;
          else
            throw ConfigError("expected \"batch\" or \"group\"");
        }};
    f["net.encoder_stages"] = field<int>([](TrainConfig& c) -> int& { return c.network.encoder_stages; });

    f["loss.lambda1"] = field<double>([](TrainConfig& c) -> double& { return c.loss.lambda1; });
    f["loss.lambda2"] = field<double>([](TrainConfig& c) -> double& { return c.loss.lambda2; });
    f["loss.lambda_u_slope"] = field<double>([](TrainConfig& c) -> double& { return c.loss.lambda_u_slope; });
    f["loss.lambda_ss_slope"] = field<double>([](TrainConfig& c) -> double& { return c.loss.lambda_ss_slope; });
    f["loss.alpha_epochs"] = field<int>([](TrainConfig& c) -> int& { return c.loss.alpha_epochs; });
    f["loss.boundary_sigma"] = field<double>([](TrainConfig& c) -> double& { return c.loss.boundary_sigma; });
    f["loss.dice_eps"] = field<double>([](TrainConfig& c) -> double& { return c.loss.dice_eps; });
    f["loss.deep_supervision"] = field<bool>([](TrainConfig& c) -> bool& { return c.loss.deep_supervision; });
    f["loss.stage2_start_epoch"] = field<int>([](TrainConfig& c) -> int& { return c.loss.stage2_start_epoch; });

    f["aug.clahe_clips"] = field<std::vector<double>>([](TrainConfig& c) -> std::vector<double>& { return c.augment.clahe_clips; });
    f["aug.clahe_grids"] = field<std::vector<int>>([](TrainConfig& c) -> std::vector<int>& { return c.augment.clahe_grids; });
    f["aug.gamma_min"] = field<double>([](TrainConfig& c) -> double& { return c.augment.gamma_min; });
    f["aug.gamma_max"] = field<double>([](TrainConfig& c) -> double& { return c.augment.gamma_max; });
    f["aug.gamma_step"] = field<double>([](TrainConfig& c) -> double& { return c.augment.gamma_step; });
    f["aug.contrast_min"] = field<double>([](TrainConfig& c) -> double& { return c.augment.contrast_min; });
    f["aug.contrast_max"] = field<double>([](TrainConfig& c) -> double& { return c.augment.contrast_max; });
    f["aug.brightness_min"] = field<double>([](TrainConfig& c) -> double& { return c.augment.brightness_min; });
    f["aug.brightness_max"] = field<double>([](TrainConfig& c) -> double& { return c.augment.brightness_max; });
    f["aug.p_clahe"] = field<double>([](TrainConfig& c) -> double& { return c.augment.p_clahe; });
    f["aug.p_gamma"] = field<double>([](TrainConfig& c) -> double& { return c.augment.p_gamma; });
    f["aug.p_contrast"] = field<double>([](TrainConfig& c) -> double& { return c.augment.p_contrast; });
    f["aug.gamma_before_clahe"] = field<bool>([](TrainConfig& c) -> bool& { return c.augment.gamma_before_clahe; });

    f["xform.max_rotate_deg"] = field<double>([](TrainConfig& c) -> double& { return c.ranges.max_rotate_deg; });
    f["xform.max_translate_px"] = field<int>([](TrainConfig& c) -> int& { return c.ranges.max_translate_px; });
    return f;
  }();
  return fields;
}

bool owned_namespace(const std::string& key) {
  for (const char* ns : {"train.", "net.", "loss.", "aug.", "xform."})
    if (key.rfind(ns, 0) == 0) return true;
  return false;
}

}  // namespace

std::vector<std::string> TrainConfig::validation_errors() const {
  std::vector<std::string> errors;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  check(epochs >= 1, "train.epochs must be >= 1");
  check(labeled_per_batch >= 1, "train.labeled_per_batch must be >= 1");
  check(unlabeled_per_batch >= 1, "train.unlabeled_per_batch must be >= 1");
  check(learning_rate > 0, "train.learning_rate must be positive");
  check(k >= 1, "train.k must be >= 1");
  check(p1 >= 0 && p1 <= 1, "train.p1 must lie in [0,1]");
  check(p2 >= 0 && p2 <= 1, "train.p2 must lie in [0,1]");
  check(threads >= 1, "train.threads must be >= 1");
  check(eval_batch >= 1, "train.eval_batch must be >= 1");
  check(ranges.max_rotate_deg >= 0, "xform.max_rotate_deg must be >= 0");
  check(ranges.max_translate_px >= 0, "xform.max_translate_px must be >= 0");
  auto nested = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  };
  nested([&] { network.validate(); });
  nested([&] { loss.validate(); });
  nested([&] { augment.validate(); });
  return errors;
}

void TrainConfig::validate() const {
  const auto errors = validation_errors();
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

nlohmann::json to_json(const TrainConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, f] : schema()) j[key] = f.get(config);
  return j;
}

std::vector<std::string> apply_json(TrainConfig& config, const nlohmann::json& flat) {
  std::vector<std::string> errors;
  if (!flat.is_object()) return {"configuration must be a JSON object"};
  const auto& fields = schema();
  for (const auto& [key, value] : flat.items()) {
    if (!owned_namespace(key)) continue;
    auto it = fields.find(key);
    if (it == fields.end()) {
      errors.push_back("unknown key '" + key + "'");
      continue;
    }
    try {
      it->second.set(config, value);
    } catch (const std::exception& e) {
      errors.push_back("bad value for '" + key + "': " + e.what());
    }
  }
  return errors;
}

std::vector<std::string> train_config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, f] : schema()) keys.push_back(key);
  return keys;
}

}  // namespace sclera::ssl
