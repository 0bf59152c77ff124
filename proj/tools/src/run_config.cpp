#include "sclera_cli/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "sclera/error.hpp"

namespace sclera::cli {

namespace {

struct StringKey {
  const char* key;
  std::string data::DatasetLayout::*member;
};

constexpr StringKey kLayoutKeys[] = {
    {"data.train_dir", &data::DatasetLayout::train_dir}, {"data.val_dir", &data::DatasetLayout::val_dir},
    {"data.test_dir", &data::DatasetLayout::test_dir},   {"data.images_dir", &data::DatasetLayout::images_dir},
    {"data.masks_dir", &data::DatasetLayout::masks_dir},
};

std::string join(const std::vector<std::string>& errors) {
  std::string msg = "invalid configuration:";
  for (const auto& e : errors) msg += "\n  - " + e;
  return msg;
}

}  // namespace

void RunConfig::validate() const {
  std::vector<std::string> errors;
  if (x_l < -1 || x_l == 0) errors.push_back("data.x_l must be positive (or -1 for all labels)");
  for (const auto& k : kLayoutKeys)
    if ((layout.*k.member).empty()) errors.push_back(std::string(k.key) + " must not be empty");
  for (auto& e : train.validation_errors()) errors.push_back(std::move(e));
  if (!errors.empty()) throw ConfigError(join(errors));
}

nlohmann::json to_json(const RunConfig& config) {
  auto j = ssl::to_json(config.train);
  j["data.root"] = config.data_root.string();
  j["data.x_l"] = config.x_l;
  for (const auto& k : kLayoutKeys) j[k.key] = config.layout.*k.member;
  return j;
}

std::vector<std::string> apply_json(RunConfig& config, const nlohmann::json& flat) {
  if (!flat.is_object()) return {"configuration must be a JSON object"};
  std::vector<std::string> errors = ssl::apply_json(config.train, flat);
  for (const auto& [key, value] : flat.items()) {
    if (key.rfind("data.", 0) != 0) {
      bool known_ns = false;
      for (const char* ns : {"train.", "net.", "loss.", "aug.", "xform."}) known_ns |= key.rfind(ns, 0) == 0;
      if (!known_ns) errors.push_back("unknown key '" + key + "'");
      continue;
    }
    try {
      if (key == "data.root") {
        config.data_root = value.get<std::string>();
        continue;
      }
      if (key == "data.x_l") {
        if (!value.is_number_integer()) throw ConfigError("expected an integer");
        config.x_l = value.get<int>();
        continue;
      }
      bool found = false;
      for (const auto& k : kLayoutKeys) {
        if (key == k.key) {
          config.layout.*k.member = value.get<std::string>();
          found = true;
        }
      }
      if (!found) errors.push_back("unknown key '" + key + "'");
    } catch (const std::exception& e) {
      errors.push_back("bad value for '" + key + "': " + e.what());
    }
  }
  return errors;
}

std::vector<std::string> apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) return {"override '" + assignment + "' is not key=value"};
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  auto value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  return apply_json(config, nlohmann::json{{key, value}});
}

void load_run_config(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  const auto j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  const auto errors = apply_json(config, j);
  if (!errors.empty()) throw ConfigError(join(errors));
}

std::filesystem::path default_data_root() {
  const char* env = std::getenv(kDataRootEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("data");
}

}  // namespace sclera::cli
