#include "sclera/history.hpp"

#include <fstream>

#include "sclera/error.hpp"

namespace sclera::ssl {

nlohmann::json to_json(const StepLosses& l) {
  return {{"ce", l.ce},     {"dice", l.dice}, {"surface", l.surface}, {"side", l.side},
          {"l_s", l.l_s},   {"l_u", l.l_u},   {"l_ss", l.l_ss},       {"total", l.total}};
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"steps", r.steps},
          {"losses", to_json(r.losses)},
          {"val_miou", r.val_miou},
          {"val_f1", r.val_f1},
          {"weights",
           {{"alpha", r.weights.alpha},
            {"lambda1", r.weights.lambda1},
            {"lambda2", r.weights.lambda2},
            {"lambda3", r.weights.lambda3},
            {"lambda4", r.weights.lambda4},
            {"lambda_u", r.weights.lambda_u},
            {"lambda_ss", r.weights.lambda_ss}}},
          {"seconds", r.seconds}};
}

nlohmann::json to_json(const TrainHistory& h) {
  nlohmann::json j;
  j["meta"] = h.meta;
  j["epochs"] = nlohmann::json::array();
  for (const auto& r : h.epochs) j["epochs"].push_back(to_json(r));
  return j;
}

TrainHistory history_from_json(const nlohmann::json& j) {
  TrainHistory h;
  try {
    h.meta = j.value("meta", nlohmann::json::object());
    int last = -1;
    for (const auto& e : j.at("epochs")) {
      EpochRecord r;
      r.epoch = e.at("epoch").get<int>();
      if (r.epoch <= last) throw LoadError("epoch indices must increase");
      last = r.epoch;
      r.steps = e.value("steps", 0);
      const auto& l = e.at("losses");
      r.losses = {l.at("ce").get<double>(),  l.at("dice").get<double>(), l.at("surface").get<double>(),
                  l.at("side").get<double>(), l.at("l_s").get<double>(),  l.at("l_u").get<double>(),
                  l.at("l_ss").get<double>(), l.at("total").get<double>()};
      r.val_miou = e.at("val_miou").get<double>();
      r.val_f1 = e.at("val_f1").get<double>();
      const auto& w = e.at("weights");
      r.weights.alpha = w.at("alpha").get<double>();
      r.weights.lambda1 = w.at("lambda1").get<double>();
      r.weights.lambda2 = w.at("lambda2").get<double>();
      r.weights.lambda3 = w.at("lambda3").get<double>();
      r.weights.lambda4 = w.at("lambda4").get<double>();
      r.weights.lambda_u = w.at("lambda_u").get<double>();
      r.weights.lambda_ss = w.at("lambda_ss").get<double>();
      r.seconds = e.value("seconds", 0.0);
      h.epochs.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed history: ") + e.what());
  }
  return h;
}

void save_history(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << to_json(history).dump(2) << "\n";
}

TrainHistory load_history(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot read history " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed history " + path.string() + ": " + e.what());
  }
  return history_from_json(j);
}

}  // namespace sclera::ssl
