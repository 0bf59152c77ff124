#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sclera/data_pipeline.hpp"

namespace sclera::cli {

/// Process exit codes.
enum ExitCode : int { kSuccess = 0, kValidationError = 1, kRuntimeError = 2 };

struct MakeToyArgs {
  std::filesystem::path out;
  data::ToyDatasetSpec spec;
  bool force = false;
};

struct TrainArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> data;
  std::filesystem::path out = "runs/default";
  std::optional<std::uint64_t> seed;
  std::optional<int> x_l;
  std::optional<int> epochs;
  std::optional<int> threads;
  std::vector<std::string> overrides;
  bool force = false;
  bool resume = false;
  bool quiet = false;
};

struct EvalArgs {
  /// A checkpoint file, or a run directory (its best.pt is used).
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> data;
  std::string split = "test";
  std::filesystem::path out;
  double threshold = 0.5;
  bool force = false;
};

struct PredictArgs {
  std::filesystem::path checkpoint;
  /// An image file or a directory of images.
  std::filesystem::path input;
  std::filesystem::path out;
  bool force = false;
};

struct ReportArgs {
  /// Run directories or history.json files.
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out;
  bool force = false;
};

void make_toy(const MakeToyArgs& args, std::ostream& log);
void train(const TrainArgs& args, std::ostream& log);
void eval(const EvalArgs& args, std::ostream& log);
void predict(const PredictArgs& args, std::ostream& log);
void report(const ReportArgs& args, std::ostream& log);

/// Runs `fn` and maps exceptions to exit codes: configuration and argument
/// problems give kValidationError, everything else kRuntimeError.
int guarded(const std::function<void()>& fn, std::ostream& err);

}  // namespace sclera::cli
