#include <iostream>

#include <CLI11.hpp>

#include "sclera/trainer.hpp"
#include "sclera_cli/commands.hpp"
#include "sclera_cli/run_config.hpp"

using namespace sclera::cli;

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised sclera segmentation: toy data, training, evaluation, prediction and reports"};
  app.set_version_flag("--version", sclera::ssl::version_string());
  app.require_subcommand(1);
  app.footer(std::string("Environment: ") + kDataRootEnv + " sets the default dataset root.\n"
             "Exit codes: 0 success, 1 invalid arguments or configuration, 2 runtime failure.");

  MakeToyArgs toy;
  toy.out = default_data_root();
  auto* mk = app.add_subcommand("make-toy", "Write a synthetic eye dataset in the standard layout");
  mk->add_option("--out", toy.out, "Dataset root to create")->capture_default_str();
  mk->add_option("--seed", toy.spec.seed, "Generator seed")->capture_default_str();
  mk->add_option("--labeled", toy.spec.count_labeled, "Labeled train images")->capture_default_str();
  mk->add_option("--unlabeled", toy.spec.count_unlabeled, "Unlabeled train images")->capture_default_str();
  mk->add_option("--val", toy.spec.count_val, "Validation images")->capture_default_str();
  mk->add_option("--test", toy.spec.count_test, "Test images")->capture_default_str();
  int size = 0;
  mk->add_option("--size", size, "Square image side in pixels (default 64)");
  mk->add_flag("--force", toy.force, "Write into a non-empty directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model; writes checkpoints, history and logs to the run directory");
  t->add_option("--config", tr.config, "Flat JSON config file (dotted keys)");
  t->add_option("--data", tr.data, "Dataset root (default: $SCLERA_DATA_ROOT or data.root)");
  t->add_option("--out", tr.out, "Run directory")->capture_default_str();
  t->add_option("--seed", tr.seed, "Overrides train.seed");
  t->add_option("--x-l", tr.x_l, "Number of labeled training images to keep");
  t->add_option("--epochs", tr.epochs, "Overrides train.epochs");
  t->add_option("--threads", tr.threads, "Overrides train.threads");
  t->add_option("--set", tr.overrides, "key=value override, repeatable (e.g. --set net.base_channels=8)");
  t->add_flag("--force", tr.force, "Reuse a non-empty run directory");
  t->add_flag("--resume", tr.resume, "Continue from <out>/last.pt with the saved config");
  t->add_flag("--quiet", tr.quiet, "No per-epoch lines");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on a labeled split; writes metrics, masks and overlays");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file or run directory")->required();
  e->add_option("--data", ev.data, "Dataset root (default: $SCLERA_DATA_ROOT)");
  e->add_option("--split", ev.split, "test or val")->capture_default_str();
  e->add_option("--threshold", ev.threshold, "Foreground probability threshold")->capture_default_str();
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_flag("--force", ev.force, "Write into a non-empty directory");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Segment images; writes 0/255 masks and 16-bit probability maps");
  p->add_option("--checkpoint", pr.checkpoint, "Checkpoint file or run directory")->required();
  p->add_option("--input", pr.input, "Image file or directory")->required();
  p->add_option("--out", pr.out, "Output directory")->required();
  p->add_flag("--force", pr.force, "Write into a non-empty directory");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Plot and tabulate metrics across runs");
  r->add_option("inputs", rp.inputs, "Run directories or history.json files")->required();
  r->add_option("--out", rp.out, "Output directory")->required();
  r->add_flag("--force", rp.force, "Write into a non-empty directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kSuccess : kValidationError;
  }

  if (*mk) {
    if (size != 0) toy.spec.height = toy.spec.width = size;
    return guarded([&] { make_toy(toy, std::cout); }, std::cerr);
  }
  if (*t) return guarded([&] { train(tr, std::cout); }, std::cerr);
  if (*e) return guarded([&] { eval(ev, std::cout); }, std::cerr);
  if (*p) return guarded([&] { predict(pr, std::cout); }, std::cerr);
  return guarded([&] { report(rp, std::cout); }, std::cerr);
}
