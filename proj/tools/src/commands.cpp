#include "sclera_cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "sclera/error.hpp"
#include "sclera/image_io.hpp"
#include "sclera/label_guessing.hpp"
#include "sclera/metrics.hpp"
#include "sclera/trainer.hpp"
#include "sclera_cli/plot.hpp"
#include "sclera_cli/run_config.hpp"

namespace fs = std::filesystem;

namespace sclera::cli {

namespace {

bool non_empty_dir(const fs::path& p) { return fs::is_directory(p) && !fs::is_empty(p); }

// Output directories are append-only unless the caller forces reuse.
void claim_output(const fs::path& out, bool force, const char* what) {
  if (out.empty()) throw ConfigError(std::string(what) + ": --out is required");
  if (fs::exists(out) && !fs::is_directory(out)) throw ConfigError(out.string() + " exists and is not a directory");
  if (non_empty_dir(out) && !force)
    throw ConfigError(out.string() + " already exists and is not empty; pass --force to write into it");
  fs::create_directories(out);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
  if (text.empty() || text.back() != '\n') os << "\n";
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open " + path.string());
  auto j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded()) throw LoadError(path.string() + " is not valid JSON");
  return j;
}

fs::path resolve_checkpoint(const fs::path& p) {
  if (p.empty()) throw ConfigError("--checkpoint is required");
  const fs::path file = fs::is_directory(p) ? p / "best.pt" : p;
  if (!fs::exists(file)) throw ConfigError("checkpoint not found: " + file.string());
  return file;
}

data::LoadOptions load_options(const net::U2NetPlusConfig& net) {
  data::LoadOptions o;
  o.resize = cv::Size(net.width, net.height);
  o.channels = net.in_channels;
  return o;
}

// Writes a float [0,1] RGB or gray image as an 8-bit file.
void write_unit_image(const fs::path& path, const cv::Mat& unit) {
  cv::Mat rgb = unit;
  if (unit.channels() == 1) cv::cvtColor(unit, rgb, cv::COLOR_GRAY2RGB);
  write_image(path, rgb);
}

std::string format_losses(const ssl::EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "L_s %.4f  L_u %.5f  L_ss %.5f  total %.4f  val mIoU %.4f  F1 %.4f  (%.1f s)",
                r.losses.l_s, r.losses.l_u, r.losses.l_ss, r.losses.total, r.val_miou, r.val_f1, r.seconds);
  return buf;
}

}  // namespace

int guarded(const std::function<void()>& fn, std::ostream& err) {
  try {
    fn();
    return kSuccess;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

void make_toy(const MakeToyArgs& args, std::ostream& log) {
  data::validate_toy_spec(args.spec);
  claim_output(args.out, args.force, "make-toy");
  const auto split = data::generate_toy_dataset(args.spec);
  data::write_dataset(split, args.out);
  const auto masks = split.train_labeled.size() + split.validation.size() + split.test.size();
  log << "wrote " << split.size() << " images and " << masks << " masks to " << args.out.string() << "\n";
}

void train(const TrainArgs& args, std::ostream& log) {
  RunConfig rc;
  rc.data_root = default_data_root();
  const fs::path saved_config = args.out / "config.json";
  if (args.resume) {
    if (!fs::exists(args.out / "last.pt")) throw ConfigError("nothing to resume: " + (args.out / "last.pt").string() + " is missing");
    load_run_config(rc, saved_config);
  }
  if (args.config) load_run_config(rc, *args.config);
  std::vector<std::string> errors;
  for (const auto& o : args.overrides)
    for (auto& e : apply_override(rc, o)) errors.push_back(std::move(e));
  if (args.data) rc.data_root = *args.data;
  if (args.seed) rc.train.seed = *args.seed;
  if (args.x_l) rc.x_l = *args.x_l;
  if (args.epochs) rc.train.epochs = *args.epochs;
  if (args.threads) rc.train.threads = *args.threads;
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  rc.validate();
  if (!fs::is_directory(rc.data_root)) throw ConfigError("dataset root not found: " + rc.data_root.string());

  if (!args.resume) {
    claim_output(args.out, args.force, "train");
    for (const char* stale : {"train_log.jsonl", "history.json", "last.pt", "last.pt.json", "best.pt", "best.pt.json"})
      fs::remove(args.out / stale);
  }
  const auto config_json = to_json(rc);
  write_text(saved_config, config_json.dump(2));
  nlohmann::json info;
  info["version"] = ssl::version_string();
  info["torch"] = TORCH_VERSION;
  info["opencv"] = CV_VERSION;
  info["threads"] = rc.train.threads;
  info["seed"] = rc.train.seed;
  write_text(args.out / "run.json", info.dump(2));
  log << "config " << config_json.dump() << "\n";

  auto split = data::load_dataset(rc.data_root, rc.layout, load_options(rc.train.network));
  for (const auto& r : split.rejected) log << "warning: skipped " << r.id << ": " << r.reason << "\n";
  auto [labeled, stripped] = data::partition_labeled(std::move(split.train_labeled), rc.x_l, rc.train.seed);
  split.train_labeled = std::move(labeled);
  for (auto& s : stripped) split.train_unlabeled.push_back(std::move(s));
  log << "data: " << split.train_labeled.size() << " labeled, " << split.train_unlabeled.size() << " unlabeled, "
      << split.validation.size() << " val, " << split.test.size() << " test\n";

  ssl::Trainer trainer(rc.train);
  if (args.resume) {
    trainer.load_checkpoint(args.out / "last.pt");
    log << "resuming at epoch " << trainer.next_epoch() << "\n";
  }
  trainer.history().meta["name"] = args.out.filename().string();
  trainer.history().meta["x_l"] = split.train_labeled.size();

  ssl::TrainOptions opts;
  opts.run_dir = args.out;
  const int epochs = rc.train.epochs;
  opts.on_epoch = [&](const ssl::EpochRecord& r) {
    if (!args.quiet) log << "epoch " << r.epoch + 1 << "/" << epochs << "  " << format_losses(r) << "\n";
  };
  trainer.train(split, opts);

  if (!split.test.empty()) {
    metrics::EvaluateOptions eo;
    eo.batch_size = rc.train.eval_batch;
    const auto rep = metrics::evaluate(trainer.best_predictor(), split.test, eo);
    write_text(args.out / "test_metrics.json", metrics::report_to_json(rep));
    const auto table = metrics::report_to_table(rep, "test split, best checkpoint (" + args.out.filename().string() + ")");
    write_text(args.out / "test_metrics.txt", table);
    log << table;
  }
  log << "run directory: " << args.out.string() << "\n";
}

void eval(const EvalArgs& args, std::ostream& log) {
  const fs::path ckpt = resolve_checkpoint(args.checkpoint);
  const fs::path root = args.data.value_or(default_data_root());
  if (!fs::is_directory(root)) throw ConfigError("dataset root not found: " + root.string());
  if (args.split != "test" && args.split != "val") throw ConfigError("--split must be test or val");
  if (args.threshold <= 0 || args.threshold >= 1) throw ConfigError("--threshold must lie in (0, 1)");
  claim_output(args.out, args.force, "eval");

  ssl::TrainConfig cfg;
  auto model = ssl::load_model(ckpt, &cfg);
  torch::set_num_threads(cfg.threads);
  const auto split = data::load_dataset(root, {}, load_options(cfg.network));
  for (const auto& r : split.rejected) log << "warning: skipped " << r.id << ": " << r.reason << "\n";
  const auto& samples = args.split == "test" ? split.test : split.validation;
  if (samples.empty()) throw ConfigError("the " + args.split + " split has no labeled images");

  std::vector<cv::Mat> masks;
  metrics::EvaluateOptions eo;
  eo.threshold = args.threshold;
  eo.batch_size = cfg.eval_batch;
  eo.predicted_masks = &masks;
  const auto rep = metrics::evaluate(ssl::make_predictor(model), samples, eo);

  fs::create_directories(args.out / "overlays");
  fs::create_directories(args.out / "masks");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    write_unit_image(args.out / "overlays" / (s.id + "_overlay.png"), metrics::render_overlay(masks[i], *s.mask, s.image));
    write_mask(args.out / "masks" / (s.id + ".png"), masks[i]);
  }
  write_text(args.out / "metrics.json", metrics::report_to_json(rep));
  const auto table = metrics::report_to_table(rep, args.split + " split, " + ckpt.string());
  write_text(args.out / "metrics.txt", table);
  log << table;
  log << "overlays: blue = true positive, green = false positive, red = false negative\n";
}

void predict(const PredictArgs& args, std::ostream& log) {
  const fs::path ckpt = resolve_checkpoint(args.checkpoint);
  if (!fs::exists(args.input)) throw ConfigError("input not found: " + args.input.string());
  std::vector<fs::path> files =
      fs::is_directory(args.input) ? data::list_images(args.input) : std::vector<fs::path>{args.input};
  if (files.empty()) throw ConfigError("no images in " + args.input.string());
  claim_output(args.out, args.force, "predict");

  ssl::TrainConfig cfg;
  auto model = ssl::load_model(ckpt, &cfg);
  torch::set_num_threads(cfg.threads);
  const auto predictor = ssl::make_predictor(model);
  const cv::Size net_size(cfg.network.width, cfg.network.height);

  struct Item {
    std::string stem;
    cv::Size size;
    cv::Mat image;
  };
  std::vector<Item> items;
  for (const auto& f : files) {
    cv::Mat img;
    try {
      img = read_image(f);
    } catch (const LoadError& e) {
      log << "warning: skipped " << f.string() << ": " << e.what() << "\n";
      continue;
    }
    if (img.channels() != cfg.network.in_channels)
      cv::cvtColor(img, img, cfg.network.in_channels == 3 ? cv::COLOR_GRAY2RGB : cv::COLOR_RGB2GRAY);
    data::ImageSample s{f.stem().string(), img, std::nullopt};
    const auto size = img.size();
    if (size != net_size) s = data::resize_sample(s, net_size);
    items.push_back({s.id, size, s.image});
  }

  // Same batching as eval so both commands see identical network inputs.
  const auto bs = static_cast<std::size_t>(cfg.eval_batch);
  std::size_t written = 0;
  for (std::size_t start = 0; start < items.size(); start += bs) {
    const std::size_t end = std::min(items.size(), start + bs);
    std::vector<cv::Mat> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(items[i].image);
    const auto probs = predictor(ssl::stack_images(batch));
    for (std::size_t i = start; i < end; ++i) {
      const torch::Tensor fg = probs[static_cast<int64_t>(i - start)][1].contiguous().to(torch::kFloat32);
      cv::Mat p(static_cast<int>(fg.size(0)), static_cast<int>(fg.size(1)), CV_32FC1, fg.data_ptr<float>());
      p = p.clone();
      if (items[i].size != p.size()) cv::resize(p, p, items[i].size, 0, 0, cv::INTER_LINEAR);
      cv::Mat mask = p > 0.5f;  // 0/255
      cv::Mat prob16;
      p.convertTo(prob16, CV_16UC1, 65535.0);
      if (!cv::imwrite((args.out / (items[i].stem + ".png")).string(), mask) ||
          !cv::imwrite((args.out / (items[i].stem + "_prob.png")).string(), prob16))
        throw Error("cannot write predictions for " + items[i].stem);
      ++written;
    }
  }
  log << "wrote " << written << " masks and probability maps to " << args.out.string() << "\n";
}

namespace {

struct RunSummary {
  std::string name;
  std::string mode;
  int x_l = -1;
  ssl::TrainHistory history;
  std::optional<nlohmann::json> test;
};

RunSummary load_run(const fs::path& input) {
  const fs::path hist = fs::is_directory(input) ? input / "history.json" : input;
  if (!fs::exists(hist)) throw ConfigError("history not found: " + hist.string());
  RunSummary r;
  r.history = ssl::load_history(hist);
  const auto& meta = r.history.meta;
  const fs::path dir = hist.parent_path();
  r.name = meta.contains("name") && meta["name"].is_string() ? meta["name"].get<std::string>()
                                                            : (dir.empty() ? hist.stem() : dir.filename()).string();
  r.mode = meta.value("mode", std::string("unknown"));
  if (meta.contains("x_l") && meta["x_l"].is_number_integer()) r.x_l = meta["x_l"].get<int>();
  if (fs::exists(dir / "test_metrics.json")) r.test = read_json(dir / "test_metrics.json");
  return r;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100 * v);
  return buf;
}

}  // namespace

void report(const ReportArgs& args, std::ostream& log) {
  if (args.inputs.empty()) throw ConfigError("report needs at least one run directory or history file");
  std::vector<RunSummary> runs;
  for (const auto& in : args.inputs) runs.push_back(load_run(in));
  claim_output(args.out, args.force, "report");

  // Per-epoch validation curves, one series per run.
  for (const auto& [metric, label] : {std::pair{"miou", "val mIoU"}, std::pair{"f1", "val F1"}}) {
    std::vector<Series> series;
    for (const auto& r : runs) {
      Series s{r.name, {}, {}};
      for (const auto& e : r.history.epochs) {
        s.x.push_back(e.epoch + 1);
        s.y.push_back(std::string(metric) == "miou" ? e.val_miou : e.val_f1);
      }
      series.push_back(std::move(s));
    }
    PlotOptions po;
    po.title = std::string(label) + " per epoch";
    po.x_label = "epoch";
    po.y_label = label;
    const auto file = args.out / (std::string("curve_val_") + metric + ".png");
    if (!cv::imwrite(file.string(), line_plot(series, po))) throw Error("cannot write " + file.string());
  }

  // Metric against the labeled budget, one series per training mode.
  std::map<std::string, std::map<int, std::vector<double>>> by_mode_miou, by_mode_f1;
  for (const auto& r : runs) {
    if (r.x_l < 0 || !r.test) continue;
    by_mode_miou[r.mode][r.x_l].push_back((*r.test)["mean_iou"].get<double>());
    by_mode_f1[r.mode][r.x_l].push_back((*r.test)["mean_f1"].get<double>());
  }
  if (!by_mode_miou.empty()) {
    for (const auto& [metric, table] : {std::pair{"miou", &by_mode_miou}, std::pair{"f1", &by_mode_f1}}) {
      std::vector<Series> series;
      for (const auto& [mode, points] : *table) {
        Series s{mode, {}, {}};
        for (const auto& [x_l, values] : points) {
          auto v = values;
          std::sort(v.begin(), v.end());
          s.x.push_back(x_l);
          s.y.push_back(v[v.size() / 2]);  // median over seeds
        }
        series.push_back(std::move(s));
      }
      PlotOptions po;
      po.title = std::string("test ") + (std::string(metric) == "miou" ? "mIoU" : "F1") + " vs labeled images";
      po.x_label = "labeled images (X_l)";
      po.y_label = std::string(metric) == "miou" ? "mIoU" : "F1";
      const auto file = args.out / (std::string("xl_") + metric + ".png");
      if (!cv::imwrite(file.string(), line_plot(series, po))) throw Error("cannot write " + file.string());
    }
  }

  std::string text;
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %-10s %5s %8s %8s %11s %8s\n", "Run", "Method", "X_l", "mIoU %", "Recall %",
                "Precision %", "F1 %");
  text += line;
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : runs) {
    nlohmann::json jr;
    jr["name"] = r.name;
    jr["mode"] = r.mode;
    jr["x_l"] = r.x_l;
    jr["epochs"] = nlohmann::json::array();
    for (const auto& e : r.history.epochs)
      jr["epochs"].push_back({{"epoch", e.epoch}, {"val_miou", e.val_miou}, {"val_f1", e.val_f1}});
    if (r.test) {
      const auto& t = *r.test;
      jr["test"] = {{"mean_iou", t["mean_iou"]}, {"mean_recall", t["mean_recall"]},
                    {"mean_precision", t["mean_precision"]}, {"mean_f1", t["mean_f1"]}};
      std::snprintf(line, sizeof(line), "%-24s %-10s %5d %8s %8s %11s %8s\n", r.name.c_str(), r.mode.c_str(), r.x_l,
                    pct(t["mean_iou"].get<double>()).c_str(), pct(t["mean_recall"].get<double>()).c_str(),
                    pct(t["mean_precision"].get<double>()).c_str(), pct(t["mean_f1"].get<double>()).c_str());
    } else {
      std::snprintf(line, sizeof(line), "%-24s %-10s %5d %8s %8s %11s %8s\n", r.name.c_str(), r.mode.c_str(), r.x_l,
                    "-", "-", "-", "-");
    }
    text += line;
    j["runs"].push_back(jr);
  }
  text += "\nPer-epoch validation (mIoU %, F1 %)\n";
  for (const auto& r : runs) {
    text += r.name + "\n";
    for (const auto& e : r.history.epochs) {
      std::snprintf(line, sizeof(line), "  %5d %8s %8s\n", e.epoch + 1, pct(e.val_miou).c_str(), pct(e.val_f1).c_str());
      text += line;
    }
  }
  write_text(args.out / "report.txt", text);
  write_text(args.out / "report.json", j.dump(2));
  log << text.substr(0, text.find("\nPer-epoch"));
  log << "\nreport written to " << args.out.string() << "\n";
}

}  // namespace sclera::cli
