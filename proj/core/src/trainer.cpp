#include "sclera/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <torch/torch.h>

#include "sclera/error.hpp"
#include "sclera/image_io.hpp"

namespace sclera::ssl {

namespace {

enum Stream : std::uint64_t { kLabeledAug = 11, kUnlabeledAug = 12, kLabeledOrder = 13, kUnlabeledOrder = 14 };

// Cycles through a shuffled index order, reshuffling whenever it runs out.
class Cycler {
 public:
  Cycler(std::size_t n, Rng& rng) : n_(n), rng_(rng) {}
  std::size_t next() {
    if (pos_ == order_.size()) {
      order_.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
      shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::size_t n_;
  Rng& rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

void add(StepLosses& acc, const StepLosses& s) {
  acc.ce += s.ce;
  acc.dice += s.dice;
  acc.surface += s.surface;
  acc.side += s.side;
  acc.l_s += s.l_s;
  acc.l_u += s.l_u;
  acc.l_ss += s.l_ss;
  acc.total += s.total;
}

void scale(StepLosses& acc, double f) {
  for (double* v : {&acc.ce, &acc.dice, &acc.surface, &acc.side, &acc.l_s, &acc.l_u, &acc.l_ss, &acc.total}) *v *= f;
}

net::U2NetPlus clone_model(const net::U2NetPlus& src) {
  auto copy = net::build_model(src->config());
  copy_weights(copy, src);
  return copy;
}

}  // namespace

metrics::Predictor make_predictor(net::U2NetPlus model) {
  return [model](const torch::Tensor& images) mutable {
    torch::NoGradGuard guard;
    model->eval();
    return model->forward(images).fused_probs;
  };
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  config_.validate();
  torch::set_num_threads(config_.threads);
  torch::manual_seed(config_.seed);
  model_ = net::build_model(config_.network);
  if (config_.ssld_target == SsldTarget::Snapshot) snapshot_ = clone_model(model_);
  optimizer_ = std::make_unique<torch::optim::Adam>(model_->parameters(),
                                                    torch::optim::AdamOptions(config_.learning_rate));
  labeled_aug_rng_ = make_rng(config_.seed, kLabeledAug);
  unlabeled_aug_rng_ = make_rng(config_.seed, kUnlabeledAug);
  labeled_order_rng_ = make_rng(config_.seed, kLabeledOrder);
  unlabeled_order_rng_ = make_rng(config_.seed, kUnlabeledOrder);
}

metrics::Predictor Trainer::predictor() { return make_predictor(model_); }

metrics::Predictor Trainer::best_predictor() { return make_predictor(best_model_ ? best_model_ : model_); }

const Trainer::LabelMaps& Trainer::label_maps(const data::ImageSample& sample) {
  if (auto it = label_cache_.find(sample.id); it != label_cache_.end()) return it->second;
  if (!sample.labeled()) throw ConfigError("sample " + sample.id + " has no mask");
  LabelMaps maps;
  maps.gt = mask_to_tensor(*sample.mask);
  maps.bal = loss::boundary_weight_map(*sample.mask, config_.loss.boundary_sigma).to(torch::kFloat32);
  maps.sdm = loss::signed_distance_map(*sample.mask).to(torch::kFloat32);
  return label_cache_.emplace(sample.id, std::move(maps)).first->second;
}

namespace {

void check_size(const data::ImageSample& s, const net::U2NetPlusConfig& c) {
  if (s.height() != c.height || s.width() != c.width || s.image.channels() != c.in_channels)
    throw ShapeError("sample " + s.id + " is " + std::to_string(s.width()) + "x" + std::to_string(s.height()) + "x" +
                     std::to_string(s.image.channels()) + ", network expects " + std::to_string(c.width) + "x" +
                     std::to_string(c.height) + "x" + std::to_string(c.in_channels));
  if (!cv::checkRange(s.image)) throw NumericError("sample " + s.id + " contains non-finite pixel values");
}

}  // namespace

Trainer::SupervisedParts Trainer::supervised_pass(std::span<const data::ImageSample* const> labeled,
                                                  const loss::LossWeights& w) {
  std::vector<torch::Tensor> images, gts, bals, sdms;
  for (const auto* s : labeled) {
    check_size(*s, config_.network);
    const auto params = aug::sample_domain_augmentation(labeled_aug_rng_, aug::AugmentMode::Labeled, config_.augment);
    images.push_back(image_to_tensor(aug::apply_augmentation(s->image, params, config_.augment)));
    const auto& maps = label_maps(*s);
    gts.push_back(maps.gt);
    bals.push_back(maps.bal);
    sdms.push_back(maps.sdm);
  }
  const auto gt = torch::stack(gts);
  model_->train();
  const auto out = model_->forward(torch::stack(images));

  SupervisedParts parts;
  parts.fused = loss::supervised_loss(out.fused_probs, gt, w, torch::stack(bals), torch::stack(sdms),
                                      config_.loss.dice_eps);
  parts.side = torch::zeros({}, out.fused_probs.options());
  if (config_.loss.deep_supervision) {
    const auto ones = torch::ones_like(gt, out.fused_probs.options());
    for (const auto& p : out.side_probs)
      parts.side = parts.side + loss::weighted_cross_entropy(p, gt, ones) + loss::dice_loss(p, gt, config_.loss.dice_eps);
    parts.side = parts.side / static_cast<double>(out.side_probs.size());
  }
  parts.total = parts.fused.total + parts.side;
  return parts;
}

Trainer::UnsupervisedParts Trainer::unsupervised_pass(std::span<const data::ImageSample* const> unlabeled) {
  const int k = config_.k;
  std::vector<torch::Tensor> copies, transformed;
  std::vector<std::vector<xform::SpatialTransform>> transforms;
  for (const auto* s : unlabeled) {
    check_size(*s, config_.network);
    auto c = stack_images(aug::augment_k(*s, k, unlabeled_aug_rng_, aug::AugmentMode::Unlabeled, config_.augment));
    std::vector<xform::SpatialTransform> ts;
    for (int a = 0; a < k; ++a) ts.push_back(xform::sample_transform(unlabeled_aug_rng_, config_.p1, config_.p2, config_.ranges));
    transformed.push_back(transform_copies(c, ts));
    copies.push_back(c);
    transforms.push_back(std::move(ts));
  }
  const auto n = static_cast<int64_t>(unlabeled.size());
  const auto x_aug = torch::cat(copies);
  const auto x_tr = torch::cat(transformed);
  const auto x = torch::cat({x_aug, x_tr});

  // Guessing pass: inference mode, no graph.
  std::vector<torch::Tensor> ssld_targets, ss_targets, ss_validity;
  {
    torch::NoGradGuard guard;
    model_->eval();
    torch::Tensor p_aug, p_tr;
    if (config_.ssld_target == SsldTarget::Snapshot) {
      snapshot_->eval();
      p_aug = model_->forward(x_aug).fused_probs;
      p_tr = snapshot_->forward(x_tr).fused_probs;
    } else {
      const auto p = model_->forward(x).fused_probs;
      p_aug = p.narrow(0, 0, n * k);
      p_tr = p.narrow(0, n * k, n * k);
    }
    for (int64_t i = 0; i < n; ++i) {
      const auto ssld = average_predictions(p_aug.narrow(0, i * k, k));
      const auto ss = average_inverse_warped(p_tr.narrow(0, i * k, k), transforms[static_cast<std::size_t>(i)]);
      for (int a = 0; a < k; ++a) {
        ssld_targets.push_back(ssld.probs);
        ss_targets.push_back(ss.label.probs);
        ss_validity.push_back(ss.copy_validity[a]);
      }
    }
  }

  model_->train();
  const auto probs = model_->forward(x).fused_probs;
  UnsupervisedParts parts;
  parts.l_u = loss::consistency_loss_u(probs.narrow(0, 0, n * k), torch::stack(ssld_targets));

  const auto p_tr = probs.narrow(0, n * k, n * k);
  std::vector<torch::Tensor> back;
  for (int64_t i = 0; i < n; ++i)
    for (int a = 0; a < k; ++a)
      back.push_back(xform::apply_inverse(transforms[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)], p_tr[i * k + a]).field);
  parts.l_ss = loss::consistency_loss_ss(torch::stack(back), torch::stack(ss_targets), torch::stack(ss_validity));
  return parts;
}

StepLosses Trainer::train_step(std::span<const data::ImageSample* const> labeled,
                               std::span<const data::ImageSample* const> unlabeled, const loss::LossWeights& weights) {
  if (labeled.empty()) throw ConfigError("train_step needs at least one labeled sample");
  auto sup = supervised_pass(labeled, weights);
  torch::Tensor l_u = torch::zeros({}, sup.total.options());
  torch::Tensor l_ss = torch::zeros({}, sup.total.options());
  if (!unlabeled.empty()) {
    auto unsup = unsupervised_pass(unlabeled);
    l_u = unsup.l_u;
    l_ss = unsup.l_ss;
  }

  StepLosses s;
  s.ce = sup.fused.ce.item<double>();
  s.dice = sup.fused.dice.item<double>();
  s.surface = sup.fused.surface.item<double>();
  s.side = sup.side.item<double>();
  s.l_s = sup.total.item<double>();
  s.l_u = l_u.item<double>();
  s.l_ss = l_ss.item<double>();
  torch::Tensor total;
  try {
    total = loss::total_loss(sup.total, l_u, l_ss, weights);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " (L_s=" + std::to_string(s.l_s) + ", L_u=" + std::to_string(s.l_u) +
                       ", L_ss=" + std::to_string(s.l_ss) + ")");
  }
  s.total = total.item<double>();

  optimizer_->zero_grad();
  total.backward();
  optimizer_->step();
  return s;
}

EpochRecord Trainer::run_epoch(int epoch, const std::vector<const data::ImageSample*>& labeled,
                               const std::vector<const data::ImageSample*>& unlabeled,
                               const std::vector<data::ImageSample>& validation, std::ostream* step_log) {
  const auto start = std::chrono::steady_clock::now();
  EpochRecord rec;
  rec.epoch = epoch;
  rec.weights = loss::schedule(epoch, config_.loss);
  if (snapshot_) copy_weights(snapshot_, model_);

  const auto lpb = static_cast<std::size_t>(config_.labeled_per_batch);
  const auto upb = static_cast<std::size_t>(config_.unlabeled_per_batch);
  const bool use_u = config_.use_unlabeled && !unlabeled.empty();
  std::size_t steps = (labeled.size() + lpb - 1) / lpb;
  if (use_u) steps = std::max(steps, (unlabeled.size() + upb - 1) / upb);

  Cycler lab(labeled.size(), labeled_order_rng_);
  Cycler unl(unlabeled.size(), unlabeled_order_rng_);
  std::vector<const data::ImageSample*> lb, ub;
  for (std::size_t step = 0; step < steps; ++step) {
    lb.clear();
    ub.clear();
    for (std::size_t i = 0; i < lpb; ++i) lb.push_back(labeled[lab.next()]);
    if (use_u)
      for (std::size_t i = 0; i < upb; ++i) ub.push_back(unlabeled[unl.next()]);
    const auto s = train_step(lb, ub, rec.weights);
    add(rec.losses, s);
    if (step_log) {
      auto j = to_json(s);
      j["epoch"] = epoch;
      j["step"] = step;
      j["lambda_u"] = rec.weights.lambda_u;
      j["lambda_ss"] = rec.weights.lambda_ss;
      j["alpha"] = rec.weights.alpha;
      *step_log << j.dump() << "\n";
    }
  }
  rec.steps = static_cast<int>(steps);
  scale(rec.losses, 1.0 / static_cast<double>(steps));

  if (!validation.empty()) {
    metrics::EvaluateOptions opts;
    opts.batch_size = config_.eval_batch;
    const auto report = metrics::evaluate(predictor(), validation, opts);
    rec.val_miou = report.mean.iou;
    rec.val_f1 = report.mean.f1;
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

const TrainHistory& Trainer::train(const data::DatasetSplit& data, const TrainOptions& options) {
  if (data.train_labeled.empty()) throw ConfigError("training needs at least one labeled sample");
  std::vector<const data::ImageSample*> labeled, unlabeled;
  for (const auto& s : data.train_labeled) labeled.push_back(&s);
  for (const auto& s : data.train_unlabeled) unlabeled.push_back(&s);

  std::unique_ptr<std::ofstream> step_log;
  if (!options.run_dir.empty()) {
    std::filesystem::create_directories(options.run_dir);
    step_log = std::make_unique<std::ofstream>(options.run_dir / "train_log.jsonl", std::ios::app);
  }
  history_.meta["labeled"] = labeled.size();
  history_.meta["unlabeled"] = config_.use_unlabeled ? unlabeled.size() : 0;
  history_.meta["seed"] = config_.seed;
  history_.meta["mode"] = config_.use_unlabeled && !unlabeled.empty() ? "ssl" : "supervised";

  const int end = options.stop_after >= 0 ? std::min(options.stop_after, config_.epochs) : config_.epochs;
  for (int epoch = next_epoch_; epoch < end; ++epoch) {
    auto rec = run_epoch(epoch, labeled, unlabeled, data.validation, step_log.get());
    history_.epochs.push_back(rec);
    next_epoch_ = epoch + 1;
    const bool improved = rec.val_miou > best_val_miou_;
    if (improved) {
      best_val_miou_ = rec.val_miou;
      if (!best_model_) best_model_ = net::build_model(config_.network);
      copy_weights(best_model_, model_);
    }
    if (!options.run_dir.empty()) {
      save_checkpoint(options.run_dir / "last.pt");
      if (improved) save_checkpoint(options.run_dir / "best.pt");
      save_history(history_, options.run_dir / "history.json");
      step_log->flush();
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  return history_;
}

}  // namespace sclera::ssl
