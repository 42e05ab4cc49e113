#include <graftkit/trainer.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include <graftkit/checkpoint.hpp>
#include <graftkit/evaluation.hpp>

namespace graftkit {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (crop < 1) throw std::invalid_argument("train config: crop must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be > 0");
  if (!use_frl && !use_fel && !use_fsl) {
    throw std::invalid_argument("train config: at least one loss term must be enabled");
  }
  if (weights.alpha < 0 || weights.beta < 0 || weights.gamma_h < 0 || weights.gamma_r < 0) {
    throw std::invalid_argument("train config: loss weights must be nonnegative");
  }
}

namespace {

// Stack per-sample (c, h, w) tensors into one (n, c, h, w) batch.
Tensor stack(const std::vector<const Tensor*>& items) {
  const Tensor& first = *items.front();
  Tensor batch({static_cast<std::int64_t>(items.size()), first.dim(0), first.dim(1),
                first.dim(2)});
  const std::int64_t stride = first.numel();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i]->same_shape(first)) {
      throw std::invalid_argument("batch: sample shape " + shape_str(items[i]->shape()) +
                                  " differs from " + shape_str(first.shape()));
    }
    std::copy(items[i]->data(), items[i]->data() + stride,
              batch.data() + static_cast<std::int64_t>(i) * stride);
  }
  return batch;
}

double l2_norm(const std::vector<Tensor*>& tensors) {
  double acc = 0.0;
  for (const Tensor* t : tensors) {
    for (std::int64_t i = 0; i < t->numel(); ++i) acc += (*t)[i] * (*t)[i];
  }
  return std::sqrt(acc);
}

void add_scaled(Tensor& dst, const Tensor& src, double scale) {
  for (std::int64_t i = 0; i < dst.numel(); ++i) dst[i] += scale * src[i];
}

}  // namespace

GraftTrainer::GraftTrainer(const BlockChain& pretrained, const SplitSpec& spec,
                           BlockChain gn_front, const TrainConfig& cfg)
    : cfg_(cfg),
      front_(),
      model_(),
      optimizer_({}, {}, cfg.lr) {
  cfg_.validate();
  cfg_.split = spec;
  SplitParts parts = split(pretrained, spec);
  front_ = std::move(parts.front);
  model_ = graft(std::move(gn_front), std::move(parts.mid), std::move(parts.last));
  optimizer_ = Adam(model_.gn_front.params(), model_.gn_front.grads(), cfg_.lr);
}

StepRecord GraftTrainer::step(const Tensor& frames, const Tensor& modality) {
  // Targets from the frozen pretrained parts, no gradients attached.
  const Tensor h = front_.infer(frames);
  const bool needs_mid = cfg_.use_fel || cfg_.use_fsl;
  const Tensor r = needs_mid ? model_.mid.infer(h) : Tensor();

  // Grafted path; mid caches activations for the backward pass.
  const Tensor h_hat = model_.gn_front.forward(modality);
  const Tensor r_hat = needs_mid ? model_.mid.forward(h_hat) : Tensor();

  StepRecord rec;
  rec.step = step_count_;
  Tensor d_hhat(h_hat.shape());
  Tensor d_rhat = needs_mid ? Tensor(r_hat.shape()) : Tensor();
  bool rhat_grad_nonempty = false;

  if (cfg_.use_frl) {
    rec.losses.frl = frl(h, h_hat);
    add_scaled(d_hhat, frl_grad(h, h_hat), cfg_.weights.alpha);
  }
  if (cfg_.use_fel) {
    rec.losses.fel = fel(r, r_hat);
    add_scaled(d_rhat, fel_grad(r, r_hat), cfg_.weights.beta);
    rhat_grad_nonempty = true;
  }
  if (cfg_.use_fsl) {
    rec.losses.fsl = fsl(h, h_hat, r, r_hat, cfg_.weights.gamma_h, cfg_.weights.gamma_r);
    auto [dh, dr] = fsl_grad(h, h_hat, r, r_hat, cfg_.weights.gamma_h, cfg_.weights.gamma_r);
    add_scaled(d_hhat, dh, 1.0);
    add_scaled(d_rhat, dr, 1.0);
    rhat_grad_nonempty = true;
  }
  rec.losses.total = cfg_.weights.alpha * rec.losses.frl + cfg_.weights.beta * rec.losses.fel +
                     rec.losses.fsl;

  if (!std::isfinite(rec.losses.total)) {
    throw std::runtime_error("training diverged at step " + std::to_string(step_count_) +
                             ": total loss is not finite (frl=" + std::to_string(rec.losses.frl) +
                             ", fel=" + std::to_string(rec.losses.fel) +
                             ", fsl=" + std::to_string(rec.losses.fsl) + ")");
  }

  if (rhat_grad_nonempty) {
    // Route middle-net gradients back to the grafted features; the frozen
    // middle net accumulates no parameter gradients.
    add_scaled(d_hhat, model_.mid.backward(d_rhat, /*with_param_grads=*/false), 1.0);
  }

  model_.gn_front.zero_grad();
  model_.gn_front.backward(d_hhat, /*with_param_grads=*/true);
  rec.grad_norm = l2_norm(model_.gn_front.grads());
  optimizer_.step();
  ++step_count_;
  return rec;
}

TrainReport GraftTrainer::run(const DatasetSplit& data, std::ostream* step_log) {
  if (data.train.empty()) throw std::invalid_argument("train: no training pairs");
  const auto wall_start = std::chrono::steady_clock::now();
  Rng rng(cfg_.seed ^ 0x9e3779b97f4a7c15ull);

  TrainReport report;
  report.config = cfg_;
  double best_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::int64_t full_h = data.train.front().frame.dim(1);
  const std::int64_t full_w = data.train.front().frame.dim(2);
  const bool do_crop = cfg_.crop != full_h || cfg_.crop != full_w;

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    rng.shuffle(order);
    LossBreakdown epoch_acc;
    std::int64_t epoch_steps = 0;

    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg_.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(cfg_.batch_size));
      std::vector<PairedSample> cropped;
      std::vector<const Tensor*> frames, modalities;
      frames.reserve(end - begin);
      modalities.reserve(end - begin);
      if (do_crop) cropped.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const PairedSample& s = data.train[order[k]];
        if (do_crop) {
          cropped.push_back(random_crop_pair(s, cfg_.crop, rng));
          frames.push_back(&cropped.back().frame);
          modalities.push_back(&cropped.back().modality);
        } else {
          frames.push_back(&s.frame);
          modalities.push_back(&s.modality);
        }
      }
      const StepRecord rec = step(stack(frames), stack(modalities));
      epoch_acc.frl += rec.losses.frl;
      epoch_acc.fel += rec.losses.fel;
      epoch_acc.fsl += rec.losses.fsl;
      epoch_acc.total += rec.losses.total;
      ++epoch_steps;

      if (step_log) {
        nlohmann::json line{{"step", rec.step},
                            {"frl", rec.losses.frl},
                            {"fel", rec.losses.fel},
                            {"fsl", rec.losses.fsl},
                            {"total", rec.losses.total}};
        *step_log << line.dump() << '\n';
      }
    }

    LossBreakdown epoch_mean{epoch_acc.frl / epoch_steps, epoch_acc.fel / epoch_steps,
                             epoch_acc.fsl / epoch_steps, epoch_acc.total / epoch_steps};
    report.epoch_curve.push_back(epoch_mean);

    if (!cfg_.out_dir.empty()) {
      const bool cadence = cfg_.checkpoint_every > 0 && (epoch + 1) % cfg_.checkpoint_every == 0;
      if (epoch_mean.total < best_loss) {
        best_loss = epoch_mean.total;
        report.best_checkpoint = (fs::path(cfg_.out_dir) / "checkpoint_best.gkpt").string();
        save_checkpoint(report.best_checkpoint,
                        checkpoint_from_grafted(model_, front_, cfg_.split, cfg_.weights));
      }
      if (cadence) {
        save_checkpoint(
            (fs::path(cfg_.out_dir) / ("checkpoint_epoch" + std::to_string(epoch + 1) + ".gkpt"))
                .string(),
            checkpoint_from_grafted(model_, front_, cfg_.split, cfg_.weights));
      }
    } else if (epoch_mean.total < best_loss) {
      best_loss = epoch_mean.total;
    }
  }

  if (!cfg_.out_dir.empty()) {
    report.final_checkpoint = (fs::path(cfg_.out_dir) / "checkpoint_final.gkpt").string();
    save_checkpoint(report.final_checkpoint,
                    checkpoint_from_grafted(model_, front_, cfg_.split, cfg_.weights));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return report;
}

std::pair<GraftedModel, TrainReport> train_graft(const BlockChain& pretrained,
                                                 const SplitSpec& spec, const DatasetSplit& data,
                                                 const TrainConfig& cfg) {
  if (data.train.empty()) throw std::invalid_argument("train_graft: no training pairs");
  const std::int64_t in_channels = data.train.front().modality.dim(0);
  SplitParts parts = split(pretrained, spec);
  BlockChain gn_front = build_grafted_frontend(parts.front, in_channels, cfg.seed);
  GraftTrainer trainer(pretrained, spec, std::move(gn_front), cfg);

  TrainReport report;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    std::ofstream step_log(fs::path(cfg.out_dir) / "steps.jsonl");
    report = trainer.run(data, &step_log);
  } else {
    report = trainer.run(data, nullptr);
  }
  return {trainer.release_model(), std::move(report)};
}

// ---------------------------------------------------------------------------
// Supervised reference training

namespace {

// Mean cross-entropy over the batch; writes d loss / d logits.
double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits) {
  const std::int64_t n = logits.dim(0), c = logits.dim(1);
  double loss = 0.0;
  for (std::int64_t b = 0; b < n; ++b) {
    const double* row = &logits(b, 0);
    double max_logit = row[0];
    for (std::int64_t k = 1; k < c; ++k) max_logit = std::max(max_logit, row[k]);
    double z = 0.0;
    for (std::int64_t k = 0; k < c; ++k) z += std::exp(row[k] - max_logit);
    const int label = labels[static_cast<std::size_t>(b)];
    loss += -(row[label] - max_logit - std::log(z));
    if (dlogits) {
      for (std::int64_t k = 0; k < c; ++k) {
        const double p = std::exp(row[k] - max_logit) / z;
        (*dlogits)(b, k) = (p - (k == label ? 1.0 : 0.0)) / static_cast<double>(n);
      }
    }
  }
  return loss / static_cast<double>(n);
}

}  // namespace

SupervisedReport train_supervised(BlockChain& model, std::span<const PairedSample> samples,
                                  bool use_modality, const SupervisedConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("train_supervised: no samples");
  for (const PairedSample& s : samples) {
    if (!s.label) throw std::invalid_argument("train_supervised: sample without label");
  }
  Rng rng(cfg.seed ^ 0xd1b54a32d192ed03ull);
  Adam optimizer(model.params(), model.grads(), cfg.lr);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  SupervisedReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::int64_t steps = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Tensor*> inputs;
      std::vector<int> labels;
      inputs.reserve(end - begin);
      labels.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const PairedSample& s = samples[order[k]];
        inputs.push_back(use_modality ? &s.modality : &s.frame);
        labels.push_back(*s.label);
      }
      const Tensor logits = model.forward(stack(inputs));
      Tensor dlogits(logits.shape());
      const double loss = cross_entropy(logits, labels, &dlogits);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("supervised training diverged at epoch " +
                                 std::to_string(epoch));
      }
      model.zero_grad();
      model.backward(dlogits, /*with_param_grads=*/true);
      optimizer.step();
      epoch_loss += loss;
      ++steps;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(steps));
  }
  return report;
}

namespace {

template <typename Forward>
std::vector<int> predict_impl(std::span<const PairedSample> samples, bool use_modality,
                              Forward&& forward) {
  std::vector<int> predictions;
  predictions.reserve(samples.size());
  constexpr std::size_t kBatch = 128;
  for (std::size_t begin = 0; begin < samples.size(); begin += kBatch) {
    const std::size_t end = std::min(samples.size(), begin + kBatch);
    std::vector<const Tensor*> inputs;
    inputs.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) {
      inputs.push_back(use_modality ? &samples[k].modality : &samples[k].frame);
    }
    const Tensor logits = forward(stack(inputs));
    const std::int64_t c = logits.dim(1);
    for (std::int64_t b = 0; b < logits.dim(0); ++b) {
      int best = 0;
      for (std::int64_t k = 1; k < c; ++k) {
        if (logits(b, k) > logits(b, best)) best = static_cast<int>(k);
      }
      predictions.push_back(best);
    }
  }
  return predictions;
}

std::vector<int> labels_of(std::span<const PairedSample> samples) {
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const PairedSample& s : samples) {
    if (!s.label) throw std::invalid_argument("evaluation requires labeled samples");
    labels.push_back(*s.label);
  }
  return labels;
}

}  // namespace

std::vector<int> predict_labels(const BlockChain& model, std::span<const PairedSample> samples,
                                bool use_modality) {
  return predict_impl(samples, use_modality, [&](const Tensor& x) { return model.infer(x); });
}

std::vector<int> predict_labels(const GraftedModel& model,
                                std::span<const PairedSample> samples) {
  return predict_impl(samples, true, [&](const Tensor& x) { return model.infer(x); });
}

double evaluate_grafted(const GraftedModel& model, std::span<const PairedSample> samples) {
  return top1_error(predict_labels(model, samples), labels_of(samples));
}

// ---------------------------------------------------------------------------
// Experiment harnesses

std::vector<AblationRow> run_ablation(const BlockChain& pretrained, const DatasetSplit& data,
                                      const TrainConfig& base_cfg, int repeats) {
  if (repeats < 1) throw std::invalid_argument("run_ablation: repeats must be >= 1");
  struct Subset {
    const char* name;
    bool frl, fel, fsl;
  };
  // Every nonempty subset of the three loss terms.
  const Subset subsets[] = {
      {"frl", true, false, false},          {"fel", false, true, false},
      {"fsl", false, false, true},          {"frl+fel", true, true, false},
      {"frl+fsl", true, false, true},       {"fel+fsl", false, true, true},
      {"frl+fel+fsl", true, true, true},
  };

  std::vector<AblationRow> rows;
  for (const Subset& subset : subsets) {
    AblationRow row;
    row.subset = subset.name;
    for (int r = 0; r < repeats; ++r) {
      TrainConfig cfg = base_cfg;
      cfg.use_frl = subset.frl;
      cfg.use_fel = subset.fel;
      cfg.use_fsl = subset.fsl;
      cfg.seed = base_cfg.seed + static_cast<std::uint64_t>(r) * 7919u;
      cfg.out_dir.clear();
      auto [model, report] = train_graft(pretrained, cfg.split, data, cfg);
      row.metrics.push_back(evaluate_grafted(model, data.test));
    }
    const double n = static_cast<double>(row.metrics.size());
    row.mean = std::accumulate(row.metrics.begin(), row.metrics.end(), 0.0) / n;
    double var = 0.0;
    for (double m : row.metrics) var += (m - row.mean) * (m - row.mean);
    row.stddev = row.metrics.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SplitSweepRow> run_split_sweep(const BlockChain& pretrained,
                                           std::span<const SplitSpec> specs,
                                           const DatasetSplit& data, const TrainConfig& cfg) {
  const std::int64_t total = pretrained.param_count();
  std::vector<SplitSweepRow> rows;
  for (const SplitSpec& spec : specs) {
    TrainConfig run_cfg = cfg;
    run_cfg.split = spec;
    run_cfg.out_dir.clear();
    auto [model, report] = train_graft(pretrained, spec, data, run_cfg);
    SplitSweepRow row;
    row.spec = spec;
    row.metric = evaluate_grafted(model, data.test);
    row.trainable = model.trainable_param_count();
    row.fraction = total > 0 ? static_cast<double>(row.trainable) / static_cast<double>(total) : 0;
    rows.push_back(row);
  }
  return rows;
}

std::string format_ablation_csv(std::span<const AblationRow> rows) {
  std::ostringstream out;
  out << "subset,mean,std";
  if (!rows.empty()) {
    for (std::size_t r = 0; r < rows.front().metrics.size(); ++r) out << ",run_" << r;
  }
  out << '\n';
  for (const AblationRow& row : rows) {
    out << row.subset << ',' << row.mean << ',' << row.stddev;
    for (double m : row.metrics) out << ',' << m;
    out << '\n';
  }
  return out.str();
}

std::string format_split_sweep_csv(std::span<const SplitSweepRow> rows) {
  std::ostringstream out;
  out << "front_end,mid_end,metric,trainable_params,fraction_of_total\n";
  for (const SplitSweepRow& row : rows) {
    out << row.spec.front_end << ',' << row.spec.mid_end << ',' << row.metric << ','
        << row.trainable << ',' << row.fraction << '\n';
  }
  return out.str();
}

}  // namespace graftkit
