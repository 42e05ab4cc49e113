#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <graftkit/adam.hpp>
#include <graftkit/losses.hpp>
#include <graftkit/model_graph.hpp>
#include <graftkit/paired_data.hpp>

namespace graftkit {

struct TrainConfig {
  int epochs = 100;
  double lr = 1e-4;
  int batch_size = 8;
  std::int64_t crop = 224;
  LossWeights weights;
  bool use_frl = true;
  bool use_fel = true;
  bool use_fsl = true;
  SplitSpec split = kLenetDefaultSplit;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs between checkpoints; 0 = final/best only
  std::string out_dir;       // empty: keep everything in memory

  void validate() const;
};

struct StepRecord {
  std::int64_t step = 0;
  LossBreakdown losses;
  double grad_norm = 0.0;
};

struct TrainReport {
  std::vector<LossBreakdown> epoch_curve;  // one entry per epoch
  double wall_seconds = 0.0;
  std::string final_checkpoint;
  std::string best_checkpoint;
  TrainConfig config;  // echo of the configuration that produced the run
};

/*
 * The grafting loop. Targets H and R come from the frozen pretrained front
 * end and middle net with no gradients attached; the grafted front end is
 * the only part that ever receives an optimizer step. Aborts if the total
 * loss stops being finite rather than skipping the batch.
 */
class GraftTrainer {
 public:
  GraftTrainer(const BlockChain& pretrained, const SplitSpec& spec, BlockChain gn_front,
               const TrainConfig& cfg);

  // One optimizer step on a (frames, modality) batch.
  StepRecord step(const Tensor& frames, const Tensor& modality);

  TrainReport run(const DatasetSplit& data, std::ostream* step_log = nullptr);

  const GraftedModel& model() const { return model_; }
  GraftedModel&& release_model() { return std::move(model_); }
  const BlockChain& intensity_front() const { return front_; }

 private:
  TrainConfig cfg_;
  BlockChain front_;    // pretrained intensity front end (frozen target)
  GraftedModel model_;  // gn_front trainable; mid/last frozen
  Adam optimizer_;
  std::int64_t step_count_ = 0;
};

// Builds the grafted front end from the pretrained front template (modality
// channel count taken from the data) and trains it.
std::pair<GraftedModel, TrainReport> train_graft(const BlockChain& pretrained,
                                                 const SplitSpec& spec, const DatasetSplit& data,
                                                 const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Supervised reference training (pretraining the backbone and the
// supervised-modality baseline).

struct SupervisedConfig {
  int epochs = 5;
  double lr = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

struct SupervisedReport {
  std::vector<double> epoch_loss;
};

// Cross-entropy training of a classifier chain in place. Inputs are sample
// frames, or the modality tensors when use_modality is set; every sample
// must carry a label.
SupervisedReport train_supervised(BlockChain& model, std::span<const PairedSample> samples,
                                  bool use_modality, const SupervisedConfig& cfg);

std::vector<int> predict_labels(const BlockChain& model, std::span<const PairedSample> samples,
                                bool use_modality);
std::vector<int> predict_labels(const GraftedModel& model, std::span<const PairedSample> samples);

// Top-1 error (%) of a grafted model on labeled pairs.
double evaluate_grafted(const GraftedModel& model, std::span<const PairedSample> samples);

// ---------------------------------------------------------------------------
// Experiment harnesses

struct AblationRow {
  std::string subset;           // e.g. "frl+fel"
  std::vector<double> metrics;  // one per repeat, top-1 error (%)
  double mean = 0.0;
  double stddev = 0.0;
};

// Trains every nonempty loss-term subset `repeats` times and reports the
// evaluation metric per subset.
std::vector<AblationRow> run_ablation(const BlockChain& pretrained, const DatasetSplit& data,
                                      const TrainConfig& base_cfg, int repeats = 5);

struct SplitSweepRow {
  SplitSpec spec;
  double metric = 0.0;          // top-1 error (%)
  std::int64_t trainable = 0;   // grafted front end parameters
  double fraction = 0.0;        // of the pretrained total
};

std::vector<SplitSweepRow> run_split_sweep(const BlockChain& pretrained,
                                           std::span<const SplitSpec> specs,
                                           const DatasetSplit& data, const TrainConfig& cfg);

std::string format_ablation_csv(std::span<const AblationRow> rows);
std::string format_split_sweep_csv(std::span<const SplitSweepRow> rows);

}  // namespace graftkit
