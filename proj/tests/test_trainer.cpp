#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include <graftkit/checkpoint.hpp>
#include <graftkit/evaluation.hpp>
#include <graftkit/digits.hpp>
#include <graftkit/paired_data.hpp>
#include <graftkit/trainer.hpp>

using namespace graftkit;
namespace fs = std::filesystem;

namespace {

// Small paired event dataset shared across test cases.
const DatasetSplit& event_data() {
  static const DatasetSplit data = [] {
    const auto images = make_digit_dataset(160, 42);
    SynthEventConfig cfg;
    cfg.threshold = 0.25;
    return split_temporal(synth_event_pairs(images, cfg, 7).samples, 0.75);
  }();
  return data;
}

// Intensity-as-modality pairs for the identity fixed point.
std::vector<PairedSample> passthrough_pairs(std::size_t count, std::uint64_t seed) {
  const auto images = make_digit_dataset(count, seed);
  std::vector<PairedSample> samples;
  for (const LabeledImage& li : images) {
    PairedSample s;
    s.frame = li.image;
    s.modality = li.image;
    s.timestamp = static_cast<std::int64_t>(samples.size());
    s.label = li.label;
    samples.push_back(std::move(s));
  }
  return samples;
}

TrainConfig desk_config() {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.lr = 1e-3;
  cfg.batch_size = 32;
  cfg.crop = 28;
  cfg.weights.gamma_h = 0.01;
  cfg.weights.gamma_r = 0.01;
  cfg.seed = 1;
  return cfg;
}

std::vector<Tensor> snapshot(BlockChain& chain) {
  std::vector<Tensor> out;
  for (Tensor* p : chain.params()) out.push_back(*p);
  return out;
}

void check_unchanged(BlockChain& chain, const std::vector<Tensor>& before) {
  const auto params = chain.params();
  REQUIRE(params.size() == before.size());
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(bit_equal(*params[i], before[i]));
}

Tensor batch_of(std::span<const PairedSample> samples, bool modality, std::size_t count) {
  const Tensor& first = modality ? samples[0].modality : samples[0].frame;
  Tensor out({static_cast<std::int64_t>(count), first.dim(0), first.dim(1), first.dim(2)});
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor& t = modality ? samples[i].modality : samples[i].frame;
    std::copy(t.data(), t.data() + t.numel(), out.data() + t.numel() * static_cast<std::int64_t>(i));
  }
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig cfg = desk_config();
  cfg.use_frl = cfg.use_fel = cfg.use_fsl = false;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("loss term"), std::invalid_argument);
  cfg = desk_config();
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = desk_config();
  cfg.weights.alpha = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("identity graft is a fixed point of the training step") {
  const BlockChain lenet = make_lenet5(1, 11);
  SplitParts parts = split(lenet, kLenetDefaultSplit);

  TrainConfig cfg = desk_config();
  cfg.weights.gamma_h = 1e6;  // stock weights; the losses are exactly zero anyway
  cfg.weights.gamma_r = 1e7;
  GraftTrainer trainer(lenet, kLenetDefaultSplit, parts.front, cfg);

  const auto pairs = passthrough_pairs(8, 3);
  const auto before = snapshot(const_cast<BlockChain&>(trainer.model().gn_front));
  const StepRecord rec = trainer.step(batch_of(pairs, false, 8), batch_of(pairs, true, 8));

  CHECK(rec.losses.total == 0.0);
  CHECK(rec.grad_norm < 1e-8);
  check_unchanged(const_cast<BlockChain&>(trainer.model().gn_front), before);
}

TEST_CASE("training is deterministic under the seed and blind to labels") {
  const BlockChain lenet = make_lenet5(1, 12);
  TrainConfig cfg = desk_config();
  cfg.epochs = 2;

  DatasetSplit data = event_data();
  const auto run = [&](const DatasetSplit& d) {
    return train_graft(lenet, cfg.split, d, cfg).second;
  };
  const TrainReport a = run(data);
  const TrainReport b = run(data);
  REQUIRE(a.epoch_curve.size() == 2);
  CHECK(a.epoch_curve[0].total == b.epoch_curve[0].total);
  CHECK(std::fabs(a.epoch_curve[0].total - b.epoch_curve[0].total) < 1e-6);
  CHECK(a.epoch_curve[1].frl == b.epoch_curve[1].frl);

  // Labels never reach the grafting losses.
  DatasetSplit scrambled = data;
  for (PairedSample& s : scrambled.train) s.label = 9 - *s.label;
  const TrainReport c = run(scrambled);
  CHECK(c.epoch_curve[0].total == a.epoch_curve[0].total);

  TrainConfig other_seed = cfg;
  other_seed.seed = cfg.seed + 1;
  const TrainReport d = train_graft(lenet, cfg.split, data, other_seed).second;
  CHECK(d.epoch_curve[0].total != a.epoch_curve[0].total);
}

TEST_CASE("frozen parts and targets never change during training") {
  const BlockChain lenet = make_lenet5(1, 13);
  SplitParts parts = split(lenet, kLenetDefaultSplit);
  const DatasetSplit& data = event_data();

  const Tensor probe = batch_of(data.test, false, 4);
  const Tensor h_before = parts.front.infer(probe);
  const Tensor r_before = parts.mid.infer(h_before);

  TrainConfig cfg = desk_config();
  cfg.epochs = 2;
  BlockChain gn = build_grafted_frontend(parts.front, data.train[0].modality.dim(0), cfg.seed);
  GraftTrainer trainer(lenet, cfg.split, std::move(gn), cfg);

  auto mid_before = snapshot(const_cast<BlockChain&>(trainer.model().mid));
  auto last_before = snapshot(const_cast<BlockChain&>(trainer.model().last));
  trainer.run(data);

  check_unchanged(const_cast<BlockChain&>(trainer.model().mid), mid_before);
  check_unchanged(const_cast<BlockChain&>(trainer.model().last), last_before);

  // Targets recomputed after training are bit-identical.
  CHECK(bit_equal(trainer.intensity_front().infer(probe), h_before));
  CHECK(bit_equal(trainer.model().mid.infer(h_before), r_before));
}

TEST_CASE("disabling a term equals running it with zero weight") {
  const BlockChain lenet = make_lenet5(1, 14);
  SplitParts parts = split(lenet, kLenetDefaultSplit);
  const DatasetSplit& data = event_data();
  const Tensor frames = batch_of(data.train, false, 8);
  const Tensor modality = batch_of(data.train, true, 8);

  const auto step_once = [&](const TrainConfig& cfg) {
    BlockChain gn = build_grafted_frontend(parts.front, modality.dim(1), 5);
    GraftTrainer trainer(lenet, cfg.split, std::move(gn), cfg);
    trainer.step(frames, modality);
    std::vector<Tensor> out;
    for (Tensor* p : const_cast<BlockChain&>(trainer.model().gn_front).params()) {
      out.push_back(*p);
    }
    return out;
  };

  TrainConfig disabled = desk_config();
  disabled.use_fel = false;
  disabled.use_fsl = false;

  TrainConfig zeroed = desk_config();
  zeroed.weights.beta = 0.0;
  zeroed.weights.gamma_h = 0.0;
  zeroed.weights.gamma_r = 0.0;

  const auto params_disabled = step_once(disabled);
  const auto params_zeroed = step_once(zeroed);
  REQUIRE(params_disabled.size() == params_zeroed.size());
  for (std::size_t i = 0; i < params_disabled.size(); ++i) {
    CHECK(bit_equal(params_disabled[i], params_zeroed[i]));
  }
}

TEST_CASE("training aborts when the loss diverges") {
  const BlockChain lenet = make_lenet5(1, 15);
  SplitParts parts = split(lenet, kLenetDefaultSplit);
  const DatasetSplit& data = event_data();

  TrainConfig cfg = desk_config();
  cfg.lr = 1e160;  // absurd step size forces an overflow
  BlockChain gn = build_grafted_frontend(parts.front, data.train[0].modality.dim(0), 5);
  GraftTrainer trainer(lenet, cfg.split, std::move(gn), cfg);

  const Tensor frames = batch_of(data.train, false, 8);
  const Tensor modality = batch_of(data.train, true, 8);
  CHECK_THROWS_WITH_AS(
      [&] {
        for (int i = 0; i < 5; ++i) trainer.step(frames, modality);
      }(),
      doctest::Contains("diverged"), std::runtime_error);
}

TEST_CASE("desk-scale run shows a decreasing median epoch-loss trend") {
  const BlockChain lenet = make_lenet5(1, 23);
  DatasetSplit small;
  small.train.assign(event_data().train.begin(), event_data().train.begin() + 120);
  small.test = event_data().test;

  TrainConfig cfg = desk_config();
  cfg.epochs = 6;
  cfg.batch_size = 256;  // larger than the training set: one step per epoch
  cfg.lr = 1e-3;
  const TrainReport report = train_graft(lenet, cfg.split, small, cfg).second;

  const auto median3 = [](double a, double b, double c) {
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
  };
  const auto& curve = report.epoch_curve;
  REQUIRE(curve.size() == 6);
  const double early = median3(curve[0].total, curve[1].total, curve[2].total);
  const double late = median3(curve[3].total, curve[4].total, curve[5].total);
  CHECK(late < early);
}

TEST_CASE("frl-only training reduces frl over ten epochs (median of five seeds)") {
  const BlockChain lenet = make_lenet5(1, 16);
  DatasetSplit small;
  small.train.assign(event_data().train.begin(), event_data().train.begin() + 80);
  small.test = event_data().test;

  std::vector<double> reductions;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg = desk_config();
    cfg.epochs = 10;
    cfg.seed = 100 + seed;
    cfg.use_fel = false;
    cfg.use_fsl = false;
    const TrainReport report = train_graft(lenet, cfg.split, small, cfg).second;
    reductions.push_back(report.epoch_curve.front().frl - report.epoch_curve.back().frl);
  }
  std::sort(reductions.begin(), reductions.end());
  CHECK(reductions[2] > 0.0);
}

TEST_CASE("supervised training fits the digit task") {
  const auto samples = passthrough_pairs(1000, 21);
  BlockChain model = make_lenet5(1, 3);
  SupervisedConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 4;
  const SupervisedReport report = train_supervised(model, samples, false, cfg);
  REQUIRE(report.epoch_loss.size() == 3);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());

  std::vector<int> labels;
  for (const auto& s : samples) labels.push_back(*s.label);
  const double err = top1_error(predict_labels(model, samples, false), labels);
  CHECK(err < 10.0);

  PairedSample unlabeled;
  unlabeled.frame = samples[0].frame;
  unlabeled.modality = samples[0].modality;
  CHECK_THROWS_AS(train_supervised(model, std::vector<PairedSample>{unlabeled}, false, cfg),
                  std::invalid_argument);
}

TEST_CASE("ablation harness covers every nonempty subset") {
  const BlockChain lenet = make_lenet5(1, 17);
  DatasetSplit small;
  small.train.assign(event_data().train.begin(), event_data().train.begin() + 48);
  small.test.assign(event_data().test.begin(), event_data().test.begin() + 24);

  TrainConfig cfg = desk_config();
  const auto rows = run_ablation(lenet, small, cfg, 2);
  REQUIRE(rows.size() == 7);
  const std::vector<std::string> expected = {"frl",     "fel",     "fsl",        "frl+fel",
                                             "frl+fsl", "fel+fsl", "frl+fel+fsl"};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].subset == expected[i]);
    CHECK(rows[i].metrics.size() == 2);
    for (const double m : rows[i].metrics) {
      CHECK(m >= 0.0);
      CHECK(m <= 100.0);
    }
    const double mean = (rows[i].metrics[0] + rows[i].metrics[1]) / 2.0;
    CHECK(rows[i].mean == doctest::Approx(mean));
  }
  const std::string csv = format_ablation_csv(rows);
  CHECK(csv.find("subset,mean,std,run_0,run_1") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
}

TEST_CASE("split sweep reports one row per variant with monotone front sizes") {
  const BlockChain lenet = make_lenet5(1, 18);
  DatasetSplit small;
  small.train.assign(event_data().train.begin(), event_data().train.begin() + 48);
  small.test.assign(event_data().test.begin(), event_data().test.begin() + 24);

  TrainConfig cfg = desk_config();
  const auto variants = reference_split_variants();
  const auto rows = run_split_sweep(lenet, variants, small, cfg);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].trainable > 0);
    CHECK(rows[i].fraction > 0.0);
    CHECK(rows[i].fraction < 1.0);
    // Deeper front ends never shrink the trainable budget.
    for (std::size_t j = 0; j < i; ++j) {
      if (variants[j].front_end <= variants[i].front_end) {
        CHECK(rows[j].trainable <= rows[i].trainable);
      }
    }
  }
  const std::string csv = format_split_sweep_csv(rows);
  CHECK(csv.find("front_end,mid_end,metric,trainable_params,fraction_of_total") == 0);
}

TEST_CASE("run writes checkpoints and step logs") {
  const fs::path dir = fs::temp_directory_path() / "graftkit_tests" / "train_out";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const BlockChain lenet = make_lenet5(1, 19);
  DatasetSplit small;
  small.train.assign(event_data().train.begin(), event_data().train.begin() + 32);
  small.test.assign(event_data().test.begin(), event_data().test.begin() + 8);

  TrainConfig cfg = desk_config();
  cfg.epochs = 2;
  cfg.checkpoint_every = 1;
  cfg.out_dir = dir.string();
  const auto [model, report] = train_graft(lenet, cfg.split, small, cfg);

  CHECK(fs::exists(dir / "checkpoint_final.gkpt"));
  CHECK(fs::exists(dir / "checkpoint_best.gkpt"));
  CHECK(fs::exists(dir / "checkpoint_epoch1.gkpt"));
  CHECK(fs::exists(dir / "steps.jsonl"));
  CHECK(report.epoch_curve.size() == 2);
  CHECK(report.wall_seconds > 0.0);

  const Checkpoint ckpt = load_checkpoint((dir / "checkpoint_final.gkpt").string());
  const GraftedModel restored = assemble_grafted(ckpt);
  const Tensor v = batch_of(small.test, true, 4);
  CHECK(bit_equal(restored.infer(v), model.infer(v)));
}

TEST_CASE("crop path works on spatially flexible chains") {
  Rng rng(33);
  // Conv-only toy backbone so crops of any size flow through.
  std::vector<Block> blocks;
  Block b0("stage0");
  auto c0 = std::make_unique<Conv2d>(1, 4, 3, 1);
  c0->init(rng);
  b0.add(std::move(c0));
  b0.add(std::make_unique<ReLU>());
  blocks.push_back(std::move(b0));
  Block b1("stage1");
  auto c1 = std::make_unique<Conv2d>(4, 6, 3, 1);
  c1->init(rng);
  b1.add(std::move(c1));
  blocks.push_back(std::move(b1));
  Block b2("stage2");
  auto c2 = std::make_unique<Conv2d>(6, 4, 3, 1);
  c2->init(rng);
  b2.add(std::move(c2));
  blocks.push_back(std::move(b2));
  const BlockChain chain(std::move(blocks), InputSpec{1, 16, 16});

  DatasetSplit data;
  for (int i = 0; i < 12; ++i) {
    PairedSample s;
    s.frame = Tensor({1, 16, 16});
    s.modality = Tensor({2, 16, 16});
    for (std::int64_t k = 0; k < s.frame.numel(); ++k) s.frame[k] = rng.uniform();
    for (std::int64_t k = 0; k < s.modality.numel(); ++k) s.modality[k] = rng.uniform();
    s.timestamp = i;
    (i < 9 ? data.train : data.test).push_back(std::move(s));
  }

  TrainConfig cfg = desk_config();
  cfg.crop = 12;
  cfg.batch_size = 4;
  cfg.split = SplitSpec{1, 2};
  const auto [model, report] = train_graft(chain, cfg.split, data, cfg);
  CHECK(report.epoch_curve.size() == 1);
  CHECK(std::isfinite(report.epoch_curve[0].total));
}
