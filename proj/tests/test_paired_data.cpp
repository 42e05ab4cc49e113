#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <graftkit/digits.hpp>
#include <graftkit/paired_data.hpp>

using namespace graftkit;
namespace fs = std::filesystem;

namespace {

Tensor image_with_dot(std::int64_t h, std::int64_t w, std::int64_t y, std::int64_t x) {
  Tensor img({1, h, w});
  img(0, y, x) = 1.0;
  return img;
}

fs::path temp_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "graftkit_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("align_shift moves content with zero fill") {
  Tensor img({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(bit_equal(align_shift(img, 0, 0), img));

  const Tensor right = align_shift(img, 1, 0);
  CHECK(right(0, 0, 0) == 0.0);
  CHECK(right(0, 0, 1) == 1.0);
  CHECK(right(0, 1, 0) == 0.0);
  CHECK(right(0, 1, 1) == 3.0);

  CHECK_THROWS_AS(align_shift(img, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(align_shift(img, 0, -2), std::invalid_argument);
}

TEST_CASE("align_shift round trip restores the interior") {
  Rng rng(4);
  Tensor img({1, 8, 9});
  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
  const int dx = 2, dy = -1;
  const Tensor round = align_shift(align_shift(img, dx, dy), -dx, -dy);
  // Interior region: pixels whose round trip never left the frame.
  for (std::int64_t y = std::max(0, -dy); y < 8 - std::max(0, dy); ++y) {
    for (std::int64_t x = std::max(0, -dx); x < 9 - std::max(0, dx); ++x) {
      CHECK(round(0, y, x) == img(0, y, x));
    }
  }
}

TEST_CASE("align_shift can crop to the common region") {
  Tensor img({1, 4, 4});
  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = static_cast<double>(i);
  const Tensor cropped = align_shift(img, 1, 1, /*crop_to_common=*/true);
  CHECK(cropped.shape() == std::vector<std::int64_t>{1, 3, 3});
  CHECK(cropped(0, 0, 0) == img(0, 0, 0));
}

TEST_CASE("random_crop_pair keeps the pair aligned") {
  Rng rng(9);
  PairedSample sample;
  sample.frame = Tensor({1, 12, 12});
  sample.modality = Tensor({3, 12, 12});
  // Marker pattern: unique value per position, repeated across tensors.
  for (std::int64_t y = 0; y < 12; ++y) {
    for (std::int64_t x = 0; x < 12; ++x) {
      sample.frame(0, y, x) = static_cast<double>(y * 12 + x);
      for (std::int64_t d = 0; d < 3; ++d) {
        sample.modality(d, y, x) = static_cast<double>(y * 12 + x) + 1000.0 * (d + 1);
      }
    }
  }
  sample.label = 5;

  for (int trial = 0; trial < 20; ++trial) {
    const PairedSample crop = random_crop_pair(sample, 5, rng);
    CHECK(crop.frame.shape() == std::vector<std::int64_t>{1, 5, 5});
    CHECK(crop.modality.shape() == std::vector<std::int64_t>{3, 5, 5});
    CHECK(crop.label == sample.label);
    // Same offset on both halves: markers must coincide.
    for (std::int64_t y = 0; y < 5; ++y) {
      for (std::int64_t x = 0; x < 5; ++x) {
        CHECK(crop.modality(0, y, x) - 1000.0 == crop.frame(0, y, x));
        CHECK(crop.modality(2, y, x) - 3000.0 == crop.frame(0, y, x));
      }
    }
  }

  const PairedSample full = random_crop_pair(sample, 12, rng);
  CHECK(bit_equal(full.frame, sample.frame));
  CHECK(bit_equal(full.modality, sample.modality));

  CHECK_THROWS_AS(random_crop_pair(sample, 13, rng), std::invalid_argument);

  Rng a(77), b(77);
  const PairedSample ca = random_crop_pair(sample, 4, a);
  const PairedSample cb = random_crop_pair(sample, 4, b);
  CHECK(bit_equal(ca.frame, cb.frame));
}

TEST_CASE("split_temporal takes a strict prefix") {
  std::vector<PairedSample> samples(7000);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].timestamp = static_cast<std::int64_t>(i) * 10;
  }
  const DatasetSplit split = split_temporal(samples, 5000.0 / 7000.0);
  CHECK(split.train.size() == 5000);
  CHECK(split.test.size() == 2000);
  CHECK(split.train.back().timestamp < split.test.front().timestamp);

  std::vector<PairedSample> ten(10);
  for (std::size_t i = 0; i < ten.size(); ++i) ten[i].timestamp = static_cast<std::int64_t>(i);
  const DatasetSplit half = split_temporal(ten, 0.5);
  CHECK(half.train.size() == 5);
  CHECK(half.test.front().timestamp == 5);

  CHECK_THROWS_AS(split_temporal(ten, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(split_temporal(ten, 1.0), std::invalid_argument);

  std::vector<PairedSample> unsorted(3);
  unsorted[0].timestamp = 5;
  unsorted[1].timestamp = 1;
  unsorted[2].timestamp = 9;
  CHECK_THROWS_AS(split_temporal(unsorted, 0.5), std::invalid_argument);
}

TEST_CASE("synth_event_pairs emits no events without motion") {
  std::vector<LabeledImage> images = {{image_with_dot(9, 9, 4, 4), 1}};
  SynthEventConfig cfg;
  cfg.min_shift = 0.0;
  cfg.max_shift = 0.0;
  const SynthEventResult result = synth_event_pairs(images, cfg, 3);
  CHECK(result.samples.empty());
  CHECK(result.skipped == 1);
}

TEST_CASE("synth_event_pairs skips blank images and keeps counting") {
  std::vector<LabeledImage> images = {{Tensor({1, 9, 9}), 0},
                                      {image_with_dot(9, 9, 4, 4), 1}};
  const SynthEventResult result = synth_event_pairs(images, SynthEventConfig{}, 3);
  CHECK(result.samples.size() == 1);
  CHECK(result.skipped == 1);
  CHECK(result.samples[0].label == 1);
}

TEST_CASE("a moving dot fires OFF at the old location and ON at the new one") {
  std::vector<LabeledImage> images = {{image_with_dot(9, 9, 4, 4), 1}};
  SynthEventConfig cfg;
  cfg.steps = 8;
  cfg.threshold = 0.05;
  cfg.min_shift = 2.0;
  cfg.max_shift = 2.0;
  cfg.keep_streams = true;
  const SynthEventResult result = synth_event_pairs(images, cfg, 11);
  REQUIRE(result.samples.size() == 1);
  REQUIRE(result.event_streams.size() == 1);

  // The trajectory ends at the untranslated position, so the paired frame is
  // the input image itself.
  CHECK(bit_equal(result.samples[0].frame, images[0].image));

  Tensor net({9, 9});
  for (const EventRecord& e : result.event_streams[0]) net(e.y, e.x) += e.p;
  CHECK(net(4, 4) > 10.0);  // strong net brightening where the dot ends up
  double min_net = 0.0;
  for (std::int64_t i = 0; i < net.numel(); ++i) min_net = std::min(min_net, net[i]);
  CHECK(min_net < -10.0);  // strong net darkening where it started
}

TEST_CASE("synth_event_pairs is reproducible") {
  const auto images = make_digit_dataset(5, 123);
  SynthEventConfig cfg;
  cfg.threshold = 0.2;
  const SynthEventResult a = synth_event_pairs(images, cfg, 9);
  const SynthEventResult b = synth_event_pairs(images, cfg, 9);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(bit_equal(a.samples[i].modality, b.samples[i].modality));
  }
  const SynthEventResult c = synth_event_pairs(images, cfg, 10);
  bool any_diff = false;
  for (std::size_t i = 0; i < std::min(a.samples.size(), c.samples.size()); ++i) {
    if (!bit_equal(a.samples[i].modality, c.samples[i].modality)) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("synth_thermal_pairs remaps the frame") {
  const auto images = make_digit_dataset(3, 7);

  SynthThermalConfig identity_cfg;
  identity_cfg.noise_sigma = 0.0;
  identity_cfg.blur_radius = 0;
  identity_cfg.invert = false;
  const auto plain = synth_thermal_pairs(images, identity_cfg, 1);
  REQUIRE(plain.size() == 3);
  CHECK(max_abs_diff(plain[0].modality, plain[0].frame) == 0.0);

  SynthThermalConfig invert_cfg = identity_cfg;
  invert_cfg.invert = true;
  const auto inverted = synth_thermal_pairs(images, invert_cfg, 1);
  for (std::int64_t i = 0; i < inverted[0].modality.numel(); ++i) {
    CHECK(inverted[0].modality[i] == doctest::Approx(1.0 - inverted[0].frame[i]));
  }

  SynthThermalConfig noisy;
  noisy.noise_sigma = 0.1;
  const auto na = synth_thermal_pairs(images, noisy, 5);
  const auto nb = synth_thermal_pairs(images, noisy, 5);
  CHECK(bit_equal(na[1].modality, nb[1].modality));
}

TEST_CASE("digit dataset is deterministic and well-formed") {
  const auto a = make_digit_dataset(40, 11);
  const auto b = make_digit_dataset(40, 11);
  REQUIRE(a.size() == 40);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(bit_equal(a[i].image, b[i].image));
    CHECK(a[i].label >= 0);
    CHECK(a[i].label <= 9);
    double mass = 0.0;
    for (std::int64_t k = 0; k < a[i].image.numel(); ++k) {
      CHECK(a[i].image[k] >= 0.0);
      CHECK(a[i].image[k] <= 1.0);
      mass += a[i].image[k];
    }
    CHECK(mass > 5.0);  // a digit is actually drawn
  }
}

TEST_CASE("paired event dataset round trips through the manifest") {
  const fs::path dir = temp_dir("manifest_events");
  const auto images = make_digit_dataset(4, 31);
  SynthEventConfig cfg;
  cfg.threshold = 0.2;
  cfg.keep_streams = true;
  const SynthEventResult result = synth_event_pairs(images, cfg, 2);
  REQUIRE(!result.samples.empty());

  write_paired_event_dataset(dir.string(), result.samples, result.event_streams);
  const auto loaded = read_paired_dataset((dir / "manifest.jsonl").string(), cfg.slices);
  REQUIRE(loaded.size() == result.samples.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].timestamp == result.samples[i].timestamp);
    CHECK(loaded[i].label == result.samples[i].label);
    // Events round trip exactly, so the voxel grid is identical.
    CHECK(bit_equal(loaded[i].modality, result.samples[i].modality));
    // Frames pass through 8-bit PNG quantization.
    CHECK(max_abs_diff(loaded[i].frame, result.samples[i].frame) < 0.5 / 255.0 + 1e-9);
  }
}

TEST_CASE("manifest rejects unknown keys") {
  const fs::path dir = temp_dir("manifest_bad");
  std::ofstream(dir / "manifest.jsonl")
      << R"({"frame_path":"a.png","modality_path":"b.csv","timestamp":0,"surprise":1})" << "\n";
  CHECK_THROWS_WITH_AS(read_paired_dataset((dir / "manifest.jsonl").string(), 3),
                       doctest::Contains("surprise"), std::runtime_error);
}
