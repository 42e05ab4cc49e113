#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <graftkit/digits.hpp>
#include <graftkit/event_voxel.hpp>
#include <graftkit/random.hpp>
#include <graftkit/tensor.hpp>

namespace graftkit {

/*
 * One time-synchronized training pair: an intensity frame and the
 * co-recorded modality input (event voxel grid or thermal-like image) over
 * the same pixel grid. Labels ride along for evaluation only; the grafting
 * losses never see them.
 */
struct PairedSample {
  Tensor frame;     // (1, H, W), values in [0, 1]
  Tensor modality;  // (D, H, W) voxel grid or (1, H, W) image
  std::int64_t timestamp = 0;
  std::optional<int> label;
};

struct DatasetSplit {
  std::vector<PairedSample> train;
  std::vector<PairedSample> test;
};

// Integer translation with zero fill; dx > 0 moves content right, dy > 0
// moves it down. With crop_to_common the |dx| x |dy| borders that only one
// of the two alignments covers are cut away instead.
Tensor align_shift(const Tensor& frame, int dx, int dy, bool crop_to_common = false);

// One crop window applied to both halves of the pair.
PairedSample random_crop_pair(const PairedSample& sample, std::int64_t size, Rng& rng);

// Prefix of the time-ordered samples becomes the training set, the suffix
// the test set; the boundary never splits a timestamp.
DatasetSplit split_temporal(std::vector<PairedSample> samples, double train_fraction);

struct SynthEventConfig {
  int steps = 8;             // sub-steps per trajectory leg
  int legs = 2;              // legs with rotated headings, so strokes of any
                             // orientation cross the brightness threshold
  double threshold = 0.1;    // log-intensity contrast threshold
  std::int64_t slices = 3;   // voxel grid depth
  double log_eps = 0.01;
  double min_shift = 1.5;    // per-leg displacement in pixels
  double max_shift = 3.5;
  bool keep_streams = false;  // retain raw events for dataset export
};

struct SynthEventResult {
  std::vector<PairedSample> samples;
  // Raw streams behind samples[i].modality, kept so datasets can be exported
  // in the event-stream format instead of pre-voxelized.
  std::vector<std::vector<EventRecord>> event_streams;
  std::size_t skipped = 0;  // images that produced no events
};

/*
 * Event-camera stand-in: slides each image along a small random straight
 * trajectory that ends at the untranslated position, fires an event whenever
 * a pixel's log intensity moves a full threshold away from its level at the
 * last event, and pairs the trajectory-end frame with the voxelized events.
 */
SynthEventResult synth_event_pairs(std::span<const LabeledImage> images,
                                   const SynthEventConfig& cfg, std::uint64_t seed);

struct SynthThermalConfig {
  double noise_sigma = 0.05;
  int blur_radius = 1;
  bool invert = true;  // contrast remap; false keeps the identity mapping
};

// Thermal-like stand-in: blurred, contrast-remapped copy of the frame plus
// Gaussian noise. Spatially aligned with the frame by construction.
std::vector<PairedSample> synth_thermal_pairs(std::span<const LabeledImage> images,
                                              const SynthThermalConfig& cfg, std::uint64_t seed);

// JSON-lines manifest with per-sample {frame, modality, timestamp, label?}
// records next to the referenced files. Event modalities are stored as
// `t,x,y,p` CSV and voxelized at load time with `voxel_slices` slices.
void write_paired_dataset(const std::string& dir, std::span<const PairedSample> samples);
void write_paired_event_dataset(const std::string& dir, std::span<const PairedSample> samples,
                                std::span<const std::vector<EventRecord>> event_streams);
std::vector<PairedSample> read_paired_dataset(const std::string& manifest_path,
                                              std::int64_t voxel_slices);

}  // namespace graftkit
