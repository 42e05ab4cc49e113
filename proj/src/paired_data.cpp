#include <graftkit/paired_data.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include <graftkit/event_voxel.hpp>
#include <graftkit/image_io.hpp>

namespace graftkit {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor align_shift(const Tensor& frame, int dx, int dy, bool crop_to_common) {
  if (frame.rank() != 3) {
    throw std::invalid_argument("align_shift: expected (c, h, w) tensor, got " +
                                shape_str(frame.shape()));
  }
  const std::int64_t c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
  if (std::abs(dx) >= w || std::abs(dy) >= h) {
    throw std::invalid_argument("align_shift: shift (" + std::to_string(dx) + ", " +
                                std::to_string(dy) + ") out of range for " + std::to_string(w) +
                                "x" + std::to_string(h) + " frame");
  }
  Tensor shifted({c, h, w});
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < h; ++y) {
      const std::int64_t sy = y - dy;
      if (sy < 0 || sy >= h) continue;
      for (std::int64_t x = 0; x < w; ++x) {
        const std::int64_t sx = x - dx;
        if (sx < 0 || sx >= w) continue;
        shifted(ch, y, x) = frame(ch, sy, sx);
      }
    }
  }
  if (!crop_to_common) return shifted;

  const std::int64_t y0 = std::max<std::int64_t>(0, dy), x0 = std::max<std::int64_t>(0, dx);
  const std::int64_t ch_h = h - std::abs(dy), ch_w = w - std::abs(dx);
  Tensor cropped({c, ch_h, ch_w});
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < ch_h; ++y) {
      for (std::int64_t x = 0; x < ch_w; ++x) {
        cropped(ch, y, x) = shifted(ch, y0 + y, x0 + x);
      }
    }
  }
  return cropped;
}

namespace {

Tensor crop3(const Tensor& t, std::int64_t y0, std::int64_t x0, std::int64_t size) {
  Tensor out({t.dim(0), size, size});
  for (std::int64_t c = 0; c < t.dim(0); ++c) {
    for (std::int64_t y = 0; y < size; ++y) {
      for (std::int64_t x = 0; x < size; ++x) out(c, y, x) = t(c, y0 + y, x0 + x);
    }
  }
  return out;
}

}  // namespace

PairedSample random_crop_pair(const PairedSample& sample, std::int64_t size, Rng& rng) {
  const std::int64_t h = sample.frame.dim(1), w = sample.frame.dim(2);
  if (sample.modality.dim(1) != h || sample.modality.dim(2) != w) {
    throw std::invalid_argument("random_crop_pair: frame and modality spatial dims differ");
  }
  if (size < 1 || size > h || size > w) {
    throw std::invalid_argument("random_crop_pair: crop size " + std::to_string(size) +
                                " does not fit " + std::to_string(w) + "x" + std::to_string(h));
  }
  const std::int64_t y0 = h == size ? 0 : rng.uniform_int(h - size + 1);
  const std::int64_t x0 = w == size ? 0 : rng.uniform_int(w - size + 1);
  PairedSample out;
  out.frame = crop3(sample.frame, y0, x0, size);
  out.modality = crop3(sample.modality, y0, x0, size);
  out.timestamp = sample.timestamp;
  out.label = sample.label;
  return out;
}

DatasetSplit split_temporal(std::vector<PairedSample> samples, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_temporal: train fraction must lie in (0, 1), got " +
                                std::to_string(train_fraction));
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].timestamp < samples[i - 1].timestamp) {
      throw std::invalid_argument("split_temporal: samples not time-ordered at index " +
                                  std::to_string(i));
    }
  }
  const std::size_t n = samples.size();
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  if (n_train == 0 || n_train >= n) {
    throw std::invalid_argument("split_temporal: fraction leaves an empty split for " +
                                std::to_string(n) + " samples");
  }
  if (samples[n_train - 1].timestamp >= samples[n_train].timestamp) {
    throw std::invalid_argument("split_temporal: boundary would split timestamp " +
                                std::to_string(samples[n_train].timestamp));
  }
  DatasetSplit out;
  out.train.assign(std::make_move_iterator(samples.begin()),
                   std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_train)));
  out.test.assign(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_train)),
                  std::make_move_iterator(samples.end()));
  return out;
}

namespace {

// Bilinear sample of a zero-padded image at a translated position.
double sample_shifted(const Tensor& img, std::int64_t y, std::int64_t x, double off_x,
                      double off_y) {
  const double sx = static_cast<double>(x) - off_x;
  const double sy = static_cast<double>(y) - off_y;
  const std::int64_t x0 = static_cast<std::int64_t>(std::floor(sx));
  const std::int64_t y0 = static_cast<std::int64_t>(std::floor(sy));
  const double fx = sx - static_cast<double>(x0);
  const double fy = sy - static_cast<double>(y0);
  const std::int64_t h = img.dim(1), w = img.dim(2);
  const auto at = [&](std::int64_t yy, std::int64_t xx) {
    return (yy < 0 || yy >= h || xx < 0 || xx >= w) ? 0.0 : img(0, yy, xx);
  };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
         fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
}

}  // namespace

SynthEventResult synth_event_pairs(std::span<const LabeledImage> images,
                                   const SynthEventConfig& cfg, std::uint64_t seed) {
  if (cfg.steps < 2) throw std::invalid_argument("synth_event_pairs: steps must be >= 2");
  if (cfg.legs < 1) throw std::invalid_argument("synth_event_pairs: legs must be >= 1");
  if (cfg.threshold <= 0.0) throw std::invalid_argument("synth_event_pairs: threshold must be > 0");
  Rng rng(seed);
  SynthEventResult result;
  result.samples.reserve(images.size());

  std::int64_t base_time = 0;
  constexpr std::int64_t kStepUs = 1000;
  constexpr std::int64_t kSampleGapUs = 1000000;

  for (const LabeledImage& labeled : images) {
    const Tensor& img = labeled.image;
    const std::int64_t h = img.dim(1), w = img.dim(2);

    // Piecewise-linear trajectory whose headings rotate leg by leg and that
    // ends at the untranslated position, so the paired frame (taken at the
    // window end) is the input image itself.
    const double base_angle = rng.uniform(0.0, 2.0 * M_PI);
    std::vector<double> waypoints_x(static_cast<std::size_t>(cfg.legs) + 1, 0.0);
    std::vector<double> waypoints_y(static_cast<std::size_t>(cfg.legs) + 1, 0.0);
    for (int leg = cfg.legs - 1; leg >= 0; --leg) {
      const double angle = base_angle + (cfg.legs - 1 - leg) * (M_PI / 2.0) +
                           rng.uniform(-0.26, 0.26);
      const double dist = rng.uniform(cfg.min_shift, cfg.max_shift);
      waypoints_x[static_cast<std::size_t>(leg)] =
          waypoints_x[static_cast<std::size_t>(leg) + 1] - dist * std::cos(angle);
      waypoints_y[static_cast<std::size_t>(leg)] =
          waypoints_y[static_cast<std::size_t>(leg) + 1] - dist * std::sin(angle);
    }

    const int total_steps = cfg.steps * cfg.legs;
    std::vector<double> ref(static_cast<std::size_t>(h * w));
    std::vector<EventRecord> events;
    for (int s = 0; s <= total_steps; ++s) {
      const int leg = std::min(cfg.legs - 1, s / cfg.steps);
      const double in_leg =
          static_cast<double>(s - leg * cfg.steps) / static_cast<double>(cfg.steps);
      const double off_x = waypoints_x[static_cast<std::size_t>(leg)] +
                           in_leg * (waypoints_x[static_cast<std::size_t>(leg) + 1] -
                                     waypoints_x[static_cast<std::size_t>(leg)]);
      const double off_y = waypoints_y[static_cast<std::size_t>(leg)] +
                           in_leg * (waypoints_y[static_cast<std::size_t>(leg) + 1] -
                                     waypoints_y[static_cast<std::size_t>(leg)]);
      const std::int64_t t = base_time + s * kStepUs;
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          const double level =
              std::log(sample_shifted(img, y, x, off_x, off_y) + cfg.log_eps);
          double& r = ref[static_cast<std::size_t>(y * w + x)];
          if (s == 0) {
            r = level;
            continue;
          }
          const double diff = level - r;
          const int count = static_cast<int>(std::floor(std::fabs(diff) / cfg.threshold));
          if (count <= 0) continue;
          const int polarity = diff > 0 ? 1 : -1;
          for (int k = 0; k < count; ++k) {
            events.push_back(EventRecord{t, static_cast<std::int32_t>(x),
                                         static_cast<std::int32_t>(y), polarity});
          }
          r += polarity * count * cfg.threshold;
        }
      }
    }

    if (events.empty()) {
      ++result.skipped;
      base_time += kSampleGapUs;
      continue;
    }

    PairedSample sample;
    sample.frame = img;
    sample.modality = voxelize(events, cfg.slices, h, w).slices;
    sample.timestamp = base_time + total_steps * kStepUs;
    sample.label = labeled.label;
    result.samples.push_back(std::move(sample));
    if (cfg.keep_streams) result.event_streams.push_back(std::move(events));
    base_time += kSampleGapUs;
  }
  return result;
}

std::vector<PairedSample> synth_thermal_pairs(std::span<const LabeledImage> images,
                                              const SynthThermalConfig& cfg, std::uint64_t seed) {
  if (cfg.noise_sigma < 0.0) {
    throw std::invalid_argument("synth_thermal_pairs: noise sigma must be >= 0");
  }
  Rng rng(seed);
  std::vector<PairedSample> out;
  out.reserve(images.size());
  std::int64_t timestamp = 0;
  for (const LabeledImage& labeled : images) {
    const Tensor& img = labeled.image;
    const std::int64_t h = img.dim(1), w = img.dim(2);
    Tensor modality = img;

    // Box blur, applied blur_radius times with a 3x3 kernel.
    for (int pass = 0; pass < cfg.blur_radius; ++pass) {
      Tensor blurred({1, h, w});
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          double acc = 0.0;
          int n = 0;
          for (std::int64_t yy = std::max<std::int64_t>(0, y - 1);
               yy <= std::min<std::int64_t>(h - 1, y + 1); ++yy) {
            for (std::int64_t xx = std::max<std::int64_t>(0, x - 1);
                 xx <= std::min<std::int64_t>(w - 1, x + 1); ++xx) {
              acc += modality(0, yy, xx);
              ++n;
            }
          }
          blurred(0, y, x) = acc / n;
        }
      }
      modality = std::move(blurred);
    }

    for (std::int64_t i = 0; i < modality.numel(); ++i) {
      double v = cfg.invert ? 1.0 - modality[i] : modality[i];
      v += cfg.noise_sigma * rng.normal();
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      modality[i] = v;
    }

    PairedSample sample;
    sample.frame = img;
    sample.modality = std::move(modality);
    sample.timestamp = timestamp;
    sample.label = labeled.label;
    out.push_back(std::move(sample));
    timestamp += 1000000;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest I/O

namespace {

void write_manifest_records(const std::string& dir, std::span<const PairedSample> samples,
                            const std::vector<std::string>& modality_rel) {
  std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot write manifest in '" + dir + "'");
  char name[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const PairedSample& s = samples[i];
    std::snprintf(name, sizeof(name), "%06zu", i);
    const std::string frame_rel = std::string("frames/") + name + ".png";
    write_png_gray((fs::path(dir) / frame_rel).string(), s.frame);
    json rec{{"frame_path", frame_rel},
             {"modality_path", modality_rel[i]},
             {"timestamp", s.timestamp}};
    if (s.label) rec["label"] = *s.label;
    manifest << rec.dump() << '\n';
  }
}

}  // namespace

void write_paired_dataset(const std::string& dir, std::span<const PairedSample> samples) {
  fs::create_directories(fs::path(dir) / "frames");
  fs::create_directories(fs::path(dir) / "modality");
  char name[32];
  std::vector<std::string> modality_rel;
  modality_rel.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06zu", i);
    const std::string rel = std::string("modality/") + name + ".png";
    write_png_gray((fs::path(dir) / rel).string(), samples[i].modality);
    modality_rel.push_back(rel);
  }
  write_manifest_records(dir, samples, modality_rel);
}

void write_paired_event_dataset(const std::string& dir, std::span<const PairedSample> samples,
                                std::span<const std::vector<EventRecord>> event_streams) {
  if (samples.size() != event_streams.size()) {
    throw std::invalid_argument("write_paired_event_dataset: " + std::to_string(samples.size()) +
                                " samples but " + std::to_string(event_streams.size()) +
                                " event streams");
  }
  fs::create_directories(fs::path(dir) / "frames");
  fs::create_directories(fs::path(dir) / "events");
  char name[32];
  std::vector<std::string> modality_rel;
  modality_rel.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06zu", i);
    const std::string rel = std::string("events/") + name + ".csv";
    save_events_csv((fs::path(dir) / rel).string(), event_streams[i]);
    modality_rel.push_back(rel);
  }
  write_manifest_records(dir, samples, modality_rel);
}

std::vector<PairedSample> read_paired_dataset(const std::string& manifest_path,
                                              std::int64_t voxel_slices) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest '" + manifest_path + "'");
  const fs::path base = fs::path(manifest_path).parent_path();

  std::vector<PairedSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    for (const auto& [key, value] : rec.items()) {
      (void)value;
      if (key != "frame_path" && key != "modality_path" && key != "timestamp" &&
          key != "label") {
        throw std::runtime_error("manifest line " + std::to_string(line_no) +
                                 ": unknown key '" + key + "'");
      }
    }
    if (!rec.contains("frame_path") || !rec.contains("modality_path") ||
        !rec.contains("timestamp")) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": record needs frame_path, modality_path and timestamp");
    }
    PairedSample s;
    s.frame = read_png_gray((base / rec["frame_path"].get<std::string>()).string());
    s.timestamp = rec["timestamp"].get<std::int64_t>();
    if (rec.contains("label")) s.label = rec["label"].get<int>();

    const std::string modality_rel = rec["modality_path"].get<std::string>();
    const std::string ext = fs::path(modality_rel).extension().string();
    if (ext == ".csv" || ext == ".bin") {
      const auto events = load_events((base / modality_rel).string());
      s.modality = voxelize(events, voxel_slices, s.frame.dim(1), s.frame.dim(2)).slices;
    } else if (ext == ".png") {
      s.modality = read_png_gray((base / modality_rel).string());
    } else {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": unsupported modality file '" + modality_rel + "'");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace graftkit
