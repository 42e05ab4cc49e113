#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <graftkit/tensor.hpp>

namespace graftkit {

// One camera event: timestamp in microseconds, pixel location, polarity.
// Polarity is normalized to +1 (brightness increase) / -1 (decrease) at
// every parsing boundary, whatever the on-disk encoding.
struct EventRecord {
  std::int64_t t = 0;
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t p = 0;

  bool operator==(const EventRecord&) const = default;
};

/*
 * Spatio-temporal accumulation of an event window: D slices of equal
 * temporal extent, each event depositing polarity-weighted bilinear mass on
 * the two slices adjacent to its normalized timestamp. Summing a pixel over
 * all slices recovers that pixel's net polarity.
 */
struct VoxelGrid {
  Tensor slices;  // (D, H, W)
  std::int64_t source_events = 0;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;

  std::int64_t depth() const { return slices.dim(0); }
  std::int64_t height() const { return slices.dim(1); }
  std::int64_t width() const { return slices.dim(2); }
};

// Normalized timestamps in [0, D-1]. A window whose events share one
// timestamp maps everything to 0 (all mass in the first slice).
std::vector<double> normalize_timestamps(std::span<const EventRecord> events, std::int64_t slices);

VoxelGrid voxelize(std::span<const EventRecord> events, std::int64_t slices, std::int64_t height,
                   std::int64_t width);

struct ChunkResult {
  std::vector<std::span<const EventRecord>> windows;
  std::size_t dropped = 0;
};

// Consecutive non-overlapping windows of exactly `window_size` events; the
// trailing remainder is dropped and reported.
ChunkResult chunk_stream(std::span<const EventRecord> events, std::size_t window_size);

// 5-byte binary records: byte0 = x, byte1 = y, byte2 bit7 = polarity
// (1 -> +1, 0 -> -1), remaining 23 bits big-endian = timestamp in us.
std::vector<EventRecord> parse_nmnist(std::span<const std::uint8_t> bytes);

// Plain text `t,x,y,p` lines with p in {-1,1} or {0,1}; a leading
// non-numeric header line is skipped.
std::vector<EventRecord> parse_event_csv(const std::string& text);
std::string format_event_csv(std::span<const EventRecord> events);

std::vector<EventRecord> load_events(const std::string& path);
void save_events_csv(const std::string& path, std::span<const EventRecord> events);

}  // namespace graftkit
