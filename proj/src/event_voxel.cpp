#include <graftkit/event_voxel.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace graftkit {

namespace {

void require_sorted(std::span<const EventRecord> events, const char* who) {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].t < events[i - 1].t) {
      throw std::invalid_argument(std::string(who) + ": events not sorted by timestamp at index " +
                                  std::to_string(i));
    }
  }
}

}  // namespace

std::vector<double> normalize_timestamps(std::span<const EventRecord> events,
                                         std::int64_t slices) {
  if (events.empty()) throw std::invalid_argument("normalize_timestamps: empty event window");
  if (slices < 1) throw std::invalid_argument("normalize_timestamps: slices must be >= 1");
  require_sorted(events, "normalize_timestamps");

  const std::int64_t t0 = events.front().t;
  const std::int64_t span = events.back().t - t0;
  std::vector<double> out(events.size(), 0.0);
  if (span == 0 || slices == 1) return out;
  const double scale = static_cast<double>(slices - 1) / static_cast<double>(span);
  for (std::size_t i = 0; i < events.size(); ++i) {
    out[i] = scale * static_cast<double>(events[i].t - t0);
  }
  return out;
}

VoxelGrid voxelize(std::span<const EventRecord> events, std::int64_t slices, std::int64_t height,
                   std::int64_t width) {
  if (slices < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("voxelize: slices, height and width must be >= 1");
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    const EventRecord& e = events[i];
    if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
      throw std::out_of_range("voxelize: event " + std::to_string(i) + " at (" +
                              std::to_string(e.x) + ", " + std::to_string(e.y) +
                              ") outside " + std::to_string(width) + "x" + std::to_string(height) +
                              " sensor");
    }
    if (e.p != 1 && e.p != -1) {
      throw std::invalid_argument("voxelize: event " + std::to_string(i) + " has polarity " +
                                  std::to_string(e.p) + ", expected +1 or -1");
    }
  }

  VoxelGrid grid;
  grid.slices = Tensor({slices, height, width});
  grid.source_events = static_cast<std::int64_t>(events.size());
  if (events.empty()) return grid;

  grid.t_start = events.front().t;
  grid.t_end = events.back().t;
  const std::vector<double> norm = normalize_timestamps(events, slices);
  for (std::size_t i = 0; i < events.size(); ++i) {
    const EventRecord& e = events[i];
    const double tn = norm[i];
    const double p = static_cast<double>(e.p);
    const std::int64_t d0 = static_cast<std::int64_t>(std::floor(tn));
    // Each event spreads over the two adjacent integer slices; the weights
    // sum to 1, so per-pixel polarity mass is conserved.
    for (std::int64_t d = d0; d <= d0 + 1; ++d) {
      if (d < 0 || d >= slices) continue;
      const double w = 1.0 - std::fabs(static_cast<double>(d) - tn);
      if (w <= 0.0) continue;
      grid.slices(d, e.y, e.x) += p * w;
    }
  }
  return grid;
}

ChunkResult chunk_stream(std::span<const EventRecord> events, std::size_t window_size) {
  if (window_size < 1) throw std::invalid_argument("chunk_stream: window size must be >= 1");
  ChunkResult out;
  const std::size_t full = events.size() / window_size;
  out.windows.reserve(full);
  for (std::size_t k = 0; k < full; ++k) {
    out.windows.push_back(events.subspan(k * window_size, window_size));
  }
  out.dropped = events.size() - full * window_size;
  return out;
}

std::vector<EventRecord> parse_nmnist(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 5 != 0) {
    throw std::invalid_argument("nmnist: truncated record at offset " +
                                std::to_string(bytes.size() - bytes.size() % 5));
  }
  std::vector<EventRecord> events;
  events.reserve(bytes.size() / 5);
  for (std::size_t off = 0; off < bytes.size(); off += 5) {
    EventRecord e;
    e.x = bytes[off];
    e.y = bytes[off + 1];
    e.p = (bytes[off + 2] & 0x80u) ? 1 : -1;
    e.t = (static_cast<std::int64_t>(bytes[off + 2] & 0x7Fu) << 16) |
          (static_cast<std::int64_t>(bytes[off + 3]) << 8) |
          static_cast<std::int64_t>(bytes[off + 4]);
    events.push_back(e);
  }
  return events;
}

std::vector<EventRecord> parse_event_csv(const std::string& text) {
  std::vector<EventRecord> events;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1 && line.find_first_not_of(" \t\r\n-+0123456789,eE.") != std::string::npos) {
      continue;  // header
    }
    std::istringstream fields(line);
    std::string field;
    std::int64_t values[4];
    for (int k = 0; k < 4; ++k) {
      if (!std::getline(fields, field, ',')) {
        throw std::invalid_argument("event csv: line " + std::to_string(line_no) +
                                    ": expected 4 fields t,x,y,p");
      }
      try {
        std::size_t consumed = 0;
        values[k] = std::stoll(field, &consumed);
        while (consumed < field.size() &&
               (field[consumed] == ' ' || field[consumed] == '\r')) {
          ++consumed;
        }
        if (consumed != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw std::invalid_argument("event csv: line " + std::to_string(line_no) +
                                    ": bad integer field '" + field + "'");
      }
    }
    EventRecord e;
    e.t = values[0];
    e.x = static_cast<std::int32_t>(values[1]);
    e.y = static_cast<std::int32_t>(values[2]);
    if (values[3] == 1) {
      e.p = 1;
    } else if (values[3] == 0 || values[3] == -1) {
      e.p = -1;
    } else {
      throw std::invalid_argument("event csv: line " + std::to_string(line_no) + ": polarity " +
                                  std::to_string(values[3]) + " not in {-1,0,1}");
    }
    events.push_back(e);
  }
  return events;
}

std::string format_event_csv(std::span<const EventRecord> events) {
  std::ostringstream out;
  for (const EventRecord& e : events) {
    out << e.t << ',' << e.x << ',' << e.y << ',' << e.p << '\n';
  }
  return out.str();
}

std::vector<EventRecord> load_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open event file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".bin") {
    return parse_nmnist(
        std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  return parse_event_csv(text);
}

void save_events_csv(const std::string& path, std::span<const EventRecord> events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write event file '" + path + "'");
  out << format_event_csv(events);
}

}  // namespace graftkit
