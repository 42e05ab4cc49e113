#include <graftkit/digits.hpp>

#include <cmath>
#include <stdexcept>

namespace graftkit {

namespace {

constexpr std::int64_t kSide = 28;

struct Point {
  double x, y;
};

using Stroke = std::vector<Point>;

// Arc sampled as a polyline; math angles in degrees, y axis pointing down.
Stroke arc(double cx, double cy, double r, double a0, double a1, int segments = 16) {
  Stroke s;
  s.reserve(static_cast<std::size_t>(segments) + 1);
  for (int i = 0; i <= segments; ++i) {
    const double a = (a0 + (a1 - a0) * i / segments) * M_PI / 180.0;
    s.push_back({cx + r * std::cos(a), cy - r * std::sin(a)});
  }
  return s;
}

// Digit skeletons in a unit box, x right, y down.
std::vector<Stroke> digit_strokes(int digit) {
  switch (digit) {
    case 0:
      return {arc(0.5, 0.5, 0.34, 90, 450, 24)};
    case 1:
      return {{{0.34, 0.26}, {0.54, 0.08}, {0.54, 0.92}}};
    case 2:
      return {arc(0.5, 0.32, 0.29, 175, 0, 12), {{0.79, 0.32}, {0.2, 0.92}, {0.82, 0.92}}};
    case 3:
      return {arc(0.5, 0.3, 0.25, 150, -85, 14), arc(0.5, 0.7, 0.27, 85, -150, 14)};
    case 4:
      return {{{0.64, 0.08}, {0.64, 0.92}}, {{0.64, 0.08}, {0.2, 0.62}, {0.86, 0.62}}};
    case 5:
      return {{{0.78, 0.1}, {0.27, 0.1}, {0.25, 0.46}}, arc(0.49, 0.67, 0.26, 115, -125, 14)};
    case 6:
      return {{{0.7, 0.08}, {0.48, 0.28}, {0.31, 0.52}, {0.27, 0.68}},
              arc(0.5, 0.7, 0.24, 90, 450, 20)};
    case 7:
      return {{{0.2, 0.1}, {0.8, 0.1}, {0.44, 0.92}}, {{0.34, 0.5}, {0.64, 0.5}}};
    case 8:
      return {arc(0.5, 0.3, 0.22, 90, 450, 20), arc(0.5, 0.72, 0.26, 90, 450, 20)};
    case 9:
      return {arc(0.5, 0.32, 0.24, 90, 450, 20), {{0.74, 0.34}, {0.71, 0.62}, {0.58, 0.92}}};
    default:
      throw std::invalid_argument("digit must be in [0, 9], got " + std::to_string(digit));
  }
}

double point_segment_dist(double px, double py, const Point& a, const Point& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = px - a.x, wy = py - a.y;
  const double vv = vx * vx + vy * vy;
  double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
  if (t < 0.0) t = 0.0;
  if (t > 1.0) t = 1.0;
  const double dx = px - (a.x + t * vx);
  const double dy = py - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Tensor render_digit(int digit, Rng& rng) {
  std::vector<Stroke> strokes = digit_strokes(digit);

  // Affine jitter applied to the skeleton around the box center.
  const double angle = rng.uniform(-0.21, 0.21);
  const double scale_x = rng.uniform(0.82, 1.08);
  const double scale_y = rng.uniform(0.82, 1.08);
  const double shear = rng.uniform(-0.15, 0.15);
  const double shift_x = rng.uniform(-1.8, 1.8);
  const double shift_y = rng.uniform(-1.8, 1.8);
  const double ca = std::cos(angle), sa = std::sin(angle);

  // Unit box maps to a 22 px glyph region with a 3 px margin.
  const double span = 22.0, margin = 3.0;
  for (Stroke& stroke : strokes) {
    for (Point& p : stroke) {
      double x = (p.x - 0.5) * scale_x;
      double y = (p.y - 0.5) * scale_y;
      x += shear * y;
      const double rx = ca * x - sa * y;
      const double ry = sa * x + ca * y;
      p.x = margin + (rx + 0.5) * span + shift_x;
      p.y = margin + (ry + 0.5) * span + shift_y;
    }
  }

  const double half_width = rng.uniform(0.65, 1.05);
  const double ink = rng.uniform(0.78, 1.0);
  const double aa = 0.9;
  const double noise_sigma = 0.02;

  Tensor image({1, kSide, kSide});
  for (std::int64_t y = 0; y < kSide; ++y) {
    for (std::int64_t x = 0; x < kSide; ++x) {
      double dist = 1e9;
      for (const Stroke& stroke : strokes) {
        for (std::size_t i = 0; i + 1 < stroke.size(); ++i) {
          dist = std::min(dist, point_segment_dist(static_cast<double>(x),
                                                   static_cast<double>(y), stroke[i],
                                                   stroke[i + 1]));
        }
      }
      double cover = (half_width + aa * 0.5 - dist) / aa;
      if (cover < 0.0) cover = 0.0;
      if (cover > 1.0) cover = 1.0;
      double v = ink * cover + noise_sigma * rng.normal();
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      image(0, y, x) = v;
    }
  }
  return image;
}

std::vector<LabeledImage> make_digit_dataset(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledImage> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int digit = static_cast<int>(rng.uniform_int(10));
    out.push_back(LabeledImage{render_digit(digit, rng), digit});
  }
  return out;
}

}  // namespace graftkit
