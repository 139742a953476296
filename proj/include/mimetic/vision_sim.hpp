#pragma once

// Stand-in for the camera and fiducial detector: turns ideal tile poses into
// detections with optional corner jitter and dropout.

#include <mimetic/error.hpp>
#include <mimetic/geometry.hpp>
#include <mimetic/session.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mimetic {

struct TileSize {
  double width = 60.0;
  double height = 20.0;
};

struct TilePose {
  WordId word_id;
  Point2 center;
  double rotation = 0.0;  // radians, counterclockwise, 0 = upright
  double width = 60.0;
  double height = 20.0;
};

struct NoiseModel {
  double corner_jitter_sigma = 0.0;
  double dropout_probability = 0.0;
  std::uint64_t rng_seed = 0;
};

inline void validate(const TilePose& p) {
  if (!(p.width > 0.0) || !(p.height > 0.0)) throw InputError("pose '" + p.word_id + "': width and height must be positive");
  if (!is_finite(p.center) || !std::isfinite(p.rotation)) throw InputError("pose '" + p.word_id + "': non-finite pose");
}

inline void validate(const NoiseModel& n) {
  if (!(n.corner_jitter_sigma >= 0.0)) throw InputError("noise sigma must be >= 0");
  if (!(n.dropout_probability >= 0.0 && n.dropout_probability <= 1.0))
    throw InputError("dropout probability must be in [0, 1]");
}

/// Ideal corners in TL, TR, BR, BL order of the tile's own frame.
inline std::array<Point2, 4> pose_corners(const TilePose& p) {
  const double hw = p.width / 2.0;
  const double hh = p.height / 2.0;
  const std::array<Vec2, 4> local = {Vec2{-hw, hh}, Vec2{hw, hh}, Vec2{hw, -hh}, Vec2{-hw, -hh}};
  std::array<Point2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = p.center + (p.rotation == 0.0 ? local[i] : rotated(local[i], p.rotation));
  return out;
}

inline DetectedMarker ideal_marker(const TilePose& p) {
  validate(p);
  return {p.word_id, p.center, pose_corners(p)};
}

inline SlateSnapshot synthesize(std::span<const TilePose> poses, const NoiseModel& noise, Millis timestamp) {
  validate(noise);
  std::mt19937_64 rng(noise.rng_seed);
  std::bernoulli_distribution drop(noise.dropout_probability);
  std::normal_distribution<double> jitter(0.0, noise.corner_jitter_sigma > 0.0 ? noise.corner_jitter_sigma : 1.0);

  SlateSnapshot snap;
  snap.timestamp = timestamp;
  for (const auto& pose : poses) {
    validate(pose);
    if (noise.dropout_probability > 0.0 && drop(rng)) continue;
    DetectedMarker m{pose.word_id, {}, pose_corners(pose)};
    if (noise.corner_jitter_sigma > 0.0)
      for (auto& c : m.corners) c += Vec2{jitter(rng), jitter(rng)};
    Point2 centroid{};
    for (const auto& c : m.corners) centroid += c;
    m.center = centroid / 4.0;
    snap.detections.push_back(std::move(m));
  }
  return snap;
}

inline SlateSnapshot synthesize(const std::vector<TilePose>& poses, const NoiseModel& noise, Millis timestamp) {
  return synthesize(std::span<const TilePose>(poses), noise, timestamp);
}

namespace detail {
inline WordId generated_id(std::span<const WordId> ids, std::size_t i) {
  if (ids.empty()) return "t" + std::to_string(i);
  if (i >= ids.size()) throw InputError("not enough word ids for generated poses");
  return ids[i];
}
}  // namespace detail

/// Rows run downward (decreasing y) from the origin; `spacing` is the
/// center-to-center distance between columns (x) and rows (y).
inline std::vector<TilePose> generate_grid(int rows, int cols, Vec2 spacing, TileSize tile = {},
                                           std::span<const WordId> word_ids = {}) {
  if (rows < 1 || cols < 1) throw InputError("grid needs at least one row and column");
  if (!(spacing.x > 0.0) || !(spacing.y > 0.0)) throw InputError("grid spacing must be positive");
  std::vector<TilePose> poses;
  poses.reserve(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      poses.push_back({detail::generated_id(word_ids, poses.size()), {c * spacing.x, -r * spacing.y}, 0.0, tile.width,
                       tile.height});
  return poses;
}

/// `n` tiles from the origin along `angle` (radians), each rotated to sit on
/// the baseline.
inline std::vector<TilePose> generate_baseline(int n, double angle, double spacing, TileSize tile = {},
                                               std::span<const WordId> word_ids = {}) {
  if (n < 1) throw InputError("baseline needs at least one tile");
  if (!(spacing > 0.0)) throw InputError("baseline spacing must be positive");
  const Vec2 step{spacing * std::cos(angle), spacing * std::sin(angle)};
  std::vector<TilePose> poses;
  poses.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    poses.push_back({detail::generated_id(word_ids, poses.size()), i * step, angle, tile.width, tile.height});
  return poses;
}

inline double degrees_to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace mimetic
