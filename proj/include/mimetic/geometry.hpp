#pragma once

// Reading-order recovery for word tiles scattered on the slate.
//
// Each pass takes the topmost unsorted tile as a seed, casts a long line
// through its center along the tile's reading direction, and gathers every
// unsorted tile whose center lies within the tile height of that line. The
// gathered tiles form one line of the poem. Passes repeat until every tile
// is placed, so the output is always a permutation of the input.

#include <mimetic/error.hpp>
#include <mimetic/vec2.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace mimetic {

using WordId = std::string;

/// Corner slots in the tile's own orientation. An upside-down tile's
/// top-left corner sits at the visual bottom-right.
enum class Corner : std::size_t { TopLeft = 0, TopRight = 1, BottomRight = 2, BottomLeft = 3 };

struct DetectedMarker {
  WordId word_id;
  Point2 center;
  std::array<Point2, 4> corners;

  Point2 corner(Corner c) const { return corners[static_cast<std::size_t>(c)]; }
};

struct ScanLine {
  Point2 start;
  Point2 end;
  Vec2 direction;  // end - start
  Vec2 tangent;    // unit
};

/// Fixed capture radius, or derive one from the snapshot (median left-edge length).
struct TileHeight {
  std::optional<double> fixed;

  static TileHeight automatic() { return {}; }
  static TileHeight of(double value) { return {value}; }
  bool is_auto() const { return !fixed.has_value(); }
};

struct GeometryConfig {
  double k = 1000.0;
  TileHeight tile_height = TileHeight::automatic();
};

struct OrderedLayout {
  std::vector<std::vector<WordId>> lines;

  std::vector<WordId> flatten() const {
    std::vector<WordId> out;
    for (const auto& line : lines) out.insert(out.end(), line.begin(), line.end());
    return out;
  }
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& line : lines) n += line.size();
    return n;
  }
  bool empty() const { return lines.empty(); }
  friend bool operator==(const OrderedLayout&, const OrderedLayout&) = default;
};

inline void validate(const GeometryConfig& config) {
  if (!(config.k > 0.0) || !std::isfinite(config.k)) throw InputError("k must be positive and finite");
  if (config.tile_height.fixed && !(*config.tile_height.fixed > 0.0 && std::isfinite(*config.tile_height.fixed)))
    throw InputError("tile_height must be positive and finite");
}

/// Rejects non-finite coordinates, zero-area quads and centers far outside
/// the tile.
inline void validate(const DetectedMarker& m) {
  if (!is_finite(m.center)) throw InputError("marker '" + m.word_id + "': non-finite center");
  for (const auto& c : m.corners)
    if (!is_finite(c)) throw InputError("marker '" + m.word_id + "': non-finite corner");

  double twice_area = 0.0;
  for (std::size_t i = 0; i < 4; ++i) twice_area += cross(m.corners[i], m.corners[(i + 1) % 4]);
  if (std::abs(twice_area) <= 0.0) throw InputError("marker '" + m.word_id + "': degenerate corner quadrilateral");

  Point2 centroid{};
  for (const auto& c : m.corners) centroid += c;
  centroid = centroid / 4.0;
  double radius = 0.0;
  for (const auto& c : m.corners) radius = std::max(radius, distance(c, centroid));
  if (distance(m.center, centroid) > radius) throw InputError("marker '" + m.word_id + "': center outside tile bounds");
}

inline Vec2 left_edge_vector(const DetectedMarker& marker) {
  const Vec2 edge = marker.corner(Corner::TopLeft) - marker.corner(Corner::BottomLeft);
  if (!is_finite(edge) || (edge.x == 0.0 && edge.y == 0.0))
    throw InputError("marker '" + marker.word_id + "': zero-length left edge");
  return edge;
}

/// Rotates the edge by -90 degrees and normalizes it. For an upright tile
/// this points rightward; for an upside-down tile it points left.
inline Vec2 tangent_of(Vec2 edge) {
  const double len = norm(edge);
  if (!(len > 0.0) || !std::isfinite(len)) throw InputError("tangent of a zero or non-finite vector");
  return Vec2{edge.y, -edge.x} / len;
}

inline ScanLine scan_line_through(Point2 center, Vec2 tangent, double k) {
  ScanLine line;
  line.tangent = tangent;
  line.start = k * tangent + center;
  line.end = -k * tangent + center;
  line.direction = line.end - line.start;
  return line;
}

inline ScanLine build_scan_line(const DetectedMarker& marker, const GeometryConfig& config) {
  validate(config);
  return scan_line_through(marker.center, tangent_of(left_edge_vector(marker)), config.k);
}

/// Orthogonal projection of `p` onto the infinite line carrying `line`.
inline Point2 project_onto_line(const ScanLine& line, Point2 p) {
  const double ll = dot(line.direction, line.direction);
  if (!(ll > 0.0)) throw InputError("projection onto a zero-length line");
  return line.start + (dot(p - line.start, line.direction) / ll) * line.direction;
}

inline bool line_captures(const ScanLine& line, const DetectedMarker& marker, double tile_height) {
  return distance(project_onto_line(line, marker.center), marker.center) < tile_height;
}

/// Median left-edge length; 0 for an empty set.
inline double median_left_edge(std::span<const DetectedMarker> markers) {
  if (markers.empty()) return 0.0;
  std::vector<double> lengths;
  lengths.reserve(markers.size());
  for (const auto& m : markers) lengths.push_back(norm(left_edge_vector(m)));
  std::sort(lengths.begin(), lengths.end());
  const std::size_t mid = lengths.size() / 2;
  return lengths.size() % 2 ? lengths[mid] : 0.5 * (lengths[mid - 1] + lengths[mid]);
}

inline double resolve_tile_height(std::span<const DetectedMarker> markers, const TileHeight& policy) {
  return policy.fixed ? *policy.fixed : median_left_edge(markers);
}

inline OrderedLayout order_markers(std::span<const DetectedMarker> markers, const GeometryConfig& config) {
  validate(config);
  {
    std::unordered_set<std::string_view> seen;
    for (const auto& m : markers) {
      validate(m);
      if (!seen.insert(m.word_id).second) throw InputError("duplicate word_id '" + m.word_id + "'");
    }
  }

  OrderedLayout layout;
  if (markers.empty()) return layout;
  const double tile_height = resolve_tile_height(markers, config.tile_height);

  std::vector<std::size_t> unsorted(markers.size());
  std::iota(unsorted.begin(), unsorted.end(), std::size_t{0});

  // Seed: highest y, then smaller x, then smaller word_id.
  auto seed_before = [&](std::size_t a, std::size_t b) {
    const auto& ma = markers[a];
    const auto& mb = markers[b];
    if (ma.center.y != mb.center.y) return ma.center.y > mb.center.y;
    if (ma.center.x != mb.center.x) return ma.center.x < mb.center.x;
    return ma.word_id < mb.word_id;
  };

  while (!unsorted.empty()) {
    const auto seed_it = std::min_element(unsorted.begin(), unsorted.end(), seed_before);
    const DetectedMarker& seed = markers[*seed_it];

    // Work relative to the seed center so results do not depend on where the
    // scene sits on the slate.
    const ScanLine line = scan_line_through(Point2{}, tangent_of(left_edge_vector(seed)), config.k);

    struct Member {
      std::size_t index;
      double from_start;
    };
    std::vector<Member> members;
    std::vector<std::size_t> remaining;
    remaining.reserve(unsorted.size());
    for (std::size_t idx : unsorted) {
      const Point2 rel = idx == *seed_it ? Point2{} : markers[idx].center - seed.center;
      if (idx == *seed_it || distance(project_onto_line(line, rel), rel) < tile_height)
        members.push_back({idx, distance(rel, line.start)});
      else
        remaining.push_back(idx);
    }

    // start lies k units along the tangent, beyond the last word of the line,
    // so reading order runs from the farthest marker to the nearest.
    std::sort(members.begin(), members.end(), [&](const Member& a, const Member& b) {
      if (a.from_start != b.from_start) return a.from_start > b.from_start;
      return markers[a.index].word_id < markers[b.index].word_id;
    });

    std::vector<WordId> words;
    words.reserve(members.size());
    for (const auto& m : members) words.push_back(markers[m.index].word_id);
    layout.lines.push_back(std::move(words));
    unsorted = std::move(remaining);
  }
  return layout;
}

inline OrderedLayout order_markers(const std::vector<DetectedMarker>& markers, const GeometryConfig& config) {
  return order_markers(std::span<const DetectedMarker>(markers), config);
}

}  // namespace mimetic
