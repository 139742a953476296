#pragma once

// JSON documents for layouts (detections + ordering config) and pose lists
// (simulator input). Both carry "format_version": 1.

#include <mimetic/error.hpp>
#include <mimetic/geometry.hpp>
#include <mimetic/vision_sim.hpp>

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace mimetic {

inline constexpr int kLayoutFormatVersion = 1;

struct LayoutDocument {
  GeometryConfig config;
  std::vector<DetectedMarker> markers;
};

struct PoseDocument {
  GeometryConfig config;
  NoiseModel noise;
  Millis timestamp{0};
  std::vector<TilePose> poses;
};

namespace detail {

inline Point2 point_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw FormatError("expected a point [x, y], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

inline nlohmann::ordered_json point_to_json(Point2 p) { return nlohmann::ordered_json::array({p.x, p.y}); }

inline void check_version(const nlohmann::json& doc, const char* what) {
  if (!doc.is_object()) throw FormatError(std::string(what) + ": document must be a JSON object");
  if (!doc.contains("format_version")) throw FormatError(std::string(what) + ": missing format_version");
  if (doc["format_version"] != kLayoutFormatVersion)
    throw VersionError(std::string(what) + ": unsupported format_version " + doc["format_version"].dump());
}

/// "image" frames are y-down; flipping y puts them in the logical y-up frame.
inline bool image_frame(const nlohmann::json& doc) {
  const std::string frame = doc.value("frame", "logical");
  if (frame != "logical" && frame != "image") throw FormatError("frame must be 'logical' or 'image'");
  return frame == "image";
}

inline GeometryConfig config_from_json(const nlohmann::json& doc) {
  GeometryConfig c;
  if (!doc.contains("config")) return c;
  const auto& j = doc["config"];
  if (j.contains("k")) c.k = j["k"].get<double>();
  if (j.contains("tile_height")) {
    const auto& th = j["tile_height"];
    if (th.is_string()) {
      if (th.get<std::string>() != "auto") throw FormatError("tile_height must be a number or \"auto\"");
    } else {
      c.tile_height = TileHeight::of(th.get<double>());
    }
  }
  return c;
}

inline nlohmann::json config_to_json(const GeometryConfig& c) {
  nlohmann::ordered_json j;
  j["k"] = c.k;
  if (c.tile_height.fixed)
    j["tile_height"] = *c.tile_height.fixed;
  else
    j["tile_height"] = "auto";
  return j;
}

inline DetectedMarker marker_from_json(const nlohmann::json& j, bool flip) {
  DetectedMarker m;
  m.word_id = j.at("word_id").get<std::string>();
  m.center = point_from_json(j.at("center"));
  const auto& corners = j.at("corners");
  if (!corners.is_array() || corners.size() != 4) throw FormatError("marker '" + m.word_id + "': need 4 corners");
  for (std::size_t i = 0; i < 4; ++i) m.corners[i] = point_from_json(corners[i]);
  if (flip) {
    m.center.y = -m.center.y;
    for (auto& c : m.corners) c.y = -c.y;
  }
  return m;
}

inline TilePose pose_from_json(const nlohmann::json& j, bool flip) {
  TilePose p;
  p.word_id = j.at("word_id").get<std::string>();
  p.center = point_from_json(j.at("center"));
  p.rotation = degrees_to_radians(j.value("rotation_deg", 0.0));
  p.width = j.value("width", p.width);
  p.height = j.value("height", p.height);
  if (flip) {
    p.center.y = -p.center.y;
    p.rotation = -p.rotation;
  }
  return p;
}

inline std::vector<WordId> words_from_json(const nlohmann::json& j) {
  return j.contains("words") ? j["words"].get<std::vector<WordId>>() : std::vector<WordId>{};
}

inline TileSize tile_from_json(const nlohmann::json& j) {
  TileSize t;
  if (j.contains("tile")) {
    const Point2 wh = point_from_json(j["tile"]);
    t = {wh.x, wh.y};
  }
  return t;
}

template <typename Fn>
auto wrap_json_errors(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

inline nlohmann::json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw FormatError(std::string("cannot open ") + what + " file '" + path + "'");
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError(std::string(what) + " file '" + path + "' is not valid JSON");
  return doc;
}

}  // namespace detail

inline LayoutDocument parse_layout(const nlohmann::json& doc) {
  detail::check_version(doc, "layout");
  return detail::wrap_json_errors("layout", [&] {
    LayoutDocument out;
    out.config = detail::config_from_json(doc);
    const bool flip = detail::image_frame(doc);
    for (const auto& m : doc.at("markers")) out.markers.push_back(detail::marker_from_json(m, flip));
    return out;
  });
}

inline nlohmann::ordered_json layout_to_json(const LayoutDocument& layout) {
  nlohmann::ordered_json doc;
  doc["format_version"] = kLayoutFormatVersion;
  doc["frame"] = "logical";
  doc["config"] = detail::config_to_json(layout.config);
  doc["markers"] = nlohmann::ordered_json::array();
  for (const auto& m : layout.markers) {
    nlohmann::ordered_json jm;
    jm["word_id"] = m.word_id;
    jm["center"] = detail::point_to_json(m.center);
    jm["corners"] = nlohmann::ordered_json::array();
    for (const auto& c : m.corners) jm["corners"].push_back(detail::point_to_json(c));
    doc["markers"].push_back(std::move(jm));
  }
  return doc;
}

inline LayoutDocument load_layout(const std::string& path) { return parse_layout(detail::read_json_file(path, "layout")); }

/// Accepts explicit "poses", a "grid" generator or a "baseline" generator.
inline PoseDocument parse_pose_document(const nlohmann::json& doc) {
  detail::check_version(doc, "pose list");
  return detail::wrap_json_errors("pose list", [&] {
    PoseDocument out;
    out.config = detail::config_from_json(doc);
    out.timestamp = Millis{doc.value("timestamp_ms", std::int64_t{0})};
    if (doc.contains("noise")) {
      const auto& n = doc["noise"];
      out.noise.corner_jitter_sigma = n.value("sigma", 0.0);
      out.noise.dropout_probability = n.value("dropout", 0.0);
      out.noise.rng_seed = n.value("seed", std::uint64_t{0});
    }
    const bool flip = detail::image_frame(doc);
    if (doc.contains("poses")) {
      for (const auto& p : doc["poses"]) out.poses.push_back(detail::pose_from_json(p, flip));
    } else if (doc.contains("grid")) {
      const auto& g = doc["grid"];
      const Point2 spacing = detail::point_from_json(g.at("spacing"));
      const auto words = detail::words_from_json(g);
      out.poses = generate_grid(g.at("rows").get<int>(), g.at("cols").get<int>(), spacing, detail::tile_from_json(g), words);
    } else if (doc.contains("baseline")) {
      const auto& b = doc["baseline"];
      const auto words = detail::words_from_json(b);
      out.poses = generate_baseline(b.at("n").get<int>(), degrees_to_radians(b.value("angle_deg", 0.0)),
                                    b.at("spacing").get<double>(), detail::tile_from_json(b), words);
    } else {
      throw FormatError("pose list: need one of poses, grid, baseline");
    }
    return out;
  });
}

inline PoseDocument load_pose_document(const std::string& path) {
  return parse_pose_document(detail::read_json_file(path, "pose list"));
}

}  // namespace mimetic
