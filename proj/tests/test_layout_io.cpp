#include <mimetic/layout_io.hpp>

#include <gtest/gtest.h>

using namespace mimetic;
using nlohmann::json;

TEST(LayoutFile, Grid3x3Fixture) {
  const auto doc = load_layout(MIMETIC_FIXTURES "/grid3x3.layout");
  EXPECT_EQ(doc.markers.size(), 9u);
  EXPECT_EQ(order_markers(doc.markers, doc.config).flatten(),
            (std::vector<WordId>{"human", "dead", "deception", "memory", "machine", "bad", "filth", "heaven",
                                 "delicious"}));
}

TEST(LayoutFile, RoundTrip) {
  LayoutDocument doc;
  doc.config = {500.0, TileHeight::of(18)};
  doc.markers = synthesize(generate_grid(2, 2, {80, 40}), NoiseModel{0.5, 0, 3}, Millis{0}).detections;
  const auto back = parse_layout(json::parse(layout_to_json(doc).dump()));
  EXPECT_EQ(back.config.k, 500.0);
  EXPECT_EQ(back.config.tile_height.fixed, 18.0);
  ASSERT_EQ(back.markers.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.markers[i].word_id, doc.markers[i].word_id);
    EXPECT_EQ(back.markers[i].corners, doc.markers[i].corners);
  }
}

TEST(LayoutFile, ImageFrameFlipsY) {
  const json doc = {{"format_version", 1},
                    {"frame", "image"},
                    {"markers",
                     {{{"word_id", "top"}, {"center", {0, 0}}, {"corners", {{-30, -10}, {30, -10}, {30, 10}, {-30, 10}}}},
                      {{"word_id", "below"},
                       {"center", {0, 60}},
                       {"corners", {{-30, 50}, {30, 50}, {30, 70}, {-30, 70}}}}}}};
  const auto layout = parse_layout(doc);
  EXPECT_EQ(layout.markers[1].center, (Point2{0, -60}));
  EXPECT_EQ(order_markers(layout.markers, layout.config).flatten(), (std::vector<WordId>{"top", "below"}));
}

TEST(LayoutFile, Errors) {
  EXPECT_THROW(parse_layout(json::array()), FormatError);
  EXPECT_THROW(parse_layout({{"markers", json::array()}}), FormatError);
  EXPECT_THROW(parse_layout({{"format_version", 9}, {"markers", json::array()}}), VersionError);
  EXPECT_THROW(parse_layout({{"format_version", 1}}), FormatError);
  EXPECT_THROW(parse_layout({{"format_version", 1}, {"frame", "screen"}, {"markers", json::array()}}), FormatError);
  EXPECT_THROW(parse_layout({{"format_version", 1},
                             {"markers", {{{"word_id", "a"}, {"center", {0, 0}}, {"corners", {{0, 0}}}}}}}),
               FormatError);
  EXPECT_THROW(parse_layout({{"format_version", 1}, {"config", {{"tile_height", "big"}}}, {"markers", json::array()}}),
               FormatError);
  EXPECT_THROW(load_layout(MIMETIC_FIXTURES "/does-not-exist.layout"), FormatError);
}

TEST(PoseFile, Generators) {
  const auto grid = parse_pose_document(
      {{"format_version", 1}, {"grid", {{"rows", 2}, {"cols", 2}, {"spacing", {80, 40}}, {"words", {"a", "b", "c", "d"}}}}});
  ASSERT_EQ(grid.poses.size(), 4u);
  EXPECT_EQ(grid.poses[3].word_id, "d");

  const auto base = parse_pose_document({{"format_version", 1},
                                         {"timestamp_ms", 250},
                                         {"noise", {{"sigma", 0.4}, {"seed", 5}}},
                                         {"baseline", {{"n", 3}, {"angle_deg", 30}, {"spacing", 70}}}});
  EXPECT_EQ(base.poses.size(), 3u);
  EXPECT_EQ(base.timestamp, Millis{250});
  EXPECT_EQ(base.noise.corner_jitter_sigma, 0.4);
  EXPECT_NEAR(base.poses[2].center.y, 70.0, 1e-9);

  const auto explicit_poses = parse_pose_document(
      {{"format_version", 1}, {"poses", {{{"word_id", "x"}, {"center", {1, 2}}, {"rotation_deg", 180}}}}});
  EXPECT_NEAR(explicit_poses.poses[0].rotation, std::numbers::pi, 1e-12);

  EXPECT_THROW(parse_pose_document({{"format_version", 1}}), FormatError);
}
