#include <mimetic/session.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mimetic;
using namespace std::chrono_literals;
using mimetic::testing::make_marker;

namespace {

const Vocabulary& tiles() {
  static const Vocabulary v = load_vocabulary(MIMETIC_DATA_DIR "/vocabulary.tsv");
  return v;
}

SlateSnapshot snap(Millis t, std::vector<DetectedMarker> d) { return {t, std::move(d)}; }

SettleConfig three_seconds() { return {3000ms, 4.0}; }

}  // namespace

TEST(Diff, IdenticalSnapshotsAreQuiet) {
  const auto a = snap(0ms, {make_marker("human", {0, 0}), make_marker("nature", {80, 0})});
  EXPECT_TRUE(diff_snapshots(a, a, 4.0).empty());
}

TEST(Diff, SubThresholdJitterIgnored) {
  const auto a = snap(0ms, {make_marker("human", {0, 0})});
  const auto b = snap(10ms, {make_marker("human", {2, 0})});
  EXPECT_TRUE(diff_snapshots(a, b, 4.0).empty());
}

TEST(Diff, AddRemoveMove) {
  const auto a = snap(0ms, {make_marker("x", {0, 0}), make_marker("m", {100, 0})});
  const auto b = snap(10ms, {make_marker("y", {0, 0}), make_marker("m", {110, 0})});
  const ChangeSet c = diff_snapshots(a, b, 4.0);
  EXPECT_EQ(c.added, (std::vector<WordId>{"y"}));
  EXPECT_EQ(c.removed, (std::vector<WordId>{"x"}));
  EXPECT_EQ(c.moved, (std::vector<WordId>{"m"}));
}

TEST(Diff, RotationInPlaceCountsAsMove) {
  const auto a = snap(0ms, {make_marker("m", {0, 0})});
  const auto b = snap(10ms, {make_marker("m", {0, 0}, std::numbers::pi)});
  EXPECT_EQ(diff_snapshots(a, b, 4.0).moved, (std::vector<WordId>{"m"}));
}

TEST(Settle, ThreeMovesThenQuiet) {
  std::vector<SlateSnapshot> stream;
  for (int i = 0; i < 3; ++i) stream.push_back(snap(Millis{1000 * i}, {make_marker("human", {20.0 * i, 0})}));
  const auto events = settle(stream, three_seconds(), 25ms, 10000ms);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].at, 5000ms);
}

TEST(Settle, ContinuousMotionNeverSubmits) {
  std::vector<SlateSnapshot> stream;
  for (int i = 0; i < 60; ++i) stream.push_back(snap(Millis{1000 * i}, {make_marker("human", {10.0 * i, 0})}));
  EXPECT_TRUE(settle(stream, three_seconds(), 25ms, 59000ms).empty());
}

TEST(Settle, SinglePlacement) {
  const std::vector<SlateSnapshot> stream = {snap(400ms, {make_marker("human", {0, 0})})};
  const auto events = settle(stream, three_seconds(), 25ms, 10000ms);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].at, 3400ms);
}

TEST(Settle, UnchangedSnapshotsDoNotRearm) {
  std::vector<SlateSnapshot> stream;
  for (int i = 0; i < 20; ++i) stream.push_back(snap(Millis{500 * i}, {make_marker("human", {0, 0})}));
  EXPECT_EQ(settle(stream, three_seconds(), 25ms, 12000ms).size(), 1u);
}

TEST(Settle, ClearedSlateDoesNotSubmit) {
  const std::vector<SlateSnapshot> stream = {snap(0ms, {make_marker("human", {0, 0})}), snap(500ms, {})};
  EXPECT_TRUE(settle(stream, three_seconds(), 25ms, 10000ms).empty());
}

TEST(Settle, DecreasingTimestampsRejected) {
  SettleTimer timer(three_seconds());
  timer.observe(snap(100ms, {}));
  EXPECT_THROW(timer.observe(snap(50ms, {})), InputError);
}

TEST(Settle, SlowDriftAccumulates) {
  std::vector<SlateSnapshot> stream;
  for (int i = 0; i < 10; ++i) stream.push_back(snap(Millis{2000 * i}, {make_marker("human", {3.0 * i, 0})}));
  // Each step is below epsilon, but the reference pose is only replaced on a
  // change, so drift registers once it adds up.
  const auto events = settle(stream, three_seconds(), 25ms, 30000ms);
  EXPECT_GE(events.size(), 2u);
}

TEST(SettleProperty, NothingFiresEarlyAndOneFiresOnTime) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> moves_d(1, 8);
  std::uniform_int_distribution<int> gap_d(1, 2999);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SlateSnapshot> stream;
    Millis t{0};
    const int moves = moves_d(rng);
    for (int i = 0; i < moves; ++i) {
      if (i > 0) t += Millis{gap_d(rng)};
      stream.push_back(snap(t, {make_marker("human", {10.0 * i, 0})}));
    }
    const Millis tick{25};
    const auto events = settle(stream, three_seconds(), tick, t + 6000ms);
    ASSERT_EQ(events.size(), 1u);
    EXPECT_GE(events[0].at, t + 3000ms);
    EXPECT_LE(events[0].at, t + 3000ms + tick);
  }
}

TEST(Mode, DefaultIsCollaborate) {
  ModeTracker tracker;
  EXPECT_EQ(tracker.update(snap(0ms, {make_marker("human", {0, 0})}), tiles()), Mode::Collaborate);
}

TEST(Mode, MarkerOnSlate) {
  ModeTracker tracker;
  EXPECT_EQ(resolve_mode(snap(0ms, {make_marker("mode_analogy", {0, 0})}), tracker, tiles()), Mode::Analogy);
}

TEST(Mode, MostRecentWins) {
  ModeTracker tracker;
  tracker.update(snap(1ms, {make_marker("mode_ideate", {0, 0})}), tiles());
  EXPECT_EQ(tracker.update(snap(2ms, {make_marker("mode_ideate", {0, 0}), make_marker("mode_interpret", {0, 100})}),
                           tiles()),
            Mode::Interpret);
  // Lifting the newer one falls back to the one still present.
  EXPECT_EQ(tracker.update(snap(3ms, {make_marker("mode_ideate", {0, 0})}), tiles()), Mode::Ideate);
}

TEST(Mode, PersistsAfterRemoval) {
  ModeTracker tracker;
  tracker.update(snap(1ms, {make_marker("mode_analogy", {0, 0})}), tiles());
  EXPECT_EQ(tracker.update(snap(2ms, {}), tiles()), Mode::Analogy);
}

TEST(Compose, TwoRows) {
  const auto s = snap(0ms, {make_marker("see", {0, -60}), make_marker("problem", {80, 0}), make_marker("brain", {0, 0}),
                            make_marker("over", {80, -60}), make_marker("here", {160, -60})});
  const Submission sub = compose_submission(s, tiles(), GeometryConfig{}, Mode::Interpret);
  EXPECT_EQ(sub.poem_text, "brain problem\nsee over here");
  EXPECT_EQ(sub.word_ids, (std::vector<WordId>{"brain", "problem", "see", "over", "here"}));
}

TEST(Compose, SingleWord) {
  EXPECT_EQ(compose_submission(snap(0ms, {make_marker("human", {0, 0})}), tiles(), {}, Mode::Collaborate).poem_text,
            "human");
}

TEST(Compose, MarkersExcluded) {
  const auto s = snap(0ms, {make_marker("mode_interpret", {-100, 0}), make_marker("human", {0, 0}),
                            make_marker("nature", {80, 0})});
  EXPECT_EQ(compose_submission(s, tiles(), {}, Mode::Interpret).poem_text, "human nature");
}

TEST(Compose, OnlyMarkersIsEmptyPoem) {
  EXPECT_THROW(compose_submission(snap(0ms, {make_marker("mode_interpret", {0, 0})}), tiles(), {}, Mode::Interpret),
               EmptyPoemError);
}

TEST(SlateSessionTest, IngestGivesPreviewAndMode) {
  SlateSession s(tiles(), {});
  const auto r = s.ingest(snap(0ms, {make_marker("nature", {80, 0}), make_marker("human", {0, 0}),
                                     make_marker("mode_ideate", {0, 200})}));
  EXPECT_EQ(r.preview, (std::vector<std::string>{"human", "nature"}));
  EXPECT_EQ(r.mode, Mode::Ideate);
  EXPECT_EQ(r.changes.added.size(), 3u);
}

TEST(SlateSessionTest, UnknownWordRejectedWithoutStateChange) {
  SlateSession s(tiles(), {});
  s.ingest(snap(0ms, {make_marker("human", {0, 0})}));
  EXPECT_THROW(s.ingest(snap(10ms, {make_marker("zzz", {0, 0})})), InputError);
  EXPECT_EQ(s.preview(), (std::vector<std::string>{"human"}));
}

TEST(SlateSessionTest, MarkerOnlySlateNeverSubmits) {
  SlateSession s(tiles(), {});
  s.ingest(snap(0ms, {make_marker("mode_analogy", {0, 0})}));
  EXPECT_FALSE(s.poll(5000ms).has_value());
  EXPECT_FALSE(s.in_flight());
}

TEST(SlateSessionTest, SubmitsOnceAfterSettle) {
  SlateSession s(tiles(), {});
  s.ingest(snap(0ms, {make_marker("human", {0, 0})}));
  EXPECT_FALSE(s.poll(2999ms).has_value());
  const auto sub = s.poll(3000ms);
  ASSERT_TRUE(sub.has_value());
  EXPECT_EQ(sub->poem_text, "human");
  EXPECT_TRUE(s.in_flight());
  EXPECT_FALSE(s.poll(9000ms).has_value());
}

TEST(SlateSessionTest, SettledPoemsWhileInFlightCoalesce) {
  SlateSession s(tiles(), {});
  s.ingest(snap(0ms, {make_marker("human", {0, 0})}));
  ASSERT_TRUE(s.poll(3000ms));
  s.ingest(snap(3100ms, {make_marker("dead", {0, 0})}));
  EXPECT_FALSE(s.poll(6100ms).has_value());
  s.ingest(snap(6200ms, {make_marker("memory", {0, 0})}));
  EXPECT_FALSE(s.poll(9200ms).has_value());
  EXPECT_TRUE(s.has_pending());
  const auto next = s.finish_chain();
  ASSERT_TRUE(next.has_value());
  EXPECT_EQ(next->poem_text, "memory");
  EXPECT_TRUE(s.in_flight());
  EXPECT_FALSE(s.finish_chain().has_value());
  EXPECT_FALSE(s.in_flight());
}
