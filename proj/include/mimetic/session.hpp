#pragma once

// The slate's interaction state machine: snapshot diffing, the settle timer
// that decides when a poem is finished, mode-marker tracking, and the
// in-flight / pending bookkeeping for prompt chains.

#include <mimetic/error.hpp>
#include <mimetic/geometry.hpp>
#include <mimetic/vocabulary.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mimetic {

using Millis = std::chrono::milliseconds;

struct SlateSnapshot {
  Millis timestamp{0};
  std::vector<DetectedMarker> detections;
};

struct ChangeSet {
  std::vector<WordId> added;
  std::vector<WordId> removed;
  std::vector<WordId> moved;

  bool empty() const { return added.empty() && removed.empty() && moved.empty(); }
  friend bool operator==(const ChangeSet&, const ChangeSet&) = default;
};

inline constexpr double kOrientationChangeDegrees = 5.0;

namespace detail {
inline double edge_angle_change(const DetectedMarker& a, const DetectedMarker& b) {
  const Vec2 ea = a.corner(Corner::TopLeft) - a.corner(Corner::BottomLeft);
  const Vec2 eb = b.corner(Corner::TopLeft) - b.corner(Corner::BottomLeft);
  return std::abs(std::atan2(cross(ea, eb), dot(ea, eb)));
}
}  // namespace detail

/// Word ids added, removed, or moved between two snapshots. A tile counts as
/// moved when its center shifts by more than `epsilon` or it turns by more
/// than five degrees.
inline ChangeSet diff_snapshots(const SlateSnapshot& a, const SlateSnapshot& b, double epsilon) {
  if (!(epsilon >= 0.0)) throw InputError("epsilon must be >= 0");
  std::map<std::string_view, const DetectedMarker*> before;
  std::map<std::string_view, const DetectedMarker*> after;
  for (const auto& m : a.detections) before.emplace(m.word_id, &m);
  for (const auto& m : b.detections) after.emplace(m.word_id, &m);

  const double max_turn = kOrientationChangeDegrees * std::numbers::pi / 180.0;
  ChangeSet cs;
  for (const auto& [id, m] : after) {
    auto it = before.find(id);
    if (it == before.end()) {
      cs.added.emplace_back(id);
    } else if (distance(it->second->center, m->center) > epsilon || detail::edge_angle_change(*it->second, *m) > max_turn) {
      cs.moved.emplace_back(id);
    }
  }
  for (const auto& [id, m] : before)
    if (!after.contains(id)) cs.removed.emplace_back(id);
  return cs;
}

struct SettleConfig {
  Millis settle{3000};
  double epsilon = 4.0;
};

struct SubmitEvent {
  Millis at{0};
  SlateSnapshot snapshot;
};

/// Fires once a non-empty slate has been still for `settle` since the last
/// change. Each quiet period fires at most once.
class SettleTimer {
 public:
  explicit SettleTimer(SettleConfig config) : config_(config) {
    if (config_.settle.count() <= 0) throw InputError("settle time must be positive");
    if (!(config_.epsilon >= 0.0)) throw InputError("epsilon must be >= 0");
  }

  ChangeSet observe(SlateSnapshot snapshot) {
    if (seen_any_ && snapshot.timestamp < current_.timestamp) throw InputError("snapshot timestamps must not decrease");
    ChangeSet changes = diff_snapshots(current_, snapshot, config_.epsilon);
    if (!changes.empty()) {
      deadline_ = snapshot.timestamp + config_.settle;
      armed_ = true;
      // Keep the reference pose of unmoved tiles so slow drift still registers.
      current_ = std::move(snapshot);
    } else {
      current_.timestamp = snapshot.timestamp;
    }
    seen_any_ = true;
    return changes;
  }

  std::optional<SubmitEvent> poll(Millis now) {
    if (!armed_ || now < deadline_) return std::nullopt;
    armed_ = false;
    if (current_.detections.empty()) return std::nullopt;
    return SubmitEvent{now, current_};
  }

  /// Time left before the pending submission, if one is armed.
  std::optional<Millis> remaining(Millis now) const {
    if (!armed_) return std::nullopt;
    return std::max(Millis{0}, deadline_ - now);
  }

  const SlateSnapshot& current() const { return current_; }
  const SettleConfig& config() const { return config_; }

 private:
  SettleConfig config_;
  SlateSnapshot current_;
  Millis deadline_{0};
  bool armed_ = false;
  bool seen_any_ = false;
};

/// Runs a snapshot stream against a simulated clock ticking every `tick`,
/// starting at the first snapshot and ending at `until` (default: one tick
/// past the last possible deadline).
inline std::vector<SubmitEvent> settle(std::span<const SlateSnapshot> stream, SettleConfig config, Millis tick,
                                       std::optional<Millis> until = std::nullopt) {
  if (tick.count() <= 0) throw InputError("tick must be positive");
  std::vector<SubmitEvent> events;
  if (stream.empty()) return events;
  SettleTimer timer(config);
  const Millis end = until.value_or(stream.back().timestamp + config.settle + tick);
  std::size_t next = 0;
  for (Millis now = stream.front().timestamp; now <= end; now += tick) {
    while (next < stream.size() && stream[next].timestamp <= now) timer.observe(stream[next++]);
    if (auto ev = timer.poll(now)) events.push_back(std::move(*ev));
  }
  return events;
}

/// Tracks which mode markers are on the slate and when each was placed.
/// The active mode is the most recently placed marker's; it persists after
/// the marker is lifted and defaults to Collaborate.
class ModeTracker {
 public:
  Mode update(const SlateSnapshot& snapshot, const Vocabulary& vocabulary) {
    std::map<WordId, Millis> present;
    for (const auto& m : snapshot.detections) {
      if (!vocabulary.is_mode_marker(m.word_id)) continue;
      auto it = placed_.find(m.word_id);
      present.emplace(m.word_id, it == placed_.end() ? snapshot.timestamp : it->second);
    }
    placed_ = std::move(present);

    const std::pair<const WordId, Millis>* newest = nullptr;
    for (const auto& entry : placed_)
      if (!newest || entry.second > newest->second) newest = &entry;  // ties keep the smaller word_id
    if (newest) active_ = *vocabulary.at(newest->first).mode;
    return active_;
  }

  Mode active() const { return active_; }

 private:
  std::map<WordId, Millis> placed_;
  Mode active_ = Mode::Collaborate;
};

inline Mode resolve_mode(const SlateSnapshot& snapshot, ModeTracker& history, const Vocabulary& vocabulary) {
  return history.update(snapshot, vocabulary);
}

struct Submission {
  std::string poem_text;
  Mode mode = Mode::Collaborate;
  std::vector<WordId> word_ids;  // reading order
  Millis at{0};
};

inline std::vector<DetectedMarker> word_tiles_only(std::span<const DetectedMarker> detections,
                                                   const Vocabulary& vocabulary) {
  std::vector<DetectedMarker> words;
  for (const auto& m : detections) {
    const WordTile& tile = vocabulary.at(m.word_id);
    if (tile.kind == TileKind::Word) words.push_back(m);
  }
  return words;
}

inline Submission compose_submission(const SlateSnapshot& snapshot, const Vocabulary& vocabulary,
                                     const GeometryConfig& config, Mode mode) {
  const auto words = word_tiles_only(snapshot.detections, vocabulary);
  if (words.empty()) throw EmptyPoemError();
  const OrderedLayout layout = order_markers(words, config);
  return {layout_to_text(layout, vocabulary), mode, layout.flatten(), snapshot.timestamp};
}

struct SessionConfig {
  GeometryConfig geometry;
  SettleConfig settle;
};

/// One slate's state. Not thread-safe: a single owner drives it.
class SlateSession {
 public:
  struct Ingested {
    ChangeSet changes;
    std::vector<WordId> preview_ids;
    std::vector<std::string> preview;
    Mode mode = Mode::Collaborate;
  };

  SlateSession(Vocabulary vocabulary, SessionConfig config)
      : vocabulary_(std::move(vocabulary)), config_(config), timer_(config.settle) {
    validate(config_.geometry);
  }

  /// Rejects unknown word ids and invalid geometry before touching state.
  Ingested ingest(SlateSnapshot snapshot) {
    for (const auto& m : snapshot.detections)
      if (!vocabulary_.contains(m.word_id)) throw InputError("unknown word_id '" + m.word_id + "'");
    const auto words = word_tiles_only(snapshot.detections, vocabulary_);
    const OrderedLayout layout = order_markers(words, config_.geometry);

    Ingested out;
    out.changes = timer_.observe(snapshot);
    out.mode = mode_tracker_.update(snapshot, vocabulary_);
    out.preview_ids = layout.flatten();
    for (const auto& id : out.preview_ids) out.preview.push_back(vocabulary_.at(id).text);
    preview_ = out.preview;
    return out;
  }

  /// Returns a submission that should start a chain now. While a chain is in
  /// flight, settled poems are parked (latest wins) and returned by
  /// finish_chain() instead.
  std::optional<Submission> poll(Millis now) {
    auto ev = timer_.poll(now);
    if (!ev) return std::nullopt;
    Submission sub;
    try {
      sub = compose_submission(ev->snapshot, vocabulary_, config_.geometry, mode_tracker_.active());
    } catch (const EmptyPoemError&) {
      return std::nullopt;
    }
    sub.at = ev->at;
    if (in_flight_) {
      pending_ = std::move(sub);
      return std::nullopt;
    }
    in_flight_ = true;
    last_submission_ = sub;
    return sub;
  }

  std::optional<Submission> finish_chain() {
    in_flight_ = false;
    if (!pending_) return std::nullopt;
    Submission next = std::move(*pending_);
    pending_.reset();
    in_flight_ = true;
    last_submission_ = next;
    return next;
  }

  bool in_flight() const { return in_flight_; }
  bool has_pending() const { return pending_.has_value(); }
  Mode mode() const { return mode_tracker_.active(); }
  std::optional<Millis> settle_remaining(Millis now) const { return timer_.remaining(now); }
  const std::vector<std::string>& preview() const { return preview_; }
  const std::optional<Submission>& last_submission() const { return last_submission_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  const SessionConfig& config() const { return config_; }

 private:
  Vocabulary vocabulary_;
  SessionConfig config_;
  SettleTimer timer_;
  ModeTracker mode_tracker_;
  std::vector<std::string> preview_;
  std::optional<Submission> last_submission_;
  std::optional<Submission> pending_;
  bool in_flight_ = false;
};

}  // namespace mimetic
