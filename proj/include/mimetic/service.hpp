#pragma once

// Transport-independent service core. Each slate session is owned by one
// thread that applies commands in arrival order; HTTP handlers, the settle
// ticker and chain workers only talk to it by posting messages. Prompt chains
// run on a worker thread so snapshot ingestion never waits on the backend.

#include <mimetic/analytics.hpp>
#include <mimetic/chat_client.hpp>
#include <mimetic/config.hpp>
#include <mimetic/layout_io.hpp>
#include <mimetic/prompt.hpp>
#include <mimetic/session.hpp>
#include <mimetic/vision_sim.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace mimetic {

inline constexpr int kWireSchemaVersion = 1;

enum class EventType { SnapshotAccepted, SettleCountdown, Submission, ChainStarted, Response, Error };

constexpr std::string_view to_string(EventType t) {
  switch (t) {
    case EventType::SnapshotAccepted: return "snapshot_accepted";
    case EventType::SettleCountdown: return "settle_countdown";
    case EventType::Submission: return "submission";
    case EventType::ChainStarted: return "chain_started";
    case EventType::Response: return "response";
    case EventType::Error: return "error";
  }
  return "error";
}

struct WireEvent {
  EventType type = EventType::Error;
  std::string session;
  std::uint64_t seq = 0;
  std::int64_t t_ms = 0;
  nlohmann::json payload = nlohmann::json::object();

  std::string to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = kWireSchemaVersion;
    j["session"] = session;
    j["seq"] = seq;
    j["t_ms"] = t_ms;
    j["type"] = std::string(to_string(type));
    for (auto it = payload.begin(); it != payload.end(); ++it) j[it.key()] = it.value();
    return j.dump();
  }
};

/// Bounded event queue for one subscriber. When full, the oldest
/// non-response event is dropped; response events are never dropped.
class Subscriber {
 public:
  explicit Subscriber(std::size_t capacity) : capacity_(capacity) {}

  void push(std::string event, bool is_response) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      queue_.push_back({std::move(event), is_response});
      if (queue_.size() > capacity_) {
        auto victim = std::find_if(queue_.begin(), queue_.end(), [](const Item& i) { return !i.response; });
        if (victim != queue_.end()) {
          queue_.erase(victim);
          ++dropped_;
        }
      }
    }
    cv_.notify_one();
  }

  /// Next event, or nullopt on timeout or close.
  std::optional<std::string> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    std::string out = std::move(queue_.front().json);
    queue_.pop_front();
    return out;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }
  std::size_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return queue_.size();
  }

 private:
  struct Item {
    std::string json;
    bool response;
  };
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Item> queue_;
  std::size_t capacity_;
  std::size_t dropped_ = 0;
  bool closed_ = false;
};

/// Fans events out to subscribers and remembers the latest response so a new
/// subscriber sees it first.
class EventHub {
 public:
  EventHub(std::string session, std::size_t queue_capacity)
      : session_(std::move(session)), capacity_(queue_capacity) {}

  WireEvent publish(EventType type, std::int64_t t_ms, nlohmann::json payload) {
    std::lock_guard lock(mu_);
    WireEvent ev{type, session_, ++seq_, t_ms, std::move(payload)};
    const std::string json = ev.to_json();
    const bool response = type == EventType::Response;
    if (response) latest_response_ = json;
    std::erase_if(subscribers_, [](const std::weak_ptr<Subscriber>& w) { return w.expired(); });
    for (const auto& w : subscribers_)
      if (auto s = w.lock()) s->push(json, response);
    return ev;
  }

  std::shared_ptr<Subscriber> subscribe() {
    auto sub = std::make_shared<Subscriber>(capacity_);
    std::lock_guard lock(mu_);
    if (latest_response_) sub->push(*latest_response_, true);
    subscribers_.push_back(sub);
    return sub;
  }

  void close_all() {
    std::lock_guard lock(mu_);
    for (const auto& w : subscribers_)
      if (auto s = w.lock()) s->close();
    subscribers_.clear();
  }

  std::uint64_t last_seq() const {
    std::lock_guard lock(mu_);
    return seq_;
  }

 private:
  mutable std::mutex mu_;
  std::string session_;
  std::size_t capacity_;
  std::uint64_t seq_ = 0;
  std::optional<std::string> latest_response_;
  std::vector<std::weak_ptr<Subscriber>> subscribers_;
};

/// Serialized appends to the shared log file.
class RecordSink {
 public:
  explicit RecordSink(std::string path = {}) : path_(std::move(path)) {}
  void append(const SessionRecord& r) {
    if (path_.empty()) return;
    std::lock_guard lock(mu_);
    append_record(std::filesystem::path(path_), r);
  }

 private:
  std::mutex mu_;
  std::string path_;
};

class SessionClosedError : public std::runtime_error {
 public:
  SessionClosedError() : std::runtime_error("session is closed") {}
};

struct StateView {
  std::string session;
  Mode mode = Mode::Collaborate;
  std::string latest_response;
  std::string latest_poem;
  std::vector<std::string> preview;
  std::optional<Millis> settle_remaining;
  bool in_flight = false;
  bool closed = false;
  std::uint64_t seq = 0;
};

struct SnapshotReply {
  std::vector<std::string> preview;
  std::vector<WordId> preview_ids;
  Mode mode = Mode::Collaborate;
  ChangeSet changes;
  std::optional<Millis> settle_remaining;
};

inline nlohmann::json to_json(const ChangeSet& c) {
  return {{"added", c.added}, {"removed", c.removed}, {"moved", c.moved}};
}

class SessionOwner {
 public:
  SessionOwner(std::string id, Vocabulary vocabulary, SessionConfig config, std::shared_ptr<CompletionBackend> backend,
               std::shared_ptr<RecordSink> sink, Millis tick, std::size_t queue_capacity)
      : id_(std::move(id)),
        session_(std::move(vocabulary), config),
        backend_(std::move(backend)),
        sink_(std::move(sink)),
        hub_(id_, queue_capacity),
        tick_(tick),
        epoch_(std::chrono::steady_clock::now()) {
    thread_ = std::thread([this] { loop(); });
  }

  SessionOwner(const SessionOwner&) = delete;
  SessionOwner& operator=(const SessionOwner&) = delete;

  ~SessionOwner() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
    if (chain_thread_.joinable()) chain_thread_.join();
    hub_.close_all();
  }

  const std::string& id() const { return id_; }

  /// Milliseconds since the session started.
  Millis now() const {
    return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - epoch_);
  }

  SnapshotReply ingest(std::vector<DetectedMarker> detections, std::optional<std::string> participant = std::nullopt) {
    return call([this, d = std::move(detections), p = std::move(participant)]() mutable {
      if (closed_) throw SessionClosedError();
      const Millis t = now();
      auto result = session_.ingest(SlateSnapshot{t, std::move(d)});
      if (p) participant_ = std::move(p);
      SnapshotReply reply{result.preview, result.preview_ids, result.mode, result.changes, session_.settle_remaining(t)};
      hub_.publish(EventType::SnapshotAccepted, t.count(),
                   {{"preview", reply.preview}, {"mode", to_string(reply.mode)}, {"changes", to_json(reply.changes)}});
      if (!result.changes.empty()) {
        if (auto rem = session_.settle_remaining(t)) {
          hub_.publish(EventType::SettleCountdown, t.count(), {{"remaining_ms", rem->count()}});
          last_countdown_bucket_ = rem->count() / 1000;
        }
      }
      return reply;
    });
  }

  StateView state() {
    return call([this] {
      StateView v;
      v.session = id_;
      v.mode = session_.mode();
      v.latest_response = latest_response_;
      v.latest_poem = latest_poem_;
      v.preview = session_.preview();
      v.settle_remaining = session_.settle_remaining(now());
      v.in_flight = session_.in_flight();
      v.closed = closed_;
      v.seq = hub_.last_seq();
      return v;
    });
  }

  std::vector<SessionRecord> history() {
    return call([this] { return history_; });
  }

  void close() {
    call([this] {
      closed_ = true;
      return 0;
    });
  }

  std::shared_ptr<Subscriber> subscribe() { return hub_.subscribe(); }
  EventHub& hub() { return hub_; }

 private:
  template <typename F>
  auto call(F&& fn) -> decltype(fn()) {
    using R = decltype(fn());
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(fn));
    auto fut = task->get_future();
    post([task] { (*task)(); });
    return fut.get();
  }

  void post(std::function<void()> msg) {
    {
      std::lock_guard lock(mu_);
      if (stopping_) throw std::runtime_error("session owner is shutting down");
      inbox_.push_back(std::move(msg));
    }
    cv_.notify_one();
  }

  void loop() {
    auto next_tick = std::chrono::steady_clock::now() + tick_;
    for (;;) {
      std::function<void()> msg;
      {
        std::unique_lock lock(mu_);
        cv_.wait_until(lock, next_tick, [&] { return stopping_ || !inbox_.empty(); });
        if (stopping_) {
          // Let blocked callers see a failure instead of hanging.
          inbox_.clear();
          return;
        }
        if (!inbox_.empty()) {
          msg = std::move(inbox_.front());
          inbox_.pop_front();
        }
      }
      if (msg) msg();
      if (std::chrono::steady_clock::now() >= next_tick) {
        on_tick();
        next_tick += tick_;
        const auto now = std::chrono::steady_clock::now();
        if (next_tick < now) next_tick = now + tick_;
      }
    }
  }

  void on_tick() {
    if (closed_) return;
    const Millis t = now();
    if (auto rem = session_.settle_remaining(t)) {
      const auto bucket = rem->count() / 1000;
      if (bucket < last_countdown_bucket_ && rem->count() > 0) {
        last_countdown_bucket_ = bucket;
        hub_.publish(EventType::SettleCountdown, t.count(), {{"remaining_ms", rem->count()}});
      }
    }
    if (auto sub = session_.poll(t)) start_chain(std::move(*sub));
  }

  void start_chain(Submission sub) {
    const Millis t = now();
    hub_.publish(EventType::Submission, t.count(), {{"poem", sub.poem_text}, {"mode", to_string(sub.mode)}});
    hub_.publish(EventType::ChainStarted, t.count(), {{"mode", to_string(sub.mode)}});
    if (chain_thread_.joinable()) chain_thread_.join();
    chain_thread_ = std::thread([this, sub = std::move(sub), backend = backend_]() mutable {
      std::optional<ChainResult> result;
      std::string error;
      try {
        result = run_chain(sub.mode, sub.poem_text, *backend);
      } catch (const std::exception& e) {
        error = e.what();
      }
      try {
        post([this, sub = std::move(sub), result = std::move(result), error = std::move(error)]() mutable {
          on_chain_done(std::move(sub), std::move(result), error);
        });
      } catch (const std::runtime_error&) {
        // Owner is shutting down; the result is discarded.
      }
    });
  }

  void on_chain_done(Submission sub, std::optional<ChainResult> result, const std::string& error) {
    const Millis t = now();
    if (result) {
      latest_response_ = result->stage2_text;
      latest_poem_ = result->poem;
      hub_.publish(EventType::Response, t.count(),
                   {{"text", result->stage2_text},
                    {"stage1", result->stage1_text},
                    {"poem", result->poem},
                    {"mode", to_string(result->mode)},
                    {"length_warning", result->length_warning}});
      SessionRecord rec = make_record(*result, sub.word_ids, t.count(), participant_);
      history_.push_back(rec);
      try {
        sink_->append(rec);
      } catch (const std::exception& e) {
        hub_.publish(EventType::Error, t.count(), {{"code", "log_write_failed"}, {"message", e.what()}});
      }
    } else {
      hub_.publish(EventType::Error, t.count(), {{"code", "chain_failed"}, {"message", error}});
    }
    if (auto next = session_.finish_chain()) start_chain(std::move(*next));
  }

  std::string id_;
  SlateSession session_;
  std::shared_ptr<CompletionBackend> backend_;
  std::shared_ptr<RecordSink> sink_;
  EventHub hub_;
  Millis tick_;
  std::chrono::steady_clock::time_point epoch_;

  // Owner-thread state.
  bool closed_ = false;
  std::string latest_response_;
  std::string latest_poem_;
  std::optional<std::string> participant_;
  std::vector<SessionRecord> history_;
  std::int64_t last_countdown_bucket_ = 0;
  std::thread chain_thread_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> inbox_;
  bool stopping_ = false;
  std::thread thread_;
};

inline std::shared_ptr<CompletionBackend> make_backend(const ServiceConfig& config) {
  switch (config.backend) {
    case BackendKind::Stub: return std::make_shared<StubBackend>();
    case BackendKind::Replay: return std::make_shared<ReplayBackend>(load_transcripts(config.replay_path));
    case BackendKind::Chat: return std::make_shared<ChatCompletionBackend>(config.chat);
  }
  return std::make_shared<StubBackend>();
}

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

inline HttpReply error_reply(int status, std::string code, std::string message) {
  return {status, {{"schema_version", kWireSchemaVersion}, {"error", {{"code", code}, {"message", message}}}}};
}

/// Parses a POST /snapshot body: either "detections" (marker corners) or
/// "poses" (tile poses, synthesized without noise). "frame": "image" marks
/// y-down coordinates.
inline std::vector<DetectedMarker> parse_snapshot_body(const nlohmann::json& body) {
  if (!body.is_object()) throw FormatError("body must be a JSON object");
  const bool flip = detail::image_frame(body);
  return detail::wrap_json_errors("snapshot", [&] {
    std::vector<DetectedMarker> out;
    if (body.contains("detections")) {
      for (const auto& m : body["detections"]) out.push_back(detail::marker_from_json(m, flip));
    } else if (body.contains("poses")) {
      std::vector<TilePose> poses;
      for (const auto& p : body["poses"]) poses.push_back(detail::pose_from_json(p, flip));
      out = synthesize(poses, NoiseModel{}, Millis{0}).detections;
    } else {
      throw FormatError("snapshot needs detections or poses");
    }
    return out;
  });
}

class Service {
 public:
  static constexpr const char* kDefaultSession = "default";

  Service(ServiceConfig config, Vocabulary vocabulary, std::shared_ptr<CompletionBackend> backend)
      : config_(std::move(config)),
        vocabulary_(std::move(vocabulary)),
        backend_(std::move(backend)),
        sink_(std::make_shared<RecordSink>(config_.log_path)) {
    session(kDefaultSession);
  }

  const ServiceConfig& config() const { return config_; }

  /// Looks up a session, creating it on demand when multi-session is on.
  /// Returns nullptr for unknown sessions otherwise.
  SessionOwner* session(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it != sessions_.end()) return it->second.get();
    if (id != kDefaultSession && !config_.multi_session) return nullptr;
    if (id.empty() || id.size() > 64) return nullptr;
    auto owner = std::make_unique<SessionOwner>(id, vocabulary_, config_.session, backend_, sink_, config_.tick,
                                                config_.subscriber_queue);
    return sessions_.emplace(id, std::move(owner)).first->second.get();
  }

  HttpReply post_snapshot(const std::string& session_id, const std::string& body_text) {
    SessionOwner* s = session(session_id);
    if (!s) return error_reply(404, "unknown_session", "no session '" + session_id + "'");
    const auto body = nlohmann::json::parse(body_text, nullptr, false);
    if (body.is_discarded()) return error_reply(400, "bad_json", "body is not valid JSON");
    try {
      auto detections = parse_snapshot_body(body);
      std::optional<std::string> participant;
      if (body.contains("participant") && body["participant"].is_string()) participant = body["participant"];
      const SnapshotReply r = s->ingest(std::move(detections), std::move(participant));
      nlohmann::ordered_json j;
      j["schema_version"] = kWireSchemaVersion;
      j["session"] = session_id;
      j["preview"] = r.preview;
      j["preview_ids"] = r.preview_ids;
      j["mode"] = std::string(to_string(r.mode));
      j["changes"] = to_json(r.changes);
      j["settle_remaining_ms"] = r.settle_remaining ? nlohmann::json(r.settle_remaining->count()) : nlohmann::json();
      return {200, j};
    } catch (const SessionClosedError& e) {
      return error_reply(409, "session_closed", e.what());
    } catch (const InputError& e) {
      return error_reply(400, "bad_input", e.what());
    } catch (const FormatError& e) {
      return error_reply(400, "bad_input", e.what());
    }
  }

  HttpReply get_state(const std::string& session_id) {
    SessionOwner* s = session(session_id);
    if (!s) return error_reply(404, "unknown_session", "no session '" + session_id + "'");
    const StateView v = s->state();
    nlohmann::ordered_json j;
    j["schema_version"] = kWireSchemaVersion;
    j["session"] = v.session;
    j["mode"] = std::string(to_string(v.mode));
    j["latest_response"] = v.latest_response;
    j["latest_poem"] = v.latest_poem;
    j["preview"] = v.preview;
    j["settle_remaining_ms"] = v.settle_remaining ? nlohmann::json(v.settle_remaining->count()) : nlohmann::json();
    j["in_flight"] = v.in_flight;
    j["closed"] = v.closed;
    j["seq"] = v.seq;
    return {200, j};
  }

  HttpReply get_history(const std::string& session_id) {
    SessionOwner* s = session(session_id);
    if (!s) return error_reply(404, "unknown_session", "no session '" + session_id + "'");
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : s->history()) records.push_back(nlohmann::json::parse(to_json_line(r)));
    return {200, {{"schema_version", kWireSchemaVersion}, {"session", session_id}, {"records", records}}};
  }

  HttpReply close_session(const std::string& session_id) {
    SessionOwner* s = session(session_id);
    if (!s) return error_reply(404, "unknown_session", "no session '" + session_id + "'");
    s->close();
    return {200, {{"schema_version", kWireSchemaVersion}, {"session", session_id}, {"closed", true}}};
  }

  std::shared_ptr<Subscriber> subscribe(const std::string& session_id) {
    SessionOwner* s = session(session_id);
    return s ? s->subscribe() : nullptr;
  }

  /// Closes every subscriber queue so streaming connections wind down.
  void shutdown_streams() {
    std::lock_guard lock(mu_);
    for (auto& [id, s] : sessions_) s->hub().close_all();
  }

 private:
  ServiceConfig config_;
  Vocabulary vocabulary_;
  std::shared_ptr<CompletionBackend> backend_;
  std::shared_ptr<RecordSink> sink_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<SessionOwner>> sessions_;
};

}  // namespace mimetic
