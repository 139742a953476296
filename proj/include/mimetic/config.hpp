#pragma once

// Flat `key = value` configuration (a TOML subset: no tables, no arrays).
// Strings may be double-quoted; '#' starts a comment outside quotes.

#include <mimetic/chat_client.hpp>
#include <mimetic/error.hpp>
#include <mimetic/session.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace mimetic {

enum class BackendKind { Stub, Replay, Chat };

struct ServiceConfig {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;
  SessionConfig session;
  BackendKind backend = BackendKind::Stub;
  BackendConfig chat;
  std::string replay_path;
  std::string vocabulary_path;
  std::string log_path;
  bool multi_session = false;
  Millis tick{25};
  std::size_t subscriber_queue = 256;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline std::string unquote(const std::string& v, int line_no) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (!v.empty() && v.front() == '"') throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
  return v;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace detail

inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::unquote(detail::trim(line.substr(eq + 1)), n);
    if (key.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError("line " + std::to_string(n) + ": duplicate key '" + key + "'");
  }
  return kv;
}

inline ServiceConfig parse_service_config(std::istream& in) {
  using detail::parse_number;
  ServiceConfig c;
  for (const auto& [key, v] : parse_key_values(in)) {
    if (key == "host") c.host = v;
    else if (key == "port") c.port = parse_number<unsigned short>(key, v);
    else if (key == "k") c.session.geometry.k = parse_number<double>(key, v);
    else if (key == "tile_height")
      c.session.geometry.tile_height = v == "auto" ? TileHeight::automatic() : TileHeight::of(parse_number<double>(key, v));
    else if (key == "settle_ms") c.session.settle.settle = Millis{parse_number<long long>(key, v)};
    else if (key == "epsilon") c.session.settle.epsilon = parse_number<double>(key, v);
    else if (key == "tick_ms") c.tick = Millis{parse_number<long long>(key, v)};
    else if (key == "backend") {
      if (v == "stub") c.backend = BackendKind::Stub;
      else if (v == "replay") c.backend = BackendKind::Replay;
      else if (v == "chat") c.backend = BackendKind::Chat;
      else throw ConfigError("backend must be stub, replay or chat");
    }
    else if (key == "endpoint") c.chat.endpoint = v;
    else if (key == "model") c.chat.model = v;
    else if (key == "temperature") c.chat.temperature = parse_number<double>(key, v);
    else if (key == "max_tokens") c.chat.max_tokens = parse_number<int>(key, v);
    else if (key == "timeout_ms") c.chat.timeout = Millis{parse_number<long long>(key, v)};
    else if (key == "retries") c.chat.retries = parse_number<int>(key, v);
    else if (key == "api_key_env") c.chat.api_key_env = v;
    else if (key == "replay_file") c.replay_path = v;
    else if (key == "vocabulary") c.vocabulary_path = v;
    else if (key == "log") c.log_path = v;
    else if (key == "multi_session") c.multi_session = detail::parse_bool(key, v);
    else if (key == "subscriber_queue") c.subscriber_queue = parse_number<std::size_t>(key, v);
    else throw ConfigError("unknown key '" + key + "'");
  }

  try {
    validate(c.session.geometry);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  if (c.session.settle.settle.count() <= 0) throw ConfigError("settle_ms must be positive");
  if (!(c.session.settle.epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  if (c.tick.count() <= 0) throw ConfigError("tick_ms must be positive");
  if (c.subscriber_queue == 0) throw ConfigError("subscriber_queue must be positive");
  if (c.backend == BackendKind::Replay && c.replay_path.empty()) throw ConfigError("backend = replay needs replay_file");
  validate(c.chat);
  return c;
}

inline ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_service_config(in);
}

}  // namespace mimetic
