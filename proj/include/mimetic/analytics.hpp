#pragma once

// Append-only interaction log (one JSON object per line) and the usage
// statistics computed over it.

#include <mimetic/error.hpp>
#include <mimetic/prompt.hpp>
#include <mimetic/vocabulary.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace mimetic {

inline constexpr int kRecordSchemaVersion = 1;

struct SessionRecord {
  int schema_version = kRecordSchemaVersion;
  std::int64_t timestamp_ms = 0;
  std::optional<std::string> participant;
  Mode mode = Mode::Collaborate;
  std::string poem;
  std::vector<WordId> word_ids;
  std::string stage1;
  std::string stage2;
  std::int64_t latency_ms = 0;

  friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

inline std::string to_json_line(const SessionRecord& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = r.schema_version;
  j["timestamp_ms"] = r.timestamp_ms;
  if (r.participant) j["participant"] = *r.participant;
  j["mode"] = std::string(to_string(r.mode));
  j["poem"] = r.poem;
  j["word_ids"] = r.word_ids;
  j["stage1"] = r.stage1;
  j["stage2"] = r.stage2;
  j["latency_ms"] = r.latency_ms;
  return j.dump();
}

/// Throws VersionError for an unknown schema version and FormatError for
/// anything else that is wrong with the line.
inline SessionRecord parse_record(const std::string& line) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError("not a JSON object");
  try {
    SessionRecord r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kRecordSchemaVersion)
      throw VersionError("unsupported record schema_version " + std::to_string(r.schema_version));
    r.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    if (j.contains("participant")) r.participant = j.at("participant").get<std::string>();
    const auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw FormatError("unknown mode " + j.at("mode").dump());
    r.mode = *mode;
    r.poem = j.at("poem").get<std::string>();
    r.word_ids = j.at("word_ids").get<std::vector<WordId>>();
    r.stage1 = j.at("stage1").get<std::string>();
    r.stage2 = j.at("stage2").get<std::string>();
    r.latency_ms = j.at("latency_ms").get<std::int64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(e.what());
  }
}

inline SessionRecord make_record(const ChainResult& result, std::vector<WordId> word_ids, std::int64_t timestamp_ms,
                                 std::optional<std::string> participant = std::nullopt) {
  SessionRecord r;
  r.timestamp_ms = timestamp_ms;
  r.participant = std::move(participant);
  r.mode = result.mode;
  r.poem = result.poem;
  r.word_ids = std::move(word_ids);
  r.stage1 = result.stage1_text;
  r.stage2 = result.stage2_text;
  r.latency_ms = result.total_latency().count();
  return r;
}

inline void append_record(std::ostream& log, const SessionRecord& record) {
  log << to_json_line(record) << '\n';
  log.flush();
}

inline void append_record(const std::filesystem::path& path, const SessionRecord& record) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw FormatError("cannot open log '" + path.string() + "' for appending");
  append_record(out, record);
}

struct LogDiagnostic {
  int line = 0;
  std::string message;
};

struct LogContents {
  std::vector<SessionRecord> records;
  std::vector<LogDiagnostic> diagnostics;
};

/// Malformed lines become diagnostics; an unsupported schema version aborts.
inline LogContents read_log(std::istream& in) {
  LogContents out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.records.push_back(parse_record(line));
    } catch (const VersionError& e) {
      throw VersionError("line " + std::to_string(n) + ": " + e.what());
    } catch (const FormatError& e) {
      out.diagnostics.push_back({n, e.what()});
    }
  }
  return out;
}

inline LogContents read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open log '" + path.string() + "'");
  return read_log(in);
}

// ---------------------------------------------------------------------------
// Statistics

struct ModeShare {
  Mode mode;
  std::size_t count = 0;
  int percent = 0;
};

/// Share per mode, largest first, rounded to whole percents that sum to 100.
inline std::vector<ModeShare> mode_usage(const std::vector<SessionRecord>& records) {
  if (records.empty()) throw InputError("mode usage of an empty log");
  std::array<std::size_t, 4> counts{};
  for (const auto& r : records) ++counts[static_cast<std::size_t>(r.mode)];
  const std::size_t n = records.size();

  std::vector<ModeShare> shares;
  for (Mode m : kAllModes) {
    const std::size_t c = counts[static_cast<std::size_t>(m)];
    if (c == 0) continue;
    shares.push_back({m, c, static_cast<int>((200 * c + n) / (2 * n))});
  }
  std::stable_sort(shares.begin(), shares.end(), [](const ModeShare& a, const ModeShare& b) { return a.count > b.count; });
  int total = 0;
  for (const auto& s : shares) total += s.percent;
  shares.front().percent += 100 - total;
  return shares;
}

struct Coverage {
  std::size_t distinct_words_used = 0;
  std::size_t vocabulary_size = 0;
};

inline Coverage vocabulary_coverage(const std::vector<SessionRecord>& records, const Vocabulary& vocabulary) {
  std::set<std::string_view> used;
  for (const auto& r : records)
    for (const auto& id : r.word_ids) {
      const WordTile* t = vocabulary.find(id);
      if (t && t->kind == TileKind::Word) used.insert(t->word_id);
    }
  return {used.size(), vocabulary.word_count()};
}

/// Lowercase, split on whitespace, strip punctuation from both ends of each
/// token. Inner punctuation (hyphens, apostrophes) stays.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0;
    std::size_t e = cur.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(cur[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(cur[e - 1]))) --e;
    if (e > b) out.push_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  flush();
  return out;
}

inline std::size_t response_lexicon(const std::vector<SessionRecord>& records) {
  std::set<std::string> seen;
  for (const auto& r : records)
    for (auto& t : tokenize(r.stage2)) seen.insert(std::move(t));
  return seen.size();
}

enum class WordSource { Input, Response };

struct WordCount {
  std::string word;
  std::size_t count = 0;
  friend bool operator==(const WordCount&, const WordCount&) = default;
};

inline std::vector<WordCount> top_words(const std::vector<SessionRecord>& records, WordSource source, std::size_t n) {
  std::map<std::string, std::size_t> freq;
  for (const auto& r : records)
    for (auto& t : tokenize(source == WordSource::Input ? r.poem : r.stage2)) ++freq[std::move(t)];
  std::vector<WordCount> ranked;
  ranked.reserve(freq.size());
  for (auto& [w, c] : freq) ranked.push_back({w, c});
  // freq is alphabetical already, so a stable sort keeps ties alphabetical.
  std::stable_sort(ranked.begin(), ranked.end(), [](const WordCount& a, const WordCount& b) { return a.count > b.count; });
  if (ranked.size() > n) ranked.resize(n);
  return ranked;
}

struct UsageReport {
  std::size_t poems = 0;
  std::size_t participants = 0;  // 0 when no record is tagged
  std::vector<ModeShare> modes;
  Coverage coverage;
  std::size_t response_lexicon = 0;
  std::vector<WordCount> top_input;
  std::vector<WordCount> top_response;
};

inline UsageReport build_report(const std::vector<SessionRecord>& records, const Vocabulary& vocabulary,
                                std::size_t top_n = 10) {
  UsageReport rep;
  rep.poems = records.size();
  std::set<std::string> tags;
  for (const auto& r : records)
    if (r.participant) tags.insert(*r.participant);
  rep.participants = tags.size();
  if (!records.empty()) rep.modes = mode_usage(records);
  rep.coverage = vocabulary_coverage(records, vocabulary);
  rep.response_lexicon = response_lexicon(records);
  rep.top_input = top_words(records, WordSource::Input, top_n);
  rep.top_response = top_words(records, WordSource::Response, top_n);
  return rep;
}

inline std::string format_report(const UsageReport& rep) {
  std::ostringstream os;
  os << "poems: " << rep.poems << '\n';
  if (rep.participants > 0) {
    os << "participants: " << rep.participants << " (" << std::fixed << std::setprecision(1)
       << static_cast<double>(rep.poems) / static_cast<double>(rep.participants) << " poems/participant)\n";
    os << std::defaultfloat;
  }
  os << "mode usage:\n";
  for (const auto& s : rep.modes)
    os << "  " << std::left << std::setw(12) << to_string(s.mode) << std::right << std::setw(6) << s.count
       << std::setw(5) << s.percent << "%\n";
  os << "vocabulary coverage: " << rep.coverage.distinct_words_used << '/' << rep.coverage.vocabulary_size << '\n';
  os << "response lexicon: " << rep.response_lexicon << " unique words\n";
  auto list = [&](const char* label, const std::vector<WordCount>& words) {
    os << label;
    for (std::size_t i = 0; i < words.size(); ++i) os << (i ? ", " : " ") << words[i].word << " (" << words[i].count << ')';
    os << '\n';
  };
  list("top input words:", rep.top_input);
  list("top response words:", rep.top_response);
  return os.str();
}

}  // namespace mimetic
