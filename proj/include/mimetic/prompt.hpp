#pragma once

// Two-stage prompt chains. Stage one asks the model for a response shaped by
// the mode; stage two condenses or re-frames that response, and its output is
// what the slate displays.

#include <mimetic/error.hpp>
#include <mimetic/vocabulary.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mimetic {

/// Text with `{name}` placeholders. Names are lowercase letters and
/// underscores; any other brace usage is rejected at construction.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string text) : text_(std::move(text)) { parse(); }

  const std::string& text() const { return text_; }
  const std::set<std::string>& placeholders() const { return names_; }
  bool has(std::string_view name) const { return names_.contains(std::string(name)); }

  std::string render(const std::map<std::string, std::string>& bindings) const {
    std::string out;
    out.reserve(text_.size());
    std::size_t pos = 0;
    for (const auto& seg : segments_) {
      out.append(text_, pos, seg.open - pos);
      auto it = bindings.find(seg.name);
      if (it == bindings.end()) throw TemplateError("missing binding for {" + seg.name + "}");
      out += it->second;
      pos = seg.close + 1;
    }
    out.append(text_, pos, std::string::npos);
    return out;
  }

 private:
  struct Segment {
    std::size_t open;
    std::size_t close;
    std::string name;
  };

  void parse() {
    for (std::size_t i = 0; i < text_.size(); ++i) {
      if (text_[i] == '}') throw TemplateError("unmatched '}' at offset " + std::to_string(i));
      if (text_[i] != '{') continue;
      const std::size_t close = text_.find('}', i);
      if (close == std::string::npos) throw TemplateError("unterminated placeholder at offset " + std::to_string(i));
      std::string name = text_.substr(i + 1, close - i - 1);
      if (name.empty()) throw TemplateError("empty placeholder at offset " + std::to_string(i));
      for (char c : name)
        if (!((c >= 'a' && c <= 'z') || c == '_')) throw TemplateError("bad placeholder name '{" + name + "}'");
      names_.insert(name);
      segments_.push_back({i, close, std::move(name)});
      i = close;
    }
  }

  std::string text_;
  std::vector<Segment> segments_;
  std::set<std::string> names_;
};

inline std::string render(const PromptTemplate& t, const std::map<std::string, std::string>& bindings) {
  return t.render(bindings);
}

struct ChainSpec {
  Mode mode = Mode::Collaborate;
  PromptTemplate prompt1;  // takes {poem}
  PromptTemplate prompt2;  // takes {response}
};

inline void validate(const ChainSpec& spec) {
  if (!spec.prompt1.has("poem")) throw TemplateError("stage-1 template must contain {poem}");
  if (!spec.prompt2.has("response")) throw TemplateError("stage-2 template must contain {response}");
}

/// The chains the device ships with, one per mode.
inline const std::array<ChainSpec, 4>& default_chain_specs() {
  static const std::array<ChainSpec, 4> specs = {
      ChainSpec{Mode::Interpret,
                PromptTemplate("I just wrote the following text: {poem}. Speculate on what I'm feeling when writing "
                               "this. Please keep the interpretation short (2-3 sentences)."),
                PromptTemplate("Summarise this: {response} in only 5-15 words.")},
      ChainSpec{Mode::Collaborate,
                PromptTemplate("Select words from the following text: {poem} to form a question that the text seems to "
                               "be asking or addressing. Then, use other words from the text to answer it (2-3 "
                               "sentences)."),
                PromptTemplate("Summarise this: {response} in only 5-15 words.")},
      ChainSpec{Mode::Ideate,
                PromptTemplate("The user just input the following text: {poem} Try and develop a creative idea or "
                               "strategy that builds upon similarities between these words/concepts presented. Please "
                               "keep your response short (2-3 sentences)."),
                PromptTemplate("Reword your answer here: {response} in only 5-15 words.")},
      ChainSpec{Mode::Analogy,
                PromptTemplate("Reframe this the following text with reference to a different discipline: {poem}"),
                PromptTemplate("Repeat the following: {response} except obscure it further.")},
  };
  return specs;
}

inline const ChainSpec& spec_for(Mode mode, const std::array<ChainSpec, 4>& specs = default_chain_specs()) {
  for (const auto& s : specs)
    if (s.mode == mode) return s;
  throw TemplateError("no chain for mode");
}

// ---------------------------------------------------------------------------
// Length check

inline std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

inline constexpr std::size_t kMinSummaryWords = 5;
inline constexpr std::size_t kMaxSummaryWords = 15;

/// True when the displayed text falls outside the 5-15 word band asked of
/// the summarising modes. Analogy has no limit.
inline bool length_warning(std::string_view stage2_text, Mode mode) {
  if (mode == Mode::Analogy) return false;
  const std::size_t n = count_words(stage2_text);
  return n < kMinSummaryWords || n > kMaxSummaryWords;
}

enum class LengthCheck { Pass, Warning };

inline LengthCheck validate_length(std::string_view stage2_text, Mode mode) {
  return length_warning(stage2_text, mode) ? LengthCheck::Warning : LengthCheck::Pass;
}

// ---------------------------------------------------------------------------
// Backends

struct CompletionRequest {
  std::string prompt;
  Mode mode = Mode::Collaborate;
  std::string poem;
  int stage = 1;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  /// Returns the model's text. Throws on transport failure.
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Stage that failed and why.
class ChainError : public std::runtime_error {
 public:
  ChainError(int stage, const std::string& what)
      : std::runtime_error("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

class EmptyResponseError : public ChainError {
 public:
  explicit EmptyResponseError(int stage) : ChainError(stage, "empty completion") {}
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Offline backend: the reply is a pure function of the prompt text.
class StubBackend final : public CompletionBackend {
 public:
  std::string complete(const CompletionRequest& request) override {
    static constexpr std::array<std::string_view, 32> lexicon = {
        "memory", "river",  "machine", "quiet",  "heaven", "glass",   "ember",  "wonder",
        "human",  "orbit",  "thread",  "lantern", "salt",  "harvest", "shadow", "echo",
        "flower", "signal", "garden",  "dust",   "tide",   "vessel",  "nature", "hollow",
        "bloom",  "static", "compass", "thorn",  "ledger", "window",  "frost",  "circuit"};
    std::uint64_t h = fnv1a64(request.prompt);
    const std::size_t words = 6 + h % 7;  // 6..12, inside the summary band
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
      h = h * 6364136223846793005ull + 1442695040888963407ull;
      if (!out.empty()) out += ' ';
      out += lexicon[(h >> 33) % lexicon.size()];
    }
    return out;
  }
  std::string name() const override { return "stub"; }
};

/// One recorded exchange. `stage1_recorded` is false when only the displayed
/// text is known and stage1 is a stand-in.
struct Transcript {
  Mode mode = Mode::Collaborate;
  std::string poem;
  std::string stage1;
  std::string stage2;
  bool stage1_recorded = true;
};

inline constexpr int kTranscriptFormatVersion = 1;

inline std::vector<Transcript> parse_transcripts(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("format_version")) throw FormatError("transcripts: missing format_version");
  if (doc.at("format_version") != kTranscriptFormatVersion)
    throw VersionError("transcripts: unsupported format_version " + doc.at("format_version").dump());
  std::vector<Transcript> out;
  try {
    for (const auto& ex : doc.at("exchanges")) {
      Transcript t;
      const auto mode = parse_mode(ex.at("mode").get<std::string>());
      if (!mode) throw FormatError("transcripts: unknown mode " + ex.at("mode").dump());
      t.mode = *mode;
      t.poem = ex.at("poem").get<std::string>();
      t.stage1 = ex.at("stage1").get<std::string>();
      t.stage2 = ex.at("stage2").get<std::string>();
      t.stage1_recorded = ex.value("stage1_recorded", true);
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("transcripts: ") + e.what());
  }
  return out;
}

inline std::vector<Transcript> load_transcripts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open transcript file '" + path + "'");
  try {
    return parse_transcripts(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("transcripts: ") + e.what());
  }
}

/// Serves recorded exchanges keyed by exact (mode, poem).
class ReplayBackend final : public CompletionBackend {
 public:
  explicit ReplayBackend(std::vector<Transcript> transcripts) {
    for (auto& t : transcripts) {
      auto key = std::make_pair(t.mode, t.poem);
      by_key_.insert_or_assign(std::move(key), std::move(t));
    }
  }

  std::string complete(const CompletionRequest& request) override {
    auto it = by_key_.find({request.mode, request.poem});
    if (it == by_key_.end())
      throw std::runtime_error("replay: no transcript for mode " + std::string(to_string(request.mode)));
    return request.stage == 1 ? it->second.stage1 : it->second.stage2;
  }
  std::string name() const override { return "replay"; }

 private:
  std::map<std::pair<Mode, std::string>, Transcript> by_key_;
};

// ---------------------------------------------------------------------------
// Chain execution

struct ChainResult {
  std::string poem;
  Mode mode = Mode::Collaborate;
  std::string stage1_text;
  std::string stage2_text;
  std::chrono::milliseconds stage1_latency{0};
  std::chrono::milliseconds stage2_latency{0};
  std::string backend;
  bool length_warning = false;

  std::chrono::milliseconds total_latency() const { return stage1_latency + stage2_latency; }
};

inline ChainResult run_chain(Mode mode, const std::string& poem, CompletionBackend& backend,
                             const std::array<ChainSpec, 4>& specs = default_chain_specs()) {
  if (poem.empty()) throw InputError("cannot run a chain on an empty poem");
  const ChainSpec& spec = spec_for(mode, specs);
  validate(spec);

  using clock = std::chrono::steady_clock;
  auto stage = [&](int n, std::string prompt, std::chrono::milliseconds& latency) {
    const auto t0 = clock::now();
    std::string text;
    try {
      text = backend.complete({std::move(prompt), mode, poem, n});
    } catch (const ChainError&) {
      throw;
    } catch (const std::exception& e) {
      throw ChainError(n, e.what());
    }
    latency = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - t0);
    if (count_words(text) == 0) throw EmptyResponseError(n);
    return text;
  };

  ChainResult r;
  r.poem = poem;
  r.mode = mode;
  r.backend = backend.name();
  r.stage1_text = stage(1, spec.prompt1.render({{"poem", poem}}), r.stage1_latency);
  r.stage2_text = stage(2, spec.prompt2.render({{"response", r.stage1_text}}), r.stage2_latency);
  r.length_warning = length_warning(r.stage2_text, mode);
  return r;
}

}  // namespace mimetic
