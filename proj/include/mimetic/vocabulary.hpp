#pragma once

#include <mimetic/error.hpp>
#include <mimetic/geometry.hpp>

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mimetic {

enum class Mode { Interpret, Collaborate, Ideate, Analogy };

inline constexpr std::array<Mode, 4> kAllModes = {Mode::Interpret, Mode::Collaborate, Mode::Ideate, Mode::Analogy};

constexpr std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Interpret: return "interpret";
    case Mode::Collaborate: return "collaborate";
    case Mode::Ideate: return "ideate";
    case Mode::Analogy: return "analogy";
  }
  return "collaborate";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : kAllModes)
    if (to_string(m) == s) return m;
  return std::nullopt;
}

enum class TileKind { Word, ModeMarker };

struct WordTile {
  WordId word_id;
  std::string text;
  bool attach_left = false;  // suffixes and punctuation join the previous word
  TileKind kind = TileKind::Word;
  std::optional<Mode> mode;  // set for mode markers only
};

/// The tile set the slate recognizes: word tiles plus exactly four mode markers.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<WordTile> tiles) {
    std::array<int, 4> mode_seen{};
    for (auto& t : tiles) {
      if (t.word_id.empty()) throw InputError("vocabulary: empty word_id");
      if (t.kind == TileKind::Word && t.text.empty()) throw InputError("vocabulary: word '" + t.word_id + "' has no text");
      if (t.kind == TileKind::ModeMarker) {
        if (!t.mode) throw InputError("vocabulary: mode marker '" + t.word_id + "' has no mode");
        ++mode_seen[static_cast<std::size_t>(*t.mode)];
      }
      const std::string id = t.word_id;
      if (!index_.emplace(id, tiles_.size()).second) throw InputError("vocabulary: duplicate word_id '" + id + "'");
      tiles_.push_back(std::move(t));
    }
    for (int n : mode_seen)
      if (n != 1) throw InputError("vocabulary: need exactly one marker per mode");
  }

  const WordTile* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &tiles_[it->second];
  }
  const WordTile& at(std::string_view id) const {
    if (const auto* t = find(id)) return *t;
    throw InputError("unknown word_id '" + std::string(id) + "'");
  }
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  bool is_mode_marker(std::string_view id) const {
    const auto* t = find(id);
    return t && t->kind == TileKind::ModeMarker;
  }

  const std::vector<WordTile>& tiles() const { return tiles_; }

  std::size_t word_count() const {
    std::size_t n = 0;
    for (const auto& t : tiles_) n += t.kind == TileKind::Word;
    return n;
  }

  const WordTile& marker_for(Mode m) const {
    for (const auto& t : tiles_)
      if (t.kind == TileKind::ModeMarker && t.mode == m) return t;
    throw InputError("vocabulary has no marker for mode");
  }

 private:
  std::vector<WordTile> tiles_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Tab-separated table with a header row:
///   word_id  text  attach_left  kind  mode
/// `attach_left` is 0/1, `kind` is word|mode, `mode` is empty for words.
/// Blank lines and lines starting with '#' are skipped.
inline Vocabulary parse_vocabulary(std::istream& in) {
  std::vector<WordTile> tiles;
  std::string line;
  int line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (line.back() == '\t') cols.emplace_back();
    if (header) {
      header = false;
      if (cols.size() >= 1 && cols[0] == "word_id") continue;
    }
    const auto where = "vocabulary line " + std::to_string(line_no) + ": ";
    if (cols.size() < 4 || cols.size() > 5) throw FormatError(where + "expected 4 or 5 tab-separated columns");
    WordTile t;
    t.word_id = cols[0];
    t.text = cols[1];
    if (cols[2] != "0" && cols[2] != "1") throw FormatError(where + "attach_left must be 0 or 1");
    t.attach_left = cols[2] == "1";
    if (cols[3] == "word") {
      t.kind = TileKind::Word;
    } else if (cols[3] == "mode") {
      t.kind = TileKind::ModeMarker;
      if (cols.size() < 5) throw FormatError(where + "mode marker without a mode");
      t.mode = parse_mode(cols[4]);
      if (!t.mode) throw FormatError(where + "unknown mode '" + cols[4] + "'");
    } else {
      throw FormatError(where + "kind must be word or mode");
    }
    tiles.push_back(std::move(t));
  }
  try {
    return Vocabulary(std::move(tiles));
  } catch (const InputError& e) {
    throw FormatError(e.what());
  }
}

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocabulary file '" + path + "'");
  return parse_vocabulary(in);
}

/// Words in a line are separated by single spaces, except attach_left tiles
/// which glue to the preceding word. Lines are separated by '\n'.
inline std::string layout_to_text(const OrderedLayout& layout, const Vocabulary& vocabulary) {
  std::string out;
  for (const auto& line : layout.lines) {
    std::string text;
    for (const auto& id : line) {
      const WordTile& tile = vocabulary.at(id);
      if (!text.empty() && !tile.attach_left) text += ' ';
      text += tile.text;
    }
    if (text.empty()) continue;
    if (!out.empty()) out += '\n';
    out += text;
  }
  return out;
}

}  // namespace mimetic
