#include <mimetic/vocabulary.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace mimetic;

namespace {

const Vocabulary& tiles() {
  static const Vocabulary v = load_vocabulary(MIMETIC_DATA_DIR "/vocabulary.tsv");
  return v;
}

Vocabulary parse(const std::string& text) {
  std::istringstream in(text);
  return parse_vocabulary(in);
}

const std::string kMarkers =
    "mi\tINTERPRET\t0\tmode\tinterpret\n"
    "mc\tCOLLABORATE\t0\tmode\tcollaborate\n"
    "md\tIDEATE\t0\tmode\tideate\n"
    "ma\tANALOGY\t0\tmode\tanalogy\n";

}  // namespace

TEST(Vocabulary, DefaultSetHas175WordsAndFourMarkers) {
  EXPECT_EQ(tiles().word_count(), 175u);
  EXPECT_EQ(tiles().tiles().size(), 179u);
  for (Mode m : kAllModes) {
    EXPECT_EQ(tiles().marker_for(m).mode, m);
    EXPECT_TRUE(tiles().is_mode_marker(tiles().marker_for(m).word_id));
  }
  EXPECT_FALSE(tiles().is_mode_marker("human"));
}

TEST(Vocabulary, UnknownIdRejected) {
  EXPECT_EQ(tiles().find("zzz"), nullptr);
  EXPECT_THROW(tiles().at("zzz"), InputError);
}

TEST(Vocabulary, ParsesTable) {
  const Vocabulary v = parse("word_id\ttext\tattach_left\tkind\tmode\n# comment\n\nsun\tsun\t0\tword\t\nly\tly\t1\tword\n" +
                             kMarkers);
  EXPECT_EQ(v.word_count(), 2u);
  EXPECT_TRUE(v.at("ly").attach_left);
  EXPECT_EQ(v.at("mi").kind, TileKind::ModeMarker);
}

TEST(Vocabulary, MalformedTablesRejected) {
  EXPECT_THROW(parse("sun\tsun\tmaybe\tword\n" + kMarkers), FormatError);
  EXPECT_THROW(parse("sun\tsun\t0\tnoun\n" + kMarkers), FormatError);
  EXPECT_THROW(parse("sun\tsun\n" + kMarkers), FormatError);
  EXPECT_THROW(parse("sun\tsun\t0\tword\n"), FormatError);                   // no markers
  EXPECT_THROW(parse("sun\tsun\t0\tword\nsun\tsun\t0\tword\n" + kMarkers), FormatError);  // duplicate
}

TEST(Vocabulary, ModeNamesRoundTrip) {
  for (Mode m : kAllModes) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_FALSE(parse_mode("Interpret").has_value());
}

TEST(LayoutText, TwoLines) {
  const OrderedLayout layout{{{"hate", "delicious", "body"}, {"beautiful", "anxious", "heart"}}};
  EXPECT_EQ(layout_to_text(layout, tiles()), "hate delicious body\nbeautiful anxious heart");
}

TEST(LayoutText, Empty) { EXPECT_EQ(layout_to_text(OrderedLayout{}, tiles()), ""); }

TEST(LayoutText, SuffixAttachesLeft) {
  EXPECT_EQ(layout_to_text(OrderedLayout{{{"machine", "suffix_s"}}}, tiles()), "machines");
  EXPECT_EQ(layout_to_text(OrderedLayout{{{"i", "love", "you", "question_mark"}}}, tiles()), "I love you?");
}

TEST(LayoutText, UnknownIdRejected) {
  EXPECT_THROW(layout_to_text(OrderedLayout{{{"zzz"}}}, tiles()), InputError);
}
