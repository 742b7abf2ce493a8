// Copyright 2026 The mcetk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mcetk/textnorm/textnorm.h"

#include <gtest/gtest.h>

#include <random>

#include "mcetk/common/error.h"
#include "mcetk/common/random.h"
#include "mcetk/textnorm/utf8.h"

namespace mcetk::textnorm {
namespace {

TEST(NormalizeText, StripsPunctuationAndLowercases) {
  EXPECT_EQ(NormalizeText("Hold住!", {}), "hold住");
}

TEST(NormalizeText, FoldsFullwidthThenLowercases) {
  EXPECT_EQ(NormalizeText("ＡＢＣ", {}), "abc");
  NormConfig keep_width;
  keep_width.fold_width = false;
  EXPECT_EQ(NormalizeText("ＡＢＣ", keep_width), "ＡＢＣ");
}

TEST(NormalizeText, LeavesCjkUntouched) {
  EXPECT_EQ(NormalizeText("士多啤梨", {}), "士多啤梨");
}

TEST(NormalizeText, StripsCjkPunctuationAndCollapsesSpace) {
  EXPECT_EQ(NormalizeText("  你好，  世界。「OK」  ", {}), "你好 世界 ok");
}

TEST(NormalizeText, KeepsApostropheInsideWords) {
  EXPECT_EQ(NormalizeText("Don't 'quote' it", {}), "don't quote it");
}

TEST(NormalizeText, FlagsDisableRules) {
  NormConfig cfg;
  cfg.strip_punctuation = false;
  cfg.lowercase_latin = false;
  EXPECT_EQ(NormalizeText("Hold住!", cfg), "Hold住!");
}

TEST(NormalizeText, VariantFoldingOnlyWithTable) {
  EXPECT_EQ(NormalizeText("來源", {}), "來源");
  NormConfig cfg;
  cfg.variant_table = std::make_shared<VariantTable>(VariantTable::Parse("來\t来\n", "inline"));
  EXPECT_EQ(NormalizeText("來源", cfg), "来源");
}

TEST(VariantTable, ParseSkipsCommentsAndBlankLines) {
  const auto table = VariantTable::Parse("# header\n\n們\t们\n說\t说\n", "inline");
  EXPECT_EQ(table.size(), 2u);
  EXPECT_EQ(table.Map(U'們'), U'们');
  EXPECT_EQ(table.Map(U'好'), U'好');
}

TEST(VariantTable, MalformedLineNamesTheLine) {
  try {
    VariantTable::Parse("們\t们\n說说\n", "t.tsv");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("t.tsv:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(VariantTable::Parse("們們\t们\n", "t.tsv"), ConfigError);
}

TEST(VariantTable, MissingFileIsConfigError) {
  EXPECT_THROW(VariantTable::Load("/nonexistent/variants.tsv"), ConfigError);
}

TEST(Tokenize, SegmentsMixedText) {
  const auto seq = Tokenize("士多啤梨Strawberry", {});
  ASSERT_EQ(seq.tokens.size(), 5u);
  EXPECT_EQ(seq.Texts(), (std::vector<std::string>{"士", "多", "啤", "梨", "strawberry"}));
  EXPECT_EQ(seq.tokens[4].kind, TokenKind::kLatinWord);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(seq.tokens[i].kind, TokenKind::kCjkChar);
}

TEST(Tokenize, EmptyInput) {
  const auto seq = Tokenize("", {});
  EXPECT_TRUE(seq.tokens.empty());
  EXPECT_EQ(seq.discarded, 0u);
}

TEST(Tokenize, CountsCantoneseCharacters) {
  const auto seq = Tokenize("我哋今晚去邊度食飯好呢", {});
  EXPECT_EQ(seq.tokens.size(), 11u);
  EXPECT_EQ(CountStats(seq).cjk_chars, 11u);
}

TEST(Tokenize, DigitRunsAndDiscards) {
  const auto seq = Tokenize("2024年OT😀", {});
  EXPECT_EQ(seq.Texts(), (std::vector<std::string>{"2024", "年", "ot"}));
  EXPECT_EQ(seq.tokens[0].kind, TokenKind::kDigitRun);
  EXPECT_EQ(seq.discarded, 1u);
}

TEST(Tokenize, ExtensionBIdeographIsOneToken) {
  const auto seq = Tokenize("\U00020000a", {});
  ASSERT_EQ(seq.tokens.size(), 2u);
  EXPECT_EQ(seq.tokens[0].kind, TokenKind::kCjkChar);
}

TEST(CountStats, MixedSequence) {
  const auto counts = CountStats(Tokenize("士多啤梨Strawberry", {}));
  EXPECT_EQ(counts.cjk_chars, 4u);
  EXPECT_EQ(counts.latin_words, 1u);
  ASSERT_TRUE(counts.RatioCjkToLatin().has_value());
  EXPECT_DOUBLE_EQ(*counts.RatioCjkToLatin(), 4.0);
}

TEST(CountStats, EmptyHasUndefinedRatio) {
  const auto counts = CountStats(Tokenize("", {}));
  EXPECT_EQ(counts, ScriptCounts{});
  EXPECT_FALSE(counts.RatioCjkToLatin().has_value());
}

TEST(CountStats, HandCountedThreeUtteranceFixture) {
  // 今晚要OT咯 -> 4 CJK + 1 Latin; 我哋去Kyoto睇festival -> 4 + 2;
  // 收拾下屋企啦 -> 6 + 0.
  ScriptCounts total;
  for (const char* text : {"今晚要OT咯", "我哋去Kyoto睇festival", "收拾下屋企啦"}) {
    total += CountStats(Tokenize(text, {}));
  }
  EXPECT_EQ(total.cjk_chars, 14u);
  EXPECT_EQ(total.latin_words, 3u);
  EXPECT_EQ(total.digit_runs, 0u);
}

std::string RandomUnicode(std::mt19937_64& rng) {
  // Mixture of ASCII, fullwidth forms, CJK, CJK punctuation, whitespace and
  // astral codepoints.
  static const std::pair<char32_t, char32_t> kRanges[] = {
      {0x20, 0x7E},   {0xFF01, 0xFF5E}, {0x4E00, 0x4E40},   {0x3000, 0x3011},
      {0xFF0C, 0xFF1F}, {0x09, 0x0D},   {0x1F600, 0x1F610}, {0x20000, 0x20010},
      {0x2000, 0x200A}, {0xC0, 0xFF}};
  std::u32string cps;
  const auto len = UniformBelow(rng, 24);
  for (std::uint64_t i = 0; i < len; ++i) {
    const auto& [lo, hi] = kRanges[UniformBelow(rng, std::size(kRanges))];
    cps.push_back(static_cast<char32_t>(lo + UniformBelow(rng, hi - lo + 1)));
  }
  return utf8::Encode(cps);
}

TEST(TextnormProperties, NormalizeIsIdempotent) {
  auto rng = SeededEngine(11, "idempotence");
  for (int trial = 0; trial < 5000; ++trial) {
    const std::string text = RandomUnicode(rng);
    const std::string once = NormalizeText(text, {});
    ASSERT_EQ(NormalizeText(once, {}), once) << "input: " << text;
  }
}

TEST(TextnormProperties, CountsPartitionTokens) {
  auto rng = SeededEngine(12, "partition");
  for (int trial = 0; trial < 5000; ++trial) {
    const auto seq = Tokenize(RandomUnicode(rng), {});
    const auto c = CountStats(seq);
    ASSERT_EQ(seq.tokens.size(), c.cjk_chars + c.latin_words + c.digit_runs);
  }
}

TEST(TextnormProperties, NoStripSetMemberSurvives) {
  auto rng = SeededEngine(13, "strip");
  const auto strip = DefaultStripSet();
  for (int trial = 0; trial < 5000; ++trial) {
    const std::string text = RandomUnicode(rng);
    const auto out = utf8::Decode(NormalizeText(text, {}));
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (strip.find(out[i]) == std::u32string::npos) continue;
      // Only word-internal apostrophes may remain.
      ASSERT_EQ(out[i], U'\'') << "input: " << text;
      ASSERT_TRUE(i > 0 && i + 1 < out.size());
    }
  }
}

TEST(Utf8, InvalidBytesDecodeToReplacement) {
  const auto cps = utf8::Decode("a\xC3(b\xED\xA0\x80");
  ASSERT_GE(cps.size(), 4u);
  EXPECT_EQ(cps[0], U'a');
  EXPECT_EQ(cps[1], utf8::kReplacement);
  EXPECT_EQ(utf8::Encode(utf8::Decode("香港Hong Kong")), "香港Hong Kong");
}

}  // namespace
}  // namespace mcetk::textnorm
