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

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcetk::textnorm {

// Codepoint-to-codepoint folding table (e.g. Traditional -> Simplified).
class VariantTable {
 public:
  VariantTable() = default;
  explicit VariantTable(std::map<char32_t, char32_t> mapping)
      : mapping_(std::move(mapping)) {}

  // Two-column UTF-8 TSV, `source<TAB>target`, one codepoint per column.
  // Blank lines and lines starting with '#' are ignored. Throws ConfigError
  // naming the offending line.
  static VariantTable Load(const std::filesystem::path& path);
  static VariantTable Parse(std::string_view text, std::string_view origin);

  char32_t Map(char32_t cp) const {
    auto it = mapping_.find(cp);
    return it == mapping_.end() ? cp : it->second;
  }
  std::size_t size() const { return mapping_.size(); }

 private:
  std::map<char32_t, char32_t> mapping_;
};

// ASCII punctuation plus ，。？！、：；「」（）.
std::u32string DefaultStripSet();

struct NormConfig {
  bool strip_punctuation = true;
  bool lowercase_latin = true;
  // Fullwidth ASCII (U+FF01..U+FF5E) and U+3000 to their halfwidth forms.
  bool fold_width = true;
  // Absent means no CJK codepoint is ever rewritten.
  std::shared_ptr<const VariantTable> variant_table;
  std::u32string strip_set = DefaultStripSet();
};

enum class TokenKind { kCjkChar, kLatinWord, kDigitRun };

std::string_view TokenKindName(TokenKind kind);

struct Token {
  TokenKind kind;
  std::string text;

  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenSequence {
  std::vector<Token> tokens;
  std::string source;
  std::string normalized;
  // Non-whitespace codepoints of the normalized text that became no token.
  std::size_t discarded = 0;

  std::vector<std::string> Texts() const;
};

struct ScriptCounts {
  std::size_t cjk_chars = 0;
  std::size_t latin_words = 0;
  std::size_t digit_runs = 0;

  // cjk_chars / latin_words; nullopt when there are no Latin words.
  std::optional<double> RatioCjkToLatin() const;

  ScriptCounts& operator+=(const ScriptCounts& o) {
    cjk_chars += o.cjk_chars;
    latin_words += o.latin_words;
    digit_runs += o.digit_runs;
    return *this;
  }
  friend bool operator==(const ScriptCounts&, const ScriptCounts&) = default;
};

// CJK Unified Ideographs, Extensions A-B, and the Compatibility Ideographs
// blocks (including the supplement).
bool IsCjkIdeograph(char32_t cp);
bool IsWhitespace(char32_t cp);

std::string NormalizeText(std::string_view text, const NormConfig& cfg);

TokenSequence Tokenize(std::string_view text, const NormConfig& cfg);

ScriptCounts CountStats(const TokenSequence& seq);

}  // namespace mcetk::textnorm
