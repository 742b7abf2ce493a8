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

#include <algorithm>
#include <sstream>

#include "mcetk/common/error.h"
#include "mcetk/common/io.h"
#include "mcetk/textnorm/utf8.h"

namespace mcetk::textnorm {
namespace {

bool IsAsciiLetter(char32_t cp) {
  return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z');
}

bool IsAsciiDigit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

}  // namespace

std::u32string DefaultStripSet() {
  std::u32string set;
  for (char32_t c = 0x21; c <= 0x7E; ++c) {
    if (!IsAsciiLetter(c) && !IsAsciiDigit(c)) set.push_back(c);
  }
  set += U"，。？！、：；「」（）";
  return set;
}

VariantTable VariantTable::Load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = ReadTextFile(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("variant table: ") + e.what());
  }
  return Parse(text, path.string());
}

VariantTable VariantTable::Parse(std::string_view text, std::string_view origin) {
  std::map<char32_t, char32_t> mapping;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    const auto fail = [&](const std::string& why) {
      throw ConfigError("variant table " + std::string(origin) + ":" +
                        std::to_string(number) + ": " + why + ": '" + line + "'");
    };
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail("expected source<TAB>target");
    const std::u32string source = utf8::Decode(line.substr(0, tab));
    const std::u32string target = utf8::Decode(line.substr(tab + 1));
    if (source.size() != 1 || target.size() != 1) {
      fail("each column must hold exactly one codepoint");
    }
    if (source[0] == utf8::kReplacement || target[0] == utf8::kReplacement) {
      fail("invalid UTF-8");
    }
    mapping[source[0]] = target[0];
  }
  return VariantTable(std::move(mapping));
}

std::string_view TokenKindName(TokenKind kind) {
  switch (kind) {
    case TokenKind::kCjkChar: return "cjk";
    case TokenKind::kLatinWord: return "latin";
    case TokenKind::kDigitRun: return "digit";
  }
  return "?";
}

std::vector<std::string> TokenSequence::Texts() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::optional<double> ScriptCounts::RatioCjkToLatin() const {
  if (latin_words == 0) return std::nullopt;
  return static_cast<double>(cjk_chars) / static_cast<double>(latin_words);
}

bool IsCjkIdeograph(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // Unified Ideographs
         (cp >= 0x3400 && cp <= 0x4DBF) ||    // Extension A
         (cp >= 0x20000 && cp <= 0x2A6DF) ||  // Extension B
         (cp >= 0xF900 && cp <= 0xFAFF) ||    // Compatibility Ideographs
         (cp >= 0x2F800 && cp <= 0x2FA1F);    // Compatibility Supplement
}

bool IsWhitespace(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 ||
         cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 ||
         cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

std::string NormalizeText(std::string_view text, const NormConfig& cfg) {
  std::u32string cps = utf8::Decode(text);

  for (char32_t& cp : cps) {
    if (cfg.fold_width) {
      if (cp >= 0xFF01 && cp <= 0xFF5E) {
        cp = cp - 0xFF01 + 0x21;
      } else if (cp == 0x3000) {
        cp = U' ';
      }
    }
    if (cfg.variant_table) cp = cfg.variant_table->Map(cp);
    if (cfg.lowercase_latin && cp >= U'A' && cp <= U'Z') cp = cp - U'A' + U'a';
  }

  if (cfg.strip_punctuation) {
    // Decisions look at the pre-strip neighbours; a kept apostrophe always
    // sits between two letters, which stripping never touches.
    std::u32string stripped(cps.size(), U' ');
    for (std::size_t i = 0; i < cps.size(); ++i) {
      const char32_t cp = cps[i];
      const bool in_set = cfg.strip_set.find(cp) != std::u32string::npos;
      if (!in_set) {
        stripped[i] = cp;
      } else if (cp == U'\'' && i > 0 && i + 1 < cps.size() &&
                 IsAsciiLetter(cps[i - 1]) && IsAsciiLetter(cps[i + 1])) {
        stripped[i] = cp;
      }
    }
    cps = std::move(stripped);
  }

  // Collapse whitespace runs to one space and trim.
  std::u32string out;
  out.reserve(cps.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (IsWhitespace(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(cp);
  }
  return utf8::Encode(out);
}

TokenSequence Tokenize(std::string_view text, const NormConfig& cfg) {
  TokenSequence seq;
  seq.source = std::string(text);
  seq.normalized = NormalizeText(text, cfg);
  const std::u32string cps = utf8::Decode(seq.normalized);

  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t cp = cps[i];
    if (IsCjkIdeograph(cp)) {
      seq.tokens.push_back({TokenKind::kCjkChar, utf8::Encode(cp)});
      ++i;
    } else if (IsAsciiLetter(cp) || cp == U'\'') {
      std::size_t j = i;
      bool has_letter = false;
      while (j < cps.size() && (IsAsciiLetter(cps[j]) || cps[j] == U'\'')) {
        has_letter = has_letter || IsAsciiLetter(cps[j]);
        ++j;
      }
      if (has_letter) {
        seq.tokens.push_back({TokenKind::kLatinWord, utf8::Encode(cps.substr(i, j - i))});
      } else {
        seq.discarded += j - i;
      }
      i = j;
    } else if (IsAsciiDigit(cp)) {
      std::size_t j = i;
      while (j < cps.size() && IsAsciiDigit(cps[j])) ++j;
      seq.tokens.push_back({TokenKind::kDigitRun, utf8::Encode(cps.substr(i, j - i))});
      i = j;
    } else {
      if (!IsWhitespace(cp)) ++seq.discarded;
      ++i;
    }
  }
  return seq;
}

ScriptCounts CountStats(const TokenSequence& seq) {
  ScriptCounts counts;
  for (const auto& t : seq.tokens) {
    switch (t.kind) {
      case TokenKind::kCjkChar: ++counts.cjk_chars; break;
      case TokenKind::kLatinWord: ++counts.latin_words; break;
      case TokenKind::kDigitRun: ++counts.digit_runs; break;
    }
  }
  return counts;
}

}  // namespace mcetk::textnorm
