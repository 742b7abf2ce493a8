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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <map>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "mcetk/common/error.h"
#include "mcetk/common/hash.h"
#include "mcetk/common/http.h"
#include "mcetk/judge/backend.h"
#include "mcetk/judge/judge.h"
#include "mcetk/textnorm/textnorm.h"

namespace mcetk::judge {
namespace {

std::optional<std::string_view> Section(std::string_view prompt, std::string_view tag) {
  const std::string open = fmt::format("<{}>\n", tag);
  const std::string close = fmt::format("\n</{}>", tag);
  const auto start = prompt.find(open);
  if (start == std::string_view::npos) return std::nullopt;
  const auto body = start + open.size();
  const auto end = prompt.find(close, body);
  if (end == std::string_view::npos) return std::nullopt;
  return prompt.substr(body, end - body);
}

double TokenOverlapF1(std::string_view ref, std::string_view hyp) {
  const textnorm::NormConfig cfg;
  std::map<std::string, int> ref_counts;
  std::map<std::string, int> hyp_counts;
  const auto r = textnorm::Tokenize(ref, cfg).Texts();
  const auto h = textnorm::Tokenize(hyp, cfg).Texts();
  if (r.empty() && h.empty()) return 1.0;
  if (r.empty() || h.empty()) return 0.0;
  for (const auto& t : r) ++ref_counts[t];
  for (const auto& t : h) ++hyp_counts[t];
  int overlap = 0;
  for (const auto& [tok, n] : ref_counts) {
    auto it = hyp_counts.find(tok);
    if (it != hyp_counts.end()) overlap += std::min(n, it->second);
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(h.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(r.size());
  return 2.0 * precision * recall / (precision + recall);
}

int RoundHalfUp(double v) { return static_cast<int>(std::floor(v + 0.5)); }

struct ParsedConversation {
  std::vector<Turn> turns;
  std::vector<std::string> keywords;
};

ParsedConversation ParseQualityPrompt(std::string_view prompt, std::string_view body) {
  ParsedConversation out;
  std::istringstream lines{std::string(body)};
  std::string line;
  while (std::getline(lines, line)) {
    int speaker = 0;
    const auto colon = line.find(": ");
    if (line.rfind("Speaker ", 0) == 0 && colon != std::string::npos) {
      try {
        speaker = std::stoi(line.substr(8, colon - 8));
      } catch (const std::exception&) {
        speaker = 0;
      }
      out.turns.push_back({speaker, line.substr(colon + 2)});
    }
  }
  constexpr std::string_view kKeywords = "\nTopic keywords: ";
  if (auto pos = prompt.find(kKeywords); pos != std::string_view::npos) {
    const auto start = pos + kKeywords.size();
    const auto end = prompt.find('\n', start);
    std::string list(prompt.substr(start, end - start));
    std::size_t from = 0;
    while (from <= list.size()) {
      auto comma = list.find(", ", from);
      if (comma == std::string::npos) comma = list.size();
      if (comma > from) out.keywords.push_back(list.substr(from, comma - from));
      from = comma + 2;
    }
  }
  return out;
}

// True when `needle` occurs as a contiguous run of tokens in `hay`.
bool ContainsTokens(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ConfigError("http backend needs an endpoint URL");
}

std::string HttpChatBackend::Name() const {
  return fmt::format("http:{}@{}", config_.model, config_.endpoint);
}

std::string HttpChatBackend::Complete(std::string_view prompt) {
  HttpRequestOptions options;
  options.timeout = config_.timeout;
  if (const char* token = std::getenv(config_.api_key_env.c_str()); token && *token) {
    options.headers.emplace_back("Authorization", std::string("Bearer ") + token);
  }
  const nlohmann::json body = {
      {"model", config_.model},
      {"temperature", 0},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  const HttpResponse resp = HttpPost(
      config_.endpoint, body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
      "application/json", options);
  if (resp.status < 200 || resp.status >= 300) {
    throw BackendError(fmt::format("HTTP {} from {}", resp.status, config_.endpoint));
  }
  try {
    const auto reply = nlohmann::json::parse(resp.body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(fmt::format("malformed chat completion from {}: {}", config_.endpoint,
                                   e.what()));
  }
}

std::string MockJudgeBackend::Name() const {
  return jitter_ == 0 ? fmt::format("mock-judge:seed={}", seed_)
                      : fmt::format("mock-judge:seed={},jitter={}", seed_, jitter_);
}

std::string MockJudgeBackend::Complete(std::string_view prompt) {
  std::mt19937_64 rng(Fnv1a64(prompt) ^ seed_);
  auto jitter = [&](int score) {
    if (jitter_ <= 0) return score;
    const auto span = static_cast<std::uint64_t>(2 * jitter_ + 1);
    const int noise = static_cast<int>(rng() % span) - jitter_;
    return std::clamp(score + noise, 0, 100);
  };

  if (auto conv = Section(prompt, "conversation")) {
    const ParsedConversation parsed = ParseQualityPrompt(prompt, *conv);
    const textnorm::NormConfig cfg;
    std::size_t mixed = 0;
    std::vector<std::string> all_tokens;
    std::vector<int> speakers;
    for (const auto& t : parsed.turns) {
      const auto seq = textnorm::Tokenize(t.text, cfg);
      const auto counts = textnorm::CountStats(seq);
      if (counts.cjk_chars > 0 && counts.latin_words > 0) ++mixed;
      const auto texts = seq.Texts();
      all_tokens.insert(all_tokens.end(), texts.begin(), texts.end());
      speakers.push_back(t.speaker);
    }
    std::sort(speakers.begin(), speakers.end());
    const auto distinct = std::unique(speakers.begin(), speakers.end()) - speakers.begin();
    const std::size_t n = parsed.turns.size();

    const double mix = n ? static_cast<double>(mixed) / static_cast<double>(n) : 0.0;
    int grammar = RoundHalfUp(60.0 + 40.0 * mix);
    int diction = 70;
    if (!parsed.keywords.empty()) {
      std::size_t present = 0;
      for (const auto& kw : parsed.keywords) {
        if (ContainsTokens(all_tokens, textnorm::Tokenize(kw, cfg).Texts())) ++present;
      }
      diction = RoundHalfUp(100.0 * static_cast<double>(present) /
                            static_cast<double>(parsed.keywords.size()));
    }
    int coherence = static_cast<int>(std::min<std::size_t>(100, 25 * n));
    if (distinct < 2) coherence /= 2;
    return fmt::format(R"({{"grammar": {}, "diction": {}, "coherence": {}}})", jitter(grammar),
                       jitter(diction), jitter(coherence));
  }

  auto ref = Section(prompt, "reference");
  auto hyp = Section(prompt, "hypothesis");
  if (!ref || !hyp) throw BackendError("mock judge: prompt has no recognizable task sections");
  return fmt::format(R"({{"score": {}}})", jitter(RoundHalfUp(100.0 * TokenOverlapF1(*ref, *hyp))));
}

}  // namespace mcetk::judge
