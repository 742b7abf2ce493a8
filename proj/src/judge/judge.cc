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

#include "mcetk/judge/judge.h"

#include <cmath>
#include <mutex>
#include <regex>
#include <thread>

#include <fmt/format.h>

#include "mcetk/common/error.h"
#include "mcetk/common/hash.h"
#include "mcetk/common/io.h"
#include "mcetk/common/parallel.h"

namespace mcetk::judge {
namespace {

constexpr std::string_view kFidelityHeader =
    "You are scoring a speech recognition transcript of code-switched Hong Kong "
    "Cantonese and English speech.\n"
    "The reference transcript below stands in for the original audio.\n";

constexpr std::string_view kFidelityRubric =
    "Judge how faithfully the hypothesis preserves what was said and what was meant. "
    "Traditional and Simplified characters are equally acceptable; ignore punctuation "
    "and letter case. 100 means nothing was lost or distorted, 0 means the hypothesis "
    "is unrelated to the reference.";

constexpr std::string_view kFidelityFormat =
    "Reply with exactly one JSON object and nothing else: {\"score\": <integer 0-100>}\n";

constexpr std::string_view kQualityHeader =
    "You are reviewing a generated conversation between speakers of colloquial Hong Kong "
    "Cantonese who mix English words into their sentences.\n";

constexpr std::string_view kQualityRubric =
    "Grammar: is each turn well formed for spoken Cantonese with embedded English? "
    "Diction: are the word choices natural for locals and on topic? "
    "Coherence: does the exchange hang together as one conversation?";

constexpr std::string_view kQualityFormat =
    "Reply with exactly one JSON object and nothing else: {\"grammar\": <integer 0-100>, "
    "\"diction\": <integer 0-100>, \"coherence\": <integer 0-100>}\n";

bool IsBlank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

std::string OneLine(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

// Checks range on the raw value, then rounds half-up.
int ToScore(double value, std::string_view what, std::string_view raw) {
  if (!std::isfinite(value) || value < 0.0 || value > 100.0) {
    throw RangeError(fmt::format("{} {} outside [0, 100] in judge response: {}", what, value,
                                 OneLine(raw)));
  }
  return static_cast<int>(std::floor(value + 0.5));
}

std::optional<double> JsonNumber(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (it->is_number()) return it->get<double>();
  if (it->is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = it->get<std::string>();
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

// Returns each balanced {...} span of `raw` in order of appearance.
std::vector<std::string_view> BraceSpans(std::string_view raw) {
  std::vector<std::string_view> spans;
  for (std::size_t start = raw.find('{'); start != std::string_view::npos;
       start = raw.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
      const char c = raw[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        spans.push_back(raw.substr(start, i - start + 1));
        break;
      }
    }
  }
  return spans;
}

std::optional<double> RegexNumber(const std::string& raw, const std::regex& re) {
  std::smatch m;
  if (!std::regex_search(raw, m, re)) return std::nullopt;
  return std::stod(m[1].str());
}

}  // namespace

std::string_view TaskName(Task task) {
  return task == Task::kFidelity ? "fidelity" : "conversation_quality";
}

Task ParseTask(std::string_view name) {
  if (name == "fidelity") return Task::kFidelity;
  if (name == "conversation_quality") return Task::kConversationQuality;
  throw UsageError(fmt::format("unknown judge task '{}'", name));
}

int MeanRoundHalfUp(int a, int b, int c) {
  const long long sum = static_cast<long long>(a) + b + c;
  // floor(sum / 3 + 1/2) == floor((2 * sum + 3) / 6) for sum >= 0.
  return static_cast<int>((2 * sum + 3) / 6);
}

std::string BuildPrompt(const JudgeRequest& req) {
  std::string out;
  if (req.task == Task::kFidelity) {
    if (IsBlank(req.reference_text) || IsBlank(req.hypothesis_text)) {
      throw UsageError("fidelity request needs non-empty reference and hypothesis texts");
    }
    out += kFidelityHeader;
    out += "\nRubric: ";
    out += req.rubric.empty() ? kFidelityRubric : std::string_view(req.rubric);
    out += "\n\n<reference>\n" + OneLine(req.reference_text) + "\n</reference>\n";
    out += "\n<hypothesis>\n" + OneLine(req.hypothesis_text) + "\n</hypothesis>\n\n";
    out += kFidelityFormat;
    return out;
  }
  if (req.turns.empty()) throw UsageError("conversation_quality request has no turns");
  for (const auto& t : req.turns) {
    if (IsBlank(t.text)) throw UsageError("conversation_quality request has an empty turn");
  }
  out += kQualityHeader;
  out += "\nRubric: ";
  out += req.rubric.empty() ? kQualityRubric : std::string_view(req.rubric);
  out += "\n";
  if (!req.keywords.empty()) {
    out += "\nTopic keywords: ";
    for (std::size_t i = 0; i < req.keywords.size(); ++i) {
      if (i) out += ", ";
      out += OneLine(req.keywords[i]);
    }
    out += "\n";
  }
  out += "\n<conversation>\n";
  for (const auto& t : req.turns) {
    out += fmt::format("Speaker {}: {}\n", t.speaker, OneLine(t.text));
  }
  out += "</conversation>\n\n";
  out += kQualityFormat;
  return out;
}

std::string PromptTemplateHash() {
  std::string all;
  for (auto part : {kFidelityHeader, kFidelityRubric, kFidelityFormat, kQualityHeader,
                    kQualityRubric, kQualityFormat}) {
    all += part;
    all += '\0';
  }
  return Sha256Hex(all).substr(0, 16);
}

JudgeVerdict ParseVerdict(std::string_view raw_view, Task task) {
  const std::string raw(raw_view);
  JudgeVerdict v;
  v.raw_response = raw;

  for (std::string_view span : BraceSpans(raw_view)) {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(span);
    } catch (const nlohmann::json::parse_error&) {
      continue;
    }
    if (!obj.is_object()) continue;
    if (task == Task::kFidelity) {
      if (auto s = JsonNumber(obj, "score")) {
        v.score = ToScore(*s, "score", raw);
        return v;
      }
    } else {
      auto g = JsonNumber(obj, "grammar");
      auto d = JsonNumber(obj, "diction");
      auto c = JsonNumber(obj, "coherence");
      if (g && d && c) {
        v.sub_scores = SubScores{ToScore(*g, "grammar", raw), ToScore(*d, "diction", raw),
                                 ToScore(*c, "coherence", raw)};
        v.score = MeanRoundHalfUp(v.sub_scores->grammar, v.sub_scores->diction,
                                  v.sub_scores->coherence);
        return v;
      }
    }
    break;  // only the first JSON object counts
  }

  static const std::string kNum = R"((-?\d+(?:\.\d+)?))";
  if (task == Task::kFidelity) {
    static const std::regex labelled(R"((?:score|rating)\s*[:=]\s*)" + kNum, std::regex::icase);
    static const std::regex over100(kNum + R"(\s*/\s*100)");
    static const std::regex bare(R"(^\s*)" + kNum + R"(\s*$)");
    for (const std::regex* re : {&labelled, &over100, &bare}) {
      if (auto s = RegexNumber(raw, *re)) {
        v.score = ToScore(*s, "score", raw);
        return v;
      }
    }
  } else {
    static const std::regex grammar(R"(grammar\W{0,3}\s*[:=]?\s*)" + kNum, std::regex::icase);
    static const std::regex diction(R"(diction\W{0,3}\s*[:=]?\s*)" + kNum, std::regex::icase);
    static const std::regex coherence(R"(coherence\W{0,3}\s*[:=]?\s*)" + kNum,
                                      std::regex::icase);
    auto g = RegexNumber(raw, grammar);
    auto d = RegexNumber(raw, diction);
    auto c = RegexNumber(raw, coherence);
    if (g && d && c) {
      v.sub_scores = SubScores{ToScore(*g, "grammar", raw), ToScore(*d, "diction", raw),
                               ToScore(*c, "coherence", raw)};
      v.score = MeanRoundHalfUp(v.sub_scores->grammar, v.sub_scores->diction,
                                v.sub_scores->coherence);
      return v;
    }
  }
  throw ParseError(fmt::format("no parseable {} score in judge response: {}", TaskName(task),
                               OneLine(raw)));
}

nlohmann::json VerdictToJson(const JudgeVerdict& v) {
  nlohmann::json j = {{"score", v.score}, {"raw_response", v.raw_response}};
  if (v.sub_scores) {
    j["sub_scores"] = {{"grammar", v.sub_scores->grammar},
                       {"diction", v.sub_scores->diction},
                       {"coherence", v.sub_scores->coherence}};
  } else {
    j["sub_scores"] = nullptr;
  }
  return j;
}

JudgeVerdict VerdictFromJson(const nlohmann::json& j) {
  try {
    JudgeVerdict v;
    v.score = j.at("score").get<int>();
    v.raw_response = j.at("raw_response").get<std::string>();
    if (j.contains("sub_scores") && !j.at("sub_scores").is_null()) {
      const auto& s = j.at("sub_scores");
      v.sub_scores = SubScores{s.at("grammar").get<int>(), s.at("diction").get<int>(),
                               s.at("coherence").get<int>()};
    }
    if (v.score < 0 || v.score > 100) throw RangeError(fmt::format("cached score {}", v.score));
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("verdict: ") + e.what());
  }
}

JudgeCache::JudgeCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    for (const auto& line : ReadJsonLines(path_)) {
      try {
        entries_[line.value.at("key").get<std::string>()] =
            VerdictFromJson(line.value.at("verdict"));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("{}:{}: bad cache entry: {}", path_.string(), line.line,
                                     e.what()));
      }
    }
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw IoError("cannot open judge cache " + path_.string());
}

std::string JudgeCache::Key(Task task, std::string_view prompt) {
  std::string material(TaskName(task));
  material += '\n';
  material += prompt;
  return Sha256Hex(material);
}

std::optional<JudgeVerdict> JudgeCache::Find(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void JudgeCache::Insert(const std::string& key, Task task, const JudgeVerdict& verdict) {
  std::unique_lock lock(mu_);
  JudgeVerdict stored = verdict;
  stored.cache_hit = false;
  if (!entries_.emplace(key, stored).second) return;
  if (out_.is_open()) {
    const nlohmann::json line = {
        {"key", key}, {"task", TaskName(task)}, {"verdict", VerdictToJson(stored)}};
    out_ << line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    out_.flush();
    if (!out_) throw IoError("append to judge cache failed: " + path_.string());
  }
}

std::size_t JudgeCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

JudgeClient::JudgeClient(std::shared_ptr<ChatBackend> backend,
                         std::shared_ptr<JudgeCache> cache, RetryPolicy retry,
                         std::size_t parallelism)
    : backend_(std::move(backend)),
      cache_(std::move(cache)),
      retry_(retry),
      parallelism_(std::max<std::size_t>(1, parallelism)) {
  if (!backend_) throw ConfigError("judge client needs a backend");
}

JudgeVerdict JudgeClient::RequestScore(const JudgeRequest& req) {
  const std::string prompt = BuildPrompt(req);
  const std::string key = JudgeCache::Key(req.task, prompt);
  if (cache_) {
    if (auto hit = cache_->Find(key)) {
      hit->cache_hit = true;
      return *hit;
    }
  }
  std::string raw;
  std::string last_error;
  auto backoff = retry_.initial_backoff;
  bool ok = false;
  for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
    if (attempt > 0 && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    try {
      ++backend_calls_;
      raw = backend_->Complete(prompt);
      ok = true;
      break;
    } catch (const BackendError& e) {
      last_error = e.what();
    }
  }
  if (!ok) {
    throw BackendError(fmt::format("judge backend {} failed after {} attempt(s): {}",
                                   backend_->Name(), retry_.max_retries + 1, last_error));
  }
  JudgeVerdict verdict = ParseVerdict(raw, req.task);
  if (cache_) cache_->Insert(key, req.task, verdict);
  return verdict;
}

std::vector<JudgeClient::Outcome> JudgeClient::RequestScores(
    const std::vector<JudgeRequest>& reqs) {
  std::vector<Outcome> out(reqs.size());
  ParallelFor(reqs.size(), parallelism_, [&](std::size_t i) {
    try {
      out[i].verdict = RequestScore(reqs[i]);
    } catch (const Error& e) {
      out[i].error = fmt::format("{}: {}", ErrorKindName(e.kind()), e.what());
    }
  });
  return out;
}

}  // namespace mcetk::judge
