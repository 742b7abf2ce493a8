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

#include "mcetk/madgf/madgf.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ctime>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "mcetk/common/hash.h"
#include "mcetk/common/http.h"
#include "mcetk/common/io.h"
#include "mcetk/common/parallel.h"
#include "mcetk/common/random.h"
#include "mcetk/textnorm/textnorm.h"
#include "mcetk/textnorm/utf8.h"

namespace mcetk::madgf {
namespace {

using nlohmann::json;

std::string UtcNow() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string OneLine(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

std::vector<std::string> SplitList(std::string_view list) {
  std::vector<std::string> out;
  std::size_t from = 0;
  while (from <= list.size()) {
    auto comma = list.find(", ", from);
    if (comma == std::string_view::npos) comma = list.size();
    if (comma > from) out.emplace_back(list.substr(from, comma - from));
    from = comma + 2;
  }
  return out;
}

const textnorm::NormConfig& DefaultNorm() {
  static const textnorm::NormConfig cfg;
  return cfg;
}

std::vector<std::string> TokenTexts(std::string_view text) {
  return textnorm::Tokenize(text, DefaultNorm()).Texts();
}

bool ContainsTokens(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

bool IsMixed(std::string_view text) {
  const auto c = textnorm::CountStats(textnorm::Tokenize(text, DefaultNorm()));
  return c.cjk_chars > 0 && c.latin_words > 0;
}

// Function words that never make useful topic keywords.
const std::set<std::string>& EnglishStopwords() {
  static const std::set<std::string> words = {
      "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
      "because", "been", "before", "but", "by", "can", "could", "did", "do", "does", "don't",
      "for", "from", "get", "got", "had", "has", "have", "he", "her", "here", "him", "his", "how",
      "i", "i'm", "if", "in", "into", "is", "it", "it's", "its", "just", "like", "me", "more",
      "my", "no", "not", "of", "oh", "ok", "on", "one", "or", "our", "out", "so", "some", "than",
      "that", "the", "their", "them", "then", "there", "these", "they", "this", "to", "too",
      "up", "us", "very", "was", "we", "were", "what", "when", "where", "which", "who", "why",
      "will", "with", "would", "yes", "you", "your"};
  return words;
}

const std::set<char32_t>& CjkStopChars() {
  static const std::set<char32_t> chars = [] {
    std::set<char32_t> s;
    for (char32_t cp : utf8::Decode(
             "的了是在和也有就都而及與着或一個這那之我你他她它們佢哋嘅係咗啲喺唔冇嗰呢啊呀啦喇囉咩嘛吖㗎嘞咁又同去會要先再仲但因為所以如果好"))
      s.insert(cp);
    return s;
  }();
  return chars;
}

struct RankedTerm {
  std::string term;
  double score;
};

std::vector<RankedTerm> Rank(const std::map<std::string, double>& scores, std::size_t k) {
  std::vector<RankedTerm> terms;
  terms.reserve(scores.size());
  for (const auto& [t, s] : scores) terms.push_back({t, s});
  std::sort(terms.begin(), terms.end(), [](const RankedTerm& a, const RankedTerm& b) {
    return a.score != b.score ? a.score > b.score : a.term < b.term;
  });
  if (terms.size() > k) terms.resize(k);
  return terms;
}

// Calls the backend, retrying transport failures with exponential backoff.
std::string CompleteWithRetry(judge::ChatBackend& backend, const std::string& prompt,
                              const judge::RetryPolicy& retry) {
  auto backoff = retry.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return backend.Complete(prompt);
    } catch (const BackendError&) {
      if (attempt >= retry.max_retries) throw;
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

bool ScoredBefore(const ScoredConversation& a, const ScoredConversation& b) {
  return a.score != b.score ? a.score > b.score : a.conversation.id < b.conversation.id;
}

json TurnsToJson(const std::vector<judge::Turn>& turns) {
  json arr = json::array();
  for (const auto& t : turns) arr.push_back({{"speaker", t.speaker}, {"text", t.text}});
  return arr;
}

std::vector<judge::Turn> TurnsFromJson(const json& arr) {
  std::vector<judge::Turn> turns;
  for (const auto& t : arr) turns.push_back({t.at("speaker").get<int>(), t.at("text").get<std::string>()});
  return turns;
}

// Speaker phrase templates; {kw} marks where keywords go.
constexpr std::string_view kPhrases[] = {
    "我哋今晚講下{kw}啦",       "你覺得{kw}點樣呀",       "其實{kw}都幾正㗎",
    "聽日一齊去睇下{kw}",       "我啱啱先知{kw}咁受歡迎", "唔好成日諗{kw}住",
    "{kw}真係好方便",     "講開{kw}我諗起上次嗰件事",
};
constexpr std::string_view kFillers[] = {"OK",   "really", "plan",  "chill", "check",
                                         "share", "book",  "happy", "busy",  "free"};
constexpr std::string_view kNeutralObject = "呢樣嘢";

std::optional<std::string> PromptField(std::string_view prompt, std::string_view name) {
  const std::string key = "\n" + std::string(name) + ": ";
  auto pos = prompt.find(key);
  if (pos == std::string_view::npos) return std::nullopt;
  pos += key.size();
  const auto end = prompt.find('\n', pos);
  return std::string(prompt.substr(pos, end == std::string_view::npos ? end : end - pos));
}

}  // namespace

// ---------------------------------------------------------------------------
// Engineer

DocumentSet Ingest(const std::vector<SourceSpec>& sources, const IngestOptions& options) {
  if (sources.empty()) throw UsageError("ingest: no sources configured");
  const auto now = options.now ? options.now : std::function<std::string()>(UtcNow);

  struct Raw {
    std::string uri;
    std::string text;
  };
  std::vector<Raw> raws;
  DocumentSet out;
  std::set<std::string> kinds;

  for (const auto& src : sources) {
    if (src.kind == SourceSpec::Kind::kLocalDir) {
      kinds.insert("local_dir");
      std::error_code ec;
      if (!std::filesystem::is_directory(src.path, ec)) {
        out.fetch_errors.push_back({src.path.string(), "not a directory"});
        continue;
      }
      std::vector<std::filesystem::path> files;
      for (auto it = std::filesystem::recursive_directory_iterator(src.path, ec);
           !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
        if (it->is_regular_file()) files.push_back(it->path());
      }
      if (ec) out.fetch_errors.push_back({src.path.string(), ec.message()});
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        try {
          raws.push_back({f.generic_string(), ReadTextFile(f)});
        } catch (const Error& e) {
          out.fetch_errors.push_back({f.generic_string(), e.what()});
        }
      }
    } else {
      kinds.insert("url_list");
      std::string list;
      try {
        list = ReadTextFile(src.path);
      } catch (const Error& e) {
        out.fetch_errors.push_back({src.path.string(), e.what()});
        continue;
      }
      std::istringstream lines(list);
      std::string line;
      while (std::getline(lines, line)) {
        const std::string url = Trim(line);
        if (url.empty() || url[0] == '#') continue;
        try {
          HttpRequestOptions http;
          http.timeout = options.fetch_timeout;
          const HttpResponse resp = HttpGet(url, http);
          if (resp.status < 200 || resp.status >= 300) {
            out.fetch_errors.push_back({url, fmt::format("HTTP {}", resp.status)});
            continue;
          }
          raws.push_back({url, resp.body});
        } catch (const Error& e) {
          out.fetch_errors.push_back({url, e.what()});
        }
      }
    }
  }

  std::unordered_map<std::string, int> copies;
  for (auto& raw : raws) {
    if (Trim(raw.text).empty()) {
      out.fetch_errors.push_back({raw.uri, "empty document"});
      continue;
    }
    Document d;
    d.content_hash = Sha256Hex(raw.text);
    const int ordinal = copies[d.content_hash]++;
    d.id = fmt::format("doc-{}-{:02}", d.content_hash.substr(0, 12), ordinal);
    d.source_uri = std::move(raw.uri);
    d.text = std::move(raw.text);
    d.fetched_at = now();
    out.documents.push_back(std::move(d));
  }
  std::sort(out.documents.begin(), out.documents.end(),
            [](const Document& a, const Document& b) { return a.id < b.id; });
  for (const auto& k : kinds) {
    if (!out.provenance.empty()) out.provenance += ",";
    out.provenance += k;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Critic

std::string_view DropReasonName(DropReason r) {
  switch (r) {
    case DropReason::kTooShort: return "too_short";
    case DropReason::kTooLong: return "too_long";
    case DropReason::kWrongLanguageMix: return "wrong_language_mix";
    case DropReason::kDuplicate: return "duplicate";
  }
  return "unknown";
}

std::pair<DocumentSet, CritiqueReport> Critique(const DocumentSet& docs, const CritiqueRules& rules) {
  std::vector<const Document*> order;
  for (const auto& d : docs.documents) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(),
                   [](const Document* a, const Document* b) { return a->id < b->id; });

  DocumentSet kept;
  kept.provenance = docs.provenance;
  kept.fetch_errors = docs.fetch_errors;
  CritiqueReport report;
  report.rules = rules;
  std::set<std::string> seen;

  for (const Document* d : order) {
    DocumentVerdict v{d->id, std::nullopt};
    const std::size_t chars = utf8::Decode(Trim(d->text)).size();
    if (!seen.insert(d->content_hash).second) {
      v.drop = DropReason::kDuplicate;
    } else if (chars < rules.min_chars) {
      v.drop = DropReason::kTooShort;
    } else if (chars > rules.max_chars) {
      v.drop = DropReason::kTooLong;
    } else {
      const auto c = textnorm::CountStats(textnorm::Tokenize(d->text, DefaultNorm()));
      const std::size_t scripts = c.cjk_chars + c.latin_words;
      const double share =
          scripts ? static_cast<double>(c.cjk_chars) / static_cast<double>(scripts) : -1.0;
      if (scripts == 0 || share < rules.min_cjk_share || share > rules.max_cjk_share) {
        v.drop = DropReason::kWrongLanguageMix;
      }
    }
    if (!v.drop) kept.documents.push_back(*d);
    report.verdicts.push_back(std::move(v));
  }
  return {std::move(kept), std::move(report)};
}

// ---------------------------------------------------------------------------
// Manager

std::vector<std::string> CandidateTerms(std::string_view text) {
  const auto& stop = CjkStopChars();
  const std::u32string cps = utf8::Decode(textnorm::NormalizeText(text, DefaultNorm()));
  std::vector<std::string> terms;

  std::size_t i = 0;
  while (i < cps.size()) {
    if (!textnorm::IsCjkIdeograph(cps[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < cps.size() && textnorm::IsCjkIdeograph(cps[j])) ++j;
    for (std::size_t p = i; p < j; ++p) {
      if (!stop.count(cps[p])) terms.push_back(utf8::Encode(cps[p]));
      if (p + 1 < j && !(stop.count(cps[p]) && stop.count(cps[p + 1]))) {
        terms.push_back(utf8::Encode(cps.substr(p, 2)));
      }
    }
    i = j;
  }
  for (const auto& tok : textnorm::Tokenize(text, DefaultNorm()).tokens) {
    if (tok.kind == textnorm::TokenKind::kLatinWord && tok.text.size() >= 2 &&
        !EnglishStopwords().count(tok.text)) {
      terms.push_back(tok.text);
    }
  }
  return terms;
}

std::vector<std::map<std::string, double>> TfIdf(const DocumentSet& docs) {
  const std::size_t n = docs.documents.size();
  std::vector<std::map<std::string, std::size_t>> counts(n);
  std::vector<std::size_t> totals(n, 0);
  std::map<std::string, std::size_t> df;
  for (std::size_t d = 0; d < n; ++d) {
    for (auto& t : CandidateTerms(docs.documents[d].text)) {
      ++counts[d][t];
      ++totals[d];
    }
    for (const auto& [t, _] : counts[d]) ++df[t];
  }
  std::vector<std::map<std::string, double>> out(n);
  for (std::size_t d = 0; d < n; ++d) {
    for (const auto& [t, c] : counts[d]) {
      const double tf = static_cast<double>(c) / static_cast<double>(totals[d]);
      const double idf = std::log((1.0 + static_cast<double>(n)) /
                                  (1.0 + static_cast<double>(df[t]))) + 1.0;
      out[d][t] = tf * idf;
    }
  }
  return out;
}

TopicKeywords ExtractTopics(const DocumentSet& docs, std::size_t num_topics, std::size_t k) {
  if (docs.documents.empty()) throw UsageError("extract_topics: empty corpus");
  if (num_topics == 0 || k == 0) throw UsageError("extract_topics: num_topics and k must be >= 1");

  const auto weights = TfIdf(docs);
  std::vector<std::size_t> order(docs.documents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return docs.documents[a].id < docs.documents[b].id;
  });

  struct Cluster {
    std::set<std::string> keys;
    std::vector<std::size_t> members;
  };
  std::vector<Cluster> clusters;
  for (std::size_t d : order) {
    if (weights[d].empty()) continue;
    std::set<std::string> top;
    for (const auto& r : Rank(weights[d], k)) top.insert(r.term);

    std::optional<std::size_t> best;
    double best_overlap = 0.0;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      std::size_t inter = 0;
      for (const auto& t : top) inter += clusters[c].keys.count(t);
      const double overlap = static_cast<double>(inter) /
                             static_cast<double>(top.size() + clusters[c].keys.size() - inter);
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = c;
      }
    }
    if (!best && clusters.size() < num_topics) {
      clusters.push_back({});
      best = clusters.size() - 1;
    } else if (!best) {
      // Cap reached and nothing overlaps: join the smallest cluster.
      best = 0;
      for (std::size_t c = 1; c < clusters.size(); ++c) {
        if (clusters[c].members.size() < clusters[*best].members.size()) best = c;
      }
    }
    clusters[*best].keys.insert(top.begin(), top.end());
    clusters[*best].members.push_back(d);
  }
  if (clusters.empty()) throw UsageError("extract_topics: no candidate keywords (all stopwords)");

  TopicKeywords out;
  for (const auto& c : clusters) {
    std::map<std::string, double> summed;
    for (std::size_t d : c.members) {
      for (const auto& [t, w] : weights[d]) summed[t] += w;
    }
    Topic topic;
    for (const auto& r : Rank(summed, k)) topic.keywords.push_back(r.term);
    topic.label = topic.keywords.front();
    for (std::size_t d : c.members) topic.support.push_back(docs.documents[d].id);
    out.topics.push_back(std::move(topic));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

void PipelineConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("pipeline config: " + msg); };
  if (rounds < 1) fail("rounds must be >= 1");
  if (conversations_per_round < 1) fail("conversations_per_round must be >= 1");
  if (speakers < 2) fail("speakers must be >= 2");
  if (turns < 2) fail("turns must be >= 2");
  if (top_k > conversations_per_round) fail("top_k must not exceed conversations_per_round");
  if (!(min_mix_ratio >= 0.0 && min_mix_ratio <= 1.0)) fail("min_mix_ratio must lie in [0, 1]");
  if (num_topics < 1) fail("num_topics must be >= 1");
  if (keywords_per_topic < 1) fail("keywords_per_topic must be >= 1");
  if (max_attempts < 1) fail("max_attempts must be >= 1");
  if (parallelism < 1) fail("parallelism must be >= 1");
  if (retry.max_retries < 0) fail("retry.max_retries must be >= 0");
  if (critique.min_chars > critique.max_chars) fail("critique.min_chars exceeds max_chars");
  if (!(critique.min_cjk_share >= 0.0 && critique.max_cjk_share <= 1.0 &&
        critique.min_cjk_share <= critique.max_cjk_share)) {
    fail("critique cjk share bounds must satisfy 0 <= min <= max <= 1");
  }
}

namespace {

template <typename T>
void Read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void CheckKeys(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (const auto& [k, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ConfigError(fmt::format("{}: unknown key '{}'", where, k));
    }
  }
}

BackendSpec BackendFromJson(const json& j, std::string_view where) {
  CheckKeys(j, where,
            {"kind", "endpoint", "model", "api_key_env", "timeout_ms", "seed", "jitter",
             "pure_turn_rate"});
  BackendSpec b;
  const std::string kind = j.value("kind", std::string("mock"));
  if (kind == "mock") {
    b.kind = BackendSpec::Kind::kMock;
  } else if (kind == "http") {
    b.kind = BackendSpec::Kind::kHttp;
  } else {
    throw ConfigError(fmt::format("{}.kind must be mock|http, got '{}'", where, kind));
  }
  Read(j, "endpoint", b.http.endpoint);
  Read(j, "model", b.http.model);
  Read(j, "api_key_env", b.http.api_key_env);
  if (j.contains("timeout_ms")) b.http.timeout = std::chrono::milliseconds(j["timeout_ms"].get<int>());
  Read(j, "seed", b.seed);
  Read(j, "jitter", b.jitter);
  Read(j, "pure_turn_rate", b.pure_turn_rate);
  if (b.kind == BackendSpec::Kind::kHttp && b.http.endpoint.empty()) {
    throw ConfigError(fmt::format("{}: http backend needs an endpoint", where));
  }
  if (!(b.pure_turn_rate >= 0.0 && b.pure_turn_rate <= 1.0) || b.jitter < 0) {
    throw ConfigError(fmt::format("{}: jitter must be >= 0 and pure_turn_rate in [0, 1]", where));
  }
  return b;
}

json BackendToJson(const BackendSpec& b) {
  if (b.kind == BackendSpec::Kind::kHttp) {
    return {{"kind", "http"},
            {"endpoint", b.http.endpoint},
            {"model", b.http.model},
            {"api_key_env", b.http.api_key_env},
            {"timeout_ms", b.http.timeout.count()}};
  }
  return {{"kind", "mock"}, {"seed", b.seed}, {"jitter", b.jitter},
          {"pure_turn_rate", b.pure_turn_rate}};
}

std::filesystem::path Resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

PipelineConfig PipelineConfigFromJson(const json& j, const std::filesystem::path& base_dir) {
  try {
    CheckKeys(j, "pipeline config",
              {"rounds", "conversations_per_round", "speakers", "turns", "top_k", "min_mix_ratio",
               "num_topics", "keywords_per_topic", "max_attempts", "seed", "parallelism", "retry",
               "critique", "sources", "generator", "judge", "judge_cache", "output_dir"});
    PipelineConfig c;
    Read(j, "rounds", c.rounds);
    Read(j, "conversations_per_round", c.conversations_per_round);
    Read(j, "speakers", c.speakers);
    Read(j, "turns", c.turns);
    Read(j, "top_k", c.top_k);
    Read(j, "min_mix_ratio", c.min_mix_ratio);
    Read(j, "num_topics", c.num_topics);
    Read(j, "keywords_per_topic", c.keywords_per_topic);
    Read(j, "max_attempts", c.max_attempts);
    Read(j, "seed", c.seed);
    Read(j, "parallelism", c.parallelism);
    if (auto it = j.find("retry"); it != j.end()) {
      CheckKeys(*it, "retry", {"max_retries", "initial_backoff_ms"});
      Read(*it, "max_retries", c.retry.max_retries);
      if (it->contains("initial_backoff_ms")) {
        c.retry.initial_backoff = std::chrono::milliseconds((*it)["initial_backoff_ms"].get<int>());
      }
    }
    if (auto it = j.find("critique"); it != j.end()) {
      CheckKeys(*it, "critique", {"min_chars", "max_chars", "min_cjk_share", "max_cjk_share"});
      Read(*it, "min_chars", c.critique.min_chars);
      Read(*it, "max_chars", c.critique.max_chars);
      Read(*it, "min_cjk_share", c.critique.min_cjk_share);
      Read(*it, "max_cjk_share", c.critique.max_cjk_share);
    }
    if (auto it = j.find("sources"); it != j.end()) {
      for (const auto& s : *it) {
        CheckKeys(s, "sources[]", {"local_dir", "url_list"});
        if (s.size() != 1) throw ConfigError("each source needs exactly one of local_dir|url_list");
        SourceSpec spec;
        if (s.contains("local_dir")) {
          spec.kind = SourceSpec::Kind::kLocalDir;
          spec.path = Resolve(base_dir, s["local_dir"].get<std::string>());
        } else {
          spec.kind = SourceSpec::Kind::kUrlList;
          spec.path = Resolve(base_dir, s["url_list"].get<std::string>());
        }
        c.sources.push_back(std::move(spec));
      }
    }
    if (auto it = j.find("generator"); it != j.end()) c.generator = BackendFromJson(*it, "generator");
    if (auto it = j.find("judge"); it != j.end()) c.judge = BackendFromJson(*it, "judge");
    if (auto it = j.find("judge_cache"); it != j.end()) {
      c.judge_cache = Resolve(base_dir, it->get<std::string>());
    }
    if (auto it = j.find("output_dir"); it != j.end()) {
      c.output_dir = Resolve(base_dir, it->get<std::string>());
    }
    c.Validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
}

PipelineConfig LoadPipelineConfig(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(ReadTextFile(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return PipelineConfigFromJson(j, path.parent_path());
}

json PipelineConfigToJson(const PipelineConfig& c) {
  json sources = json::array();
  for (const auto& s : c.sources) {
    sources.push_back({{s.kind == SourceSpec::Kind::kLocalDir ? "local_dir" : "url_list",
                        s.path.generic_string()}});
  }
  return {{"rounds", c.rounds},
          {"conversations_per_round", c.conversations_per_round},
          {"speakers", c.speakers},
          {"turns", c.turns},
          {"top_k", c.top_k},
          {"min_mix_ratio", c.min_mix_ratio},
          {"num_topics", c.num_topics},
          {"keywords_per_topic", c.keywords_per_topic},
          {"max_attempts", c.max_attempts},
          {"seed", c.seed},
          {"retry",
           {{"max_retries", c.retry.max_retries},
            {"initial_backoff_ms", c.retry.initial_backoff.count()}}},
          {"critique",
           {{"min_chars", c.critique.min_chars},
            {"max_chars", c.critique.max_chars},
            {"min_cjk_share", c.critique.min_cjk_share},
            {"max_cjk_share", c.critique.max_cjk_share}}},
          {"sources", sources},
          {"generator", BackendToJson(c.generator)},
          {"judge", BackendToJson(c.judge)}};
}

// ---------------------------------------------------------------------------
// Speaker

PromptState BuildPromptState(std::size_t topic_index, const Topic& topic,
                             std::vector<ScoredConversation> exemplars, const PipelineConfig& cfg) {
  PromptState p;
  p.topic_index = topic_index;
  p.topic = topic.label;
  p.keywords = topic.keywords;
  p.exemplars = std::move(exemplars);

  std::string keywords;
  for (std::size_t i = 0; i < p.keywords.size(); ++i) {
    if (i) keywords += ", ";
    keywords += p.keywords[i];
  }
  std::string& t = p.text;
  t += "You write everyday conversations between Hong Kong locals who speak Cantonese mixed "
       "with English inside the same sentence.\n"
       "Write Cantonese in Traditional Chinese characters and keep English words in Latin "
       "letters. Keep the register casual, like daily life.\n";
  t += fmt::format("\nTopic: {}\nKeywords: {}\nSpeakers: {}\nTurns: {}\n", OneLine(p.topic),
                   OneLine(keywords), cfg.speakers, cfg.turns);
  t += "\nUse the keywords naturally. Every turn must mix Cantonese and English.\n";
  if (!p.exemplars.empty()) {
    t += "\nHighly rated conversations on this topic, best first. Match their quality without "
         "copying them:\n";
    for (const auto& e : p.exemplars) {
      t += fmt::format("<exemplar id=\"{}\" score=\"{}\">\n", e.conversation.id, e.score);
      for (const auto& turn : e.conversation.turns) {
        t += fmt::format("Speaker {}: {}\n", turn.speaker, OneLine(turn.text));
      }
      t += "</exemplar>\n";
    }
  }
  t += "\nReply with one JSON object and nothing else: "
       "{\"turns\": [{\"speaker\": 1, \"text\": \"...\"}]}\n";
  p.hash = Sha256Hex(p.text).substr(0, 16);
  return p;
}

std::string MockSpeakerBackend::Name() const {
  return pure_turn_rate_ > 0.0
             ? fmt::format("mock-speaker:seed={},pure_turn_rate={}", seed_, pure_turn_rate_)
             : fmt::format("mock-speaker:seed={}", seed_);
}

std::string MockSpeakerBackend::Complete(std::string_view prompt) {
  const std::vector<std::string> keywords = SplitList(PromptField(prompt, "Keywords").value_or(""));
  int speakers = 2;
  int turns = 4;
  try {
    speakers = std::max(1, std::stoi(PromptField(prompt, "Speakers").value_or("2")));
    turns = std::max(1, std::stoi(PromptField(prompt, "Turns").value_or("4")));
  } catch (const std::exception&) {
    throw BackendError("mock speaker: malformed Speakers/Turns field");
  }

  // Keywords the exemplars already use, judged on the same token stream the
  // judge sees (all turns of one exemplar concatenated).
  std::set<std::string> chosen;
  std::istringstream lines{std::string(prompt)};
  std::string line;
  std::vector<std::string> exemplar_tokens;
  bool inside = false;
  auto flush = [&] {
    for (const auto& kw : keywords) {
      if (ContainsTokens(exemplar_tokens, TokenTexts(kw))) chosen.insert(kw);
    }
    exemplar_tokens.clear();
  };
  while (std::getline(lines, line)) {
    if (line.rfind("<exemplar ", 0) == 0) {
      inside = true;
    } else if (line == "</exemplar>") {
      flush();
      inside = false;
    } else if (inside && line.rfind("Speaker ", 0) == 0) {
      if (auto colon = line.find(": "); colon != std::string::npos) {
        const auto toks = TokenTexts(std::string_view(line).substr(colon + 2));
        exemplar_tokens.insert(exemplar_tokens.end(), toks.begin(), toks.end());
      }
    }
  }

  auto rng = SeededEngine(seed_, prompt);
  if (!keywords.empty()) {
    const auto extra = 1 + UniformBelow(rng, 2);
    for (std::uint64_t i = 0; i < extra; ++i) chosen.insert(keywords[UniformBelow(rng, keywords.size())]);
  }
  std::vector<std::string> ordered;
  for (const auto& kw : keywords) {
    if (chosen.count(kw) && std::find(ordered.begin(), ordered.end(), kw) == ordered.end()) {
      ordered.push_back(kw);
    }
  }

  json out_turns = json::array();
  for (int t = 0; t < turns; ++t) {
    std::vector<std::string> mine;
    for (std::size_t i = t; i < ordered.size(); i += static_cast<std::size_t>(turns)) {
      mine.push_back(ordered[i]);
    }
    const bool pure = pure_turn_rate_ > 0.0 &&
                      static_cast<double>(UniformBelow(rng, 1000000)) < pure_turn_rate_ * 1e6;
    if (pure) {
      std::erase_if(mine, [](const std::string& kw) {
        return textnorm::CountStats(textnorm::Tokenize(kw, DefaultNorm())).latin_words > 0;
      });
    }
    std::string kw_text;
    for (const auto& kw : mine) kw_text += (kw_text.empty() ? "" : " ") + kw;
    if (kw_text.empty()) kw_text = kNeutralObject;
    std::string text(kPhrases[UniformBelow(rng, std::size(kPhrases))]);
    text.replace(text.find("{kw}"), 4, kw_text);
    if (!pure && !IsMixed(text)) {
      text += " ";
      text += kFillers[UniformBelow(rng, std::size(kFillers))];
    }
    out_turns.push_back({{"speaker", t % speakers + 1}, {"text", text}});
  }
  return json{{"turns", out_turns}}.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::shared_ptr<judge::ChatBackend> MakeBackend(const BackendSpec& spec, bool for_judge) {
  if (spec.kind == BackendSpec::Kind::kHttp) {
    return std::make_shared<judge::HttpChatBackend>(spec.http);
  }
  if (for_judge) return std::make_shared<judge::MockJudgeBackend>(spec.seed, spec.jitter);
  return std::make_shared<MockSpeakerBackend>(spec.seed, spec.pure_turn_rate);
}

std::vector<judge::Turn> ParseConversation(std::string_view raw) {
  std::vector<judge::Turn> turns;
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    try {
      const json j = json::parse(raw.substr(open, close - open + 1));
      if (j.is_object() && j.contains("turns") && j["turns"].is_array()) {
        for (const auto& t : j["turns"]) {
          const json& s = t.at("speaker");
          const int speaker = s.is_number_integer() ? s.get<int>() : std::stoi(s.get<std::string>());
          turns.push_back({speaker, OneLine(t.at("text").get<std::string>())});
        }
        return turns;
      }
    } catch (const std::exception&) {
      turns.clear();
    }
  }
  static const std::regex line_re(R"(^\s*Speaker\s*(\d+)\s*(?::|：)\s*(.*\S)\s*$)");
  std::istringstream lines{std::string(raw)};
  std::string line;
  std::smatch m;
  while (std::getline(lines, line)) {
    if (std::regex_match(line, m, line_re)) turns.push_back({std::stoi(m[1].str()), m[2].str()});
  }
  return turns;
}

std::optional<std::string> CheckConversation(const std::vector<judge::Turn>& turns,
                                             const PipelineConfig& cfg) {
  if (turns.size() < 2) return "fewer than 2 turns";
  if (turns.size() < static_cast<std::size_t>(cfg.turns)) {
    return fmt::format("only {} of {} requested turns", turns.size(), cfg.turns);
  }
  std::set<int> speakers;
  std::size_t mixed = 0;
  for (const auto& t : turns) {
    if (Trim(t.text).empty()) return "empty turn";
    speakers.insert(t.speaker);
    if (IsMixed(t.text)) ++mixed;
  }
  if (speakers.size() < 2) return "fewer than 2 distinct speakers";
  const double fraction = static_cast<double>(mixed) / static_cast<double>(turns.size());
  if (fraction < cfg.min_mix_ratio) {
    return fmt::format("mixed-turn fraction {:.3f} below min_mix_ratio {:.3f}", fraction,
                       cfg.min_mix_ratio);
  }
  return std::nullopt;
}

RoundOutput GenerateRound(judge::ChatBackend& generator, const std::vector<PromptState>& prompts,
                          const PipelineConfig& cfg, int round_no) {
  struct Slot {
    const PromptState* prompt;
    std::size_t index;
    Conversation conv;
    std::vector<std::string> reasons;
    bool accepted = false;
    std::string backend_error;
  };
  std::vector<Slot> slots;
  for (const auto& p : prompts) {
    for (std::size_t c = 0; c < cfg.conversations_per_round; ++c) slots.push_back({&p, c, {}, {}, false, {}});
  }

  ParallelFor(slots.size(), cfg.parallelism, [&](std::size_t i) {
    Slot& s = slots[i];
    Conversation& conv = s.conv;
    conv.id = fmt::format("r{}-t{:02}-c{:03}", round_no, s.prompt->topic_index, s.index);
    conv.topic_index = s.prompt->topic_index;
    conv.topic = s.prompt->topic;
    conv.keywords = s.prompt->keywords;
    conv.round = round_no;
    conv.prompt_hash = s.prompt->hash;
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
      conv.attempts = attempt;
      const std::string request =
          s.prompt->text + fmt::format("\nVariation: seed {} round {} conversation {} attempt {}\n",
                                       cfg.seed, round_no, s.index, attempt);
      std::string raw;
      try {
        raw = CompleteWithRetry(generator, request, cfg.retry);
      } catch (const BackendError& e) {
        s.backend_error = e.what();
        s.reasons.push_back(std::string("backend failure: ") + e.what());
        return;
      }
      conv.turns = ParseConversation(raw);
      if (conv.turns.empty()) {
        s.reasons.emplace_back("unparseable generator response");
        continue;
      }
      if (auto why = CheckConversation(conv.turns, cfg)) {
        s.reasons.push_back(*why);
        continue;
      }
      s.accepted = true;
      return;
    }
  });

  RoundOutput out;
  std::size_t failures = 0;
  std::string first_error;
  for (auto& s : slots) {
    if (s.accepted) {
      out.conversations.push_back(std::move(s.conv));
    } else {
      out.rejected.push_back({std::move(s.conv), std::move(s.reasons)});
    }
    if (!s.backend_error.empty() && failures++ == 0) first_error = s.backend_error;
  }
  if (failures > 0) {
    throw RoundError(fmt::format("round {}: generator failed for {} conversation(s): {}", round_no,
                                 failures, first_error),
                     std::move(out));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commentator and feedback

ScoreOutput ScoreRound(judge::JudgeClient& client, const std::vector<Conversation>& convs) {
  std::vector<judge::JudgeRequest> reqs;
  reqs.reserve(convs.size());
  for (const auto& c : convs) {
    judge::JudgeRequest r;
    r.task = judge::Task::kConversationQuality;
    r.turns = c.turns;
    r.keywords = c.keywords;
    reqs.push_back(std::move(r));
  }
  const auto outcomes = client.RequestScores(reqs);
  ScoreOutput out;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.verdict && o.verdict->sub_scores) {
      out.scored.push_back({convs[i], o.verdict->score, *o.verdict->sub_scores, o.verdict->raw_response});
    } else {
      out.failed.emplace_back(convs[i], o.verdict ? "verdict lacks sub-scores" : o.error);
    }
  }
  std::sort(out.scored.begin(), out.scored.end(), ScoredBefore);
  return out;
}

std::vector<PromptState> RefreshPrompts(const std::vector<PromptState>& prompts,
                                        const std::vector<ScoredConversation>& scored,
                                        std::size_t top_k, const PipelineConfig& cfg) {
  if (top_k == 0) return prompts;
  std::vector<ScoredConversation> ranked = scored;
  std::stable_sort(ranked.begin(), ranked.end(), ScoredBefore);
  std::vector<PromptState> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) {
    std::vector<ScoredConversation> exemplars;
    for (const auto& s : ranked) {
      if (exemplars.size() == top_k) break;
      if (s.conversation.topic_index == p.topic_index) exemplars.push_back(s);
    }
    out.push_back(BuildPromptState(p.topic_index, Topic{p.topic, p.keywords, {}},
                                   std::move(exemplars), cfg));
  }
  return out;
}

std::optional<double> RoundRecord::MeanScore() const {
  if (scores.scored.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& s : scores.scored) sum += s.score;
  return sum / static_cast<double>(scores.scored.size());
}

// ---------------------------------------------------------------------------
// Persistence

json ConversationToJson(const Conversation& c) {
  return {{"id", c.id},
          {"round", c.round},
          {"topic", c.topic},
          {"topic_index", c.topic_index},
          {"keywords", c.keywords},
          {"turns", TurnsToJson(c.turns)},
          {"prompt_hash", c.prompt_hash},
          {"attempts", c.attempts}};
}

Conversation ConversationFromJson(const json& j) {
  try {
    Conversation c;
    c.id = j.at("id").get<std::string>();
    c.round = j.at("round").get<int>();
    c.topic = j.at("topic").get<std::string>();
    c.topic_index = j.at("topic_index").get<std::size_t>();
    c.keywords = j.at("keywords").get<std::vector<std::string>>();
    c.turns = TurnsFromJson(j.at("turns"));
    c.prompt_hash = j.at("prompt_hash").get<std::string>();
    c.attempts = j.value("attempts", 1);
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("conversation record: ") + e.what());
  }
}

json ScoredToJson(const ScoredConversation& s) {
  return {{"id", s.conversation.id},
          {"topic_index", s.conversation.topic_index},
          {"score", s.score},
          {"sub_scores",
           {{"grammar", s.sub_scores.grammar},
            {"diction", s.sub_scores.diction},
            {"coherence", s.sub_scores.coherence}}},
          {"raw_response", s.raw_response}};
}

ScoredConversation ScoredFromJson(const json& j, const Conversation& conv) {
  try {
    ScoredConversation s;
    s.conversation = conv;
    s.score = j.at("score").get<int>();
    const auto& sub = j.at("sub_scores");
    s.sub_scores = {sub.at("grammar").get<int>(), sub.at("diction").get<int>(),
                    sub.at("coherence").get<int>()};
    s.raw_response = j.value("raw_response", std::string());
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("score record: ") + e.what());
  }
}

json TopicsToJson(const TopicKeywords& t) {
  json arr = json::array();
  for (const auto& topic : t.topics) {
    arr.push_back({{"label", topic.label}, {"keywords", topic.keywords}, {"support", topic.support}});
  }
  return arr;
}

TopicKeywords TopicsFromJson(const json& j) {
  try {
    TopicKeywords t;
    for (const auto& topic : j) {
      t.topics.push_back({topic.at("label").get<std::string>(),
                          topic.at("keywords").get<std::vector<std::string>>(),
                          topic.value("support", std::vector<std::string>{})});
    }
    return t;
  } catch (const json::exception& e) {
    throw ParseError(std::string("topics: ") + e.what());
  }
}

std::string PromptFileName(std::size_t topic_index, std::string_view label) {
  std::string safe;
  for (unsigned char ch : label) {
    safe.push_back(ch >= 0x80 || std::isalnum(ch) || ch == '-' ? static_cast<char>(ch) : '_');
  }
  return fmt::format("t{:02}-{}.txt", topic_index, safe);
}

namespace {

void PersistRound(const std::filesystem::path& dir, const RoundRecord& rec) {
  std::vector<std::pair<std::string, json>> convs;
  for (const auto& c : rec.generated.conversations) {
    json j = ConversationToJson(c);
    j["status"] = "accepted";
    convs.emplace_back(c.id, std::move(j));
  }
  for (const auto& r : rec.generated.rejected) {
    json j = ConversationToJson(r.conversation);
    j["status"] = "rejected";
    j["reasons"] = r.reasons;
    convs.emplace_back(r.conversation.id, std::move(j));
  }
  std::sort(convs.begin(), convs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<json> lines;
  for (auto& [_, j] : convs) lines.push_back(std::move(j));
  WriteTextFile(dir / "conversations.jsonl", ToJsonLines(lines));

  lines.clear();
  for (const auto& s : rec.scores.scored) {
    json j = ScoredToJson(s);
    j["status"] = "scored";
    lines.push_back(std::move(j));
  }
  for (const auto& [c, err] : rec.scores.failed) {
    lines.push_back({{"id", c.id}, {"topic_index", c.topic_index}, {"status", "failed"}, {"error", err}});
  }
  WriteTextFile(dir / "scores.jsonl", ToJsonLines(lines));

  lines.clear();
  for (const auto& p : rec.prompts) {
    json ids = json::array();
    for (const auto& e : p.exemplars) ids.push_back(e.conversation.id);
    lines.push_back({{"topic_index", p.topic_index}, {"topic", p.topic}, {"hash", p.hash},
                     {"exemplars", ids}});
  }
  WriteTextFile(dir / "prompts.jsonl", ToJsonLines(lines));
}

}  // namespace

GenerationResult RunPipeline(const PipelineConfig& cfg, const PipelineHooks& hooks) {
  cfg.Validate();
  if (cfg.sources.empty()) throw UsageError("run_pipeline: no sources configured");

  GenerationResult result;
  result.documents = Ingest(cfg.sources, hooks.ingest);
  auto [kept, report] = Critique(result.documents, cfg.critique);
  result.critique = std::move(report);
  if (kept.documents.empty()) throw UsageError("run_pipeline: no documents survived critique");
  result.topics = ExtractTopics(kept, cfg.num_topics, cfg.keywords_per_topic);

  auto generator = hooks.generator ? hooks.generator : MakeBackend(cfg.generator, false);
  auto judge_backend = hooks.judge ? hooks.judge : MakeBackend(cfg.judge, true);
  auto cache = cfg.judge_cache.empty() ? std::make_shared<judge::JudgeCache>()
                                       : std::make_shared<judge::JudgeCache>(cfg.judge_cache);
  judge::JudgeClient client(judge_backend, cache, cfg.retry, cfg.parallelism);

  std::vector<PromptState> prompts;
  for (std::size_t i = 0; i < result.topics.topics.size(); ++i) {
    prompts.push_back(BuildPromptState(i, result.topics.topics[i], {}, cfg));
  }

  const bool persist = !cfg.output_dir.empty();
  for (int r = 1; r <= cfg.rounds; ++r) {
    RoundRecord rec;
    rec.round = r;
    rec.prompts = prompts;
    try {
      rec.generated = GenerateRound(*generator, prompts, cfg, r);
    } catch (const RoundError& e) {
      rec.generated = e.partial();
      rec.error = e.what();
    }
    rec.scores = ScoreRound(client, rec.generated.conversations);
    prompts = RefreshPrompts(prompts, rec.scores.scored, cfg.top_k, cfg);
    if (persist) PersistRound(cfg.output_dir / fmt::format("round_{}", r), rec);
    result.rounds.push_back(std::move(rec));
  }

  if (persist) {
    for (const auto& p : prompts) {
      WriteTextFile(cfg.output_dir / "prompts" / PromptFileName(p.topic_index, p.topic), p.text);
    }
    json documents = json::array();
    for (const auto& d : result.documents.documents) {
      documents.push_back({{"id", d.id}, {"source_uri", d.source_uri}, {"content_hash", d.content_hash}});
    }
    json fetch_errors = json::array();
    for (const auto& e : result.documents.fetch_errors) {
      fetch_errors.push_back({{"source_uri", e.source_uri}, {"message", e.message}});
    }
    json verdicts = json::array();
    for (const auto& v : result.critique.verdicts) {
      json jv = {{"id", v.document_id}, {"verdict", v.drop ? "drop" : "keep"}};
      if (v.drop) jv["reason"] = DropReasonName(*v.drop);
      verdicts.push_back(std::move(jv));
    }
    json rounds = json::array();
    json means = json::array();
    for (const auto& rec : result.rounds) {
      const auto mean = rec.MeanScore();
      json hashes = json::array();
      for (const auto& p : rec.prompts) hashes.push_back(p.hash);
      json jr = {{"round", rec.round},
                 {"prompt_hashes", hashes},
                 {"accepted", rec.generated.conversations.size()},
                 {"rejected", rec.generated.rejected.size()},
                 {"scored", rec.scores.scored.size()},
                 {"failed", rec.scores.failed.size()},
                 {"mean_score", mean ? json(*mean) : json(nullptr)}};
      if (!rec.error.empty()) jr["error"] = rec.error;
      rounds.push_back(std::move(jr));
      means.push_back(mean ? json(*mean) : json(nullptr));
    }
    const json manifest = {
        {"created_at", hooks.ingest.now ? hooks.ingest.now() : UtcNow()},
        {"config", PipelineConfigToJson(cfg)},
        {"backends", {{"generator", generator->Name()}, {"judge", judge_backend->Name()}}},
        {"judge_prompt_template", judge::PromptTemplateHash()},
        {"provenance", result.documents.provenance},
        {"documents", documents},
        {"fetch_errors", fetch_errors},
        {"critique", {{"verdicts", verdicts}}},
        {"topics", TopicsToJson(result.topics)},
        {"rounds", rounds},
        {"mean_scores", means}};
    WriteTextFile(cfg.output_dir / "run_manifest.json", ToPrettyJson(manifest));
  }
  return result;
}

}  // namespace mcetk::madgf
