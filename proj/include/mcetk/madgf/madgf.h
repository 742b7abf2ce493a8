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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mcetk/common/error.h"
#include "mcetk/judge/backend.h"
#include "mcetk/judge/judge.h"

namespace mcetk::madgf {

// ---------------------------------------------------------------------------
// Engineer: document ingestion.

struct Document {
  std::string id;  // doc-<first 12 hex of content hash>-<nn>, nn disambiguates copies
  std::string source_uri;
  std::string text;
  std::string content_hash;  // SHA-256 of text
  std::string fetched_at;    // ISO-8601 UTC
};

struct FetchError {
  std::string source_uri;
  std::string message;
};

struct DocumentSet {
  std::vector<Document> documents;  // sorted by id
  std::vector<FetchError> fetch_errors;
  std::string provenance;  // adapter kinds, comma separated
};

struct SourceSpec {
  enum class Kind { kLocalDir, kUrlList };
  Kind kind = Kind::kLocalDir;
  std::filesystem::path path;
};

struct IngestOptions {
  std::chrono::milliseconds fetch_timeout{20000};
  // Timestamp source; defaults to the system clock.
  std::function<std::string()> now;
};

// Reads every regular file under each local_dir (recursively, sorted) and
// fetches every URL listed in each url_list file. Per-URL failures are
// recorded in fetch_errors. Throws UsageError for an empty source list.
DocumentSet Ingest(const std::vector<SourceSpec>& sources, const IngestOptions& options = {});

// ---------------------------------------------------------------------------
// Critic: document quality gate.

struct CritiqueRules {
  std::size_t min_chars = 10;  // codepoints after trimming whitespace
  std::size_t max_chars = 20000;
  // Bounds on cjk / (cjk + latin) token share. A document with neither
  // script always fails the mix check.
  double min_cjk_share = 0.0;
  double max_cjk_share = 1.0;
};

enum class DropReason { kTooShort, kTooLong, kWrongLanguageMix, kDuplicate };
std::string_view DropReasonName(DropReason r);

struct DocumentVerdict {
  std::string document_id;
  std::optional<DropReason> drop;  // nullopt means keep
};

struct CritiqueReport {
  std::vector<DocumentVerdict> verdicts;  // one per input document
  CritiqueRules rules;
};

// Documents are visited in id order; a later copy of already-seen content
// is dropped as a duplicate.
std::pair<DocumentSet, CritiqueReport> Critique(const DocumentSet& docs, const CritiqueRules& rules);

// ---------------------------------------------------------------------------
// Manager: topics and keywords.

struct Topic {
  std::string label;
  std::vector<std::string> keywords;  // ranked, score desc then lexicographic
  std::vector<std::string> support;   // document ids
};

struct TopicKeywords {
  std::vector<Topic> topics;
};

// Candidate terms of one text: Latin words (2+ letters, not stopwords), CJK
// characters and CJK character bigrams inside a contiguous CJK run, minus
// stopwords (a bigram is dropped only when both characters are stopwords).
std::vector<std::string> CandidateTerms(std::string_view text);

// Smoothed TF-IDF per document: tf = count / candidates in the document,
// idf = ln((1 + N) / (1 + df)) + 1.
std::vector<std::map<std::string, double>> TfIdf(const DocumentSet& docs);

// Throws UsageError for an empty corpus or when no candidate terms remain.
TopicKeywords ExtractTopics(const DocumentSet& docs, std::size_t num_topics, std::size_t k);

// ---------------------------------------------------------------------------
// Speaker / Commentator.

struct Conversation {
  std::string id;  // r<round>-t<topic>-c<index>, zero padded
  std::size_t topic_index = 0;
  std::string topic;
  std::vector<std::string> keywords;
  std::vector<judge::Turn> turns;
  int round = 0;
  std::string prompt_hash;
  int attempts = 0;
};

struct RejectedConversation {
  Conversation conversation;  // last attempt (turns may be empty)
  std::vector<std::string> reasons;  // one per failed attempt
};

struct ScoredConversation {
  Conversation conversation;
  int score = 0;
  judge::SubScores sub_scores;
  std::string raw_response;
};

struct BackendSpec {
  enum class Kind { kMock, kHttp };
  Kind kind = Kind::kMock;
  judge::HttpBackendConfig http;
  std::uint64_t seed = 0;
  int jitter = 0;               // mock judge only
  double pure_turn_rate = 0.0;  // mock speaker only
};

struct PipelineConfig {
  int rounds = 3;
  std::size_t conversations_per_round = 3;  // per topic
  int speakers = 2;
  int turns = 4;
  std::size_t top_k = 2;
  double min_mix_ratio = 0.5;
  std::size_t num_topics = 4;
  std::size_t keywords_per_topic = 5;
  int max_attempts = 3;  // generation attempts per conversation slot
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  judge::RetryPolicy retry;
  CritiqueRules critique;
  std::vector<SourceSpec> sources;
  BackendSpec generator;
  BackendSpec judge;
  std::filesystem::path judge_cache;  // empty: no persistent cache
  std::filesystem::path output_dir;

  // Throws ConfigError.
  void Validate() const;
};

// Relative paths inside the JSON resolve against `base_dir`.
PipelineConfig PipelineConfigFromJson(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig LoadPipelineConfig(const std::filesystem::path& path);
nlohmann::json PipelineConfigToJson(const PipelineConfig& cfg);

struct PromptState {
  std::size_t topic_index = 0;
  std::string topic;
  std::vector<std::string> keywords;
  std::vector<ScoredConversation> exemplars;
  std::string text;
  std::string hash;  // first 16 hex of SHA-256(text)
};

PromptState BuildPromptState(std::size_t topic_index, const Topic& topic,
                             std::vector<ScoredConversation> exemplars, const PipelineConfig& cfg);

// Deterministic offline speaker: a pure function of (prompt, seed). Every
// topic keyword already present in an exemplar is reused, plus one or two
// seeded picks; turns alternate speakers and carry an English word unless
// the seeded pure_turn_rate makes a turn Cantonese only.
class MockSpeakerBackend : public judge::ChatBackend {
 public:
  explicit MockSpeakerBackend(std::uint64_t seed = 0, double pure_turn_rate = 0.0)
      : seed_(seed), pure_turn_rate_(pure_turn_rate) {}

  std::string Complete(std::string_view prompt) override;
  std::string Name() const override;

 private:
  std::uint64_t seed_;
  double pure_turn_rate_;
};

std::shared_ptr<judge::ChatBackend> MakeBackend(const BackendSpec& spec, bool for_judge);

// Accepts {"turns": [{"speaker": n, "text": ...}]} or "Speaker n: text" lines.
std::vector<judge::Turn> ParseConversation(std::string_view raw);

// Empty when the conversation satisfies the turn, speaker and mix rules.
std::optional<std::string> CheckConversation(const std::vector<judge::Turn>& turns,
                                             const PipelineConfig& cfg);

struct RoundOutput {
  std::vector<Conversation> conversations;
  std::vector<RejectedConversation> rejected;
};

class RoundError : public BackendError {
 public:
  RoundError(const std::string& message, RoundOutput partial)
      : BackendError(message), partial_(std::move(partial)) {}
  const RoundOutput& partial() const { return partial_; }

 private:
  RoundOutput partial_;
};

// conversations_per_round conversations for each topic prompt. Slots whose
// attempts all break the constraints are recorded as rejected. Throws
// RoundError (with everything generated so far) if the backend keeps failing.
RoundOutput GenerateRound(judge::ChatBackend& generator, const std::vector<PromptState>& prompts,
                          const PipelineConfig& cfg, int round_no);

struct ScoreOutput {
  std::vector<ScoredConversation> scored;  // score desc, id asc
  std::vector<std::pair<Conversation, std::string>> failed;
};

ScoreOutput ScoreRound(judge::JudgeClient& judge, const std::vector<Conversation>& convs);

// Rebuilds each topic prompt with that topic's top_k conversations (by
// score desc, id asc) as exemplars. top_k == 0 leaves prompts untouched.
std::vector<PromptState> RefreshPrompts(const std::vector<PromptState>& prompts,
                                        const std::vector<ScoredConversation>& scored,
                                        std::size_t top_k, const PipelineConfig& cfg);

struct RoundRecord {
  int round = 0;
  std::vector<PromptState> prompts;  // prompts used for this round
  RoundOutput generated;
  ScoreOutput scores;
  std::string error;  // non-empty when generation hit a backend failure
  std::optional<double> MeanScore() const;
};

struct GenerationResult {
  DocumentSet documents;
  CritiqueReport critique;
  TopicKeywords topics;
  std::vector<RoundRecord> rounds;
};

struct PipelineHooks {
  // Override backends (e.g. for tests); null means build from the config.
  std::shared_ptr<judge::ChatBackend> generator;
  std::shared_ptr<judge::ChatBackend> judge;
  IngestOptions ingest;
};

// ingest -> critique -> topics once, then `rounds` x (generate -> score ->
// refresh). Writes round_<n>/conversations.jsonl, round_<n>/scores.jsonl,
// round_<n>/prompts.jsonl, prompts/<topic>.txt and run_manifest.json when
// cfg.output_dir is set.
GenerationResult RunPipeline(const PipelineConfig& cfg, const PipelineHooks& hooks = {});

nlohmann::json ConversationToJson(const Conversation& c);
Conversation ConversationFromJson(const nlohmann::json& j);
nlohmann::json ScoredToJson(const ScoredConversation& s);
ScoredConversation ScoredFromJson(const nlohmann::json& j, const Conversation& conv);
nlohmann::json TopicsToJson(const TopicKeywords& t);
TopicKeywords TopicsFromJson(const nlohmann::json& j);

// File name used for a topic's prompt under prompts/.
std::string PromptFileName(std::size_t topic_index, std::string_view label);

}  // namespace mcetk::madgf
