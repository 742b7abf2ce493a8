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

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mcetk/judge/backend.h"

namespace mcetk::judge {

enum class Task { kFidelity, kConversationQuality };

std::string_view TaskName(Task task);
Task ParseTask(std::string_view name);

struct Turn {
  int speaker = 0;  // 1-based
  std::string text;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct JudgeRequest {
  Task task = Task::kFidelity;
  std::string reference_text;   // fidelity
  std::string hypothesis_text;  // fidelity
  std::vector<Turn> turns;      // conversation_quality
  // Extra context for conversation_quality; listed verbatim in the prompt.
  std::vector<std::string> keywords;
  // Empty selects the built-in rubric for the task.
  std::string rubric;
};

struct SubScores {
  int grammar = 0;
  int diction = 0;
  int coherence = 0;

  friend bool operator==(const SubScores&, const SubScores&) = default;
};

struct JudgeVerdict {
  int score = 0;  // [0, 100]
  std::optional<SubScores> sub_scores;
  std::string raw_response;
  bool cache_hit = false;

  // Equality ignores cache_hit.
  bool SameAs(const JudgeVerdict& o) const {
    return score == o.score && sub_scores == o.sub_scores && raw_response == o.raw_response;
  }
};

// Arithmetic mean of three integers, rounded half-up.
int MeanRoundHalfUp(int a, int b, int c);

std::string BuildPrompt(const JudgeRequest& req);

// Accepts, in order: the first JSON object in `raw`, then "Score: NN/100"
// style lines, then a bare integer. Throws ParseError (carrying the raw
// text) or RangeError for scores outside [0, 100].
JudgeVerdict ParseVerdict(std::string_view raw, Task task);

nlohmann::json VerdictToJson(const JudgeVerdict& v);
JudgeVerdict VerdictFromJson(const nlohmann::json& j);

// Verdict cache keyed by SHA-256 of (task, prompt). With a path it is backed
// by an append-only JSONL file that is replayed on open. Concurrent readers
// share a lock; appends are serialized.
class JudgeCache {
 public:
  JudgeCache() = default;
  explicit JudgeCache(std::filesystem::path path);

  static std::string Key(Task task, std::string_view prompt);

  std::optional<JudgeVerdict> Find(const std::string& key) const;
  void Insert(const std::string& key, Task task, const JudgeVerdict& verdict);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, JudgeVerdict> entries_;
  std::filesystem::path path_;
  std::ofstream out_;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
};

class JudgeClient {
 public:
  // `cache` may be null, in which case nothing is cached.
  JudgeClient(std::shared_ptr<ChatBackend> backend, std::shared_ptr<JudgeCache> cache,
              RetryPolicy retry = {}, std::size_t parallelism = 1);

  // Cached verdicts come back with cache_hit = true. Transport failures are
  // retried with exponential backoff, then surface as BackendError.
  JudgeVerdict RequestScore(const JudgeRequest& req);

  struct Outcome {
    std::optional<JudgeVerdict> verdict;
    std::string error;  // set when verdict is empty
  };
  // Issues up to `parallelism` requests at once; failures are isolated.
  std::vector<Outcome> RequestScores(const std::vector<JudgeRequest>& reqs);

  std::size_t backend_calls() const { return backend_calls_.load(); }
  const ChatBackend& backend() const { return *backend_; }

 private:
  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<JudgeCache> cache_;
  RetryPolicy retry_;
  std::size_t parallelism_;
  std::atomic<std::size_t> backend_calls_{0};
};

// Stable identifier of the prompt templates, recorded with fidelity scores.
std::string PromptTemplateHash();

}  // namespace mcetk::judge
