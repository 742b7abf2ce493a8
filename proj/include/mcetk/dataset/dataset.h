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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mcetk/textnorm/textnorm.h"

namespace mcetk::dataset {

enum class Accent { kGuangzhou, kHongKong, kOther };

std::string_view AccentName(Accent a);

struct Speaker {
  std::string gender;
  Accent accent = Accent::kOther;
};

// One manifest line. `line` is the 1-based source line (0 when built in code).
struct UtteranceRecord {
  std::string id;
  std::string audio;
  double duration_s = 0.0;
  std::string topic;
  std::string text;
  std::optional<Speaker> speaker;
  std::size_t line = 0;
};

// JSONL manifest. Malformed lines raise ParseError with the line number;
// duplicate ids raise ValidationError naming both lines. Blank lines are
// skipped, so an empty file is an empty manifest.
std::vector<UtteranceRecord> LoadManifest(const std::filesystem::path& path);
std::vector<UtteranceRecord> ParseManifest(std::string_view text, std::string_view origin);

nlohmann::json RecordToJson(const UtteranceRecord& r);
std::string ManifestToJsonl(const std::vector<UtteranceRecord>& records);

struct Issue {
  std::size_t line = 0;
  std::string id;
  std::string message;
};

// Reports every violated invariant; never throws. With `allowed_topics`,
// topics outside the list are flagged too.
std::vector<Issue> Validate(const std::vector<UtteranceRecord>& records,
                            const std::vector<std::string>* allowed_topics = nullptr);

struct TopicStats {
  std::size_t utterances = 0;
  double seconds = 0.0;
  textnorm::ScriptCounts counts;

  double hours() const { return seconds / 3600.0; }
};

struct DatasetStats {
  std::map<std::string, TopicStats> topics;
  TopicStats total;
  // histogram[k] counts durations in [k, k+1) seconds.
  std::vector<std::size_t> histogram;
  double max_duration = 0.0;
};

DatasetStats ComputeStats(const std::vector<UtteranceRecord>& records,
                          const textnorm::NormConfig& cfg);

nlohmann::json StatsToJson(const DatasetStats& s);
std::string StatsToMarkdown(const DatasetStats& s);

struct TopicSplit {
  std::size_t total = 0;
  std::size_t train = 0;
  double TrainFraction() const {
    return total ? static_cast<double>(train) / static_cast<double>(total) : 0.0;
  }
};

struct SplitResult {
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> test;
  std::uint64_t seed = 0;
  double ratio = 0.0;
  std::map<std::string, TopicSplit> topics;
};

// Per-topic shuffle (mt19937_64 seeded from (seed, topic), Fisher-Yates with
// rejection-sampled indices) then round-half-up(ratio * n) records go to
// train, keeping both sides non-empty whenever n >= 2. Both outputs keep
// the input order. Throws UsageError unless 0 < ratio < 1.
SplitResult Split(const std::vector<UtteranceRecord>& records, double ratio, std::uint64_t seed);

nlohmann::json SplitMetaToJson(const SplitResult& s);

}  // namespace mcetk::dataset
