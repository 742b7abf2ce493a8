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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mcetk/textnorm/textnorm.h"

namespace mcetk::metrics {

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_length = 0;  // N
  std::size_t correct = 0;

  std::size_t Errors() const { return substitutions + insertions + deletions; }

  // (S+I+D)/N, unclamped; nullopt when N == 0.
  std::optional<double> Rate() const;

  EditCounts& operator+=(const EditCounts& o);
  friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

enum class OpKind { kMatch, kSubstitute, kInsert, kDelete };

struct EditOp {
  OpKind kind;
  std::string ref;  // empty for kInsert
  std::string hyp;  // empty for kDelete

  friend bool operator==(const EditOp&, const EditOp&) = default;
};

struct Alignment {
  EditCounts counts;
  std::vector<EditOp> ops;  // in reference order
};

// Unit-cost Levenshtein alignment. Among minimal alignments the traceback,
// walking back from the end of both sequences, prefers Match, then
// Substitute, then Delete, then Insert.
Alignment Align(std::span<const std::string> ref, std::span<const std::string> hyp);
Alignment Align(const textnorm::TokenSequence& ref, const textnorm::TokenSequence& hyp);

// Replays `ops` over `ref`; returns the hypothesis the ops describe.
std::vector<std::string> ApplyOps(std::span<const std::string> ref,
                                  std::span<const EditOp> ops);

// Unit bases for each metric, derived from normalized text.
std::vector<std::string> MixedUnits(std::string_view text, const textnorm::NormConfig& cfg);
std::vector<std::string> CharUnits(std::string_view text, const textnorm::NormConfig& cfg);
std::vector<std::string> WordUnits(std::string_view text, const textnorm::NormConfig& cfg);

enum class Metric { kMer, kCer, kWer };
inline constexpr Metric kAllMetrics[] = {Metric::kMer, Metric::kCer, Metric::kWer};
std::string_view MetricName(Metric m);

struct UtteranceEntry {
  std::string id;
  EditCounts mer;
  EditCounts cer;
  EditCounts wer;

  const EditCounts& counts(Metric m) const;
  std::optional<double> rate(Metric m) const { return counts(m).Rate(); }
};

UtteranceEntry EvaluatePair(std::string_view ref_text, std::string_view hyp_text,
                            const textnorm::NormConfig& cfg, std::string id = {});

struct CorpusMetric {
  EditCounts pooled;      // summed over utterances whose basis is non-empty
  std::size_t scored = 0;
  std::size_t skipped = 0;
  std::optional<double> Rate() const { return pooled.Rate(); }
};

struct MetricReport {
  std::vector<UtteranceEntry> utterances;
  CorpusMetric mer;
  CorpusMetric cer;
  CorpusMetric wer;
  // Utterances with an empty reference basis for at least one metric.
  std::size_t skipped = 0;

  const CorpusMetric& corpus(Metric m) const;
  CorpusMetric& corpus(Metric m);
};

// Pooled micro-average. Throws UsageError on empty input.
MetricReport AggregateCorpus(std::vector<UtteranceEntry> entries);

nlohmann::json CountsToJson(const EditCounts& c);
EditCounts CountsFromJson(const nlohmann::json& j);
nlohmann::json ReportToJson(const MetricReport& report);
MetricReport ReportFromJson(const nlohmann::json& j);
std::string ReportToCsv(const MetricReport& report);

}  // namespace mcetk::metrics
