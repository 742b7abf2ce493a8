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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mcetk/dataset/dataset.h"

namespace mcetk::bench {

struct LatencyRecord {
  std::string id;
  std::string system;
  double latency_s = 0.0;  // wall clock, spawn to exit
  std::string command;
  int exit_status = 0;     // 128 + signal for signalled children
  bool ok = false;
  std::optional<std::string> hypothesis;       // captured stdout
  std::optional<std::string> hypothesis_path;  // where it was written
};

struct RunOptions {
  std::string system = "system";
  // Relative audio paths resolve against this directory.
  std::filesystem::path audio_root;
  bool capture_stdout = false;
  // When set together with capture_stdout, stdout goes to <dir>/<id>.txt.
  std::filesystem::path hypothesis_dir;
};

// Substitutes {audio} (shell-quoted) and {id} into the template.
std::string ExpandCommand(std::string_view command_template, const std::string& audio_path,
                          const std::string& id);

// Runs the command through /bin/sh once, timing it with a monotonic clock.
// A missing audio file throws IoError; a non-zero exit yields a record with
// ok = false rather than an exception.
LatencyRecord RunTimed(std::string_view command_template, const dataset::UtteranceRecord& entry,
                       const RunOptions& options);

// One process per entry. parallelism > 1 overlaps runs, which skews the
// measured latencies; keep it at 1 for comparable numbers.
std::vector<LatencyRecord> RunAll(std::string_view command_template,
                                  const std::vector<dataset::UtteranceRecord>& entries,
                                  const RunOptions& options, std::size_t parallelism = 1);

struct SystemStats {
  std::size_t count = 0;
  std::size_t failed = 0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
};

struct BenchSummary {
  std::map<std::string, SystemStats> systems;
  double max_latency = 0.0;  // M over every successful record
};

// Throws UsageError when no record succeeded.
BenchSummary Summarize(const std::vector<LatencyRecord>& records);

nlohmann::json RecordToJson(const LatencyRecord& r);
LatencyRecord RecordFromJson(const nlohmann::json& j);
std::vector<LatencyRecord> LoadLatencies(const std::filesystem::path& path);
std::string RecordsToJsonl(const std::vector<LatencyRecord>& records);
nlohmann::json SummaryToJson(const BenchSummary& s);

}  // namespace mcetk::bench
