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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mcetk/common/error.h"
#include "mcetk/fal/fal.h"
#include "mcetk/metrics/metrics.h"

namespace mcetk::cli {

// 1 for usage/config/parse/range/validation/undefined-basis, 2 for io/backend.
int ExitCodeFor(ErrorKind kind);

// Parses "0.25", "1/3" or "2/6". Throws UsageError.
double ParseRational(std::string_view text);

// One row of a system comparison.
struct ReportRow {
  std::string id;
  std::optional<double> mer;  // ratios, not percents
  std::optional<double> cer;
  std::optional<double> wer;
  double fidelity = 0.0;
  std::optional<double> latency;  // seconds
  metrics::EditCounts basis_counts;
  fal::FalScore fal;
};

struct ReportTable {
  std::vector<ReportRow> rows;  // FAL descending, then id ascending
  fal::FalConfig config;        // max_latency resolved
  metrics::Metric basis = metrics::Metric::kMer;
};

// `systems` is {"systems": [...], "M"?: seconds}. Each system carries an
// "id", fidelity as "F" (number) or "fidelity" (path to `judge` output),
// edit counts as "counts" ({"mer": {S,I,D,N}, ...}) or "report" (path to
// `eval` output), and latency as "L" (seconds) or "latencies" (path to
// `bench` output, averaged over successful records). Paths resolve against
// `base_dir`. M is, in order of preference: cfg.max_latency when > 0, the
// file's "M", the largest successful latency among all systems.
ReportTable BuildReport(const nlohmann::json& systems, const std::filesystem::path& base_dir,
                        fal::FalConfig cfg, metrics::Metric basis);

// | Model | MER% | CER% | WER% | FAL | with two decimals, plus a footer
// stating weights, latency mode, M and the accuracy basis.
std::string ReportToMarkdown(const ReportTable& table);
std::string ReportToCsv(const ReportTable& table);
// {"mode","weights","M","basis","systems":[{"id","F","counts","L","terms","total"}]}
nlohmann::json ReportToJson(const ReportTable& table);

// Entry point behind the `mcetk` binary. `args` excludes the program name.
// Structured output goes to `out` (or --out); diagnostics go to `err` as a
// single line "mcetk: error[<kind>]: <message>".
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mcetk::cli
