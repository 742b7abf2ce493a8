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

#include "mcetk/metrics/metrics.h"

#include <algorithm>
#include <cstdint>
#include <utility>

#include <fmt/format.h>

#include "mcetk/common/error.h"
#include "mcetk/textnorm/utf8.h"

namespace mcetk::metrics {

std::optional<double> EditCounts::Rate() const {
  if (ref_length == 0) return std::nullopt;
  return static_cast<double>(Errors()) / static_cast<double>(ref_length);
}

EditCounts& EditCounts::operator+=(const EditCounts& o) {
  substitutions += o.substitutions;
  insertions += o.insertions;
  deletions += o.deletions;
  ref_length += o.ref_length;
  correct += o.correct;
  return *this;
}

Alignment Align(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t width = m + 1;
  std::vector<std::uint32_t> dist((n + 1) * width);
  auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return dist[i * width + j]; };

  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<std::uint32_t>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::uint32_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  Alignment result;
  result.counts.ref_length = n;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const std::uint32_t here = at(i, j);
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (same && at(i - 1, j - 1) == here) {
        result.ops.push_back({OpKind::kMatch, ref[i - 1], hyp[j - 1]});
        ++result.counts.correct;
        --i, --j;
        continue;
      }
      if (!same && at(i - 1, j - 1) + 1 == here) {
        result.ops.push_back({OpKind::kSubstitute, ref[i - 1], hyp[j - 1]});
        ++result.counts.substitutions;
        --i, --j;
        continue;
      }
    }
    if (i > 0 && at(i - 1, j) + 1 == here) {
      result.ops.push_back({OpKind::kDelete, ref[i - 1], {}});
      ++result.counts.deletions;
      --i;
      continue;
    }
    result.ops.push_back({OpKind::kInsert, {}, hyp[j - 1]});
    ++result.counts.insertions;
    --j;
  }
  std::reverse(result.ops.begin(), result.ops.end());
  return result;
}

Alignment Align(const textnorm::TokenSequence& ref, const textnorm::TokenSequence& hyp) {
  const auto r = ref.Texts();
  const auto h = hyp.Texts();
  return Align(r, h);
}

std::vector<std::string> ApplyOps(std::span<const std::string> ref,
                                  std::span<const EditOp> ops) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (const auto& op : ops) {
    switch (op.kind) {
      case OpKind::kMatch:
        if (pos >= ref.size() || ref[pos] != op.ref) throw ValidationError("match op out of sync");
        out.push_back(ref[pos++]);
        break;
      case OpKind::kSubstitute:
        if (pos >= ref.size() || ref[pos] != op.ref) throw ValidationError("substitute op out of sync");
        ++pos;
        out.push_back(op.hyp);
        break;
      case OpKind::kDelete:
        if (pos >= ref.size() || ref[pos] != op.ref) throw ValidationError("delete op out of sync");
        ++pos;
        break;
      case OpKind::kInsert:
        out.push_back(op.hyp);
        break;
    }
  }
  if (pos != ref.size()) throw ValidationError("ops do not consume the reference");
  return out;
}

std::vector<std::string> MixedUnits(std::string_view text, const textnorm::NormConfig& cfg) {
  return textnorm::Tokenize(text, cfg).Texts();
}

std::vector<std::string> CharUnits(std::string_view text, const textnorm::NormConfig& cfg) {
  std::vector<std::string> out;
  for (char32_t cp : utf8::Decode(textnorm::NormalizeText(text, cfg))) {
    if (!textnorm::IsWhitespace(cp)) out.push_back(utf8::Encode(cp));
  }
  return out;
}

std::vector<std::string> WordUnits(std::string_view text, const textnorm::NormConfig& cfg) {
  // Normalized text has single-space separators and no leading/trailing space.
  const std::string norm = textnorm::NormalizeText(text, cfg);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < norm.size()) {
    std::size_t end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    if (end > start) out.push_back(norm.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string_view MetricName(Metric m) {
  switch (m) {
    case Metric::kMer: return "mer";
    case Metric::kCer: return "cer";
    case Metric::kWer: return "wer";
  }
  return "?";
}

const EditCounts& UtteranceEntry::counts(Metric m) const {
  switch (m) {
    case Metric::kMer: return mer;
    case Metric::kCer: return cer;
    case Metric::kWer: return wer;
  }
  return mer;
}

UtteranceEntry EvaluatePair(std::string_view ref_text, std::string_view hyp_text,
                            const textnorm::NormConfig& cfg, std::string id) {
  UtteranceEntry e;
  e.id = std::move(id);
  e.mer = Align(MixedUnits(ref_text, cfg), MixedUnits(hyp_text, cfg)).counts;
  e.cer = Align(CharUnits(ref_text, cfg), CharUnits(hyp_text, cfg)).counts;
  e.wer = Align(WordUnits(ref_text, cfg), WordUnits(hyp_text, cfg)).counts;
  return e;
}

const CorpusMetric& MetricReport::corpus(Metric m) const {
  switch (m) {
    case Metric::kMer: return mer;
    case Metric::kCer: return cer;
    case Metric::kWer: return wer;
  }
  return mer;
}

CorpusMetric& MetricReport::corpus(Metric m) {
  return const_cast<CorpusMetric&>(std::as_const(*this).corpus(m));
}

MetricReport AggregateCorpus(std::vector<UtteranceEntry> entries) {
  if (entries.empty()) throw UsageError("aggregate_corpus: no utterances");
  MetricReport report;
  for (const auto& e : entries) {
    bool any_skipped = false;
    for (Metric m : kAllMetrics) {
      auto& c = report.corpus(m);
      const EditCounts& counts = e.counts(m);
      if (counts.ref_length == 0) {
        ++c.skipped;
        any_skipped = true;
      } else {
        c.pooled += counts;
        ++c.scored;
      }
    }
    if (any_skipped) ++report.skipped;
  }
  report.utterances = std::move(entries);
  return report;
}

nlohmann::json CountsToJson(const EditCounts& c) {
  return {{"S", c.substitutions}, {"I", c.insertions}, {"D", c.deletions},
          {"N", c.ref_length}, {"C", c.correct}};
}

EditCounts CountsFromJson(const nlohmann::json& j) {
  try {
    EditCounts c;
    c.substitutions = j.at("S").get<std::size_t>();
    c.insertions = j.at("I").get<std::size_t>();
    c.deletions = j.at("D").get<std::size_t>();
    c.ref_length = j.at("N").get<std::size_t>();
    c.correct = j.contains("C") ? j.at("C").get<std::size_t>()
                                : c.ref_length - std::min(c.ref_length, c.substitutions + c.deletions);
    if (c.substitutions + c.deletions + c.correct != c.ref_length) {
      throw ValidationError("edit counts violate S + D + C = N: " + j.dump());
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("edit counts: ") + e.what());
  }
}

namespace {

nlohmann::json RateJson(std::optional<double> r) {
  return r ? nlohmann::json(*r) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json ReportToJson(const MetricReport& report) {
  nlohmann::json utts = nlohmann::json::array();
  for (const auto& e : report.utterances) {
    nlohmann::json counts;
    nlohmann::json row = {{"id", e.id}};
    for (Metric m : kAllMetrics) {
      row[std::string(MetricName(m))] = RateJson(e.rate(m));
      counts[std::string(MetricName(m))] = CountsToJson(e.counts(m));
    }
    row["counts"] = counts;
    utts.push_back(row);
  }
  nlohmann::json corpus;
  for (Metric m : kAllMetrics) {
    const auto& c = report.corpus(m);
    corpus[std::string(MetricName(m))] = {{"rate", RateJson(c.Rate())},
                                          {"counts", CountsToJson(c.pooled)},
                                          {"scored", c.scored},
                                          {"skipped", c.skipped}};
  }
  return {{"utterances", utts}, {"corpus", corpus}, {"skipped", report.skipped}};
}

MetricReport ReportFromJson(const nlohmann::json& j) {
  try {
    MetricReport report;
    for (const auto& u : j.at("utterances")) {
      UtteranceEntry e;
      e.id = u.at("id").get<std::string>();
      e.mer = CountsFromJson(u.at("counts").at("mer"));
      e.cer = CountsFromJson(u.at("counts").at("cer"));
      e.wer = CountsFromJson(u.at("counts").at("wer"));
      report.utterances.push_back(std::move(e));
    }
    for (Metric m : kAllMetrics) {
      const auto& c = j.at("corpus").at(std::string(MetricName(m)));
      auto& dst = report.corpus(m);
      dst.pooled = CountsFromJson(c.at("counts"));
      dst.scored = c.value("scored", std::size_t{0});
      dst.skipped = c.value("skipped", std::size_t{0});
    }
    report.skipped = j.value("skipped", std::size_t{0});
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("metric report: ") + e.what());
  }
}

namespace {

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string CsvRate(std::optional<double> r) {
  return r ? fmt::format("{:.6f}", *r) : std::string();
}

}  // namespace

std::string ReportToCsv(const MetricReport& report) {
  std::string out = "id";
  for (Metric m : kAllMetrics) out += fmt::format(",{}", MetricName(m));
  for (Metric m : kAllMetrics) {
    const auto n = MetricName(m);
    out += fmt::format(",{0}_S,{0}_I,{0}_D,{0}_N", n);
  }
  out += "\n";
  for (const auto& e : report.utterances) {
    out += CsvField(e.id);
    for (Metric m : kAllMetrics) out += "," + CsvRate(e.rate(m));
    for (Metric m : kAllMetrics) {
      const auto& c = e.counts(m);
      out += fmt::format(",{},{},{},{}", c.substitutions, c.insertions, c.deletions,
                         c.ref_length);
    }
    out += "\n";
  }
  return out;
}

}  // namespace mcetk::metrics
