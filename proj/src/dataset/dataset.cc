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

#include "mcetk/dataset/dataset.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "mcetk/common/error.h"
#include "mcetk/common/io.h"
#include "mcetk/common/random.h"

namespace mcetk::dataset {
namespace {

Accent ParseAccent(const std::string& s) {
  if (s == "guangzhou") return Accent::kGuangzhou;
  if (s == "hongkong") return Accent::kHongKong;
  if (s == "other") return Accent::kOther;
  throw ParseError(fmt::format("unknown accent '{}' (expected guangzhou|hongkong|other)", s));
}

UtteranceRecord RecordFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("expected a JSON object");
  UtteranceRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.audio = j.value("audio", std::string());
    r.duration_s = j.value("duration_s", 0.0);
    r.topic = j.value("topic", std::string());
    r.text = j.value("text", std::string());
    if (auto it = j.find("speaker"); it != j.end() && !it->is_null()) {
      Speaker s;
      s.gender = it->value("gender", std::string());
      s.accent = ParseAccent(it->value("accent", std::string("other")));
      r.speaker = s;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
  return r;
}

std::string Ratio(const textnorm::ScriptCounts& c) {
  auto r = c.RatioCjkToLatin();
  return r ? fmt::format("{:.2f}:1", *r) : std::string("n/a");
}

}  // namespace

std::string_view AccentName(Accent a) {
  switch (a) {
    case Accent::kGuangzhou: return "guangzhou";
    case Accent::kHongKong: return "hongkong";
    case Accent::kOther: return "other";
  }
  return "other";
}

std::vector<UtteranceRecord> ParseManifest(std::string_view text, std::string_view origin) {
  std::vector<UtteranceRecord> records;
  std::unordered_map<std::string, std::size_t> first_line;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    UtteranceRecord r;
    try {
      r = RecordFromJson(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(fmt::format("{}:{}: malformed JSON: {}", origin, number, e.what()));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}:{}: {}", origin, number, e.what()));
    }
    r.line = number;
    auto [it, inserted] = first_line.emplace(r.id, number);
    if (!inserted) {
      throw ValidationError(fmt::format("{}: duplicate id '{}' on lines {} and {}", origin, r.id,
                                        it->second, number));
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<UtteranceRecord> LoadManifest(const std::filesystem::path& path) {
  return ParseManifest(ReadTextFile(path), path.string());
}

nlohmann::json RecordToJson(const UtteranceRecord& r) {
  nlohmann::json j = {{"id", r.id},
                      {"audio", r.audio},
                      {"duration_s", r.duration_s},
                      {"topic", r.topic},
                      {"text", r.text}};
  if (r.speaker) {
    j["speaker"] = {{"gender", r.speaker->gender}, {"accent", AccentName(r.speaker->accent)}};
  }
  return j;
}

std::string ManifestToJsonl(const std::vector<UtteranceRecord>& records) {
  std::vector<nlohmann::json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(RecordToJson(r));
  return ToJsonLines(lines);
}

std::vector<Issue> Validate(const std::vector<UtteranceRecord>& records,
                            const std::vector<std::string>* allowed_topics) {
  std::vector<Issue> issues;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& r : records) {
    auto add = [&](std::string msg) { issues.push_back({r.line, r.id, std::move(msg)}); };
    if (r.id.empty()) add("empty id");
    if (auto [it, inserted] = seen.emplace(r.id, r.line); !inserted) {
      add(fmt::format("duplicate id (first seen on line {})", it->second));
    }
    if (!std::isfinite(r.duration_s) || r.duration_s <= 0.0) add("non-positive duration");
    if (r.text.find_first_not_of(" \t\r\n") == std::string::npos) add("empty transcript");
    if (r.topic.empty()) {
      add("missing topic");
    } else if (allowed_topics &&
               std::find(allowed_topics->begin(), allowed_topics->end(), r.topic) ==
                   allowed_topics->end()) {
      add(fmt::format("topic '{}' not in the allowed topic list", r.topic));
    }
    if (r.audio.empty()) add("missing audio path");
  }
  return issues;
}

DatasetStats ComputeStats(const std::vector<UtteranceRecord>& records,
                          const textnorm::NormConfig& cfg) {
  DatasetStats s;
  for (const auto& r : records) {
    const auto counts = textnorm::CountStats(textnorm::Tokenize(r.text, cfg));
    TopicStats& t = s.topics[r.topic];
    ++t.utterances;
    t.seconds += r.duration_s;
    t.counts += counts;
    s.max_duration = std::max(s.max_duration, r.duration_s);
  }
  for (const auto& [_, t] : s.topics) {
    s.total.utterances += t.utterances;
    s.total.seconds += t.seconds;
    s.total.counts += t.counts;
  }
  if (!records.empty()) {
    s.histogram.assign(static_cast<std::size_t>(std::floor(s.max_duration)) + 1, 0);
    for (const auto& r : records) {
      const double d = std::max(0.0, r.duration_s);
      ++s.histogram[static_cast<std::size_t>(std::floor(d))];
    }
  }
  return s;
}

nlohmann::json StatsToJson(const DatasetStats& s) {
  auto topic_json = [](const TopicStats& t) {
    auto ratio = t.counts.RatioCjkToLatin();
    return nlohmann::json{{"utterances", t.utterances},
                          {"hours", t.hours()},
                          {"cjk_chars", t.counts.cjk_chars},
                          {"latin_words", t.counts.latin_words},
                          {"digit_runs", t.counts.digit_runs},
                          {"ratio_cjk_to_latin", ratio ? nlohmann::json(*ratio) : nlohmann::json(nullptr)}};
  };
  nlohmann::json topics = nlohmann::json::object();
  for (const auto& [name, t] : s.topics) topics[name] = topic_json(t);
  return {{"topics", topics},
          {"total", topic_json(s.total)},
          {"histogram_1s", s.histogram},
          {"max_duration_s", s.max_duration}};
}

std::string StatsToMarkdown(const DatasetStats& s) {
  std::string out =
      "| Topic | Utterances | Hours | CJK chars | Latin words | CJK:Latin |\n"
      "|---|---:|---:|---:|---:|---:|\n";
  auto row = [&](const std::string& name, const TopicStats& t) {
    out += fmt::format("| {} | {} | {:.2f} | {} | {} | {} |\n", name, t.utterances, t.hours(),
                       t.counts.cjk_chars, t.counts.latin_words, Ratio(t.counts));
  };
  for (const auto& [name, t] : s.topics) row(name.empty() ? "(none)" : name, t);
  row("**Total**", s.total);
  out += fmt::format("\nLongest utterance: {:.2f} s\n", s.max_duration);
  return out;
}

SplitResult Split(const std::vector<UtteranceRecord>& records, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw UsageError(fmt::format("split ratio must lie in (0, 1), got {}", ratio));
  }
  SplitResult result;
  result.seed = seed;
  result.ratio = ratio;

  std::map<std::string, std::vector<std::size_t>> by_topic;
  for (std::size_t i = 0; i < records.size(); ++i) by_topic[records[i].topic].push_back(i);

  std::vector<bool> in_train(records.size(), false);
  for (auto& [topic, indices] : by_topic) {
    auto rng = SeededEngine(seed, topic);
    Shuffle(indices, rng);
    const std::size_t n = indices.size();
    auto take = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
    if (n >= 2) take = std::clamp<std::size_t>(take, 1, n - 1);
    for (std::size_t k = 0; k < take; ++k) in_train[indices[k]] = true;
    result.topics[topic] = {n, take};
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    (in_train[i] ? result.train : result.test).push_back(records[i]);
  }
  return result;
}

nlohmann::json SplitMetaToJson(const SplitResult& s) {
  nlohmann::json topics = nlohmann::json::object();
  for (const auto& [name, t] : s.topics) {
    topics[name] = {{"utterances", t.total},
                    {"train", t.train},
                    {"test", t.total - t.train},
                    {"train_fraction", t.TrainFraction()}};
  }
  return {{"seed", s.seed},
          {"ratio", s.ratio},
          {"prng", "mt19937_64(seed_seq(seed, fnv1a64(topic))) + fisher-yates"},
          {"stratified_by", "topic"},
          {"train", s.train.size()},
          {"test", s.test.size()},
          {"topics", topics}};
}

}  // namespace mcetk::dataset
