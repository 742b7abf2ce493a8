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

#include "mcetk/cli/cli.h"

#include <algorithm>
#include <charconv>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "mcetk/bench/bench.h"
#include "mcetk/common/io.h"
#include "mcetk/dataset/dataset.h"
#include "mcetk/judge/judge.h"
#include "mcetk/madgf/madgf.h"
#include "mcetk/textnorm/textnorm.h"

namespace mcetk::cli {
namespace {

using nlohmann::json;

std::string PercentCell(const std::optional<double>& ratio) {
  return ratio ? fmt::format("{:.2f}", *ratio * 100.0) : std::string("n/a");
}

std::filesystem::path Resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

json LoadJsonFile(const std::filesystem::path& path) {
  try {
    return json::parse(ReadTextFile(path));
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

double JsonRational(const json& j, std::string_view what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return ParseRational(j.get<std::string>());
  throw ConfigError(fmt::format("{} must be a number or a fraction string", what));
}

void CheckKeys(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be a JSON object", where));
  for (const auto& [k, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ConfigError(fmt::format("{}: unknown key '{}'", where, k));
    }
  }
}

// ---------------------------------------------------------------------------
// Option groups shared by several subcommands.

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;  // empty: the command's default (json, or md for report)
};

struct NormFlags {
  bool keep_punctuation = false;
  bool keep_case = false;
  bool keep_width = false;
  std::string variant_table;

  void Add(CLI::App* app) {
    app->add_flag("--keep-punct", keep_punctuation, "Do not strip punctuation");
    app->add_flag("--keep-case", keep_case, "Do not lowercase Latin letters");
    app->add_flag("--keep-width", keep_width, "Do not fold fullwidth forms");
    app->add_option("--variant-table", variant_table, "TSV of source<TAB>target codepoint folds");
  }

  textnorm::NormConfig Build(const json& section, const std::filesystem::path& base) const {
    textnorm::NormConfig cfg;
    std::string table = variant_table;
    if (!section.is_null()) {
      CheckKeys(section, "norm", {"strip_punctuation", "lowercase_latin", "fold_width", "variant_table"});
      cfg.strip_punctuation = section.value("strip_punctuation", true);
      cfg.lowercase_latin = section.value("lowercase_latin", true);
      cfg.fold_width = section.value("fold_width", true);
      if (table.empty() && section.contains("variant_table")) {
        table = Resolve(base, section["variant_table"].get<std::string>()).string();
      }
    }
    if (keep_punctuation) cfg.strip_punctuation = false;
    if (keep_case) cfg.lowercase_latin = false;
    if (keep_width) cfg.fold_width = false;
    if (!table.empty()) {
      cfg.variant_table = std::make_shared<textnorm::VariantTable>(textnorm::VariantTable::Load(table));
    }
    return cfg;
  }
};

struct FalFlags {
  std::string alpha, beta, gamma;
  std::optional<double> max_latency;
  std::string mode;

  void Add(CLI::App* app) {
    app->add_option("--alpha", alpha, "Fidelity weight (e.g. 0.5 or 1/3)");
    app->add_option("--beta", beta, "Accuracy weight");
    app->add_option("--gamma", gamma, "Latency weight; 0 disables the latency term");
    app->add_option("--M", max_latency, "Max latency M in seconds (default: derived)");
    app->add_option("--mode", mode, "Latency mode: paper|corrected")
        ->check(CLI::IsMember({"paper", "corrected"}));
  }

  fal::FalConfig Build(const json& section) const {
    fal::FalConfig cfg;
    if (!section.is_null()) {
      CheckKeys(section, "fal", {"alpha", "beta", "gamma", "M", "mode"});
      if (section.contains("alpha")) cfg.weights.alpha = JsonRational(section["alpha"], "fal.alpha");
      if (section.contains("beta")) cfg.weights.beta = JsonRational(section["beta"], "fal.beta");
      if (section.contains("gamma")) cfg.weights.gamma = JsonRational(section["gamma"], "fal.gamma");
      if (section.contains("M")) cfg.max_latency = section["M"].get<double>();
      if (section.contains("mode")) cfg.mode = fal::ParseLatencyMode(section["mode"].get<std::string>());
    }
    if (!alpha.empty()) cfg.weights.alpha = ParseRational(alpha);
    if (!beta.empty()) cfg.weights.beta = ParseRational(beta);
    if (!gamma.empty()) cfg.weights.gamma = ParseRational(gamma);
    if (max_latency) cfg.max_latency = *max_latency;
    if (!mode.empty()) cfg.mode = fal::ParseLatencyMode(mode);
    cfg.weights.Validate();
    return cfg;
  }
};

struct JudgeFlags {
  std::string backend;
  std::string endpoint;
  std::string model;
  std::string api_key_env;
  std::string cache;
  std::optional<std::size_t> parallel;
  std::optional<int> retries;
  std::optional<int> jitter;

  void Add(CLI::App* app) {
    app->add_option("--backend", backend, "Judge backend: mock|http")
        ->check(CLI::IsMember({"mock", "http"}));
    app->add_option("--endpoint", endpoint, "Chat-completions URL for the http backend");
    app->add_option("--model", model, "Model name sent to the http backend");
    app->add_option("--api-key-env", api_key_env, "Environment variable holding the token");
    app->add_option("--cache", cache, "Verdict cache file (JSONL)");
    app->add_option("--parallel", parallel, "Concurrent judge requests");
    app->add_option("--retries", retries, "Retries per request on transport failure");
    app->add_option("--jitter", jitter, "Mock judge noise amplitude (default 0)");
  }
};

class Output {
 public:
  Output(const Globals& g, std::ostream& out) : path_(g.out), out_(out) {}
  void Emit(const std::string& content) const {
    if (path_.empty()) {
      out_ << content;
    } else {
      WriteTextFile(path_, content);
    }
  }

 private:
  std::string path_;
  std::ostream& out_;
};

struct Context {
  Globals g;
  json config = json::object();
  std::filesystem::path config_dir;
  std::ostream& out;
  std::ostream& err;

  json Section(const char* name) const {
    auto it = config.find(name);
    return it == config.end() ? json() : *it;
  }
  Output Emitter() const { return Output(g, out); }
  void RequireFormat(std::initializer_list<std::string_view> allowed, std::string_view cmd) const {
    if (!g.format.empty() && std::find(allowed.begin(), allowed.end(), g.format) == allowed.end()) {
      throw UsageError(fmt::format("{} does not support --format {}", cmd, g.format));
    }
  }
};

// ---------------------------------------------------------------------------
// tokenize

struct TokenizeArgs {
  std::vector<std::string> texts;
  std::string input;
  NormFlags norm;
};

void RunTokenize(const Context& ctx, const TokenizeArgs& a) {
  ctx.RequireFormat({"json", "csv"}, "tokenize");
  const auto cfg = a.norm.Build(ctx.Section("norm"), ctx.config_dir);
  std::vector<std::string> texts = a.texts;
  if (!a.input.empty()) {
    std::istringstream in(ReadTextFile(a.input));
    for (std::string line; std::getline(in, line);) texts.push_back(line);
  }
  if (texts.empty()) throw UsageError("tokenize: give --text or --in");

  std::string out;
  if (ctx.g.format == "csv") out = "text,normalized,cjk_chars,latin_words,digit_runs,tokens\n";
  std::vector<json> lines;
  for (const auto& text : texts) {
    const auto seq = textnorm::Tokenize(text, cfg);
    const auto counts = textnorm::CountStats(seq);
    if (ctx.g.format == "csv") {
      auto quote = [](std::string s) {
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
      };
      std::string toks;
      for (const auto& t : seq.tokens) toks += (toks.empty() ? "" : " ") + t.text;
      out += fmt::format("{},{},{},{},{},{}\n", quote(text), quote(seq.normalized), counts.cjk_chars,
                         counts.latin_words, counts.digit_runs, quote(toks));
      continue;
    }
    json tokens = json::array();
    for (const auto& t : seq.tokens) tokens.push_back({{"kind", textnorm::TokenKindName(t.kind)}, {"text", t.text}});
    lines.push_back({{"text", text},
                     {"normalized", seq.normalized},
                     {"tokens", tokens},
                     {"cjk_chars", counts.cjk_chars},
                     {"latin_words", counts.latin_words},
                     {"digit_runs", counts.digit_runs},
                     {"discarded", seq.discarded}});
  }
  ctx.Emitter().Emit(ctx.g.format == "csv" ? out : ToJsonLines(lines));
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string ref, hyp, ref_text, hyp_text;
  NormFlags norm;
};

std::vector<std::pair<std::string, std::string>> LoadTexts(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  for (const auto& line : ReadJsonLines(path)) {
    try {
      auto id = line.value.at("id").get<std::string>();
      auto text = line.value.at("text").get<std::string>();
      if (!seen.insert(id).second) {
        throw ValidationError(fmt::format("{}:{}: duplicate id '{}'", path, line.line, id));
      }
      out.emplace_back(std::move(id), std::move(text));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", path, line.line, e.what()));
    }
  }
  return out;
}

std::string CorpusMarkdown(const metrics::MetricReport& r) {
  std::string out = "| Metric | Rate % | S | I | D | N | Scored | Skipped |\n|---|---:|---:|---:|---:|---:|---:|---:|\n";
  for (auto m : metrics::kAllMetrics) {
    const auto& c = r.corpus(m);
    std::string name(metrics::MetricName(m));
    std::transform(name.begin(), name.end(), name.begin(), ::toupper);
    out += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} |\n", name, PercentCell(c.Rate()),
                       c.pooled.substitutions, c.pooled.insertions, c.pooled.deletions,
                       c.pooled.ref_length, c.scored, c.skipped);
  }
  return out;
}

void RunEval(const Context& ctx, const EvalArgs& a) {
  const auto cfg = a.norm.Build(ctx.Section("norm"), ctx.config_dir);
  std::vector<metrics::UtteranceEntry> entries;
  if (!a.ref_text.empty() || !a.hyp_text.empty()) {
    if (!a.ref.empty() || !a.hyp.empty()) throw UsageError("eval: use either files or --ref-text/--hyp-text");
    entries.push_back(metrics::EvaluatePair(a.ref_text, a.hyp_text, cfg, "utt"));
  } else {
    if (a.ref.empty() || a.hyp.empty()) throw UsageError("eval: --ref and --hyp are required");
    const auto refs = LoadTexts(a.ref);
    const auto hyps = LoadTexts(a.hyp);
    std::map<std::string, std::string> hyp_by_id(hyps.begin(), hyps.end());
    std::vector<std::string> missing;
    for (const auto& [id, text] : refs) {
      auto it = hyp_by_id.find(id);
      if (it == hyp_by_id.end()) {
        missing.push_back(id);
        continue;
      }
      entries.push_back(metrics::EvaluatePair(text, it->second, cfg, id));
      hyp_by_id.erase(it);
    }
    if (!missing.empty()) {
      throw ValidationError(fmt::format("eval: {} reference id(s) have no hypothesis, first '{}'",
                                        missing.size(), missing.front()));
    }
    if (!hyp_by_id.empty()) {
      throw ValidationError(fmt::format("eval: {} hypothesis id(s) have no reference, first '{}'",
                                        hyp_by_id.size(), hyp_by_id.begin()->first));
    }
  }
  const auto report = metrics::AggregateCorpus(std::move(entries));
  if (ctx.g.format == "csv") {
    ctx.Emitter().Emit(metrics::ReportToCsv(report));
  } else if (ctx.g.format == "md") {
    ctx.Emitter().Emit(CorpusMarkdown(report));
  } else {
    ctx.Emitter().Emit(ToPrettyJson(metrics::ReportToJson(report)));
  }
}

// ---------------------------------------------------------------------------
// fal / report

struct FalArgs {
  std::string systems;
  std::optional<double> fidelity;
  std::optional<std::size_t> s, i, d, n;
  std::optional<double> latency;
  std::string id = "system";
  std::string basis = "mer";
  FalFlags fal;
};

metrics::Metric ParseMetric(std::string_view name) {
  for (auto m : metrics::kAllMetrics) {
    if (metrics::MetricName(m) == name) return m;
  }
  throw UsageError(fmt::format("unknown metric '{}' (expected mer|cer|wer)", name));
}

json SingleSystem(const FalArgs& a) {
  if (!a.fidelity || !a.s || !a.i || !a.d || !a.n) {
    throw UsageError("fal: give --systems FILE, or --F with --S --I --D --N (and --L)");
  }
  json counts = {{"S", *a.s}, {"I", *a.i}, {"D", *a.d}, {"N", *a.n}};
  json sys = {{"id", a.id}, {"F", *a.fidelity}, {"counts", {{a.basis, counts}}}};
  if (a.latency) sys["L"] = *a.latency;
  return {{"systems", json::array({sys})}};
}

ReportTable TableFromArgs(const Context& ctx, const FalArgs& a) {
  const auto cfg = a.fal.Build(ctx.Section("fal"));
  const auto basis = ParseMetric(a.basis);
  if (!a.systems.empty()) {
    const std::filesystem::path path(a.systems);
    return BuildReport(LoadJsonFile(path), path.parent_path(), cfg, basis);
  }
  return BuildReport(SingleSystem(a), {}, cfg, basis);
}

void RunFal(const Context& ctx, const FalArgs& a) {
  ctx.RequireFormat({"json", "csv", "md"}, "fal");
  const auto table = TableFromArgs(ctx, a);
  if (ctx.g.format == "md") {
    ctx.Emitter().Emit(ReportToMarkdown(table));
  } else if (ctx.g.format == "csv") {
    ctx.Emitter().Emit(ReportToCsv(table));
  } else {
    ctx.Emitter().Emit(ToPrettyJson(ReportToJson(table)));
  }
}

void RunReport(const Context& ctx, const FalArgs& a) {
  if (a.systems.empty()) throw UsageError("report: --systems is required");
  const auto table = TableFromArgs(ctx, a);
  if (ctx.g.format == "json") {
    ctx.Emitter().Emit(ToPrettyJson(ReportToJson(table)));
  } else if (ctx.g.format == "csv") {
    ctx.Emitter().Emit(ReportToCsv(table));
  } else {
    ctx.Emitter().Emit(ReportToMarkdown(table));
  }
}

// ---------------------------------------------------------------------------
// judge

struct JudgeArgs {
  std::string task = "fidelity";
  std::string ref_text, hyp_text;
  std::string pairs;
  std::string conversations;
  JudgeFlags flags;
};

judge::JudgeClient MakeJudgeClient(const Context& ctx, const JudgeFlags& f) {
  const json section = ctx.Section("judge");
  if (!section.is_null()) {
    CheckKeys(section, "judge",
              {"kind", "endpoint", "model", "api_key_env", "timeout_ms", "seed", "jitter", "cache",
               "parallelism", "max_retries", "initial_backoff_ms"});
  }
  auto get = [&](const char* key, auto fallback) {
    return section.is_null() ? fallback : section.value(key, fallback);
  };
  const std::string kind = f.backend.empty() ? get("kind", std::string("mock")) : f.backend;
  std::shared_ptr<judge::ChatBackend> backend;
  if (kind == "http") {
    judge::HttpBackendConfig hc;
    hc.endpoint = f.endpoint.empty() ? get("endpoint", std::string()) : f.endpoint;
    hc.model = f.model.empty() ? get("model", hc.model) : f.model;
    hc.api_key_env = f.api_key_env.empty() ? get("api_key_env", hc.api_key_env) : f.api_key_env;
    hc.timeout = std::chrono::milliseconds(get("timeout_ms", static_cast<int>(hc.timeout.count())));
    backend = std::make_shared<judge::HttpChatBackend>(hc);
  } else if (kind == "mock") {
    const std::uint64_t seed = ctx.g.seed ? *ctx.g.seed : get("seed", std::uint64_t{0});
    backend = std::make_shared<judge::MockJudgeBackend>(seed, f.jitter ? *f.jitter : get("jitter", 0));
  } else {
    throw ConfigError(fmt::format("judge.kind must be mock|http, got '{}'", kind));
  }
  std::string cache_path = f.cache;
  if (cache_path.empty() && !section.is_null() && section.contains("cache")) {
    cache_path = Resolve(ctx.config_dir, section["cache"].get<std::string>()).string();
  }
  auto cache = cache_path.empty() ? std::make_shared<judge::JudgeCache>()
                                  : std::make_shared<judge::JudgeCache>(cache_path);
  judge::RetryPolicy retry;
  retry.max_retries = f.retries ? *f.retries : get("max_retries", retry.max_retries);
  retry.initial_backoff = std::chrono::milliseconds(
      get("initial_backoff_ms", static_cast<int>(retry.initial_backoff.count())));
  const std::size_t parallel = f.parallel ? *f.parallel : get("parallelism", std::size_t{1});
  return judge::JudgeClient(backend, cache, retry, std::max<std::size_t>(1, parallel));
}

bool IsBlank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

void RunJudge(const Context& ctx, const JudgeArgs& a) {
  ctx.RequireFormat({"json"}, "judge");
  const judge::Task task = judge::ParseTask(a.task);
  struct Item {
    std::string id;
    judge::JudgeRequest req;
    bool empty_hypothesis = false;
  };
  std::vector<Item> items;
  if (task == judge::Task::kFidelity) {
    if (!a.pairs.empty()) {
      for (const auto& line : ReadJsonLines(a.pairs)) {
        try {
          Item it;
          it.id = line.value.at("id").get<std::string>();
          it.req.reference_text = line.value.at("ref").get<std::string>();
          it.req.hypothesis_text = line.value.at("hyp").get<std::string>();
          items.push_back(std::move(it));
        } catch (const json::exception& e) {
          throw ParseError(fmt::format("{}:{}: {}", a.pairs, line.line, e.what()));
        }
      }
    } else {
      if (a.ref_text.empty()) throw UsageError("judge: give --pairs FILE or --ref-text/--hyp-text");
      Item it;
      it.id = "utt";
      it.req.reference_text = a.ref_text;
      it.req.hypothesis_text = a.hyp_text;
      items.push_back(std::move(it));
    }
    for (auto& it : items) {
      it.req.task = task;
      if (IsBlank(it.req.reference_text)) {
        throw UsageError(fmt::format("judge: empty reference text for '{}'", it.id));
      }
      it.empty_hypothesis = IsBlank(it.req.hypothesis_text);
    }
  } else {
    if (a.conversations.empty()) throw UsageError("judge: conversation_quality needs --conversations FILE");
    for (const auto& line : ReadJsonLines(a.conversations)) {
      try {
        Item it;
        it.id = line.value.value("id", fmt::format("conv-{}", line.line));
        it.req.task = task;
        for (const auto& t : line.value.at("turns")) {
          it.req.turns.push_back({t.at("speaker").get<int>(), t.at("text").get<std::string>()});
        }
        it.req.keywords = line.value.value("keywords", std::vector<std::string>{});
        items.push_back(std::move(it));
      } catch (const json::exception& e) {
        throw ParseError(fmt::format("{}:{}: {}", a.conversations, line.line, e.what()));
      }
    }
  }
  if (items.empty()) throw UsageError("judge: no items to score");

  auto client = MakeJudgeClient(ctx, a.flags);
  std::vector<judge::JudgeRequest> reqs;
  std::vector<std::size_t> slot;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].empty_hypothesis) continue;
    reqs.push_back(items[i].req);
    slot.push_back(i);
  }
  std::vector<judge::JudgeClient::Outcome> outcomes(items.size());
  const auto asked = client.RequestScores(reqs);
  for (std::size_t k = 0; k < slot.size(); ++k) outcomes[slot[k]] = asked[k];

  json verdicts = json::array();
  double sum = 0.0;
  std::size_t scored = 0;
  std::size_t failed = 0;
  std::string first_error;
  for (std::size_t i = 0; i < items.size(); ++i) {
    json v = {{"id", items[i].id}};
    if (items[i].empty_hypothesis) {
      // Nothing was transcribed, so nothing of the source is preserved.
      v["score"] = 0;
      v["cache_hit"] = false;
      v["note"] = "empty hypothesis scored 0 without a judge call";
      sum += 0.0;
      ++scored;
    } else if (outcomes[i].verdict) {
      const auto& verdict = *outcomes[i].verdict;
      v.update(judge::VerdictToJson(verdict));
      v["cache_hit"] = verdict.cache_hit;
      sum += verdict.score;
      ++scored;
    } else {
      v["error"] = outcomes[i].error;
      if (failed++ == 0) first_error = outcomes[i].error;
    }
    verdicts.push_back(std::move(v));
  }
  if (scored == 0) throw BackendError(fmt::format("judge: every request failed: {}", first_error));
  json out = {{"task", judge::TaskName(task)},
              {"judge", client.backend().Name()},
              {"prompt_template", judge::PromptTemplateHash()},
              {"scored", scored},
              {"failed", failed},
              {"verdicts", verdicts}};
  if (task == judge::Task::kFidelity) {
    out["fidelity_basis"] = "reference transcript as a stand-in for the source audio";
    out["mean_F"] = sum / static_cast<double>(scored);
  } else {
    out["mean_score"] = sum / static_cast<double>(scored);
  }
  if (failed > 0) ctx.err << fmt::format("mcetk: warning: {} judge request(s) failed\n", failed);
  ctx.Emitter().Emit(ToPrettyJson(out));
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string manifest;
  std::string cmd;
  std::string system = "system";
  std::string audio_root;
  bool capture = false;
  std::string hyp_dir;
  std::size_t parallel = 1;
  std::vector<std::string> summarize;
};

void RunBench(const Context& ctx, const BenchArgs& a) {
  ctx.RequireFormat({"json"}, "bench");
  if (!a.summarize.empty()) {
    std::vector<bench::LatencyRecord> all;
    for (const auto& f : a.summarize) {
      auto recs = bench::LoadLatencies(f);
      all.insert(all.end(), recs.begin(), recs.end());
    }
    ctx.Emitter().Emit(ToPrettyJson(bench::SummaryToJson(bench::Summarize(all))));
    return;
  }
  if (a.manifest.empty() || a.cmd.empty()) {
    throw UsageError("bench: --manifest and --cmd are required (or --summarize FILES)");
  }
  if (a.parallel > 1) {
    ctx.err << "mcetk: warning: --parallel > 1 overlaps runs; latencies are not comparable\n";
  }
  const auto entries = dataset::LoadManifest(a.manifest);
  bench::RunOptions opts;
  opts.system = a.system;
  opts.audio_root = a.audio_root.empty()
                        ? std::filesystem::path(a.manifest).parent_path()
                        : std::filesystem::path(a.audio_root);
  opts.capture_stdout = a.capture || !a.hyp_dir.empty();
  opts.hypothesis_dir = a.hyp_dir;
  const auto records = bench::RunAll(a.cmd, entries, opts, a.parallel);
  ctx.Emitter().Emit(bench::RecordsToJsonl(records));
}

// ---------------------------------------------------------------------------
// dataset

struct DatasetArgs {
  std::string manifest;
  std::string topics;
  double ratio = 0.9;
  NormFlags norm;
};

std::vector<std::string> LoadTopicList(const std::string& path) {
  std::vector<std::string> topics;
  std::istringstream in(ReadTextFile(path));
  for (std::string line; std::getline(in, line);) {
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    topics.push_back(line.substr(b, line.find_last_not_of(" \t") - b + 1));
  }
  return topics;
}

void RunDatasetValidate(const Context& ctx, const DatasetArgs& a) {
  ctx.RequireFormat({"json"}, "dataset validate");
  const auto records = dataset::LoadManifest(a.manifest);
  std::vector<std::string> topics;
  if (!a.topics.empty()) topics = LoadTopicList(a.topics);
  const auto issues = dataset::Validate(records, a.topics.empty() ? nullptr : &topics);
  json arr = json::array();
  for (const auto& i : issues) arr.push_back({{"line", i.line}, {"id", i.id}, {"message", i.message}});
  ctx.Emitter().Emit(ToPrettyJson({{"records", records.size()}, {"issues", arr}}));
  if (!issues.empty()) {
    throw ValidationError(fmt::format("{}: {} issue(s), first at line {}: {}", a.manifest,
                                      issues.size(), issues.front().line, issues.front().message));
  }
}

void RunDatasetStats(const Context& ctx, const DatasetArgs& a) {
  ctx.RequireFormat({"json", "md"}, "dataset stats");
  const auto cfg = a.norm.Build(ctx.Section("norm"), ctx.config_dir);
  const auto stats = dataset::ComputeStats(dataset::LoadManifest(a.manifest), cfg);
  ctx.Emitter().Emit(ctx.g.format == "md" ? dataset::StatsToMarkdown(stats)
                                          : ToPrettyJson(dataset::StatsToJson(stats)));
}

void RunDatasetSplit(const Context& ctx, const DatasetArgs& a) {
  if (ctx.g.out.empty()) throw UsageError("dataset split: --out DIR is required");
  const auto split = dataset::Split(dataset::LoadManifest(a.manifest), a.ratio,
                                    ctx.g.seed.value_or(0));
  const std::filesystem::path dir(ctx.g.out);
  WriteTextFile(dir / "train.jsonl", dataset::ManifestToJsonl(split.train));
  WriteTextFile(dir / "test.jsonl", dataset::ManifestToJsonl(split.test));
  WriteTextFile(dir / "split_meta.json", ToPrettyJson(dataset::SplitMetaToJson(split)));
}

// ---------------------------------------------------------------------------
// generate

void RunGenerate(const Context& ctx) {
  ctx.RequireFormat({"json"}, "generate");
  if (ctx.g.config.empty()) throw UsageError("generate: --config PIPELINE.json is required");
  auto cfg = madgf::LoadPipelineConfig(ctx.g.config);
  if (ctx.g.seed) cfg.seed = *ctx.g.seed;
  if (!ctx.g.out.empty()) cfg.output_dir = ctx.g.out;
  if (cfg.output_dir.empty()) throw UsageError("generate: set output_dir in the config or pass --out");
  const auto result = madgf::RunPipeline(cfg);

  json rounds = json::array();
  for (const auto& r : result.rounds) {
    const auto mean = r.MeanScore();
    rounds.push_back({{"round", r.round},
                      {"accepted", r.generated.conversations.size()},
                      {"rejected", r.generated.rejected.size()},
                      {"scored", r.scores.scored.size()},
                      {"failed", r.scores.failed.size()},
                      {"mean_score", mean ? json(*mean) : json(nullptr)}});
    if (!r.error.empty()) ctx.err << "mcetk: warning: " << r.error << "\n";
  }
  json topics = json::array();
  for (const auto& t : result.topics.topics) topics.push_back(t.label);
  // Summary goes to stdout; --out names the run directory here.
  ctx.out << ToPrettyJson({{"output_dir", cfg.output_dir.generic_string()},
                           {"documents", result.documents.documents.size()},
                           {"topics", topics},
                           {"rounds", rounds}});
}

std::string OneLineMessage(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

int ExitCodeFor(ErrorKind kind) {
  return kind == ErrorKind::kIo || kind == ErrorKind::kBackend ? 2 : 1;
}

double ParseRational(std::string_view text) {
  auto parse = [&](std::string_view part) {
    double v = 0.0;
    const auto* end = part.data() + part.size();
    auto [ptr, ec] = std::from_chars(part.data(), end, v);
    if (ec != std::errc() || ptr != end || part.empty()) {
      throw UsageError(fmt::format("'{}' is not a number or fraction", text));
    }
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse(text);
  const double den = parse(text.substr(slash + 1));
  if (den == 0.0) throw UsageError(fmt::format("'{}' divides by zero", text));
  return parse(text.substr(0, slash)) / den;
}

ReportTable BuildReport(const json& spec, const std::filesystem::path& base_dir, fal::FalConfig cfg,
                        metrics::Metric basis) {
  cfg.weights.Validate();
  if (!spec.is_object() || !spec.contains("systems") || !spec["systems"].is_array() ||
      spec["systems"].empty()) {
    throw ValidationError("systems file needs a non-empty \"systems\" array");
  }
  ReportTable table;
  table.basis = basis;

  struct Pending {
    ReportRow row;
    std::map<metrics::Metric, metrics::EditCounts> counts;
  };
  std::vector<Pending> pending;
  double max_latency = 0.0;
  std::set<std::string> ids;
  try {
    for (const auto& s : spec["systems"]) {
      CheckKeys(s, "systems[]", {"id", "F", "fidelity", "counts", "report", "L", "latencies"});
      Pending p;
      p.row.id = s.at("id").get<std::string>();
      if (!ids.insert(p.row.id).second) throw ValidationError(fmt::format("duplicate system id '{}'", p.row.id));

      if (s.contains("F")) {
        p.row.fidelity = s["F"].get<double>();
      } else if (s.contains("fidelity")) {
        const json j = LoadJsonFile(Resolve(base_dir, s["fidelity"].get<std::string>()));
        p.row.fidelity = j.at("mean_F").get<double>();
      } else {
        throw ValidationError(fmt::format("system '{}' needs F or fidelity", p.row.id));
      }

      if (s.contains("counts")) {
        for (const auto& [name, c] : s["counts"].items()) p.counts[ParseMetric(name)] = metrics::CountsFromJson(c);
      } else if (s.contains("report")) {
        const auto report = metrics::ReportFromJson(LoadJsonFile(Resolve(base_dir, s["report"].get<std::string>())));
        for (auto m : metrics::kAllMetrics) p.counts[m] = report.corpus(m).pooled;
      } else {
        throw ValidationError(fmt::format("system '{}' needs counts or report", p.row.id));
      }

      if (s.contains("L")) {
        p.row.latency = s["L"].get<double>();
        if (!(*p.row.latency > 0.0)) throw ValidationError(fmt::format("system '{}': L must be > 0", p.row.id));
        max_latency = std::max(max_latency, *p.row.latency);
      } else if (s.contains("latencies")) {
        const auto recs = bench::LoadLatencies(Resolve(base_dir, s["latencies"].get<std::string>()));
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : recs) {
          if (!r.ok) continue;
          sum += r.latency_s;
          ++n;
          max_latency = std::max(max_latency, r.latency_s);
        }
        if (n == 0) throw UsageError(fmt::format("system '{}': no successful latency records", p.row.id));
        p.row.latency = sum / static_cast<double>(n);
      }
      pending.push_back(std::move(p));
    }
    if (!(cfg.max_latency > 0.0) && spec.contains("M")) cfg.max_latency = spec["M"].get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("systems file: ") + e.what());
  }
  if (!(cfg.max_latency > 0.0)) cfg.max_latency = max_latency;

  for (auto& p : pending) {
    auto rate = [&](metrics::Metric m) -> std::optional<double> {
      auto it = p.counts.find(m);
      return it == p.counts.end() ? std::nullopt : it->second.Rate();
    };
    p.row.mer = rate(metrics::Metric::kMer);
    p.row.cer = rate(metrics::Metric::kCer);
    p.row.wer = rate(metrics::Metric::kWer);
    auto it = p.counts.find(basis);
    if (it == p.counts.end()) {
      throw ValidationError(fmt::format("system '{}' has no {} counts", p.row.id, metrics::MetricName(basis)));
    }
    p.row.basis_counts = it->second;
    if (cfg.LatencyEnabled() && !p.row.latency) {
      throw ValidationError(fmt::format("system '{}' has no latency; set gamma=0 to ignore latency", p.row.id));
    }
    fal::FidelityScore f;
    f.value = p.row.fidelity;
    p.row.fal = fal::ComputeFal(f, p.row.basis_counts, p.row.latency.value_or(1.0), cfg);
    table.rows.push_back(std::move(p.row));
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return a.fal.total != b.fal.total ? a.fal.total > b.fal.total : a.id < b.id;
  });
  table.config = cfg;
  return table;
}

std::string ReportToMarkdown(const ReportTable& t) {
  std::string out = "| Model | MER% | CER% | WER% | FAL |\n|---|---:|---:|---:|---:|\n";
  for (const auto& r : t.rows) {
    out += fmt::format("| {} | {} | {} | {} | {:.2f} |\n", r.id, PercentCell(r.mer),
                       PercentCell(r.cer), PercentCell(r.wer), r.fal.total);
  }
  std::string basis(metrics::MetricName(t.basis));
  std::transform(basis.begin(), basis.end(), basis.begin(), ::toupper);
  const auto& w = t.config.weights;
  out += fmt::format(
      "\nFAL weights: alpha={:.4f}, beta={:.4f}, gamma={:.4f}; accuracy basis: {}; ", w.alpha,
      w.beta, w.gamma, basis);
  if (t.config.LatencyEnabled()) {
    out += fmt::format("latency mode: {}; M = {:.2f} s.\n", fal::LatencyModeName(t.config.mode),
                       t.config.max_latency);
  } else {
    out += "latency term disabled.\n";
  }
  out += "Fidelity is judged against the reference transcript as a stand-in for the audio.\n";
  return out;
}

std::string ReportToCsv(const ReportTable& t) {
  auto cell = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.6f}", *v) : std::string();
  };
  std::string out = "model,mer,cer,wer,F,L,fidelity_term,accuracy_term,latency_term,fal\n";
  for (const auto& r : t.rows) {
    out += fmt::format("{},{},{},{},{:.6f},{},{:.6f},{:.6f},{},{:.6f}\n", r.id, cell(r.mer),
                       cell(r.cer), cell(r.wer), r.fidelity, cell(r.latency), r.fal.fidelity_term,
                       r.fal.accuracy_term, cell(r.fal.latency_term), r.fal.total);
  }
  return out;
}

json ReportToJson(const ReportTable& t) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json systems = json::array();
  for (const auto& r : t.rows) {
    systems.push_back({{"id", r.id},
                       {"F", r.fidelity},
                       {"counts", metrics::CountsToJson(r.basis_counts)},
                       {"L", opt(r.latency)},
                       {"rates", {{"mer", opt(r.mer)}, {"cer", opt(r.cer)}, {"wer", opt(r.wer)}}},
                       {"terms", fal::TermsToJson(r.fal)},
                       {"total", r.fal.total}});
  }
  return {{"mode", fal::LatencyModeName(t.config.mode)},
          {"weights", fal::WeightsToJson(t.config.weights)},
          {"M", t.config.LatencyEnabled() ? json(t.config.max_latency) : json(nullptr)},
          {"basis", metrics::MetricName(t.basis)},
          {"fidelity_basis", "reference transcript as a stand-in for the source audio"},
          {"systems", systems}};
}

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"mcetk: evaluation and data-generation toolkit for code-switched Cantonese/English ASR",
               "mcetk"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON config (toolkit sections, or a pipeline for generate)");
  app.add_option("--seed", g.seed, "Seed for seeded operations");
  app.add_option("--out", g.out, "Output file (directory for split/generate)");
  app.add_option("--format", g.format, "Output format (default json; md for report)")->check(CLI::IsMember({"json", "csv", "md"}));

  TokenizeArgs tok;
  auto* tokenize = app.add_subcommand("tokenize", "Normalize and tokenize mixed-script text");
  tokenize->add_option("--text", tok.texts, "Text to tokenize (repeatable)");
  tokenize->add_option("--in", tok.input, "File with one text per line");
  tok.norm.Add(tokenize);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "MER/CER/WER of hypotheses against references");
  eval->add_option("--ref", ev.ref, "Reference JSONL {id, text}");
  eval->add_option("--hyp", ev.hyp, "Hypothesis JSONL {id, text}");
  eval->add_option("--ref-text", ev.ref_text, "Single reference string");
  eval->add_option("--hyp-text", ev.hyp_text, "Single hypothesis string");
  ev.norm.Add(eval);

  FalArgs fa;
  auto* falc = app.add_subcommand("fal", "FAL composite score");
  falc->add_option("--systems", fa.systems, "Systems JSON file");
  falc->add_option("--F", fa.fidelity, "Fidelity score in [0, 100]");
  falc->add_option("--S", fa.s, "Substitutions");
  falc->add_option("--I", fa.i, "Insertions");
  falc->add_option("--D", fa.d, "Deletions");
  falc->add_option("--N", fa.n, "Reference length");
  falc->add_option("--L", fa.latency, "Latency in seconds");
  falc->add_option("--id", fa.id, "System name for single-system input");
  falc->add_option("--basis", fa.basis, "Accuracy basis: mer|cer|wer")
      ->check(CLI::IsMember({"mer", "cer", "wer"}));
  fa.fal.Add(falc);

  FalArgs ra;
  ra.basis = "mer";
  auto* report = app.add_subcommand("report", "System comparison table (MER%, CER%, WER%, FAL)");
  report->add_option("--systems", ra.systems, "Systems JSON file")->required();
  report->add_option("--basis", ra.basis, "Accuracy basis for FAL: mer|cer|wer")
      ->check(CLI::IsMember({"mer", "cer", "wer"}));
  ra.fal.Add(report);

  JudgeArgs ja;
  auto* judgec = app.add_subcommand("judge", "LLM-as-judge scoring");
  judgec->add_option("--task", ja.task, "fidelity|conversation_quality")
      ->check(CLI::IsMember({"fidelity", "conversation_quality"}));
  judgec->add_option("--ref-text", ja.ref_text, "Reference transcript");
  judgec->add_option("--hyp-text", ja.hyp_text, "Hypothesis transcript");
  judgec->add_option("--pairs", ja.pairs, "JSONL {id, ref, hyp}");
  judgec->add_option("--conversations", ja.conversations, "JSONL {id, turns, keywords}");
  ja.flags.Add(judgec);

  BenchArgs ba;
  auto* benchc = app.add_subcommand("bench", "Time an external ASR command per utterance");
  benchc->add_option("--manifest", ba.manifest, "Dataset manifest JSONL");
  benchc->add_option("--cmd", ba.cmd, "Command template; {audio} and {id} are substituted");
  benchc->add_option("--system", ba.system, "System name recorded with each latency");
  benchc->add_option("--audio-root", ba.audio_root, "Base directory for relative audio paths");
  benchc->add_flag("--capture", ba.capture, "Record stdout as the hypothesis");
  benchc->add_option("--hyp-dir", ba.hyp_dir, "Write captured hypotheses to DIR/<id>.txt");
  benchc->add_option("--parallel", ba.parallel, "Concurrent runs (skews latencies)");
  benchc->add_option("--summarize", ba.summarize, "Summarize latency JSONL files instead of running");

  DatasetArgs da;
  auto* datasetc = app.add_subcommand("dataset", "Manifest validation, statistics and splitting");
  datasetc->require_subcommand(1);
  auto* validate = datasetc->add_subcommand("validate", "Check manifest invariants");
  validate->add_option("--manifest", da.manifest, "Manifest JSONL")->required();
  validate->add_option("--topics", da.topics, "Allowed topic names, one per line");
  auto* stats = datasetc->add_subcommand("stats", "Per-topic hours and script counts");
  stats->add_option("--manifest", da.manifest, "Manifest JSONL")->required();
  da.norm.Add(stats);
  auto* split = datasetc->add_subcommand("split", "Topic-stratified seeded train/test split");
  split->add_option("--manifest", da.manifest, "Manifest JSONL")->required();
  split->add_option("--ratio", da.ratio, "Train fraction in (0, 1)");

  auto* generate = app.add_subcommand("generate", "Run the multi-agent generation pipeline");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "mcetk: error[usage]: " << OneLineMessage(e.what()) << "\n";
    CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    out << failing->help();
    return 1;
  }

  try {
    Context ctx{g, json::object(), {}, out, err};
    if (!g.config.empty() && !generate->parsed()) {
      ctx.config = LoadJsonFile(g.config);
      CheckKeys(ctx.config, "config", {"norm", "fal", "judge"});
      ctx.config_dir = std::filesystem::path(g.config).parent_path();
    }
    if (tokenize->parsed()) RunTokenize(ctx, tok);
    else if (eval->parsed()) RunEval(ctx, ev);
    else if (falc->parsed()) RunFal(ctx, fa);
    else if (report->parsed()) RunReport(ctx, ra);
    else if (judgec->parsed()) RunJudge(ctx, ja);
    else if (benchc->parsed()) RunBench(ctx, ba);
    else if (validate->parsed()) RunDatasetValidate(ctx, da);
    else if (stats->parsed()) RunDatasetStats(ctx, da);
    else if (split->parsed()) RunDatasetSplit(ctx, da);
    else if (generate->parsed()) RunGenerate(ctx);
    return 0;
  } catch (const Error& e) {
    err << fmt::format("mcetk: error[{}]: {}\n", ErrorKindName(e.kind()), OneLineMessage(e.what()));
    return ExitCodeFor(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << fmt::format("mcetk: error[io]: {}\n", OneLineMessage(e.what()));
    return 2;
  }
}

}  // namespace mcetk::cli
