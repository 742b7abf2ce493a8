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

// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "edit_oracle.h"
#include "manifest_gen.h"
#include "mcetk/bench/bench.h"
#include "mcetk/cli/cli.h"
#include "mcetk/common/io.h"
#include "mcetk/common/random.h"
#include "mcetk/dataset/dataset.h"
#include "mcetk/fal/fal.h"
#include "mcetk/judge/judge.h"
#include "mcetk/madgf/madgf.h"
#include "mcetk/metrics/metrics.h"
#include "test_support.h"

namespace mcetk::acceptance {
namespace {

using nlohmann::json;
using Tokens = std::vector<std::string>;

// Thrown by Check() to fail a criterion with a reason.
struct Violation {
  std::string message;
};

void Check(bool ok, const std::string& message) {
  if (!ok) throw Violation{message};
}

metrics::EditCounts Counts(std::size_t s, std::size_t i, std::size_t d, std::size_t n) {
  metrics::EditCounts c;
  c.substitutions = s;
  c.insertions = i;
  c.deletions = d;
  c.ref_length = n;
  c.correct = n - s - d;
  return c;
}

metrics::EditCounts FromOracle(const oracle::OracleCounts& o) {
  return Counts(o.substitutions, o.insertions, o.deletions, o.ref_length);
}

std::string Show(const metrics::EditCounts& c) {
  return fmt::format("S{} I{} D{} N{}", c.substitutions, c.insertions, c.deletions, c.ref_length);
}

std::string Show(const Tokens& t) {
  std::string s;
  for (const auto& x : t) s += x;
  return s.empty() ? "<empty>" : s;
}

// 1. align() against brute-force search.
std::string AlignmentOracle() {
  const auto start = std::chrono::steady_clock::now();
  const Tokens alphabet{"a", "b", "c"};
  std::vector<Tokens> all{{}};
  for (std::size_t len = 1, begin = 0; len <= 4; ++len) {
    const std::size_t end = all.size();
    for (std::size_t k = begin; k < end; ++k) {
      for (const auto& s : alphabet) {
        auto next = all[k];
        next.push_back(s);
        all.push_back(std::move(next));
      }
    }
    begin = end;
  }
  std::size_t pairs = 0;
  for (const auto& r : all) {
    for (const auto& h : all) {
      const auto got = metrics::Align(r, h).counts;
      const auto want = FromOracle(oracle::SearchEditScript(r, h));
      Check(got == want, fmt::format("{} vs {}: align {} oracle {}", Show(r), Show(h), Show(got), Show(want)));
      ++pairs;
    }
  }
  auto rng = SeededEngine(20240, "align-oracle");
  for (int trial = 0; trial < 10000; ++trial) {
    Tokens r(UniformBelow(rng, 9)), h(UniformBelow(rng, 9));
    for (auto& t : r) t = alphabet[UniformBelow(rng, 3)];
    for (auto& t : h) t = alphabet[UniformBelow(rng, 3)];
    const auto got = metrics::Align(r, h).counts;
    const auto want = FromOracle(oracle::SearchEditScript(r, h));
    Check(got == want, fmt::format("random {} vs {}: align {} oracle {}", Show(r), Show(h), Show(got), Show(want)));
    ++pairs;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Check(secs < 30.0, fmt::format("took {:.1f} s", secs));
  return fmt::format("{} exhaustive + 10000 random pairs, 0 mismatches, {:.2f} s", all.size() * all.size(), secs);
}

// 2. Transcript fixtures against frozen values and the memoized oracle.
std::string MetricFixtures() {
  const textnorm::NormConfig cfg;
  std::size_t checked = 0;
  for (const char* file : {"metric_pairs.jsonl", "corpus_pairs.jsonl"}) {
    for (const auto& line : ReadJsonLines(testing::FixtureDir() / file)) {
      const auto& rec = line.value;
      const std::string id = rec.at("id"), ref = rec.at("ref"), hyp = rec.at("hyp");
      const auto e = metrics::EvaluatePair(ref, hyp, cfg, id);
      const std::pair<metrics::Metric, Tokens (*)(std::string_view, const textnorm::NormConfig&)> bases[] = {
          {metrics::Metric::kMer, metrics::MixedUnits},
          {metrics::Metric::kCer, metrics::CharUnits},
          {metrics::Metric::kWer, metrics::WordUnits}};
      for (const auto& [m, units] : bases) {
        const auto& x = rec.at("expected").at(std::string(metrics::MetricName(m)));
        const auto frozen = Counts(x.at("S"), x.at("I"), x.at("D"), x.at("N"));
        const auto ru = units(ref, cfg), hu = units(hyp, cfg);
        // The exponential search is only affordable on short inputs.
        const auto oracle = ru.size() + hu.size() <= 16 ? oracle::SearchEditScript(ru, hu)
                                                        : oracle::MemoEditScript(ru, hu);
        Check(e.counts(m) == frozen, fmt::format("{} {}: {} vs frozen {}", id, metrics::MetricName(m),
                                                 Show(e.counts(m)), Show(frozen)));
        Check(e.counts(m) == FromOracle(oracle), fmt::format("{} {}: oracle disagrees", id, metrics::MetricName(m)));
        ++checked;
      }
    }
  }
  const auto hold = metrics::EvaluatePair("Hold住", "侯住", cfg);
  Check(*hold.rate(metrics::Metric::kMer) == 0.5, "Hold住/侯住 MER != 0.5");
  return fmt::format("{} (pair, metric) checks exact; Hold住/侯住 MER = 0.5", checked);
}

// 3. FAL point checks and monotonicity.
std::string FalProperties() {
  auto cfg_for = [](fal::LatencyMode mode) {
    fal::FalConfig cfg;
    cfg.max_latency = 10.0;
    cfg.mode = mode;
    return cfg;
  };
  const auto perfect = Counts(0, 0, 0, 10);
  const double p1 = fal::ComputeFal({100.0, "", ""}, perfect, 1.0, cfg_for(fal::LatencyMode::kPaper)).total;
  const double p2 = fal::ComputeFal({100.0, "", ""}, perfect, 1.0, cfg_for(fal::LatencyMode::kCorrected)).total;
  const double p3 =
      fal::ComputeFal({0.0, "", ""}, Counts(10, 0, 0, 10), 10.0, cfg_for(fal::LatencyMode::kCorrected)).total;
  Check(std::abs(p1 - 67.0) <= 1e-9, fmt::format("perfect/paper = {}", p1));
  Check(std::abs(p2 - 100.0) <= 1e-9, fmt::format("perfect/corrected = {}", p2));
  Check(std::abs(p3 - 1.0 / 3.0) <= 1e-9, fmt::format("worst/corrected = {}", p3));

  std::size_t checks = 0;
  for (auto mode : {fal::LatencyMode::kPaper, fal::LatencyMode::kCorrected}) {
    auto rng = SeededEngine(2024, fal::LatencyModeName(mode));
    auto unit = [&] { return static_cast<double>(UniformBelow(rng, 1000001)) / 1e6; };
    for (int trial = 0; trial < 1000; ++trial) {
      fal::FalConfig cfg;
      cfg.mode = mode;
      const double a = unit(), b = unit() * (1.0 - a);
      cfg.weights = {a, b, 1.0 - a - b};
      cfg.max_latency = 1.5 + 30.0 * unit();
      const std::size_t n = 1 + UniformBelow(rng, 50);
      const std::size_t s = UniformBelow(rng, n + 1);
      const std::size_t d = UniformBelow(rng, n - s + 1);
      const std::size_t ins = UniformBelow(rng, 20);
      const double f = 100.0 * unit();
      const double l = 0.5 + (cfg.max_latency + 1.0) * unit();
      auto total = [&](double fv, metrics::EditCounts c, double lv) {
        return fal::ComputeFal({fv, "", ""}, c, lv, cfg).total;
      };
      const double base = total(f, Counts(s, ins, d, n), l);
      const std::string where = fmt::format("{} trial {}", fal::LatencyModeName(mode), trial);
      Check(total(f, Counts(s, ins + 1, d, n), l) <= base, where + ": insertion raised FAL");
      if (s + d < n) Check(total(f, Counts(s + 1, ins, d, n), l) <= base, where + ": substitution raised FAL");
      if (s + d < n) Check(total(f, Counts(s, ins, d + 1, n), l) <= base, where + ": deletion raised FAL");
      Check(total(f + (100.0 - f) * unit(), Counts(s, ins, d, n), l) >= base, where + ": higher F lowered FAL");
      const double slower = total(f, Counts(s, ins, d, n), l + 5.0 * unit());
      Check(mode == fal::LatencyMode::kPaper ? slower >= base : slower <= base,
            where + ": latency moved FAL the wrong way");
      checks += 5;
    }
  }
  return fmt::format("3 point checks within 1e-9; 2000 random configurations, {} property checks, 0 violations",
                     checks);
}

int RunCli(const std::vector<std::string>& args, std::string* out) {
  std::ostringstream o, e;
  const int rc = cli::Run(args, o, e);
  *out = rc == 0 ? o.str() : e.str();
  return rc;
}

// 4. Table row format regenerated from a synthetic fixture.
std::string ReportTable() {
  const auto dir = testing::FixtureDir() / "report";
  const auto expected = json::parse(ReadTextFile(dir / "expected.json"));
  for (const std::string mode : {"paper", "corrected"}) {
    std::string md, js;
    const std::vector<std::string> base{"report", "--config", (dir / "config.json").string(),
                                        "--systems", (dir / "systems.json").string(), "--mode", mode};
    Check(RunCli(base, &md) == 0, md);
    Check(md == ReadTextFile(dir / ("report_" + mode + ".md")), mode + ": Markdown table differs from fixture");
    auto with_json = base;
    with_json.insert(with_json.begin(), {"--format", "json"});
    Check(RunCli(with_json, &js) == 0, js);
    for (const auto& s : json::parse(js).at("systems")) {
      const double want = expected.at(mode).at(s.at("id").get<std::string>());
      Check(std::abs(s.at("total").get<double>() - want) <= 1e-9,
            fmt::format("{} {}: total {} vs hand-derived {}", mode, s.at("id").get<std::string>(),
                        s.at("total").get<double>(), want));
    }
  }
  return "3-system table matches bundled fixture byte-for-byte in paper and corrected modes; "
         "headline benchmark numbers are out of reach (they need proprietary models, full "
         "datasets and unpublished weights)";
}

// 5. Split and stats.
std::string DatasetProcedures() {
  const auto recs = testing::GenerateManifest(1000, 18, 7);
  const auto a = dataset::Split(recs, 0.9, 42);
  const auto b = dataset::Split(recs, 0.9, 42);
  Check(dataset::ManifestToJsonl(a.train) == dataset::ManifestToJsonl(b.train) &&
            dataset::ManifestToJsonl(a.test) == dataset::ManifestToJsonl(b.test) &&
            dataset::SplitMetaToJson(a) == dataset::SplitMetaToJson(b),
        "two runs differ");
  Check(a.topics.size() == 18, fmt::format("{} topics", a.topics.size()));
  const double slack = std::abs(static_cast<double>(a.train.size()) - 900.0);
  Check(slack <= 18.0, fmt::format("train size {} is more than 18 from 900", a.train.size()));
  double lo = 1.0, hi = 0.0;
  for (const auto& [topic, t] : a.topics) {
    lo = std::min(lo, t.TrainFraction());
    hi = std::max(hi, t.TrainFraction());
    Check(t.TrainFraction() >= 0.85 && t.TrainFraction() <= 0.95,
          fmt::format("topic {} train fraction {:.3f}", topic, t.TrainFraction()));
  }
  Check(a.train.size() + a.test.size() == 1000, "split lost records");

  const auto stats = dataset::ComputeStats(dataset::LoadManifest(testing::FixtureDir() / "stats_manifest.jsonl"), {});
  Check(stats.total.utterances == 10, "stats: utterances");
  Check(stats.total.counts.cjk_chars == 60, fmt::format("stats: CJK {} != 60", stats.total.counts.cjk_chars));
  Check(stats.total.counts.latin_words == 11, fmt::format("stats: Latin {} != 11", stats.total.counts.latin_words));
  return fmt::format("train {}/1000, per-topic fractions [{:.3f}, {:.3f}], deterministic; stats CJK 60, Latin 11",
                     a.train.size(), lo, hi);
}

std::map<std::string, std::string> ReadTree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).generic_string()] = ReadTextFile(e.path());
  }
  return out;
}

// 6. MADGF loop with mock backends.
std::string MadgfLoop() {
  madgf::PipelineConfig cfg;
  cfg.rounds = 3;
  cfg.conversations_per_round = 3;
  cfg.top_k = 2;
  cfg.num_topics = 3;
  cfg.seed = 7;
  cfg.parallelism = 4;
  cfg.sources = {{madgf::SourceSpec::Kind::kLocalDir, testing::FixtureDir() / "madgf_corpus"}};
  madgf::PipelineHooks hooks;
  hooks.ingest.now = [] { return std::string("2026-01-01T00:00:00Z"); };

  testing::TempDir a("accept-a"), b("accept-b");
  cfg.output_dir = a.path();
  const auto result = madgf::RunPipeline(cfg, hooks);
  cfg.output_dir = b.path();
  madgf::RunPipeline(cfg, hooks);
  const auto ta = ReadTree(a.path()), tb = ReadTree(b.path());
  Check(!ta.empty() && ta == tb, "two runs produced different output trees");

  std::vector<std::string> means;
  double prev = -1.0;
  for (const auto& r : result.rounds) {
    const auto m = r.MeanScore();
    Check(m.has_value(), fmt::format("round {} has no scores", r.round));
    Check(*m >= prev, fmt::format("round {} mean {:.2f} < {:.2f}", r.round, *m, prev));
    prev = *m;
    means.push_back(fmt::format("{:.2f}", *m));
  }
  for (std::size_t r = 1; r < result.rounds.size(); ++r) {
    for (const auto& p : result.rounds[r].prompts) {
      std::vector<std::pair<int, std::string>> ranked;
      for (const auto& s : result.rounds[r - 1].scores.scored) {
        if (s.conversation.topic_index == p.topic_index) ranked.emplace_back(-s.score, s.conversation.id);
      }
      std::sort(ranked.begin(), ranked.end());
      std::vector<std::string> want, got;
      for (std::size_t i = 0; i < std::min(cfg.top_k, ranked.size()); ++i) want.push_back(ranked[i].second);
      for (const auto& e : p.exemplars) got.push_back(e.conversation.id);
      Check(got == want, fmt::format("round {} topic {}: exemplars are not the top-{}", r + 1, p.topic_index, cfg.top_k));
    }
  }
  return fmt::format("{} files byte-identical across runs; exemplars = top-{}; round means {}", ta.size(), cfg.top_k,
                     fmt::join(means, " <= "));
}

class CountingBackend : public judge::ChatBackend {
 public:
  std::string Complete(std::string_view prompt) override {
    ++calls;
    return inner.Complete(prompt);
  }
  std::string Name() const override { return inner.Name(); }
  judge::MockJudgeBackend inner;
  int calls = 0;
};

// 7. Verdict parsing and cache replay.
std::string JudgeRobustness() {
  using judge::Task;
  Check(judge::ParseVerdict(R"({"score": 87, "rationale": "ok"})", Task::kFidelity).score == 87, "canonical JSON");
  Check(judge::ParseVerdict("Score: 72/100", Task::kFidelity).score == 72, "Score: NN/100");
  Check(judge::ParseVerdict("64", Task::kFidelity).score == 64, "bare integer");
  for (const char* bad : {R"({"score": 101})", "Score: 140/100", "-5"}) {
    bool rejected = false;
    try {
      judge::ParseVerdict(bad, Task::kFidelity);
    } catch (const RangeError&) {
      rejected = true;
    }
    Check(rejected, fmt::format("accepted out-of-range '{}'", bad));
  }

  testing::TempDir dir("accept-cache");
  const auto path = dir.path() / "cache.jsonl";
  std::vector<judge::JudgeRequest> reqs(3);
  const std::pair<const char*, const char*> texts[] = {
      {"Hold住", "侯住"}, {"士多啤梨", "Strawberry"}, {"今日去Kyoto睇festival", "今日去Kyoto睇festival"}};
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    reqs[i].task = Task::kFidelity;
    reqs[i].reference_text = texts[i].first;
    reqs[i].hypothesis_text = texts[i].second;
  }
  std::vector<judge::JudgeVerdict> first;
  {
    auto backend = std::make_shared<CountingBackend>();
    judge::JudgeClient client(backend, std::make_shared<judge::JudgeCache>(path));
    for (const auto& r : reqs) first.push_back(client.RequestScore(r));
    Check(backend->calls == 3, "first pass did not call the backend once per request");
  }
  auto backend = std::make_shared<CountingBackend>();
  judge::JudgeClient client(backend, std::make_shared<judge::JudgeCache>(path));
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    const auto v = client.RequestScore(reqs[i]);
    Check(v.cache_hit && v.SameAs(first[i]), fmt::format("replayed verdict {} differs", i));
  }
  Check(backend->calls == 0, fmt::format("second pass made {} backend calls", backend->calls));
  return "3 verdict shapes parsed, 3 out-of-range rejected; 3 cached verdicts replayed identically, 0 backend calls";
}

// 8. Latency harness.
std::string LatencyHarness() {
  testing::TempDir dir("accept-bench");
  WriteTextFile(dir.path() / "u1.wav", "");
  dataset::UtteranceRecord rec;
  rec.id = "u1";
  rec.audio = "u1.wav";
  rec.duration_s = 1.0;
  rec.topic = "work";
  rec.text = "開meeting";
  bench::RunOptions opts;
  opts.system = "sleepy";
  opts.audio_root = dir.path();
  const auto timed = bench::RunTimed("sleep 0.2", rec, opts);
  Check(timed.ok, "sleep 0.2 failed");
  Check(timed.latency_s >= 0.2 && timed.latency_s <= 0.35, fmt::format("L = {:.3f} s", timed.latency_s));

  auto record = [](const char* id, double l, bool ok) {
    bench::LatencyRecord r;
    r.id = id;
    r.system = "s";
    r.latency_s = l;
    r.ok = ok;
    r.exit_status = ok ? 0 : 1;
    return r;
  };
  const std::vector<bench::LatencyRecord> recs{record("a", 1.0, true), record("b", 2.0, true),
                                               record("c", 9.0, false)};
  const double m = bench::Summarize(recs).max_latency;
  Check(m == 2.0, fmt::format("M = {}", m));

  // The same numbers through the harness output file and typed in by hand.
  auto harness = recs;
  harness.push_back(record("d", 1.2, true));  // mean 1.4 s, off the midpoint of [1, M]
  WriteTextFile(dir.path() / "lat.jsonl", bench::RecordsToJsonl(harness));
  const json counts = {{"mer", {{"S", 3}, {"I", 1}, {"D", 2}, {"N", 30}}}};
  WriteTextFile(dir.path() / "harness.json",
                json({{"systems", {{{"id", "s"}, {"F", 83.5}, {"counts", counts}, {"latencies", "lat.jsonl"}}}}}).dump());
  WriteTextFile(dir.path() / "manual.json",
                json({{"M", 2.0}, {"systems", {{{"id", "s"}, {"F", 83.5}, {"counts", counts}, {"L", 1.4}}}}}).dump());
  std::vector<std::string> totals;
  for (const std::string mode : {"paper", "corrected"}) {
    std::string h, k;
    Check(RunCli({"fal", "--systems", (dir.path() / "harness.json").string(), "--mode", mode}, &h) == 0, h);
    Check(RunCli({"fal", "--systems", (dir.path() / "manual.json").string(), "--mode", mode}, &k) == 0, k);
    const auto hj = json::parse(h), kj = json::parse(k);
    Check(hj.at("M") == 2.0, "harness-derived M != 2.0");
    const double ht = hj.at("systems")[0].at("total"), kt = kj.at("systems")[0].at("total");
    Check(std::abs(ht - kt) <= 1e-9, fmt::format("{}: harness {} vs manual {}", mode, ht, kt));
    totals.push_back(fmt::format("{} {:.6f}", mode, ht));
  }
  return fmt::format("sleep 0.2 -> L = {:.3f} s; M = 2.0; harness FAL = manual FAL ({})", timed.latency_s,
                     fmt::join(totals, ", "));
}

}  // namespace
}  // namespace mcetk::acceptance

int main() {
  using namespace mcetk::acceptance;
  const std::pair<const char*, std::function<std::string()>> criteria[] = {
      {"alignment oracle equivalence", AlignmentOracle},
      {"metric fixtures", MetricFixtures},
      {"FAL point checks and monotonicity", FalProperties},
      {"comparison table from synthetic fixture", ReportTable},
      {"dataset split and stats", DatasetProcedures},
      {"MADGF loop", MadgfLoop},
      {"judge robustness", JudgeRobustness},
      {"latency harness", LatencyHarness},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    std::string verdict, detail;
    try {
      detail = run();
      verdict = "PASS";
    } catch (const Violation& v) {
      detail = v.message;
      verdict = "FAIL";
    } catch (const std::exception& e) {
      detail = std::string("unexpected exception: ") + e.what();
      verdict = "FAIL";
    }
    if (verdict == "FAIL") ++failed;
    std::cout << fmt::format("[{}] criterion {}: {} - {}", verdict, n, name, detail) << std::endl;
  }
  std::cout << fmt::format("{}/{} criteria passed", n - failed, n) << std::endl;
  return failed == 0 ? 0 : 1;
}
