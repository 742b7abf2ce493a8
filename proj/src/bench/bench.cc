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

#include "mcetk/bench/bench.h"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>

#include <fmt/format.h>

#include "mcetk/common/error.h"
#include "mcetk/common/io.h"
#include "mcetk/common/parallel.h"

extern char** environ;

namespace mcetk::bench {
namespace {

std::string ShellQuote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

void ReplaceAll(std::string& s, std::string_view from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

class FileActions {
 public:
  FileActions() { posix_spawn_file_actions_init(&actions_); }
  ~FileActions() { posix_spawn_file_actions_destroy(&actions_); }
  FileActions(const FileActions&) = delete;
  FileActions& operator=(const FileActions&) = delete;
  posix_spawn_file_actions_t* get() { return &actions_; }

 private:
  posix_spawn_file_actions_t actions_;
};

struct ChildResult {
  int exit_status = 0;
  std::string stdout_text;
  double seconds = 0.0;
};

ChildResult RunShell(const std::string& command, bool capture) {
  int pipe_fds[2] = {-1, -1};
  if (capture && ::pipe2(pipe_fds, O_CLOEXEC) != 0) {
    throw IoError(fmt::format("pipe: {}", std::strerror(errno)));
  }
  FileActions actions;
  posix_spawn_file_actions_addopen(actions.get(), STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  if (capture) {
    posix_spawn_file_actions_adddup2(actions.get(), pipe_fds[1], STDOUT_FILENO);
  } else {
    posix_spawn_file_actions_addopen(actions.get(), STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
  }

  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
  pid_t pid = 0;
  const auto start = std::chrono::steady_clock::now();
  const int rc = posix_spawn(&pid, "/bin/sh", actions.get(), nullptr,
                             const_cast<char* const*>(argv), environ);
  if (capture) ::close(pipe_fds[1]);
  if (rc != 0) {
    if (capture) ::close(pipe_fds[0]);
    throw IoError(fmt::format("posix_spawn(/bin/sh): {}", std::strerror(rc)));
  }

  ChildResult result;
  if (capture) {
    char buf[4096];
    for (;;) {
      const ssize_t n = ::read(pipe_fds[0], buf, sizeof buf);
      if (n > 0) {
        result.stdout_text.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EINTR) {
        break;
      }
    }
    ::close(pipe_fds[0]);
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw IoError(fmt::format("waitpid: {}", std::strerror(errno)));
  }
  const auto end = std::chrono::steady_clock::now();
  result.seconds = std::chrono::duration<double>(end - start).count();
  if (WIFEXITED(status)) {
    result.exit_status = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_status = 128 + WTERMSIG(status);
  } else {
    result.exit_status = -1;
  }
  return result;
}

std::string Trimmed(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

std::string ExpandCommand(std::string_view command_template, const std::string& audio_path,
                          const std::string& id) {
  std::string cmd(command_template);
  ReplaceAll(cmd, "{audio}", ShellQuote(audio_path));
  ReplaceAll(cmd, "{id}", ShellQuote(id));
  return cmd;
}

LatencyRecord RunTimed(std::string_view command_template, const dataset::UtteranceRecord& entry,
                       const RunOptions& options) {
  std::filesystem::path audio = entry.audio;
  if (audio.is_relative() && !options.audio_root.empty()) audio = options.audio_root / audio;
  if (entry.audio.empty() || !std::filesystem::exists(audio)) {
    throw IoError(fmt::format("audio for '{}' not found: {}", entry.id, audio.string()));
  }

  LatencyRecord rec;
  rec.id = entry.id;
  rec.system = options.system;
  rec.command = ExpandCommand(command_template, audio.string(), entry.id);

  const ChildResult child = RunShell(rec.command, options.capture_stdout);
  // steady_clock ticks are nanoseconds; a zero reading would break L > 0.
  rec.latency_s = std::max(child.seconds, 1e-9);
  rec.exit_status = child.exit_status;
  rec.ok = child.exit_status == 0;
  if (options.capture_stdout) {
    rec.hypothesis = Trimmed(child.stdout_text);
    if (!options.hypothesis_dir.empty()) {
      const auto path = options.hypothesis_dir / (entry.id + ".txt");
      WriteTextFile(path, *rec.hypothesis + "\n");
      rec.hypothesis_path = path.string();
    }
  }
  return rec;
}

std::vector<LatencyRecord> RunAll(std::string_view command_template,
                                  const std::vector<dataset::UtteranceRecord>& entries,
                                  const RunOptions& options, std::size_t parallelism) {
  std::vector<LatencyRecord> out(entries.size());
  ParallelFor(entries.size(), parallelism,
              [&](std::size_t i) { out[i] = RunTimed(command_template, entries[i], options); });
  return out;
}

BenchSummary Summarize(const std::vector<LatencyRecord>& records) {
  std::map<std::string, std::vector<double>> ok_by_system;
  BenchSummary summary;
  for (const auto& r : records) {
    auto& stats = summary.systems[r.system];
    if (r.ok) {
      ok_by_system[r.system].push_back(r.latency_s);
    } else {
      ++stats.failed;
    }
  }
  if (ok_by_system.empty()) throw UsageError("summarize: no successful latency records");
  for (auto& [system, values] : ok_by_system) {
    auto& stats = summary.systems[system];
    std::sort(values.begin(), values.end());
    stats.count = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    stats.mean = sum / static_cast<double>(values.size());
    const std::size_t mid = values.size() / 2;
    stats.median = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
    stats.max = values.back();
    summary.max_latency = std::max(summary.max_latency, stats.max);
  }
  return summary;
}

nlohmann::json RecordToJson(const LatencyRecord& r) {
  nlohmann::json j = {{"id", r.id},
                      {"L", r.latency_s},
                      {"status", r.ok ? "ok" : "failed"},
                      {"system", r.system},
                      {"exit_code", r.exit_status}};
  if (r.hypothesis) j["hyp"] = *r.hypothesis;
  if (r.hypothesis_path) j["hyp_path"] = *r.hypothesis_path;
  return j;
}

LatencyRecord RecordFromJson(const nlohmann::json& j) {
  try {
    LatencyRecord r;
    r.id = j.at("id").get<std::string>();
    r.latency_s = j.at("L").get<double>();
    const auto status = j.at("status").get<std::string>();
    if (status != "ok" && status != "failed") {
      throw ParseError(fmt::format("latency status must be ok|failed, got '{}'", status));
    }
    r.ok = status == "ok";
    r.system = j.value("system", std::string("system"));
    r.exit_status = j.value("exit_code", r.ok ? 0 : 1);
    if (j.contains("hyp")) r.hypothesis = j.at("hyp").get<std::string>();
    if (j.contains("hyp_path")) r.hypothesis_path = j.at("hyp_path").get<std::string>();
    if (r.ok && !(r.latency_s > 0.0)) {
      throw ValidationError(fmt::format("latency for '{}' must be > 0", r.id));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("latency record: ") + e.what());
  }
}

std::vector<LatencyRecord> LoadLatencies(const std::filesystem::path& path) {
  std::vector<LatencyRecord> out;
  for (const auto& line : ReadJsonLines(path)) {
    try {
      out.push_back(RecordFromJson(line.value));
    } catch (const Error& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), line.line, e.what()));
    }
  }
  return out;
}

std::string RecordsToJsonl(const std::vector<LatencyRecord>& records) {
  std::vector<nlohmann::json> lines;
  for (const auto& r : records) lines.push_back(RecordToJson(r));
  return ToJsonLines(lines);
}

nlohmann::json SummaryToJson(const BenchSummary& s) {
  nlohmann::json systems = nlohmann::json::object();
  for (const auto& [name, st] : s.systems) {
    systems[name] = {{"count", st.count}, {"failed", st.failed}, {"mean", st.mean},
                     {"median", st.median}, {"max", st.max}};
  }
  return {{"systems", systems}, {"M", s.max_latency}};
}

}  // namespace mcetk::bench
