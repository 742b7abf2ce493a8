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

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace mcetk::judge {

// A chat-completion style model endpoint: one user prompt in, the assistant
// message text out. Implementations throw BackendError on transport or
// protocol failures so callers can retry.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string Complete(std::string_view prompt) = 0;
  // Stable identifier recorded in reports (never contains credentials).
  virtual std::string Name() const = 0;
};

struct HttpBackendConfig {
  std::string endpoint;  // full URL of the chat-completions route
  std::string model = "gpt-4";
  // Name of the environment variable holding the bearer token.
  std::string api_key_env = "JUDGE_API_KEY";
  std::chrono::milliseconds timeout{60000};
};

// POSTs {"model", "temperature": 0, "messages": [{"role":"user",...}]} and
// reads choices[0].message.content from the reply.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);

  std::string Complete(std::string_view prompt) override;
  std::string Name() const override;

 private:
  HttpBackendConfig config_;
};

// Offline judge. A pure function of (prompt, seed): it re-reads the texts
// embedded in the prompt and scores them with a fixed rubric.
//   fidelity: round(100 * token-overlap F1 between reference and hypothesis)
//   quality:  grammar = 60 + 40 * (fraction of turns mixing CJK and Latin)
//             diction = 100 * (fraction of topic keywords present), 70 if none
//             coherence = 25 per turn up to 100, halved with < 2 speakers
// A non-zero `jitter` adds seeded integer noise in [-jitter, jitter] to every
// score, clamped to [0, 100].
class MockJudgeBackend : public ChatBackend {
 public:
  explicit MockJudgeBackend(std::uint64_t seed = 0, int jitter = 0)
      : seed_(seed), jitter_(jitter) {}

  std::string Complete(std::string_view prompt) override;
  std::string Name() const override;

 private:
  std::uint64_t seed_;
  int jitter_;
};

}  // namespace mcetk::judge
