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

#include <string>
#include <vector>

#include <fmt/format.h>

#include "mcetk/common/random.h"
#include "mcetk/dataset/dataset.h"

namespace mcetk::testing {

// `count` synthetic utterances spread over `topics` topics ("topic-00", ...)
// by a seeded draw, so topic sizes are uneven but reproducible.
inline std::vector<dataset::UtteranceRecord> GenerateManifest(std::size_t count, std::size_t topics,
                                                              std::uint64_t seed) {
  static const char* kTexts[] = {"今晚要OT咯", "我哋去Kyoto睇festival", "收拾下屋企啦",
                                 "個menu好正", "set個target先"};
  auto rng = SeededEngine(seed, "manifest");
  std::vector<dataset::UtteranceRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    dataset::UtteranceRecord r;
    r.id = fmt::format("utt-{:04}", i);
    r.audio = fmt::format("audio/{}.wav", r.id);
    r.duration_s = 1.0 + static_cast<double>(UniformBelow(rng, 2700)) / 100.0;
    r.topic = fmt::format("topic-{:02}", UniformBelow(rng, topics));
    r.text = kTexts[UniformBelow(rng, std::size(kTexts))];
    r.line = i + 1;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mcetk::testing
