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

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "mcetk/metrics/metrics.h"

namespace mcetk::fal {

struct FalWeights {
  double alpha = 1.0 / 3.0;
  double beta = 1.0 / 3.0;
  double gamma = 1.0 / 3.0;

  // Non-negative and summing to 1 within 1e-6; throws ConfigError.
  void Validate() const;
};

// kPaper keeps the original formula, under which the term grows with latency;
// kCorrected mirrors it so that lower latency scores higher.
enum class LatencyMode { kPaper, kCorrected };

std::string_view LatencyModeName(LatencyMode mode);
LatencyMode ParseLatencyMode(std::string_view name);

struct FalConfig {
  FalWeights weights;
  double max_latency = 0.0;  // M, seconds
  LatencyMode mode = LatencyMode::kPaper;

  // The latency term is skipped entirely when gamma == 0.
  bool LatencyEnabled() const { return weights.gamma != 0.0; }
};

struct FidelityScore {
  double value = 0.0;  // [0, 100]
  std::string judge;
  std::string prompt_hash;
};

struct FalScore {
  double total = 0.0;
  double fidelity_term = 0.0;
  double accuracy_term = 0.0;
  std::optional<double> latency_term;  // nullopt when gamma == 0
};

// max(0, 1 - (S+I+D)/N) * 100. Throws UndefinedBasisError when N == 0.
double AccuracyTerm(const metrics::EditCounts& counts);

// L is clamped into [1, M] first. Throws ConfigError when M <= 1.
double LatencyTerm(double latency_seconds, const FalConfig& cfg);

FalScore ComputeFal(const FidelityScore& fidelity, const metrics::EditCounts& counts,
                    double latency_seconds, const FalConfig& cfg);

nlohmann::json WeightsToJson(const FalWeights& w);
nlohmann::json TermsToJson(const FalScore& s);

}  // namespace mcetk::fal
