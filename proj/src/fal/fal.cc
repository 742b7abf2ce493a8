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

#include "mcetk/fal/fal.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mcetk/common/error.h"

namespace mcetk::fal {

void FalWeights::Validate() const {
  for (double w : {alpha, beta, gamma}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ConfigError(fmt::format("FAL weights must be non-negative, got ({}, {}, {})",
                                    alpha, beta, gamma));
    }
  }
  const double sum = alpha + beta + gamma;
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ConfigError(fmt::format(
        "FAL weights must sum to 1 (simplex), got {} + {} + {} = {}", alpha, beta, gamma, sum));
  }
}

std::string_view LatencyModeName(LatencyMode mode) {
  return mode == LatencyMode::kPaper ? "paper" : "corrected";
}

LatencyMode ParseLatencyMode(std::string_view name) {
  if (name == "paper") return LatencyMode::kPaper;
  if (name == "corrected") return LatencyMode::kCorrected;
  throw ConfigError(fmt::format("unknown latency mode '{}' (expected paper|corrected)", name));
}

double AccuracyTerm(const metrics::EditCounts& counts) {
  if (counts.ref_length == 0) {
    throw UndefinedBasisError("accuracy term undefined: reference length N is 0");
  }
  const double rate =
      static_cast<double>(counts.Errors()) / static_cast<double>(counts.ref_length);
  return std::max(0.0, 1.0 - rate) * 100.0;
}

double LatencyTerm(double latency_seconds, const FalConfig& cfg) {
  const double m = cfg.max_latency;
  if (!(m > 1.0)) {
    throw ConfigError(fmt::format(
        "max latency M must exceed 1 second (got {}); raise M or disable the latency "
        "term with gamma=0",
        m));
  }
  if (!std::isfinite(latency_seconds)) {
    throw RangeError(fmt::format("latency must be finite, got {}", latency_seconds));
  }
  const double l = std::clamp(latency_seconds, 1.0, m);
  const double scaled = (l - 1.0) / (m - 1.0) * 99.0;
  return cfg.mode == LatencyMode::kPaper ? 1.0 + scaled : 100.0 - scaled;
}

FalScore ComputeFal(const FidelityScore& fidelity, const metrics::EditCounts& counts,
                    double latency_seconds, const FalConfig& cfg) {
  cfg.weights.Validate();
  if (!(fidelity.value >= 0.0 && fidelity.value <= 100.0)) {
    throw RangeError(fmt::format("fidelity must lie in [0, 100], got {}", fidelity.value));
  }
  FalScore score;
  score.fidelity_term = fidelity.value;
  score.accuracy_term = AccuracyTerm(counts);
  score.total = cfg.weights.alpha * score.fidelity_term +
                cfg.weights.beta * score.accuracy_term;
  if (cfg.LatencyEnabled()) {
    score.latency_term = LatencyTerm(latency_seconds, cfg);
    score.total += cfg.weights.gamma * *score.latency_term;
  }
  return score;
}

nlohmann::json WeightsToJson(const FalWeights& w) {
  return {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}};
}

nlohmann::json TermsToJson(const FalScore& s) {
  return {{"fidelity", s.fidelity_term},
          {"accuracy", s.accuracy_term},
          {"latency", s.latency_term ? nlohmann::json(*s.latency_term) : nlohmann::json(nullptr)}};
}

}  // namespace mcetk::fal
