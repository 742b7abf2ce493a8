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
#include <string>
#include <vector>

#include "json.hpp"

namespace mcetk {

// Reads a whole file as UTF-8. CRLF and lone CR are normalized to LF and a
// leading byte-order mark is dropped. Throws IoError.
std::string ReadTextFile(const std::filesystem::path& path);

// Writes `contents` verbatim, creating parent directories. Throws IoError.
void WriteTextFile(const std::filesystem::path& path, const std::string& contents);

// A single parsed JSONL line together with its 1-based line number.
struct JsonLine {
  std::size_t line = 0;
  nlohmann::json value;
};

// Parses a JSONL file, skipping blank lines. A malformed line raises
// ParseError naming the file and line number.
std::vector<JsonLine> ReadJsonLines(const std::filesystem::path& path);

// Serializes one JSON value per line, each terminated by '\n'.
std::string ToJsonLines(const std::vector<nlohmann::json>& values);

// Pretty JSON with a trailing newline.
std::string ToPrettyJson(const nlohmann::json& value);

}  // namespace mcetk
