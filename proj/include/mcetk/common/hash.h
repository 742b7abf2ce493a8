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

#include <cstdint>
#include <string>
#include <string_view>

namespace mcetk {

// Lowercase hex SHA-256 digest of `data`.
std::string Sha256Hex(std::string_view data);

// 64-bit FNV-1a. Used for seeding, never for content addressing.
std::uint64_t Fnv1a64(std::string_view data);

}  // namespace mcetk
