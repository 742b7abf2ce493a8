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
#include <string>
#include <utility>
#include <vector>

namespace mcetk {

struct HttpResponse {
  int status = 0;
  std::string body;
};

struct HttpRequestOptions {
  std::chrono::milliseconds timeout{30000};
  std::vector<std::pair<std::string, std::string>> headers;
};

// Blocking GET/POST against an absolute http:// or https:// URL. Transport
// failures (DNS, refused connection, timeout, TLS) throw BackendError whose
// message carries the URL but never header values. Non-2xx statuses are
// returned, not thrown.
HttpResponse HttpGet(const std::string& url, const HttpRequestOptions& options);
HttpResponse HttpPost(const std::string& url, const std::string& body,
                      const std::string& content_type, const HttpRequestOptions& options);

}  // namespace mcetk
