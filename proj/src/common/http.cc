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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "mcetk/common/error.h"
#include "mcetk/common/http.h"

namespace mcetk {
namespace {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // always starts with '/'
};

SplitUrl Split(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw UsageError("not an absolute URL: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw UsageError("unsupported URL scheme '" + scheme + "' in " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

httplib::Headers ToHeaders(const HttpRequestOptions& options) {
  httplib::Headers headers;
  for (const auto& [k, v] : options.headers) headers.emplace(k, v);
  return headers;
}

void Configure(httplib::Client& client, const HttpRequestOptions& options) {
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  client.set_follow_location(true);
}

HttpResponse Finish(const httplib::Result& result, const std::string& url) {
  if (!result) {
    throw BackendError("request to " + url + " failed: " + httplib::to_string(result.error()));
  }
  return {result->status, result->body};
}

}  // namespace

HttpResponse HttpGet(const std::string& url, const HttpRequestOptions& options) {
  const SplitUrl parts = Split(url);
  httplib::Client client(parts.base);
  Configure(client, options);
  return Finish(client.Get(parts.path, ToHeaders(options)), url);
}

HttpResponse HttpPost(const std::string& url, const std::string& body,
                      const std::string& content_type, const HttpRequestOptions& options) {
  const SplitUrl parts = Split(url);
  httplib::Client client(parts.base);
  Configure(client, options);
  return Finish(client.Post(parts.path, ToHeaders(options), body, content_type), url);
}

}  // namespace mcetk
