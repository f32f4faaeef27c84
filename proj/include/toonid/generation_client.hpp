// Copyright 2026 The ToonID Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Boundary to an external video-language model that turns an AD prompt
// package into narration text. The engine treats the returned text as opaque.

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "toonid/applications.hpp"

namespace toonid {

struct GenerationRequest {
  std::string request_id;
  ADPromptPackage package;
};

struct GenerationResponse {
  std::string request_id;
  std::string text;
  std::string model;
};

class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  // Throws Error{kTransport} for retryable failures and
  // Error{kMalformedResponse} for unusable replies.
  virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

struct GenerationClientConfig {
  std::string endpoint;  // http://host:port/path
  double timeout_s = 30.0;
  int retries = 2;

  // TOONID_GEN_ENDPOINT, TOONID_GEN_TIMEOUT_S, TOONID_GEN_RETRIES.
  static GenerationClientConfig from_env() {
    GenerationClientConfig c;
    if (const char* e = std::getenv("TOONID_GEN_ENDPOINT")) c.endpoint = e;
    try {
      if (const char* t = std::getenv("TOONID_GEN_TIMEOUT_S")) c.timeout_s = std::stod(t);
      if (const char* r = std::getenv("TOONID_GEN_RETRIES")) c.retries = std::stoi(r);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "TOONID_GEN_TIMEOUT_S / TOONID_GEN_RETRIES must be numeric");
    }
    if (!(c.timeout_s > 0) || c.retries < 0)
      throw Error(ErrorCode::kInvalidArgument, "generation timeout must be > 0 and retries >= 0");
    return c;
  }
};

inline nlohmann::json request_to_json(const GenerationRequest& r) {
  return {{"request_id", r.request_id}, {"package", package_to_json(r.package)}};
}

inline GenerationResponse response_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("request_id") || !j["request_id"].is_string() || !j.contains("text") ||
      !j["text"].is_string())
    throw Error(ErrorCode::kMalformedResponse, "generation response lacks request_id/text");
  return {j["request_id"].get<std::string>(), j["text"].get<std::string>(), j.value("model", "")};
}

// Sends the request, retrying transport failures up to `retries` extra times.
inline GenerationResponse submit_generation(const GenerationRequest& request, GenerationClient& client, int retries) {
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    try {
      GenerationResponse r = client.generate(request);
      if (r.request_id != request.request_id)
        throw Error(ErrorCode::kMalformedResponse,
                    "response id '" + r.request_id + "' does not match request '" + request.request_id + "'");
      return r;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransport) throw;
      last_error = e.what();
    }
  }
  throw Error(ErrorCode::kTransport, "generation failed after " + std::to_string(retries + 1) +
                                         " attempt(s): " + last_error);
}

// POSTs {"request_id", "package"} as JSON and expects
// {"request_id", "text", "model"} back. Plain HTTP only.
class HttpGenerationClient : public GenerationClient {
 public:
  explicit HttpGenerationClient(GenerationClientConfig cfg) : cfg_(std::move(cfg)) {
    const std::string prefix = "http://";
    if (cfg_.endpoint.rfind(prefix, 0) != 0)
      throw Error(ErrorCode::kInvalidArgument, "generation endpoint must be an http:// URL: '" + cfg_.endpoint + "'");
    const auto slash = cfg_.endpoint.find('/', prefix.size());
    base_ = cfg_.endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
  }

  GenerationResponse generate(const GenerationRequest& request) override {
    httplib::Client cli(base_);
    const auto secs = static_cast<time_t>(cfg_.timeout_s);
    const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    auto res = cli.Post(path_, request_to_json(request).dump(), "application/json");
    if (!res) throw Error(ErrorCode::kTransport, "request failed: " + httplib::to_string(res.error()), cfg_.endpoint);
    if (res->status < 200 || res->status >= 300)
      throw Error(ErrorCode::kTransport, "endpoint returned HTTP " + std::to_string(res->status), cfg_.endpoint);
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::kMalformedResponse, "response body is not JSON", cfg_.endpoint);
    }
    return response_from_json(body);
  }

  const GenerationClientConfig& config() const { return cfg_; }

 private:
  GenerationClientConfig cfg_;
  std::string base_;
  std::string path_;
};

// Echoes the legend back; used for tests and dry runs.
class MockGenerationClient : public GenerationClient {
 public:
  GenerationResponse generate(const GenerationRequest& request) override {
    std::string text = "Mock description";
    if (!request.package.colour_legend.empty()) {
      text += " featuring";
      for (const auto& [id, name] : request.package.colour_legend) text += " " + name;
    }
    return {request.request_id, text + ".", "mock"};
  }
};

}  // namespace toonid
