// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// JSON-over-HTTP front end for a loaded model. Routes:
//   GET  /model/info
//   POST /encode    {image}
//   POST /generate  {c, z?, seed?}
//   POST /edit      {image? | dataset_index?, set, seed?}
// Images travel as base64 PNG. Errors are {"error": {"code", "message"}}.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vigan/vigan.h"

namespace httplib {
class Server;
}

namespace vigan_tools {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Returns nullopt on malformed input.
std::optional<std::vector<std::uint8_t>> base64_decode(const std::string& text);

struct ServiceOptions {
  std::size_t max_body_bytes = 8 << 20;
};

struct Response {
  int status = 200;
  std::string body;  // JSON
};

/// Stateless apart from the read-only model; safe to call from many threads.
class Service {
 public:
  Service(const vigan_model* model, ServiceOptions options = {});

  Response model_info() const;
  Response encode(const std::string& body) const;
  Response generate(const std::string& body) const;
  Response edit(const std::string& body) const;

  /// Registers the routes and the body-size limit on `server`.
  void mount(httplib::Server& server) const;

 private:
  const vigan_model* model_;
  ServiceOptions options_;
};

/// HTTP status for a library status: 400 for request faults, 413 for
/// oversized images, 500 otherwise.
int http_status(vigan_status status);

/// Error body for a failed library call on this thread. 500s carry no
/// detail from the library.
Response library_error(vigan_status status);

}  // namespace vigan_tools
