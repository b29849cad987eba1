// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "service.hpp"

#include <array>
#include <cstring>

#include <httplib.h>
#include <json.hpp>

namespace vigan_tools {

using nlohmann::ordered_json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

// Owns a library buffer for the duration of a request.
struct Buffer {
  vigan_buffer b{nullptr, 0};
  ~Buffer() { vigan_buffer_free(&b); }
  std::vector<std::uint8_t> bytes() const { return {b.data, b.data + b.size}; }
  std::string text() const { return {reinterpret_cast<const char*>(b.data), b.size}; }
};

struct RequestError {
  int status;
  std::string code;
  std::string message;
};

Response error_response(int status, const std::string& code, const std::string& message) {
  ordered_json j;
  j["error"]["code"] = code;
  j["error"]["message"] = message;
  return {status, j.dump()};
}

ordered_json parse_object(const std::string& body, std::size_t limit, std::initializer_list<const char*> allowed) {
  if (body.size() > limit)
    throw RequestError{413, "payload_too_large", "request body exceeds " + std::to_string(limit) + " bytes"};
  ordered_json j = ordered_json::parse(body, nullptr, false);
  if (j.is_discarded()) throw RequestError{400, "invalid_argument", "request body is not valid JSON"};
  if (!j.is_object()) throw RequestError{400, "invalid_argument", "request body must be a JSON object"};
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw RequestError{400, "invalid_argument", "unknown field '" + key + "'"};
  }
  return j;
}

std::vector<std::uint8_t> image_field(const ordered_json& j) {
  const auto& v = j.at("image");
  if (!v.is_string()) throw RequestError{400, "invalid_argument", "'image' must be a base64 string"};
  auto bytes = base64_decode(v.get<std::string>());
  if (!bytes) throw RequestError{400, "invalid_argument", "'image' is not valid base64"};
  return *bytes;
}

std::vector<float> float_array(const ordered_json& j, const char* name) {
  const auto& v = j.at(name);
  if (!v.is_array()) throw RequestError{400, "invalid_argument", std::string("'") + name + "' must be an array"};
  std::vector<float> out;
  for (const auto& x : v) {
    if (!x.is_number())
      throw RequestError{400, "invalid_argument", std::string("'") + name + "' must contain only numbers"};
    out.push_back(x.get<float>());
  }
  return out;
}

template <class F>
Response handle(F&& body) {
  try {
    return body();
  } catch (const RequestError& e) {
    return error_response(e.status, e.code, e.message);
  } catch (const std::exception&) {
    return error_response(500, "internal", "internal error");
  }
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t n = bytes[i] << 16 | (i + 1 < bytes.size() ? bytes[i + 1] << 8 : 0) |
                            (i + 2 < bytes.size() ? bytes[i + 2] : 0);
    out += kAlphabet[n >> 18 & 63];
    out += kAlphabet[n >> 12 & 63];
    out += i + 1 < bytes.size() ? kAlphabet[n >> 6 & 63] : '=';
    out += i + 2 < bytes.size() ? kAlphabet[n & 63] : '=';
  }
  return out;
}

std::optional<std::vector<std::uint8_t>> base64_decode(const std::string& text) {
  std::array<int, 256> value;
  value.fill(-1);
  for (int i = 0; i < 64; ++i) value[static_cast<unsigned char>(kAlphabet[i])] = i;
  if (text.size() % 4 != 0) return std::nullopt;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t n = 0;
    for (int k = 0; k < 4; ++k) {
      const char ch = text[i + k];
      if (ch == '=' && last && k >= 2) {
        ++pad;
        n <<= 6;
        continue;
      }
      const int v = value[static_cast<unsigned char>(ch)];
      if (v < 0 || pad > 0) return std::nullopt;
      n = n << 6 | static_cast<std::uint32_t>(v);
    }
    // Bits under the padding must be zero, so each payload has one encoding.
    if ((pad == 2 && (n & 0xFFFF) != 0) || (pad == 1 && (n & 0xFF) != 0)) return std::nullopt;
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(n >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(n));
  }
  return out;
}

int http_status(vigan_status status) {
  switch (status) {
    case VIGAN_OK: return 200;
    case VIGAN_INVALID_ARGUMENT:
    case VIGAN_IMAGE:
    case VIGAN_SHAPE: return 400;
    case VIGAN_IMAGE_TOO_LARGE: return 413;
    default: return 500;
  }
}

Response library_error(vigan_status s) {
  const int http = http_status(s);
  // Internal failures are reported without detail.
  if (http == 500) return error_response(500, "internal", "internal error");
  return error_response(http, vigan_status_name(s), vigan_last_error());
}

Service::Service(const vigan_model* model, ServiceOptions options) : model_(model), options_(options) {}

Response Service::model_info() const {
  return handle([&] {
    Buffer info;
    if (auto s = vigan_model_info(model_, &info.b); s != VIGAN_OK) return library_error(s);
    return Response{200, info.text()};
  });
}

Response Service::encode(const std::string& body) const {
  return handle([&] {
    const ordered_json j = parse_object(body, options_.max_body_bytes, {"image"});
    if (!j.contains("image")) throw RequestError{400, "invalid_argument", "missing field 'image'"};
    const auto png = image_field(j);
    Buffer out;
    if (auto s = vigan_encode(model_, png.data(), png.size(), &out.b); s != VIGAN_OK) return library_error(s);
    return Response{200, out.text()};
  });
}

Response Service::generate(const std::string& body) const {
  return handle([&] {
    const ordered_json j = parse_object(body, options_.max_body_bytes, {"c", "z", "seed"});
    if (!j.contains("c")) throw RequestError{400, "invalid_argument", "missing field 'c'"};
    const std::vector<float> c = float_array(j, "c");
    std::optional<std::vector<float>> z;
    if (j.contains("z")) z = float_array(j, "z");
    std::optional<std::uint64_t> seed;
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned())
        throw RequestError{400, "invalid_argument", "'seed' must be a non-negative integer"};
      seed = j["seed"].get<std::uint64_t>();
    }
    Buffer png;
    const vigan_status s = vigan_generate(model_, c.data(), c.size(), z ? z->data() : nullptr, z ? z->size() : 0,
                                          seed ? &*seed : nullptr, &png.b);
    if (s != VIGAN_OK) return library_error(s);
    ordered_json out;
    out["image"] = base64_encode(png.bytes());
    return Response{200, out.dump()};
  });
}

Response Service::edit(const std::string& body) const {
  return handle([&] {
    ordered_json j = parse_object(body, options_.max_body_bytes, {"image", "dataset_index", "set", "seed"});
    std::vector<std::uint8_t> png;
    const bool has_image = j.contains("image");
    if (has_image) {
      png = image_field(j);
      j.erase("image");
    }
    Buffer edited, triptych, info;
    const vigan_status s = vigan_edit(model_, j.dump().c_str(), has_image ? png.data() : nullptr, png.size(),
                                      &edited.b, &triptych.b, &info.b);
    if (s != VIGAN_OK) return library_error(s);
    ordered_json out;
    out["image"] = base64_encode(edited.bytes());
    out["triptych"] = base64_encode(triptych.bytes());
    const ordered_json vectors = ordered_json::parse(info.text());
    for (const auto& [key, value] : vectors.items()) out[key] = value;
    return Response{200, out.dump()};
  });
}

void Service::mount(httplib::Server& server) const {
  server.set_payload_max_length(options_.max_body_bytes);
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get("/model/info", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, model_info()); });
  server.Post("/encode",
              [this, reply](const httplib::Request& req, httplib::Response& res) { reply(res, encode(req.body)); });
  server.Post("/generate",
              [this, reply](const httplib::Request& req, httplib::Response& res) { reply(res, generate(req.body)); });
  server.Post("/edit", [this, reply](const httplib::Request& req, httplib::Response& res) { reply(res, edit(req.body)); });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const int status = res.status;
    const char* code = status == 413 ? "payload_too_large" : status == 404 ? "not_found" : "http_error";
    res.set_content(error_response(status, code, httplib::status_message(status)).body, "application/json");
  });
}

}  // namespace vigan_tools
