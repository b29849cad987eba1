// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "service.hpp"
#include "vigan/config.hpp"
#include "vigan/dataset.hpp"
#include "vigan/image_codec.hpp"
#include "vigan/vigan.h"

namespace fs = std::filesystem;
using nlohmann::json;
using vigan_tools::base64_decode;
using vigan_tools::base64_encode;

namespace {

struct Buffer {
  vigan_buffer b{nullptr, 0};
  ~Buffer() { vigan_buffer_free(&b); }
  std::string text() const { return {reinterpret_cast<const char*>(b.data), b.size}; }
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "vigan_test_service";
    fs::remove_all(d);
    return d;
  }();
  return dir;
}

json tiny_config() {
  std::ifstream in(std::string(VIGAN_SOURCE_DIR) + "/configs/tiny.json");
  json j = json::parse(in);
  j["total_steps"] = 200;
  return j;
}

std::string checkpoint() {
  static const std::string path = [] {
    const auto out = workdir() / "run";
    REQUIRE(vigan_train_json(tiny_config().dump().c_str(), out.string().c_str(), nullptr, nullptr, nullptr, nullptr) ==
            VIGAN_OK);
    return (out / "final.ckpt").string();
  }();
  return path;
}

// One model and one server on an ephemeral port for the whole binary.
struct Server {
  vigan_model* model = nullptr;
  vigan_tools::Service* service = nullptr;
  httplib::Server http;
  std::thread thread;
  int port = 0;

  explicit Server(std::size_t max_body) {
    REQUIRE(vigan_model_load(checkpoint().c_str(), 1, &model) == VIGAN_OK);
    service = new vigan_tools::Service(model, {max_body});
    service->mount(http);
    port = http.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { http.listen_after_bind(); });
    http.wait_until_ready();
  }
  ~Server() {
    http.stop();
    thread.join();
    delete service;
    vigan_model_free(model);
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30);
    return c;
  }
};

constexpr std::size_t kMaxBody = 64 << 10;

Server& server() {
  static Server s(kMaxBody);
  return s;
}

json post(const std::string& path, const json& body, int expect) {
  auto res = server().client().Post(path, body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == expect);
  CHECK(res->get_header_value("Content-Type") == "application/json");
  return json::parse(res->body);
}

std::vector<std::uint8_t> decoded(const json& v) {
  auto b = base64_decode(v.get<std::string>());
  REQUIRE(b.has_value());
  return *b;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) { return vigan::read_file(p.string()); }

void check_error(const json& body, const std::string& code) {
  REQUIRE(body.contains("error"));
  CHECK(body["error"]["code"] == code);
  CHECK(body["error"]["message"].is_string());
}

}  // namespace

TEST_CASE("base64 matches known vectors") {
  const auto enc = [](const std::string& s) { return base64_encode({s.begin(), s.end()}); };
  CHECK(enc("") == "");
  CHECK(enc("f") == "Zg==");
  CHECK(enc("fo") == "Zm8=");
  CHECK(enc("foo") == "Zm9v");
  CHECK(enc("foobar") == "Zm9vYmFy");
  CHECK(enc(std::string("\xfb\xff", 2)) == "+/8=");
}

TEST_CASE("property: base64 round-trips arbitrary bytes") {
  std::mt19937 rng(11);
  for (int n = 0; n < 200; ++n) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    const auto text = base64_encode(bytes);
    CHECK(text.size() == (bytes.size() + 2) / 3 * 4);
    const auto back = base64_decode(text);
    REQUIRE(back.has_value());
    CHECK(*back == bytes);
  }
}

TEST_CASE("base64 decoding is strict") {
  for (const char* bad : {"Zg=", "Zg", "Z===", "Zg=a", "Zm9v\n", "Zm 9v", "Zm9v====", "=Zm9", "Zh==", "Zm9=", "Zm-v"})
    CHECK_MESSAGE(!base64_decode(bad).has_value(), bad);
  CHECK(base64_decode("").has_value());
}

TEST_CASE("status mapping and opaque internal errors") {
  CHECK(vigan_tools::http_status(VIGAN_OK) == 200);
  CHECK(vigan_tools::http_status(VIGAN_INVALID_ARGUMENT) == 400);
  CHECK(vigan_tools::http_status(VIGAN_IMAGE) == 400);
  CHECK(vigan_tools::http_status(VIGAN_SHAPE) == 400);
  CHECK(vigan_tools::http_status(VIGAN_IMAGE_TOO_LARGE) == 413);
  for (auto s : {VIGAN_IO, VIGAN_CONFIG, VIGAN_CHECKPOINT_CORRUPT, VIGAN_CHECKPOINT_VERSION, VIGAN_CHECKPOINT_CONFIG,
                 VIGAN_NUMERIC, VIGAN_DATASET, VIGAN_CHECK_FAILED, VIGAN_INTERNAL})
    CHECK(vigan_tools::http_status(s) == 500);

  // The library error names a path; the 500 body must not.
  vigan_model* m = nullptr;
  REQUIRE(vigan_model_load("/secret/location/model.ckpt", 0, &m) == VIGAN_IO);
  REQUIRE(std::string(vigan_last_error()).find("/secret") != std::string::npos);
  const auto r = vigan_tools::library_error(VIGAN_IO);
  CHECK(r.status == 500);
  CHECK(r.body.find("secret") == std::string::npos);
  check_error(json::parse(r.body), "internal");
  CHECK(json::parse(r.body)["error"]["message"] == "internal error");
}

TEST_CASE("GET /model/info") {
  auto res = server().client().Get("/model/info");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto j = json::parse(res->body);
  CHECK(j["image_size"] == 16);
  CHECK(j["z_dim"] == 4);
  CHECK(j["c_dim"] == 4);
  CHECK(j["step"] == 200);
  CHECK(j["groups"].size() == 2);
  CHECK(j["attributes"].size() == 4);
}

TEST_CASE("unknown routes and methods answer in JSON") {
  auto res = server().client().Get("/nope");
  REQUIRE(res);
  CHECK(res->status == 404);
  check_error(json::parse(res->body), "not_found");
  res = server().client().Get("/encode");
  REQUIRE(res);
  CHECK(res->status >= 400);
  CHECK(json::parse(res->body).contains("error"));
}

TEST_CASE("malformed requests are 400") {
  check_error(post("/generate", json::array(), 400), "invalid_argument");
  auto res = server().client().Post("/generate", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  check_error(post("/generate", {{"c", {1, 0, 0, 1}}, {"colour", 1}}, 400), "invalid_argument");
  check_error(post("/generate", json::object(), 400), "invalid_argument");
  check_error(post("/generate", {{"c", {1, 0, 0}}}, 400), "invalid_argument");
  check_error(post("/generate", {{"c", {1, 0, 0, "x"}}}, 400), "invalid_argument");
  check_error(post("/generate", {{"c", {1, 0, 0, 1}}, {"seed", -1}}, 400), "invalid_argument");
  check_error(post("/encode", {{"image", "not base64!"}}, 400), "invalid_argument");
  check_error(post("/encode", {{"image", "AAAA"}}, 400), "image");
  check_error(post("/edit", {{"set", {{"slot1", 1}}}}, 400), "invalid_argument");
  check_error(post("/edit", {{"dataset_index", 0}, {"set", {{"slot9", 1}}}}, 400), "invalid_argument");
}

TEST_CASE("oversized bodies and images are 413") {
  const std::string big(kMaxBody + 10, 'A');
  auto res = server().client().Post("/encode", json{{"image", big}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 413);
  check_error(json::parse(res->body), "payload_too_large");

  // Small on the wire, too large once decoded.
  const auto png = vigan::encode_png(vigan::Tensor<float>::zeros({1, 1, 4097}));
  REQUIRE(png.size() < kMaxBody);
  check_error(post("/encode", {{"image", base64_encode(png)}}, 413), "image_too_large");
}

TEST_CASE("/generate is deterministic for a fixed seed") {
  const json req{{"c", {1, 0, 0, 1}}, {"seed", 7}};
  const auto a = post("/generate", req, 200);
  const auto b = post("/generate", req, 200);
  CHECK(a["image"] == b["image"]);
  const auto c = post("/generate", json{{"c", {1, 0, 0, 1}}, {"seed", 8}}, 200);
  CHECK(a["image"] != c["image"]);
  const auto img = vigan::decode_png(decoded(a["image"]), 1);
  CHECK(img.shape() == std::vector<std::int64_t>{1, 16, 16});
}

TEST_CASE("encode then generate reconstructs about as well as the library") {
  Buffer metrics;
  REQUIRE(vigan_evaluate(server().model, 0, &metrics.b) == VIGAN_OK);
  const double library_error = json::parse(metrics.text())["recon_error"];

  const auto cfg = vigan::train_config_from_json(tiny_config());
  const auto split = vigan::load_dataset(cfg.dataset, 16, 1);
  double sq = 0, count = 0;
  for (const auto& s : split.heldout) {
    const auto png = vigan::encode_png(s.image);
    const auto e = post("/encode", {{"image", base64_encode(png)}}, 200);
    json c = json::array();
    for (const auto& q : e["c_hat"]) c.push_back(q.get<double>() >= 0.5 ? 1.0 : 0.0);
    const auto g = post("/generate", {{"c", c}, {"z", e["z"]}}, 200);
    const auto out = vigan::decode_png(decoded(g["image"]), 1);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = static_cast<double>(out[i]) - s.image[i];
      sq += d * d;
      count += 1;
    }
  }
  const double service_error = sq / count;
  MESSAGE("service " << service_error << " library " << library_error);
  CHECK(std::isfinite(service_error));
  CHECK(service_error <= 2.0 * library_error);
}

TEST_CASE("/edit returns the edited image, the triptych and vectors") {
  const auto j = post("/edit", {{"dataset_index", 3}, {"set", {{"slot1", 1}}}}, 200);
  CHECK(vigan::decode_png(decoded(j["image"]), 1).shape() == std::vector<std::int64_t>{1, 16, 16});
  CHECK(vigan::decode_png(decoded(j["triptych"]), 1).shape() == std::vector<std::int64_t>{1, 16, 52});
  CHECK(j["c_effective"][0] == 0.0);
  CHECK(j["c_effective"][1] == 1.0);
  CHECK(j["c_hat_edited"].size() == 4);

  // Upload path: the same request with a generated image as the source.
  const auto gen = post("/generate", {{"c", {0, 1, 1, 0}}, {"seed", 1}}, 200);
  const auto up = post("/edit", {{"image", gen["image"]}, {"set", {{"slot2", 1}}}}, 200);
  CHECK(up["c_effective"][3] == 1.0);
  check_error(post("/edit", {{"image", gen["image"]}, {"dataset_index", 0}}, 400), "invalid_argument");
}

TEST_CASE("/edit matches the CLI byte for byte") {
  const auto tri = workdir() / "cli_tri.png";
  const auto ed = workdir() / "cli_edited.png";
  const auto info = workdir() / "cli_info.json";
  const std::string cmd = std::string("\"") + VIGAN_CLI + "\" edit --checkpoint \"" + checkpoint() +
                          "\" --index 5 --set slot2=1 --seed 9 -o \"" + tri.string() + "\" --edited-out \"" +
                          ed.string() + "\" --info-out \"" + info.string() + "\" > /dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const auto j = post("/edit", {{"dataset_index", 5}, {"set", {{"slot2", 1}}}, {"seed", 9}}, 200);
  CHECK(decoded(j["image"]) == read_bytes(ed));
  CHECK(decoded(j["triptych"]) == read_bytes(tri));
  std::ifstream in(info);
  const auto cli_info = json::parse(in);
  CHECK(cli_info["c_effective"] == j["c_effective"]);
  CHECK(cli_info["c_hat_edited"] == j["c_hat_edited"]);
}

TEST_CASE("concurrent requests give identical answers") {
  const json req{{"c", {1, 0, 1, 0}}, {"seed", 3}};
  const auto expected = post("/generate", req, 200)["image"];
  std::vector<std::thread> threads;
  std::vector<int> same(8, 0);
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      auto res = server().client().Post("/generate", req.dump(), "application/json");
      same[t] = res && res->status == 200 && json::parse(res->body)["image"] == expected;
    });
  for (auto& th : threads) th.join();
  for (int t = 0; t < 8; ++t) CHECK(same[t] == 1);
}
