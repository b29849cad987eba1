// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "vigan/checkpoint.hpp"
#include "vigan/image_codec.hpp"
#include "vigan/rng.hpp"

using namespace vigan;
namespace fs = std::filesystem;

namespace {

// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
std::uint32_t crc32_reference(const std::uint8_t* p, std::size_t n) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) {
    crc ^= p[i];
    for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.config = parse_train_config(R"({"lambda1": 1, "lambda2": 1, "total_steps": 20})");
  const Model m(c.config.model);
  c.params = m.init<float>(c.config.seed);
  c.optim = make_optimizers<float>(c.config.optim, c.params);
  // Non-trivial optimizer state.
  for (auto& [name, t] : c.optim.gen.m)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.001f * static_cast<float>(i % 7);
  c.optim.gen.t = 3;
  c.step = 3;
  Rng rng(5);
  rng();
  std::ostringstream os;
  os << rng;
  c.rng_state = os.str();
  return c;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "vigan_test_checkpoint";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("reference CRC-32 check value") {
  const std::string s = "123456789";
  CHECK(crc32_reference(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()) == 0xCBF43926u);
}

TEST_CASE("save, load, save is byte-identical") {
  const auto ckpt = sample_checkpoint();
  const auto a = scratch("a.ckpt"), b = scratch("b.ckpt");
  save_checkpoint(ckpt, a.string());
  const auto loaded = load_checkpoint(a.string());
  save_checkpoint(loaded, b.string());
  CHECK(read_file(a.string()) == read_file(b.string()));
  CHECK(loaded.params == ckpt.params);
  CHECK(loaded.step == 3);
  CHECK(loaded.optim.gen.t == 3);
  CHECK(loaded.rng_state == ckpt.rng_state);
  CHECK(loaded.config == ckpt.config);
}

TEST_CASE("file layout: magic, version and trailing CRC") {
  const auto bytes = serialize_checkpoint(sample_checkpoint());
  REQUIRE(bytes.size() > 20);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "VIGN");
  CHECK((bytes[4] | bytes[5] << 8 | bytes[6] << 16 | bytes[7] << 24) == 1);
  const std::size_t body = bytes.size() - 4;
  const std::uint32_t stored = bytes[body] | bytes[body + 1] << 8 | bytes[body + 2] << 16 |
                               static_cast<std::uint32_t>(bytes[body + 3]) << 24;
  CHECK(stored == crc32_reference(bytes.data(), body));
}

TEST_CASE("property: any single flipped payload byte is detected") {
  const auto bytes = serialize_checkpoint(sample_checkpoint());
  for (std::size_t pos : {std::size_t{20}, bytes.size() / 3, bytes.size() / 2, bytes.size() - 10, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] ^= 0x40;
    CHECK_THROWS_AS(parse_checkpoint(bad), CheckpointCorrupt);
  }
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK_THROWS_AS(parse_checkpoint(truncated), CheckpointCorrupt);
}

TEST_CASE("unsupported version and bad magic") {
  auto bytes = serialize_checkpoint(sample_checkpoint());
  auto v99 = bytes;
  v99[4] = 99;
  CHECK_THROWS_AS(parse_checkpoint(v99), CheckpointVersionError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(magic), CheckpointError);
}

TEST_CASE("corruption on disk is reported with the path") {
  const auto path = scratch("corrupt.ckpt");
  auto bytes = serialize_checkpoint(sample_checkpoint());
  bytes[bytes.size() / 2] ^= 1;
  write_file(path.string(), bytes);
  try {
    load_checkpoint(path.string());
    FAIL("expected CheckpointCorrupt");
  } catch (const CheckpointCorrupt& e) {
    CHECK(std::string(e.what()).find("corrupt.ckpt") != std::string::npos);
  }
}

TEST_CASE("resume compatibility") {
  const auto ckpt = sample_checkpoint();
  CHECK_NOTHROW(check_resumable(ckpt, ckpt.config));
  auto longer = ckpt.config;
  longer.total_steps = 100;
  CHECK_NOTHROW(check_resumable(ckpt, longer));
  auto other = ckpt.config;
  other.weights.lambda1 = 3;
  CHECK_THROWS_AS(check_resumable(ckpt, other), CheckpointConfigMismatch);
  auto shorter = ckpt.config;
  shorter.total_steps = 2;
  CHECK_THROWS_AS(check_resumable(ckpt, shorter), CheckpointConfigMismatch);
}
