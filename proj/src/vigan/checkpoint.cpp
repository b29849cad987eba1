// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <filesystem>

#include "vigan/image_codec.hpp"

namespace vigan {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'V', 'I', 'G', 'N'};

template <class U>
void put(std::vector<std::uint8_t>& out, U v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(U));
}

template <class U>
U get(const std::vector<std::uint8_t>& in, std::size_t at) {
  U v;
  std::memcpy(&v, in.data() + at, sizeof(U));
  return v;
}

struct Entry {
  std::string name;
  const Tensor<float>* tensor;
};

// Fixed tensor order: params, state, then each optimizer's m and v.
std::vector<Entry> entries(const Checkpoint& c) {
  std::vector<Entry> out;
  for (const auto& [k, v] : c.params.params) out.push_back({"param/" + k, &v});
  for (const auto& [k, v] : c.params.state) out.push_back({"state/" + k, &v});
  for (const auto* a : {&c.optim.enc, &c.optim.gen, &c.optim.rec, &c.optim.dis}) {
    for (const auto& [k, v] : a->m) out.push_back({"adam_m/" + k, &v});
    for (const auto& [k, v] : a->v) out.push_back({"adam_v/" + k, &v});
  }
  return out;
}

AdamState<float>* adam_for(Optimizers<float>& o, const std::string& name) {
  for (auto* a : {&o.enc, &o.gen, &o.rec, &o.dis})
    if (name.rfind(a->ns, 0) == 0) return a;
  return nullptr;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  json tensors = json::array();
  std::uint64_t offset = 0;
  const auto list = entries(c);
  for (const auto& e : list) {
    const std::uint64_t nbytes = static_cast<std::uint64_t>(e.tensor->size()) * sizeof(float);
    tensors.push_back({{"name", e.name}, {"dtype", "f32"}, {"shape", e.tensor->shape()}, {"offset", offset}});
    offset += nbytes;
  }
  json header = {{"config", to_json(c.config)},
                 {"step", c.step},
                 {"rng", c.rng_state},
                 {"optimizer_steps",
                  {{"enc", c.optim.enc.t}, {"gen", c.optim.gen.t}, {"rec", c.optim.rec.t}, {"dis", c.optim.dis.t}}},
                 {"tensors", tensors}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(16 + text.size() + offset + 4);
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& e : list) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(e.tensor->data().data());
    out.insert(out.end(), p, p + e.tensor->size() * sizeof(float));
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size()))));
  return out;
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion)
    throw CheckpointVersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  const std::size_t body = bytes.size() - 4;
  const auto stored = get<std::uint32_t>(bytes, body);
  const auto actual = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
  if (stored != actual) throw CheckpointCorrupt("checkpoint CRC mismatch: file is corrupt or truncated");

  const auto header_len = get<std::uint64_t>(bytes, 8);
  if (16 + header_len > body) throw CheckpointCorrupt("checkpoint header length exceeds file size");
  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw CheckpointCorrupt(std::string("checkpoint header: ") + e.what());
  }

  Checkpoint c;
  try {
    c.config = train_config_from_json(header.at("config"));
    c.step = header.at("step").get<std::int64_t>();
    c.rng_state = header.at("rng").get<std::string>();
    c.optim = make_optimizers<float>(c.config.optim, ParamStore<float>{});
    const auto& steps = header.at("optimizer_steps");
    c.optim.enc.t = steps.at("enc").get<std::int64_t>();
    c.optim.gen.t = steps.at("gen").get<std::int64_t>();
    c.optim.rec.t = steps.at("rec").get<std::int64_t>();
    c.optim.dis.t = steps.at("dis").get<std::int64_t>();
    const std::size_t payload = 16 + header_len;
    for (const auto& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      if (t.at("dtype").get<std::string>() != "f32") throw CheckpointError("tensor " + name + ": unsupported dtype");
      Shape shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const std::size_t n = static_cast<std::size_t>(numel(shape));
      if (payload + offset + n * sizeof(float) > body) throw CheckpointCorrupt("tensor " + name + " exceeds payload");
      std::vector<float> values(n);
      std::memcpy(values.data(), bytes.data() + payload + offset, n * sizeof(float));
      Tensor<float> tensor(std::move(shape), std::move(values));

      const auto slash = name.find('/');
      const std::string kind = name.substr(0, slash), key = name.substr(slash + 1);
      if (kind == "param") {
        c.params.params.emplace(key, std::move(tensor));
      } else if (kind == "state") {
        c.params.state.emplace(key, std::move(tensor));
      } else if (kind == "adam_m" || kind == "adam_v") {
        AdamState<float>* a = adam_for(c.optim, key);
        if (!a) throw CheckpointError("optimizer tensor " + name + " outside every namespace");
        (kind == "adam_m" ? a->m : a->v).emplace(key, std::move(tensor));
      } else {
        throw CheckpointError("unknown tensor kind in " + name);
      }
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  write_file(tmp, serialize_checkpoint(ckpt));
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  try {
    return parse_checkpoint(bytes);
  } catch (const CheckpointCorrupt& e) {
    throw CheckpointCorrupt(path + ": " + e.what());
  } catch (const CheckpointVersionError& e) {
    throw CheckpointVersionError(path + ": " + e.what());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

void check_resumable(const Checkpoint& ckpt, const TrainConfig& config) {
  const std::string field = resume_mismatch(ckpt.config, config);
  if (!field.empty()) throw CheckpointConfigMismatch("config field '" + field + "' differs from the checkpoint");
  if (ckpt.step > config.total_steps)
    throw CheckpointConfigMismatch("checkpoint is at step " + std::to_string(ckpt.step) + ", beyond total_steps " +
                                   std::to_string(config.total_steps));
}

}  // namespace vigan
