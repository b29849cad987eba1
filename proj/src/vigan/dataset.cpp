// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vigan/image_codec.hpp"
#include "vigan/rng.hpp"

namespace vigan {

namespace {

struct Segment {
  double x0, y0, x1, y1;
};

// Seven-segment strokes in unit coordinates (x right, y down).
constexpr std::array<Segment, 7> kSegments{{
    {0.2, 0.1, 0.8, 0.1},  // top
    {0.8, 0.1, 0.8, 0.5},  // upper right
    {0.8, 0.5, 0.8, 0.9},  // lower right
    {0.2, 0.9, 0.8, 0.9},  // bottom
    {0.2, 0.5, 0.2, 0.9},  // lower left
    {0.2, 0.1, 0.2, 0.5},  // upper left
    {0.2, 0.5, 0.8, 0.5},  // middle
}};

// Segment masks per class, bit i = kSegments[i].
constexpr std::array<std::uint8_t, kGlyphClasses> kClassSegments{
    0b0111111,  // 0
    0b0000110,  // 1
    0b1011011,  // 2
    0b1001111,  // 3
    0b1100110,  // 4
    0b1101101,  // 5
    0b1111101,  // 6
    0b0000111,  // 7
    0b1111111,  // 8
    0b1101111,  // 9
};

double point_segment_distance(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = s.x0 + t * dx - px, ey = s.y0 + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(s[i])) ++i;
  return s.substr(i);
}

}  // namespace

void GlyphDatasetConfig::validate() const {
  if (classes_per_slot < 2 || classes_per_slot > kGlyphClasses)
    throw std::invalid_argument("classes_per_slot must be in [2, " + std::to_string(kGlyphClasses) + "]");
  if (glyph_size < 4) throw std::invalid_argument("glyph_size must be >= 4");
  if (2 * glyph_size > grid_size)
    throw std::invalid_argument("glyph of size " + std::to_string(glyph_size) + " does not fit in half of a " +
                                std::to_string(grid_size) + " grid");
  if (n_samples < 0) throw std::invalid_argument("n_samples must be >= 0");
}

std::vector<std::uint8_t> glyph_bitmap(std::int64_t cls, std::int64_t glyph_size) {
  if (cls < 0 || cls >= kGlyphClasses) throw std::out_of_range("glyph class " + std::to_string(cls));
  const double half_width = std::max(0.75, glyph_size / 14.0) / static_cast<double>(glyph_size);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(glyph_size * glyph_size), 0);
  for (std::int64_t y = 0; y < glyph_size; ++y)
    for (std::int64_t x = 0; x < glyph_size; ++x) {
      const double px = (x + 0.5) / glyph_size, py = (y + 0.5) / glyph_size;
      for (std::size_t s = 0; s < kSegments.size(); ++s) {
        if (!(kClassSegments[cls] >> s & 1)) continue;
        if (point_segment_distance(px, py, kSegments[s]) <= half_width) {
          bits[y * glyph_size + x] = 1;
          break;
        }
      }
    }
  return bits;
}

Sample render_two_glyph(const GlyphDatasetConfig& config, const GlyphPlacement& p) {
  const std::int64_t g = config.grid_size, gs = config.glyph_size, k = config.classes_per_slot;
  Sample s;
  s.image = Tensor<float>({1, g, g}, -1.0f);
  auto stamp = [&](std::int64_t cls, std::int64_t ox, std::int64_t oy) {
    const auto bits = glyph_bitmap(cls, gs);
    for (std::int64_t y = 0; y < gs; ++y)
      for (std::int64_t x = 0; x < gs; ++x)
        if (bits[y * gs + x]) s.image[(oy + y) * g + ox + x] = 1.0f;
  };
  stamp(p.cls1, p.x1, p.y1);
  stamp(p.cls2, p.x2, p.y2);
  s.attributes.assign(static_cast<std::size_t>(2 * k), 0.0f);
  s.attributes[p.cls1] = 1.0f;
  s.attributes[k + p.cls2] = 1.0f;
  return s;
}

std::vector<GlyphPlacement> two_glyph_placements(const GlyphDatasetConfig& config) {
  config.validate();
  const std::int64_t g = config.grid_size, gs = config.glyph_size, half = g / 2;
  Rng rng(derive_seed(config.seed, "two_glyph"));
  std::uniform_int_distribution<std::int64_t> cls(0, config.classes_per_slot - 1);
  std::uniform_int_distribution<std::int64_t> left_x(0, half - gs);
  std::uniform_int_distribution<std::int64_t> right_x(half, g - gs);
  std::uniform_int_distribution<std::int64_t> any_y(0, g - gs);
  std::vector<GlyphPlacement> out(static_cast<std::size_t>(config.n_samples));
  for (auto& p : out) {
    p.cls1 = cls(rng);
    p.cls2 = cls(rng);
    p.x1 = left_x(rng);
    p.y1 = any_y(rng);
    p.x2 = right_x(rng);
    p.y2 = any_y(rng);
  }
  return out;
}

std::vector<Sample> generate_two_glyph(const GlyphDatasetConfig& config) {
  std::vector<Sample> out;
  for (const auto& p : two_glyph_placements(config)) out.push_back(render_two_glyph(config, p));
  return out;
}

std::string image_file_name(std::int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld.png", static_cast<long long>(id));
  return buf;
}

std::vector<Sample> load_folder(const std::string& dir, std::int64_t size, std::int64_t channels) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::ifstream csv(root / "attributes.csv");
  if (!csv) throw DatasetError("cannot open " + (root / "attributes.csv").string());
  std::string line;
  if (!std::getline(csv, line)) throw DatasetError("attributes.csv is empty");
  const auto header = split_csv(trim(line));
  if (header.size() < 2 || trim(header[0]) != "id") throw DatasetError("attributes.csv: header must start with id");
  for (std::size_t i = 1; i < header.size(); ++i)
    if (trim(header[i]) != "a_" + std::to_string(i - 1))
      throw DatasetError("attributes.csv: header column " + std::to_string(i) + " must be a_" + std::to_string(i - 1));
  const std::size_t k = header.size() - 1;

  std::vector<Sample> out;
  std::int64_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != k + 1)
      throw DatasetError("attributes.csv line " + std::to_string(line_no) + ": expected " + std::to_string(k + 1) +
                         " fields, got " + std::to_string(cells.size()));
    std::int64_t id = 0;
    const std::string id_text = trim(cells[0]);
    auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (ec != std::errc() || ptr != id_text.data() + id_text.size() || id < 0)
      throw DatasetError("attributes.csv line " + std::to_string(line_no) + ": bad id '" + id_text + "'");
    Sample s;
    for (std::size_t i = 1; i <= k; ++i) {
      const std::string cell = trim(cells[i]);
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size())
        throw DatasetError("attributes.csv line " + std::to_string(line_no) + ": malformed value '" + cell + "'");
      if (!(v >= 0.0 && v <= 1.0))
        throw DatasetError("attribute a_" + std::to_string(i - 1) + " = " + cell + " out of [0,1] in row " +
                           std::to_string(id));
      s.attributes.push_back(static_cast<float>(v));
    }
    const fs::path image_path = root / "images" / image_file_name(id);
    if (!fs::exists(image_path))
      throw DatasetError("missing image " + image_path.string() + " for row " + std::to_string(id));
    try {
      s.image = crop_and_resize(decode_png(read_file(image_path.string()), channels), size);
    } catch (const CodecError& e) {
      throw DatasetError(image_path.string() + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

void export_folder(const std::vector<Sample>& samples, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "images");
  std::ofstream csv(root / "attributes.csv", std::ios::trunc);
  if (!csv) throw DatasetError("cannot write " + (root / "attributes.csv").string());
  const std::size_t k = samples.empty() ? 0 : samples.front().attributes.size();
  csv.precision(9);
  csv << "id";
  for (std::size_t i = 0; i < k; ++i) csv << ",a_" << i;
  csv << "\n";
  for (std::size_t n = 0; n < samples.size(); ++n) {
    csv << n;
    for (float a : samples[n].attributes) csv << "," << a;
    csv << "\n";
    write_file((root / "images" / image_file_name(static_cast<std::int64_t>(n))).string(),
               encode_png(samples[n].image));
  }
  if (!csv) throw DatasetError("write failed for " + (root / "attributes.csv").string());
}

DatasetSplit load_dataset(const DatasetSource& source, std::int64_t image_size, std::int64_t channels) {
  if (source.holdout < 0) throw std::invalid_argument("holdout must be >= 0");
  std::vector<Sample> all;
  std::size_t n_train = 0;
  if (source.kind == "glyph") {
    GlyphDatasetConfig cfg = source.glyph;
    if (cfg.grid_size != image_size) throw std::invalid_argument("glyph grid_size differs from model image_size");
    if (channels != 1) throw std::invalid_argument("glyph datasets are single-channel");
    n_train = static_cast<std::size_t>(cfg.n_samples);
    cfg.n_samples += source.holdout;
    all = generate_two_glyph(cfg);
  } else if (source.kind == "folder") {
    all = load_folder(source.folder, image_size, channels);
    if (static_cast<std::int64_t>(all.size()) <= source.holdout)
      throw DatasetError("folder " + source.folder + " has too few rows for holdout " + std::to_string(source.holdout));
    n_train = all.size() - static_cast<std::size_t>(source.holdout);
  } else {
    throw std::invalid_argument("unknown dataset kind '" + source.kind + "'");
  }
  DatasetSplit split;
  split.train.assign(std::make_move_iterator(all.begin()), std::make_move_iterator(all.begin() + n_train));
  split.heldout.assign(std::make_move_iterator(all.begin() + n_train), std::make_move_iterator(all.end()));
  return split;
}

}  // namespace vigan
