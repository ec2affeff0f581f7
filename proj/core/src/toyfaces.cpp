// Copyright 2026 The symface Authors. All rights reserved.
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

#include "symface/toyfaces.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "symface/png_io.hpp"
#include "symface/rng.hpp"

namespace symface {
namespace {

using Color = std::array<float, 3>;

constexpr std::array<std::string_view, kPartCodeCount> kNames = {"background", "skin", "eye", "hair",
                                                                 "lip",        "cloth", "ear"};

constexpr std::array<std::array<std::uint8_t, 3>, kPartCodeCount> kPalette = {{
    {0, 0, 0},
    {230, 180, 150},
    {40, 90, 200},
    {90, 50, 20},
    {200, 40, 60},
    {60, 160, 80},
    {250, 220, 90},
}};

Color random_color(Rng& rng, float lo, float hi) {
  return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
          static_cast<float>(rng.uniform(lo, hi))};
}

Color shade(const Color& c, double factor) {
  Color out;
  for (int i = 0; i < 3; ++i) out[i] = static_cast<float>(std::clamp(c[i] * factor, 0.0, 1.0));
  return out;
}

Color offset(const Color& c, const Color& delta, double amount) {
  Color out;
  for (int i = 0; i < 3; ++i) out[i] = static_cast<float>(std::clamp(c[i] + delta[i] * amount, 0.0, 1.0));
  return out;
}

// Disc or ellipse paired about the midline. The geometry of each side is
// stored as an offset from the axis so that the two sides are evaluated with
// identical arithmetic when they are unperturbed.
struct PairedBlob {
  double offset_x[2];  // [left, right], distance from the midline
  double center_y[2];
  double radius[2];
  Color color[2];

  bool contains(int side, double dist_x, double y) const {
    const double dx = dist_x - offset_x[side];
    const double dy = y - center_y[side];
    return dx * dx + dy * dy <= radius[side] * radius[side];
  }
};

std::string index_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", i);
  return buf;
}

}  // namespace

std::string_view part_name(Part part) {
  const auto code = static_cast<std::size_t>(part);
  if (code >= kNames.size()) throw ParameterError("unknown part code " + std::to_string(code));
  return kNames[code];
}

Part part_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<Part>(i);
  throw ParameterError("unknown part name '" + std::string(name) + "'");
}

PartMaskSet::PartMaskSet(Plane<std::uint8_t> labels) : labels_(std::move(labels)) {
  for (std::uint8_t v : labels_.data())
    if (v >= kPartCodeCount) throw ParameterError("part label code " + std::to_string(v) + " is not a part");
}

BinaryMap PartMaskSet::mask(Part part) const {
  BinaryMap m(labels_.height(), labels_.width());
  const auto code = static_cast<std::uint8_t>(part);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = labels_.data()[i] == code ? 1 : 0;
  return m;
}

BinaryMap PartMaskSet::face() const {
  BinaryMap m(labels_.height(), labels_.width());
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = labels_.data()[i] != 0 ? 1 : 0;
  return m;
}

bool is_disjoint_cover(std::span<const BinaryMap> masks) {
  if (masks.empty()) return false;
  const std::size_t n = masks[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    int hits = 0;
    for (const BinaryMap& m : masks) {
      if (m.size() != n) return false;
      const std::uint8_t v = m.data()[i];
      if (v > 1) return false;
      hits += v;
    }
    if (hits != 1) return false;
  }
  return true;
}

std::span<const std::array<std::uint8_t, 3>> part_palette() { return kPalette; }

Sample generate_face(std::uint64_t seed, int size, double asymmetry, const FaceLayout& layout) {
  if (size < 32 || size % 16 != 0)
    throw ParameterError("generate_face: size must be >= 32 and a multiple of 16, got " + std::to_string(size));
  if (!(asymmetry >= 0.0 && asymmetry <= 1.0))
    throw ParameterError("generate_face: asymmetry must lie in [0, 1]");

  Rng rng(seed);
  const double s = size;
  const int mid = size / 2;

  const Color background = random_color(rng, 0.15f, 0.85f);
  const double bg_gradient = rng.uniform(-0.25, 0.25);

  const double cy = s * rng.uniform(0.50, 0.54);
  const double skin_rx = s * rng.uniform(0.22, 0.25);
  const double skin_ry = s * rng.uniform(0.27, 0.30);
  const Color skin = {static_cast<float>(rng.uniform(0.55, 0.95)), static_cast<float>(rng.uniform(0.40, 0.75)),
                      static_cast<float>(rng.uniform(0.30, 0.60))};

  const double hair_cy = cy - skin_ry * rng.uniform(0.20, 0.30);
  const double hair_rx = skin_rx * rng.uniform(1.15, 1.25);
  const double hair_ry = skin_ry * rng.uniform(1.00, 1.08);
  const double hair_cut = cy - skin_ry * rng.uniform(0.0, 0.15);
  const Color hair = random_color(rng, 0.05f, 0.55f);
  const double hair_freq = rng.uniform(0.6, 1.2);

  const double ear_off = skin_rx * rng.uniform(0.95, 1.02);
  const double ear_y = cy - skin_ry * rng.uniform(0.0, 0.12);
  const double ear_r = s * rng.uniform(0.045, 0.055);
  const Color ear_color = shade(skin, rng.uniform(0.85, 0.95));

  const double eye_off = s * rng.uniform(0.095, 0.11);
  const double eye_y = cy - skin_ry * rng.uniform(0.15, 0.25);
  const double eye_r = s * rng.uniform(0.04, 0.048);
  const Color eye_color = random_color(rng, 0.05f, 0.9f);

  const double lip_cy = cy + skin_ry * rng.uniform(0.45, 0.55);
  const double lip_rx = s * rng.uniform(0.07, 0.09);
  const double lip_ry = s * rng.uniform(0.025, 0.035);
  const Color lip = {static_cast<float>(rng.uniform(0.55, 0.9)), static_cast<float>(rng.uniform(0.1, 0.35)),
                     static_cast<float>(rng.uniform(0.15, 0.4))};

  const double cloth_top = s * rng.uniform(0.86, 0.90);
  const double cloth_half = s * rng.uniform(0.28, 0.36);
  const Color cloth = random_color(rng, 0.1f, 0.9f);

  // Right-side perturbation; drawn unconditionally so the stream layout does
  // not depend on the asymmetry value.
  const double eye_dx = rng.uniform(0.0, 1.0) * 0.025 * s;
  const double eye_dy = rng.uniform(-1.0, 1.0) * 0.025 * s;
  const Color eye_delta = {static_cast<float>(rng.uniform(-0.3, 0.3)), static_cast<float>(rng.uniform(-0.3, 0.3)),
                           static_cast<float>(rng.uniform(-0.3, 0.3))};
  const double ear_dy = rng.uniform(-1.0, 1.0) * 0.03 * s;
  const double ear_dr = rng.uniform(-0.2, 0.2);
  const Color ear_delta = {static_cast<float>(rng.uniform(-0.3, 0.3)), static_cast<float>(rng.uniform(-0.3, 0.3)),
                           static_cast<float>(rng.uniform(-0.3, 0.3))};

  const double a = asymmetry;
  PairedBlob eyes{{eye_off, eye_off + a * eye_dx},
                  {eye_y, eye_y + a * eye_dy},
                  {eye_r, eye_r},
                  {eye_color, offset(eye_color, eye_delta, a)}};
  PairedBlob ears{{ear_off, ear_off},
                  {ear_y, ear_y + a * ear_dy},
                  {ear_r, ear_r * (1.0 + a * ear_dr)},
                  {ear_color, offset(ear_color, ear_delta, a)}};

  Sample sample;
  sample.image = Image(size, size, 3);
  Plane<std::uint8_t> labels(size, size, 0);
  sample.midline_x = mid;
  sample.asymmetry = asymmetry;
  sample.seed = seed;

  for (int r = 0; r < size; ++r) {
    const double y = r;
    for (int c = 0; c < size; ++c) {
      // Every symmetric quantity below depends on |c - mid| only.
      const double dist = std::abs(c - mid);
      const int side = c > mid ? 1 : 0;

      Part part = Part::kBackground;
      Color color = shade(background, 1.0 + bg_gradient * (y / s - 0.5));

      const double hx = dist / hair_rx, hy = (y - hair_cy) / hair_ry;
      if (layout.hair && hx * hx + hy * hy <= 1.0 && y <= hair_cut) {
        part = Part::kHair;
        color = shade(hair, 1.0 + 0.12 * std::sin(dist * hair_freq + y * 0.35));
      }
      if (layout.ears && ears.contains(side, dist, y)) {
        part = Part::kEar;
        color = ears.color[side];
      }
      const double sx = dist / skin_rx, sy = (y - cy) / skin_ry;
      const double sr = sx * sx + sy * sy;
      if (sr <= 1.0) {
        part = Part::kSkin;
        color = shade(skin, 1.0 - 0.18 * sr);
      }
      if (layout.cloth && y >= cloth_top && dist <= cloth_half + (y - cloth_top) * 0.8) {
        part = Part::kCloth;
        color = shade(cloth, 1.0 - 0.1 * (dist / s));
      }
      if (layout.eyes && eyes.contains(side, dist, y)) {
        part = Part::kEye;
        const double dx = dist - eyes.offset_x[side], dy = y - eyes.center_y[side];
        const bool in_pupil = dx * dx + dy * dy <= 0.2 * eyes.radius[side] * eyes.radius[side];
        color = in_pupil ? shade(eyes.color[side], 0.35) : eyes.color[side];
      }
      const double lx = dist / lip_rx, ly = (y - lip_cy) / lip_ry;
      if (layout.lips && lx * lx + ly * ly <= 1.0) {
        part = Part::kLip;
        color = shade(lip, 1.0 - 0.25 * std::abs(ly));
      }

      labels(r, c) = static_cast<std::uint8_t>(part);
      for (int ch = 0; ch < 3; ++ch) sample.image.at(r, c, ch) = color[ch];
    }
  }
  sample.parts = PartMaskSet(std::move(labels));
  return sample;
}

std::vector<Sample> generate_faces(std::uint64_t seed, int count, int size, double asymmetry) {
  std::vector<Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(generate_face(seed + static_cast<std::uint64_t>(i), size, asymmetry));
  return out;
}

DatasetManifest write_dataset(std::span<const Sample> samples, const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  DatasetManifest manifest;
  manifest.count = static_cast<int>(samples.size());
  manifest.size = samples.empty() ? 0 : samples.front().size();
  std::error_code ec;
  fs::create_directories(directory / "images", ec);
  fs::create_directories(directory / "parts", ec);
  if (ec) throw IoError("cannot create dataset directory " + directory.string() + ": " + ec.message());

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.size() != manifest.size) throw ParameterError("write_dataset: samples differ in size");
    const std::string name = index_name(static_cast<int>(i)) + ".png";
    png::write_rgb(directory / "images" / name, s.image);
    png::write_indexed(directory / "parts" / name, s.parts.labels(), part_palette());
    manifest.seeds.push_back(s.seed);
    manifest.asymmetry.push_back(s.asymmetry);
  }

  nlohmann::json j;
  j["format_version"] = manifest.format_version;
  j["count"] = manifest.count;
  j["size"] = manifest.size;
  j["seeds"] = manifest.seeds;
  j["asymmetry"] = manifest.asymmetry;
  std::ofstream out(directory / "manifest.json");
  if (!out) throw IoError("cannot write " + (directory / "manifest.json").string());
  out << j.dump(2) << "\n";
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& directory) {
  const auto path = directory / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IntegrityError("missing manifest " + path.string());
  DatasetManifest m;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    m.format_version = j.at("format_version").get<int>();
    m.count = j.at("count").get<int>();
    m.size = j.at("size").get<int>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.asymmetry = j.at("asymmetry").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("malformed manifest " + path.string() + ": " + e.what());
  }
  if (m.format_version != 1)
    throw IntegrityError("unsupported dataset format_version " + std::to_string(m.format_version));
  if (m.count < 0 || static_cast<std::size_t>(m.count) != m.seeds.size() ||
      m.seeds.size() != m.asymmetry.size())
    throw IntegrityError("manifest count does not match its seed/asymmetry lists");
  return m;
}

std::vector<Sample> read_dataset(const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  const DatasetManifest m = read_manifest(directory);

  for (const char* sub : {"images", "parts"}) {
    std::error_code ec;
    int files = 0;
    for (const auto& entry : fs::directory_iterator(directory / sub, ec))
      if (entry.path().extension() == ".png") ++files;
    if (ec) throw IntegrityError("missing directory " + (directory / sub).string());
    if (files != m.count)
      throw IntegrityError(std::string(sub) + "/ holds " + std::to_string(files) + " files, manifest says " +
                           std::to_string(m.count));
  }

  std::vector<Sample> out;
  out.reserve(m.count);
  for (int i = 0; i < m.count; ++i) {
    const std::string id = index_name(i);
    const auto image_path = directory / "images" / (id + ".png");
    const auto parts_path = directory / "parts" / (id + ".png");
    if (!fs::exists(image_path)) throw IntegrityError("sample " + id + ": missing images/" + id + ".png");
    if (!fs::exists(parts_path)) throw IntegrityError("sample " + id + ": missing parts/" + id + ".png");
    Sample s;
    try {
      s.image = png::read_rgb(image_path);
      Plane<std::uint8_t> codes = png::read_codes(parts_path);
      s.parts = PartMaskSet(std::move(codes));
    } catch (const Error& e) {
      throw IntegrityError("sample " + id + ": " + e.what());
    }
    if (s.image.height() != m.size || s.image.width() != m.size || s.parts.height() != m.size ||
        s.parts.width() != m.size)
      throw IntegrityError("sample " + id + ": dimensions differ from manifest size " + std::to_string(m.size));
    s.midline_x = m.size / 2;
    s.seed = m.seeds[i];
    s.asymmetry = m.asymmetry[i];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace symface
