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


#include "symface/scs.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "symface/checkpoint.hpp"
#include "symface/errors.hpp"
#include "symface/masking.hpp"
#include "symface/png_io.hpp"

namespace symface {
namespace {

void check_same(const Image& image, const BinaryMap& mask, const char* what) {
  if (image.height() != mask.height() || image.width() != mask.width())
    throw ShapeError(std::string(what) + ": mask does not match image");
}

Image mirror_fill_impl(const Image& image, const BinaryMap& mask, int midline) {
  Image out = image;
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c) {
      if (!mask(r, c)) continue;
      const int src = mirror_column(c, midline, image.width());
      for (int ch = 0; ch < image.channels(); ++ch)
        out.at(r, c, ch) = mask(r, src) ? 0.5f : image.at(r, src, ch);
    }
  return out;
}

Image local_fill_impl(const Image& image, const BinaryMap& mask, int radius) {
  const int H = image.height(), W = image.width(), C = image.channels();
  Image out = image;
  BinaryMap known(H, W);
  std::size_t missing = 0;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      known(r, c) = mask(r, c) ? 0 : 1;
      missing += mask(r, c) ? 1 : 0;
    }
  if (missing == known.size()) {
    std::fill(out.data().begin(), out.data().end(), 0.5f);
    return out;
  }
  // Jacobi-style rounds: each round fills from the pixels known before it,
  // so the result does not depend on scan order.
  struct Fill {
    int r, c;
    std::array<float, 4> v;
  };
  std::vector<Fill> round;
  while (missing > 0) {
    round.clear();
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        if (known(r, c)) continue;
        std::array<double, 4> acc{};
        int n = 0;
        for (int rr = std::max(0, r - radius); rr <= std::min(H - 1, r + radius); ++rr)
          for (int cc = std::max(0, c - radius); cc <= std::min(W - 1, c + radius); ++cc)
            if (known(rr, cc)) {
              ++n;
              for (int ch = 0; ch < C; ++ch) acc[ch] += out.at(rr, cc, ch);
            }
        if (n == 0) continue;
        Fill f{r, c, {}};
        for (int ch = 0; ch < C; ++ch) f.v[ch] = static_cast<float>(acc[ch] / n);
        round.push_back(f);
      }
    for (const Fill& f : round) {
      for (int ch = 0; ch < C; ++ch) out.at(f.r, f.c, ch) = f.v[ch];
      known(f.r, f.c) = 1;
    }
    missing -= round.size();
  }
  return out;
}

void check_tile(const BinaryMap& map, int i, int j, int K) {
  if (K <= 0 || i < 0 || j < 0 || (i + 1) * K > map.height() || (j + 1) * K > map.width())
    throw ParameterError("tile (" + std::to_string(i) + ", " + std::to_string(j) + ") of size " + std::to_string(K) +
                         " is outside the image");
}

BinaryMap with_tile(const BinaryMap& map, int i, int j, int K) {
  BinaryMap out = map;
  for (int r = i * K; r < (i + 1) * K; ++r)
    for (int c = j * K; c < (j + 1) * K; ++c) out(r, c) = 1;
  return out;
}

}  // namespace

Inpainter Inpainter::model(std::shared_ptr<const Generator<float>> generator) {
  if (!generator) throw ParameterError("Inpainter::model: null generator");
  return Inpainter(Kind::kModel, 0.0f, 0, std::move(generator));
}

Inpainter Inpainter::mirror_fill() { return Inpainter(Kind::kMirrorFill, 0.5f, 0, nullptr); }

Inpainter Inpainter::constant_fill(float value) { return Inpainter(Kind::kConstantFill, value, 0, nullptr); }

Inpainter Inpainter::local_fill(int radius) {
  if (radius < 1) throw ParameterError("local_fill: radius must be >= 1");
  return Inpainter(Kind::kLocalFill, 0.0f, radius, nullptr);
}

Inpainter Inpainter::from_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string() : spec.substr(colon + 1);
  try {
    if (head == "mirror" && colon == std::string::npos) return mirror_fill();
    if (head == "constant") return constant_fill(arg.empty() ? 0.5f : std::stof(arg));
    if (head == "local") return local_fill(arg.empty() ? 5 : std::stoi(arg));
  } catch (const std::logic_error&) {
    throw ParameterError("bad inpainter argument in '" + spec + "'");
  }
  if (head == "model" && !arg.empty())
    return model(std::make_shared<const Generator<float>>(load_generator<float>(load_checkpoint(arg))));
  throw ParameterError("unknown inpainter '" + spec + "' (expected model:CKPT, mirror, constant:V or local:R)");
}

std::string Inpainter::describe() const {
  switch (kind_) {
    case Kind::kModel: return "model";
    case Kind::kMirrorFill: return "mirror";
    case Kind::kConstantFill: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "constant:%g", value_);
      return buf;
    }
    case Kind::kLocalFill: return "local:" + std::to_string(radius_);
  }
  return "?";
}

Image Inpainter::operator()(const Image& image, const BinaryMap& mask, int midline) const {
  check_same(image, mask, "inpaint");
  switch (kind_) {
    case Kind::kModel: return generator_->inpaint(image, mask, true);
    case Kind::kMirrorFill: return mirror_fill_impl(image, mask, midline);
    case Kind::kConstantFill: {
      Image out = image;
      for (int r = 0; r < image.height(); ++r)
        for (int c = 0; c < image.width(); ++c)
          if (mask(r, c))
            for (int ch = 0; ch < image.channels(); ++ch) out.at(r, c, ch) = value_;
      return out;
    }
    case Kind::kLocalFill: return local_fill_impl(image, mask, radius_);
  }
  throw ParameterError("unknown inpainter kind");
}

double region_mean_abs_diff(const Image& a, const Image& b, const BinaryMap& region) {
  if (!a.same_shape(b)) throw ShapeError("region_mean_abs_diff: image shapes differ");
  check_same(a, region, "region_mean_abs_diff");
  double sum = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < a.height(); ++r)
    for (int c = 0; c < a.width(); ++c) {
      if (!region(r, c)) continue;
      for (int ch = 0; ch < a.channels(); ++ch) sum += std::abs(double(a.at(r, c, ch)) - double(b.at(r, c, ch)));
      n += static_cast<std::size_t>(a.channels());
    }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

bool tile_overlaps(const BinaryMap& map, int i, int j, int K) {
  check_tile(map, i, j, K);
  for (int r = i * K; r < (i + 1) * K; ++r)
    for (int c = j * K; c < (j + 1) * K; ++c)
      if (map(r, c)) return true;
  return false;
}

double influence(const Inpainter& inpainter, const Sample& sample, const BinaryMap& held_out, int i, int j, int K) {
  check_same(sample.image, held_out, "influence");
  if (tile_overlaps(held_out, i, j, K)) throw ParameterError("influence: tile overlaps the held-out region");
  const Image a = inpainter(sample.image, held_out, sample.midline_x);
  const Image b = inpainter(sample.image, with_tile(held_out, i, j, K), sample.midline_x);
  return region_mean_abs_diff(a, b, held_out);
}

double InfluenceHeatmap::max_value() const {
  double m = 0.0;
  for (double v : values.data()) m = std::max(m, v);
  return m;
}

InfluenceHeatmap heatmap(const Inpainter& inpainter, const Sample& sample, const BinaryMap& held_out, int K,
                         int workers) {
  check_same(sample.image, held_out, "heatmap");
  const int H = sample.image.height(), W = sample.image.width();
  if (K <= 0 || H % K != 0 || W % K != 0)
    throw ParameterError("heatmap: tile size " + std::to_string(K) + " does not divide the image side " +
                         std::to_string(H));
  InfluenceHeatmap map;
  map.K = K;
  map.values = Plane<double>(H / K, W / K, 0.0);
  map.excluded = BinaryMap(H / K, W / K, 0);
  map.held_out = held_out;
  map.face = sample.parts.face();

  std::vector<std::pair<int, int>> tiles;
  for (int i = 0; i < map.rows(); ++i)
    for (int j = 0; j < map.cols(); ++j) {
      const bool excluded = !tile_overlaps(map.face, i, j, K) || tile_overlaps(held_out, i, j, K);
      map.excluded(i, j) = excluded ? 1 : 0;
      if (!excluded) tiles.emplace_back(i, j);
    }
  if (tiles.empty()) return map;

  const Image base = inpainter(sample.image, held_out, sample.midline_x);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t t = next++; t < tiles.size(); t = next++) {
      try {
        const auto [i, j] = tiles[t];
        const Image b = inpainter(sample.image, with_tile(held_out, i, j, K), sample.midline_x);
        map.values(i, j) = region_mean_abs_diff(base, b, held_out);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tiles.size();
      }
    }
  };
  const int n = std::clamp(workers, 1, static_cast<int>(tiles.size()));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return map;
}

std::string_view scs_target_name(ScsTarget target) { return target == ScsTarget::kEye ? "eye" : "half"; }

ScsTarget scs_target_from_name(std::string_view name) {
  if (name == "eye") return ScsTarget::kEye;
  if (name == "half" || name == "half_face") return ScsTarget::kHalfFace;
  throw ParameterError("unknown SCS target '" + std::string(name) + "' (expected eye or half)");
}

ScsRegions scs_regions(const Sample& sample, ScsTarget target) {
  ScsRegions out;
  if (target == ScsTarget::kEye) {
    out.held_out = organ_mask(sample, Part::kEye, Side::kRight).grid;
    out.mirror = reflect(out.held_out, sample.midline_x);
    return out;
  }
  // Both eyes must exist for the score to mean anything.
  organ_mask(sample, Part::kEye, Side::kLeft);
  organ_mask(sample, Part::kEye, Side::kRight);
  out.held_out = half_face_mask(sample, Side::kRight).grid;
  BinaryMap organs = union_of(union_of(sample.parts.mask(Part::kEye), sample.parts.mask(Part::kLip)),
                              sample.parts.mask(Part::kEar));
  out.mirror = reflect(intersection_of(organs, out.held_out), sample.midline_x);
  return out;
}

double scs_from_heatmap(const InfluenceHeatmap& map, const BinaryMap& mirror) {
  const double peak = map.max_value();
  if (peak <= 0.0) return 0.0;
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < map.rows(); ++i)
    for (int j = 0; j < map.cols(); ++j)
      if (!map.excluded(i, j) && tile_overlaps(mirror, i, j, map.K)) {
        sum += map.values(i, j) / peak;
        ++n;
      }
  return n == 0 ? 0.0 : sum / n;
}

ScsResult scs(const Inpainter& inpainter, const Sample& sample, ScsTarget target, int workers) {
  ScsResult out;
  out.regions = scs_regions(sample, target);
  double total = 0.0;
  for (std::size_t k = 0; k < kScsTileSizes.size(); ++k) {
    out.heatmaps.push_back(heatmap(inpainter, sample, out.regions.held_out, kScsTileSizes[k], workers));
    out.per_k[k] = scs_from_heatmap(out.heatmaps.back(), out.regions.mirror);
    total += out.per_k[k];
  }
  out.value = std::clamp(total / static_cast<double>(kScsTileSizes.size()), 0.0, 1.0);
  return out;
}

Image render_heatmap(const InfluenceHeatmap& map) {
  const int H = map.held_out.height(), W = map.held_out.width();
  const double peak = map.max_value();
  Image out(H, W, 3);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const double v = map.values(r / map.K, c / map.K);
      const float g = peak > 0.0 ? static_cast<float>(v / peak) : 0.0f;
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = g;
    }
  const BinaryMap& face = map.face;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      if (!face(r, c)) continue;
      const bool edge = (r > 0 && !face(r - 1, c)) || (r + 1 < H && !face(r + 1, c)) || (c > 0 && !face(r, c - 1)) ||
                        (c + 1 < W && !face(r, c + 1));
      if (edge) {
        out.at(r, c, 0) = 1.0f;
        out.at(r, c, 1) = 0.0f;
        out.at(r, c, 2) = 0.0f;
      }
    }
  return out;
}

void write_heatmap_png(const std::filesystem::path& path, const InfluenceHeatmap& map) {
  png::write_rgb(path, render_heatmap(map));
}

void write_heatmap_csv(const std::filesystem::path& path, const std::vector<InfluenceHeatmap>& maps) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "i,j,K,value,excluded\n";
  char buf[64];
  for (const auto& m : maps)
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.values(i, j));
        os << i << ',' << j << ',' << m.K << ',' << buf << ',' << int(m.excluded(i, j)) << '\n';
      }
  if (!os.flush()) throw IoError("write failed for " + path.string());
}

std::vector<HeatmapRow> read_heatmap_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "i,j,K,value,excluded")
    throw FormatError(path.string() + ": unexpected heatmap CSV header");
  std::vector<HeatmapRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    HeatmapRow row;
    char c1, c2, c3, c4;
    int ex = 0;
    if (!(ss >> row.i >> c1 >> row.j >> c2 >> row.K >> c3 >> row.value >> c4 >> ex) || c1 != ',' || c2 != ',' ||
        c3 != ',' || c4 != ',')
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed heatmap row");
    row.excluded = ex != 0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace symface
