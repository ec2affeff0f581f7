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


#include "symface/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "symface/errors.hpp"
#include "symface/masking.hpp"
#include "symface/nn.hpp"
#include "symface/rng.hpp"

namespace symface {
namespace {

constexpr int kPixelGrid = 8;
const std::vector<int> kConvWidths = {16, 32, 64};

void check_pair(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": image shapes differ");
  if (a.data().empty()) throw ShapeError(std::string(what) + ": empty image");
}

std::vector<double> area_downsample(const Image& img, int grid) {
  const int H = img.height(), W = img.width(), C = img.channels();
  if (H < grid || W < grid) throw ShapeError("flatten_pixels: image smaller than the feature grid");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(grid) * grid * C);
  for (int ch = 0; ch < C; ++ch)
    for (int gr = 0; gr < grid; ++gr)
      for (int gc = 0; gc < grid; ++gc) {
        const int r0 = gr * H / grid, r1 = (gr + 1) * H / grid;
        const int c0 = gc * W / grid, c1 = (gc + 1) * W / grid;
        double s = 0.0;
        for (int r = r0; r < r1; ++r)
          for (int c = c0; c < c1; ++c) s += img.at(r, c, ch);
        out.push_back(s / ((r1 - r0) * (c1 - c0)));
      }
  return out;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, Eigen::VectorXd& mean) {
  mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  cov.diagonal().array() += 1e-6;
  return cov;
}

}  // namespace

FeatureExtractor FeatureExtractor::flatten_pixels() {
  FeatureExtractor f;
  f.kind_ = Kind::kFlattenPixels;
  f.dims_ = kPixelGrid * kPixelGrid * 3;
  return f;
}

FeatureExtractor FeatureExtractor::random_conv(std::uint64_t seed, int dims) {
  if (dims <= 0) throw ParameterError("random_conv: dims must be positive");
  FeatureExtractor f;
  f.kind_ = Kind::kRandomConv;
  f.dims_ = dims;
  f.encoder_ = std::make_shared<const RandomConvEncoder<double>>(seed, kConvWidths);
  int width = 0;
  for (int w : kConvWidths) width += w;
  Rng rng = Rng::derive(seed, {0x9E0});
  f.projection_.resize(dims, width);
  for (int r = 0; r < dims; ++r)
    for (int c = 0; c < width; ++c) f.projection_(r, c) = rng.normal() / std::sqrt(static_cast<double>(width));
  return f;
}

FeatureExtractor FeatureExtractor::external(std::filesystem::path csv) {
  FeatureExtractor f;
  f.kind_ = Kind::kExternal;
  f.csv_ = std::move(csv);
  f.dims_ = static_cast<int>(read_feature_csv(f.csv_).cols());
  return f;
}

Eigen::MatrixXd FeatureExtractor::extract(const std::vector<Image>& images) const {
  if (kind_ == Kind::kExternal) {
    Eigen::MatrixXd m = read_feature_csv(csv_);
    if (m.rows() != static_cast<Eigen::Index>(images.size()))
      throw ShapeError("external features: " + csv_.string() + " has " + std::to_string(m.rows()) +
                       " rows for " + std::to_string(images.size()) + " images");
    return m;
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), dims_);
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (kind_ == Kind::kFlattenPixels) {
      const auto v = area_downsample(images[n], kPixelGrid);
      if (static_cast<int>(v.size()) != dims_) throw ShapeError("flatten_pixels: expected 3-channel images");
      for (int k = 0; k < dims_; ++k) out(static_cast<Eigen::Index>(n), k) = v[static_cast<std::size_t>(k)];
      continue;
    }
    Eigen::VectorXd pooled(projection_.cols());
    int k = 0;
    for (const auto& s : stages(images[n])) {
      const auto v = s.values();
      const int C = s.dim(1);
      const std::size_t hw = v.size() / static_cast<std::size_t>(C);
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) acc += v[static_cast<std::size_t>(c) * hw + p];
        pooled(k++) = acc / static_cast<double>(hw);
      }
    }
    out.row(static_cast<Eigen::Index>(n)) = (projection_ * pooled).transpose();
  }
  return out;
}

std::vector<ad::Tensor<double>> FeatureExtractor::stages(const Image& image) const {
  if (kind_ == Kind::kExternal) throw ParameterError("the external feature extractor has no activations");
  ad::NoGradGuard guard;
  const auto x = nn::images_to_tensor<double>({image});
  if (kind_ == Kind::kFlattenPixels) return {x};
  return encoder_->stages(x);
}

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols())
    throw ShapeError("frechet_distance: feature widths differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()) + ")");
  if (a.rows() < 2 || b.rows() < 2) throw ShapeError("frechet_distance: need at least two samples per set");
  if (!a.allFinite() || !b.allFinite()) throw NumericError("frechet_distance: non-finite features");

  Eigen::VectorXd mu_a, mu_b;
  const Eigen::MatrixXd sa = covariance(a, mu_a);
  const Eigen::MatrixXd sb = covariance(b, mu_b);

  // Tr (Sa Sb)^1/2 = Tr (Sa^1/2 Sb Sa^1/2)^1/2, and the inner product is
  // symmetric, so a self-adjoint eigensolver applies.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(sa);
  const Eigen::VectorXd la = ea.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd root_a = ea.eigenvectors() * la.cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(inner, Eigen::EigenvaluesOnly);
  double tr_root = 0.0;
  for (Eigen::Index k = 0; k < ei.eigenvalues().size(); ++k) {
    const double l = ei.eigenvalues()(k);
    if (l < -1e-6) throw NumericError("frechet_distance: covariance product has eigenvalue " + std::to_string(l));
    tr_root += std::sqrt(std::max(l, 0.0));
  }
  const double d = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_root;
  if (!std::isfinite(d)) throw NumericError("frechet_distance: result is not finite");
  return d;
}

double perceptual_distance(const FeatureExtractor& extractor, const Image& x, const Image& xhat) {
  check_pair(x, xhat, "perceptual_distance");
  if (extractor.kind() == FeatureExtractor::Kind::kFlattenPixels) return mean_squared_error(x, xhat);
  const auto fa = extractor.stages(x);
  const auto fb = extractor.stages(xhat);
  double total = 0.0;
  for (std::size_t s = 0; s < fa.size(); ++s) {
    const auto va = fa[s].values(), vb = fb[s].values();
    const int C = fa[s].dim(1);
    const std::size_t hw = va.size() / static_cast<std::size_t>(C);
    double acc = 0.0;
    for (std::size_t p = 0; p < hw; ++p) {
      double na = 0.0, nb = 0.0;
      for (int c = 0; c < C; ++c) {
        na += va[c * hw + p] * va[c * hw + p];
        nb += vb[c * hw + p] * vb[c * hw + p];
      }
      na = std::sqrt(na) + 1e-10;
      nb = std::sqrt(nb) + 1e-10;
      for (int c = 0; c < C; ++c) {
        const double d = va[c * hw + p] / na - vb[c * hw + p] / nb;
        acc += d * d;
      }
    }
    total += acc / static_cast<double>(hw);
  }
  return total;
}

double mean_abs_error(const Image& a, const Image& b) {
  check_pair(a, b, "mean_abs_error");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += std::abs(double(a.data()[i]) - double(b.data()[i]));
  return s / static_cast<double>(a.data().size());
}

double mean_squared_error(const Image& a, const Image& b) {
  check_pair(a, b, "mean_squared_error");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = double(a.data()[i]) - double(b.data()[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.data().size());
}

double psnr(const Image& a, const Image& b) {
  const double mse = mean_squared_error(a, b);
  return mse == 0.0 ? std::numeric_limits<double>::infinity() : -10.0 * std::log10(mse);
}

double symmetry_error(const Sample& sample, const Image& inpainted, Part organ) {
  if (!inpainted.same_shape(sample.image)) throw ShapeError("symmetry_error: image does not match the sample");
  const BinaryMap labels = sample.parts.mask(organ);
  const int H = labels.height(), W = labels.width(), m = sample.midline_x;
  double sum = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < H; ++r)
    for (int c = m + 1; c < W; ++c) {
      const int mc = 2 * m - c;
      if (mc < 0 || !labels(r, c) || !labels(r, mc)) continue;
      for (int ch = 0; ch < inpainted.channels(); ++ch)
        sum += std::abs(double(inpainted.at(r, c, ch)) - double(inpainted.at(r, mc, ch)));
      n += static_cast<std::size_t>(inpainted.channels());
    }
  if (n == 0)
    throw OrganNotFoundError("no " + std::string(part_name(organ)) + " pixels mirror each other across the midline");
  return sum / static_cast<double>(n);
}

Eigen::MatrixXd read_feature_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open feature file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
      } catch (const std::logic_error&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": non-numeric feature value");
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": ragged feature row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path.string() + ": no feature rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

void write_feature_csv(const std::filesystem::path& path, const Eigen::MatrixXd& features) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  char buf[32];
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", features(r, c));
      os << (c ? "," : "") << buf;
    }
    os << '\n';
  }
  if (!os.flush()) throw IoError("write failed for " + path.string());
}

}  // namespace symface
