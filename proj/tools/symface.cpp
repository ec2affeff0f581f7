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

// symface command-line tool. Each subcommand parses its flags, checks the
// inputs it names, calls into the core library and writes a run manifest
// (run.json, or <output>.run.json for single-file outputs) describing the
// invocation.
//
// Exit codes: 0 ok, 2 usage or configuration, 3 data, 4 numeric.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "symface/checkpoint.hpp"
#include "symface/errors.hpp"
#include "symface/masking.hpp"
#include "symface/metrics.hpp"
#include "symface/png_io.hpp"
#include "symface/rng.hpp"
#include "symface/scs.hpp"
#include "symface/toyfaces.hpp"
#include "symface/trainer.hpp"

#ifndef SYMFACE_VERSION
#define SYMFACE_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace symface::cli {
namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

class UsageError : public Error {
 public:
  using Error::Error;
};

void require_file(const fs::path& p, const char* flag) {
  if (!fs::is_regular_file(p)) throw UsageError(std::string(flag) + ": no such file " + p.string());
}

void require_dir(const fs::path& p, const char* flag) {
  if (!fs::is_directory(p)) throw UsageError(std::string(flag) + ": no such directory " + p.string());
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json flags_of(const CLI::App& cmd) {
  nlohmann::json flags = nlohmann::json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_name() == "--help") continue;
    const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (opt->get_type_size() == 0) {
      flags[name] = opt->count() > 0;
    } else if (!opt->results().empty()) {
      flags[name] = opt->results().size() == 1 ? nlohmann::json(opt->results().front()) : nlohmann::json(opt->results());
    } else {
      flags[name] = opt->get_default_str();
    }
  }
  return flags;
}

void write_manifest(const fs::path& path, const CLI::App& cmd, const nlohmann::json& extra = {}) {
  nlohmann::json j;
  j["command"] = cmd.get_name();
  j["flags"] = flags_of(cmd);
  j["symface_version"] = SYMFACE_VERSION;
  j["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                    {"cli11", CLI11_VERSION}};
  if (!extra.is_null()) j["details"] = extra;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

fs::path beside(const fs::path& output) {
  fs::path p = output;
  p += ".run.json";
  return p;
}

std::vector<Sample> load_samples(const fs::path& data, int limit) {
  std::vector<Sample> all = read_dataset(data);
  if (all.empty()) throw IntegrityError("dataset " + data.string() + " is empty");
  if (limit > 0 && limit < static_cast<int>(all.size())) all.resize(static_cast<std::size_t>(limit));
  return all;
}

// ------------------------------------------------------------ make-dataset

struct MakeDatasetArgs {
  fs::path out;
  int count = 0;
  int size = 64;
  std::uint64_t seed = 0;
  double asymmetry = 0.0;
};

void add_make_dataset(CLI::App& app, MakeDatasetArgs& a) {
  CLI::App* cmd = app.add_subcommand("make-dataset", "Render a toy-face dataset");
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--count", a.count, "Number of faces")->required()->check(CLI::PositiveNumber);
  cmd->add_option("--size", a.size, "Image side in pixels (multiple of 16, >= 32)")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Seed of the first face; face i uses seed + i")->capture_default_str();
  cmd->add_option("--asymmetry", a.asymmetry, "Right-side perturbation in [0, 1]")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

void run_make_dataset(const CLI::App& cmd, const MakeDatasetArgs& a) {
  if (a.size < 32 || a.size % 16 != 0) throw UsageError("--size must be >= 32 and a multiple of 16");
  const auto samples = generate_faces(a.seed, a.count, a.size, a.asymmetry);
  write_dataset(samples, a.out);
  write_manifest(a.out / "run.json", cmd);
  std::printf("wrote %d faces to %s\n", a.count, a.out.string().c_str());
}

// -------------------------------------------------------------------- train

struct TrainArgs {
  fs::path data, config, out, resume;
  int log_every = 10;
};

void add_train(CLI::App& app, TrainArgs& a) {
  CLI::App* cmd = app.add_subcommand("train", "Train the generator and critics");
  cmd->add_option("--data", a.data, "Dataset directory")->required();
  cmd->add_option("--config", a.config, "key = value config file")->required();
  cmd->add_option("--out", a.out, "Run directory (log.csv, checkpoints)")->required();
  cmd->add_option("--resume", a.resume, "Checkpoint to continue from");
  cmd->add_option("--log-every", a.log_every, "Progress line every N steps (0 = silent)")->capture_default_str();
}

void run_train(const CLI::App& cmd, const TrainArgs& a) {
  require_dir(a.data, "--data");
  require_file(a.config, "--config");
  if (!a.resume.empty()) require_file(a.resume, "--resume");
  const TrainConfig config = load_train_config(a.config);
  const auto dataset = load_samples(a.data, 0);

  fs::create_directories(a.out);
  write_manifest(a.out / "run.json", cmd, {{"config", to_config_text(config)}, {"seed", config.seed}});

  TrainOptions options;
  options.out_dir = a.out;
  if (!a.resume.empty()) options.resume = a.resume;
  const std::int64_t total = planned_steps(config, static_cast<int>(dataset.size()));
  options.on_step = [&](std::int64_t step, const LossReport& r) {
    if (!std::isfinite(r.total) || !std::isfinite(r.discriminator_total))
      throw NumericError("non-finite loss at step " + std::to_string(step));
    if (a.log_every > 0 && ((step + 1) % a.log_every == 0 || step + 1 == total))
      std::fprintf(stderr, "step %lld/%lld  G %.4f  D %.4f\n", static_cast<long long>(step + 1),
                   static_cast<long long>(total), r.total, r.discriminator_total);
  };
  const TrainSummary s = train(dataset, config, options);
  std::printf("trained to step %lld; checkpoint %s\n", static_cast<long long>(s.steps),
              s.final_checkpoint.string().c_str());
}

// ------------------------------------------------------------------ inpaint

struct InpaintArgs {
  fs::path ckpt, image, mask, out;
  bool no_composite = false;
};

void add_inpaint(CLI::App& app, InpaintArgs& a) {
  CLI::App* cmd = app.add_subcommand("inpaint", "Fill the hole of one image with a trained generator");
  cmd->add_option("--ckpt", a.ckpt, "Checkpoint")->required();
  cmd->add_option("--image", a.image, "RGB PNG")->required();
  cmd->add_option("--mask", a.mask, "8-bit PNG, nonzero = hole")->required();
  cmd->add_option("--out", a.out, "Output PNG")->required();
  cmd->add_flag("--no-composite", a.no_composite, "Keep the raw generator output on known pixels too");
}

BinaryMap read_mask(const fs::path& path) {
  const Plane<std::uint8_t> codes = png::read_codes(path);
  BinaryMap m(codes.height(), codes.width(), 0);
  for (int r = 0; r < codes.height(); ++r)
    for (int c = 0; c < codes.width(); ++c) m(r, c) = codes(r, c) != 0;
  return m;
}

void run_inpaint(const CLI::App& cmd, const InpaintArgs& a) {
  require_file(a.ckpt, "--ckpt");
  require_file(a.image, "--image");
  require_file(a.mask, "--mask");
  const Generator<float> g = load_generator<float>(load_checkpoint(a.ckpt));
  const Image image = png::read_rgb(a.image);
  const BinaryMap mask = read_mask(a.mask);
  if (mask.height() != image.height() || mask.width() != image.width())
    throw ShapeError("mask size differs from the image size");
  png::write_rgb(a.out, g.inpaint(image, mask, !a.no_composite));
  write_manifest(beside(a.out), cmd);
}

// ---------------------------------------------------------- scs / heatmap

struct ScsArgs {
  std::string inpainter;
  fs::path data, out;
  std::string target = "eye";
  int samples = 1;
  int workers = 1;
};

void add_scs_flags(CLI::App* cmd, ScsArgs& a) {
  cmd->add_option("--inpainter", a.inpainter, "model:CKPT | mirror | constant:V | local:R")->required();
  cmd->add_option("--data", a.data, "Dataset directory")->required();
  cmd->add_option("--target", a.target, "eye | half")->capture_default_str();
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--workers", a.workers, "Threads for the tile sweep")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_scs(CLI::App& app, ScsArgs& a) {
  CLI::App* cmd = app.add_subcommand("scs", "Symmetry concentration score over the first N samples");
  add_scs_flags(cmd, a);
  cmd->add_option("--samples", a.samples, "Samples to score (0 = all)")->check(CLI::NonNegativeNumber)->capture_default_str();
}

Inpainter make_inpainter(const std::string& spec) {
  if (spec.rfind("model:", 0) == 0) require_file(spec.substr(6), "--inpainter");
  try {
    return Inpainter::from_spec(spec);
  } catch (const ParameterError& e) {
    throw UsageError(std::string("--inpainter: ") + e.what());
  }
}

ScsTarget parse_target(const std::string& name) {
  try {
    return scs_target_from_name(name);
  } catch (const ParameterError& e) {
    throw UsageError(std::string("--target: ") + e.what());
  }
}

void write_heatmaps(const fs::path& dir, const std::vector<InfluenceHeatmap>& maps) {
  fs::create_directories(dir);
  for (const auto& m : maps) write_heatmap_png(dir / ("heatmap_K" + std::to_string(m.K) + ".png"), m);
  write_heatmap_csv(dir / "heatmap.csv", maps);
}

void run_scs(const CLI::App& cmd, const ScsArgs& a) {
  require_dir(a.data, "--data");
  const ScsTarget target = parse_target(a.target);
  const Inpainter inp = make_inpainter(a.inpainter);
  const auto samples = load_samples(a.data, a.samples);
  for (const auto& s : samples)
    if (s.size() % kScsTileSizes.back() != 0)
      throw UsageError("scs needs image sides divisible by " + std::to_string(kScsTileSizes.back()));

  fs::create_directories(a.out);
  std::ofstream per(a.out / "scs.csv");
  if (!per) throw IoError("cannot write " + (a.out / "scs.csv").string());
  per << "sample,seed,scs,scs_K16,scs_K32,scs_K64\n";
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ScsResult r = scs(inp, samples[i], target, a.workers);
    if (i == 0) write_heatmaps(a.out, r.heatmaps);
    per << i << ',' << samples[i].seed << ',' << fmt(r.value);
    for (double v : r.per_k) per << ',' << fmt(v);
    per << '\n';
    sum += r.value;
  }
  const double mean = sum / static_cast<double>(samples.size());
  std::ofstream(a.out / "scs.txt") << fmt(mean) << "\n";
  write_manifest(a.out / "run.json", cmd, {{"inpainter", inp.describe()}, {"samples", samples.size()}});
  std::printf("SCS(%s, %s) = %.6f over %zu sample(s)\n", inp.describe().c_str(),
              std::string(scs_target_name(target)).c_str(), mean, samples.size());
}

struct HeatmapArgs {
  ScsArgs base;
  int index = 0;
  std::vector<int> tiles;
};

void add_heatmap(CLI::App& app, HeatmapArgs& a) {
  CLI::App* cmd = app.add_subcommand("heatmap", "Influence heatmaps for one sample");
  add_scs_flags(cmd, a.base);
  cmd->add_option("--index", a.index, "Sample index in the dataset")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--tile", a.tiles, "Tile size K (repeatable; default 16, 32, 64)");
}

void run_heatmap(const CLI::App& cmd, const HeatmapArgs& a) {
  require_dir(a.base.data, "--data");
  const ScsTarget target = parse_target(a.base.target);
  const Inpainter inp = make_inpainter(a.base.inpainter);
  const auto samples = load_samples(a.base.data, 0);
  if (a.index >= static_cast<int>(samples.size()))
    throw UsageError("--index " + std::to_string(a.index) + " is past the end of the dataset");
  const Sample& s = samples[static_cast<std::size_t>(a.index)];
  std::vector<int> tiles = a.tiles;
  if (tiles.empty()) tiles.assign(kScsTileSizes.begin(), kScsTileSizes.end());
  for (int K : tiles)
    if (K <= 0 || s.size() % K != 0) throw UsageError("--tile " + std::to_string(K) + " does not divide the image");

  const ScsRegions regions = scs_regions(s, target);
  std::vector<InfluenceHeatmap> maps;
  for (int K : tiles) maps.push_back(heatmap(inp, s, regions.held_out, K, a.base.workers));
  write_heatmaps(a.base.out, maps);
  write_manifest(a.base.out / "run.json", cmd, {{"inpainter", inp.describe()}, {"sample_seed", s.seed}});
  for (const auto& m : maps)
    std::printf("K=%d  max influence %.6g  scs_K %.6f\n", m.K, m.max_value(), scs_from_heatmap(m, regions.mirror));
}

// --------------------------------------------------------------------- eval

struct EvalArgs {
  fs::path ckpt, data, out;
  std::string masks = "aggressive";
  std::string metrics = "fid,perc,pixel,symmetry";
  std::string features = "random:0";
  std::uint64_t seed = 0;
  int samples = 0;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  CLI::App* cmd = app.add_subcommand("eval", "Inpaint a dataset with random masks and report metrics");
  cmd->add_option("--ckpt", a.ckpt, "Checkpoint")->required();
  cmd->add_option("--data", a.data, "Dataset directory")->required();
  cmd->add_option("--masks", a.masks, "narrow | medium | wide | aggressive")->capture_default_str();
  cmd->add_option("--metrics", a.metrics, "Comma list of fid, perc, pixel, symmetry")->capture_default_str();
  cmd->add_option("--features", a.features, "flatten | random:SEED | external:CSV (fid/perc features)")
      ->capture_default_str();
  cmd->add_option("--seed", a.seed, "Mask seed; sample i uses derive(seed, i)")->capture_default_str();
  cmd->add_option("--samples", a.samples, "Samples to evaluate (0 = all)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", a.out, "report.csv")->required();
}

FeatureExtractor make_features(const std::string& spec) {
  if (spec == "flatten") return FeatureExtractor::flatten_pixels();
  if (spec.rfind("random:", 0) == 0) {
    try {
      return FeatureExtractor::random_conv(std::stoull(spec.substr(7)));
    } catch (const std::logic_error&) {
      throw UsageError("--features: bad seed in '" + spec + "'");
    }
  }
  if (spec.rfind("external:", 0) == 0) {
    require_file(spec.substr(9), "--features");
    return FeatureExtractor::external(spec.substr(9));
  }
  throw UsageError("--features: expected flatten, random:SEED or external:CSV");
}

void run_eval(const CLI::App& cmd, const EvalArgs& a) {
  require_file(a.ckpt, "--ckpt");
  require_dir(a.data, "--data");
  MaskKind kind;
  try {
    kind = mask_kind_from_name(a.masks);
  } catch (const ParameterError& e) {
    throw UsageError(std::string("--masks: ") + e.what());
  }
  std::map<std::string, bool> want = {{"fid", false}, {"perc", false}, {"pixel", false}, {"symmetry", false}};
  for (const auto& m : split(a.metrics, ',')) {
    if (!want.count(m)) throw UsageError("--metrics: unknown metric '" + m + "'");
    want[m] = true;
  }
  const FeatureExtractor features = make_features(a.features);
  if (want["perc"] && features.kind() == FeatureExtractor::Kind::kExternal)
    throw UsageError("--metrics perc needs pixel access; use --features flatten or random:SEED");

  const Generator<float> g = load_generator<float>(load_checkpoint(a.ckpt));
  const auto samples = load_samples(a.data, a.samples);
  if (want["fid"] && samples.size() < 2) throw UsageError("fid needs at least two samples");

  const MaskSpec spec = MaskSpec::preset(kind);
  std::vector<Image> real, fake;
  double mae = 0, mse = 0, psnr_sum = 0, perc = 0, sym = 0;
  int psnr_count = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const std::uint64_t mask_seed = Rng::derive(a.seed, {static_cast<std::uint64_t>(i)}).next_u64();
    const Mask mask = random_mask(spec, mask_seed, s.size());
    const Image out = g.inpaint(s.image, mask.grid, true);
    real.push_back(s.image);
    fake.push_back(out);
    mae += mean_abs_error(s.image, out);
    mse += mean_squared_error(s.image, out);
    const double p = psnr(s.image, out);
    if (std::isfinite(p)) {
      psnr_sum += p;
      ++psnr_count;
    }
    if (want["perc"]) perc += perceptual_distance(features, s.image, out);
    if (want["symmetry"]) {
      // symmetry is measured on a reconstruction of the held-out right eye
      const Mask eye = organ_mask(s, Part::kEye, Side::kRight);
      sym += symmetry_error(s, g.inpaint(s.image, eye.grid, true), Part::kEye);
    }
  }
  const double n = static_cast<double>(samples.size());
  std::vector<std::pair<std::string, double>> rows;
  if (want["fid"]) rows.emplace_back("fid", frechet_distance(features.extract(real), features.extract(fake)));
  if (want["perc"]) rows.emplace_back("perceptual", perc / n);
  if (want["pixel"]) {
    rows.emplace_back("mae", mae / n);
    rows.emplace_back("mse", mse / n);
    rows.emplace_back("psnr", psnr_count ? psnr_sum / psnr_count : INFINITY);
  }
  if (want["symmetry"]) rows.emplace_back("symmetry_eye", sym / n);
  for (const auto& [name, v] : rows)
    if (std::isnan(v)) throw NumericError("metric " + name + " is NaN");

  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  std::ofstream os(a.out);
  if (!os) throw IoError("cannot write " + a.out.string());
  os << "metric,value,samples\n";
  for (const auto& [name, v] : rows) os << name << ',' << fmt(v) << ',' << samples.size() << '\n';
  os.close();
  write_manifest(beside(a.out), cmd, {{"mask_seed", a.seed}, {"samples", samples.size()}});
  for (const auto& [name, v] : rows) std::printf("%-13s %.6g\n", name.c_str(), v);
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const ConfigError*>(&e)) return kExitUsage;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symface: symmetric face inpainting toolkit"};
  app.set_version_flag("--version", SYMFACE_VERSION);
  app.require_subcommand(1);

  MakeDatasetArgs make_args;
  TrainArgs train_args;
  InpaintArgs inpaint_args;
  ScsArgs scs_args;
  HeatmapArgs heatmap_args;
  EvalArgs eval_args;
  add_make_dataset(app, make_args);
  add_train(app, train_args);
  add_inpaint(app, inpaint_args);
  add_scs(app, scs_args);
  add_heatmap(app, heatmap_args);
  add_eval(app, eval_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    if (name == "make-dataset") run_make_dataset(*cmd, make_args);
    else if (name == "train") run_train(*cmd, train_args);
    else if (name == "inpaint") run_inpaint(*cmd, inpaint_args);
    else if (name == "scs") run_scs(*cmd, scs_args);
    else if (name == "heatmap") run_heatmap(*cmd, heatmap_args);
    else if (name == "eval") run_eval(*cmd, eval_args);
  } catch (const Error& e) {
    std::fprintf(stderr, "symface: %s\n", e.what());
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "symface: %s\n", e.what());
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "symface: malformed JSON: %s\n", e.what());
    return kExitData;
  }
  return 0;
}

}  // namespace symface::cli

int main(int argc, char** argv) { return symface::cli::main(argc, argv); }
