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

#include "symface/trainer.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "symface/errors.hpp"

namespace symface {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename N>
N parse_number(const std::string& key, const std::string& value) {
  N out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

template <typename N, typename Field>
Setter number(Field field) {
  return [field](TrainConfig& c, const std::string& k, const std::string& v) { field(c) = parse_number<N>(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    m["generator_lr"] = number<double>([](TrainConfig& c) -> double& { return c.generator_lr; });
    m["discriminator_lr"] = number<double>([](TrainConfig& c) -> double& { return c.discriminator_lr; });
    m["batch_size"] = number<int>([](TrainConfig& c) -> int& { return c.batch_size; });
    m["epochs"] = number<int>([](TrainConfig& c) -> int& { return c.epochs; });
    m["max_steps"] = number<std::int64_t>([](TrainConfig& c) -> std::int64_t& { return c.max_steps; });
    m["beta1"] = number<double>([](TrainConfig& c) -> double& { return c.beta1; });
    m["beta2"] = number<double>([](TrainConfig& c) -> double& { return c.beta2; });
    m["adam_epsilon"] = number<double>([](TrainConfig& c) -> double& { return c.adam_epsilon; });
    m["alpha"] = number<double>([](TrainConfig& c) -> double& { return c.weights.alpha; });
    m["beta"] = number<double>([](TrainConfig& c) -> double& { return c.weights.beta; });
    m["gamma"] = number<double>([](TrainConfig& c) -> double& { return c.weights.gamma; });
    m["delta"] = number<double>([](TrainConfig& c) -> double& { return c.weights.delta; });
    for (std::size_t i = 0; i < kFaceParts.size(); ++i)
      m["omega_" + std::string(part_name(kFaceParts[i]))] =
          number<double>([i](TrainConfig& c) -> double& { return c.weights.omega[i]; });
    m["perceptual_weight"] = number<double>([](TrainConfig& c) -> double& { return c.weights.perceptual_weight; });
    m["pixel_norm"] = [](TrainConfig& c, const std::string&, const std::string& v) {
      c.weights.pixel_norm = pixel_norm_from_name(v);
    };
    m["mask_preset"] = [](TrainConfig& c, const std::string& k, const std::string& v) {
      try {
        c.mask_preset = mask_kind_from_name(v);
      } catch (const ParameterError& e) {
        throw ConfigError("config key '" + k + "': " + e.what());
      }
    };
    m["seed"] = number<std::uint64_t>([](TrainConfig& c) -> std::uint64_t& { return c.seed; });
    m["checkpoint_interval"] =
        number<std::int64_t>([](TrainConfig& c) -> std::int64_t& { return c.checkpoint_interval; });
    m["precision"] = [](TrainConfig& c, const std::string& k, const std::string& v) {
      if (v != "f32" && v != "f64") throw ConfigError("config key '" + k + "': expected f32 or f64");
      c.precision = v;
    };
    m["segmenter"] = [](TrainConfig& c, const std::string&, const std::string& v) { c.segmenter = v; };
    m["patch_size"] = number<int>([](TrainConfig& c) -> int& { return c.swin.patch_size; });
    m["embed_dim"] = number<int>([](TrainConfig& c) -> int& { return c.swin.embed_dim; });
    m["depths"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.swin.depths = parse_int_list(k, v); };
    m["heads"] = [](TrainConfig& c, const std::string& k, const std::string& v) { c.swin.heads = parse_int_list(k, v); };
    m["window_size"] = number<int>([](TrainConfig& c) -> int& { return c.swin.window_size; });
    m["mlp_ratio"] = number<int>([](TrainConfig& c) -> int& { return c.swin.mlp_ratio; });
    m["disc_layers"] = number<int>([](TrainConfig& c) -> int& { return c.disc.layers; });
    m["disc_base_channels"] = number<int>([](TrainConfig& c) -> int& { return c.disc.base_channels; });
    m["disc_max_multiplier"] = number<int>([](TrainConfig& c) -> int& { return c.disc.max_multiplier; });
    m["disc_kernel"] = number<int>([](TrainConfig& c) -> int& { return c.disc.kernel; });
    return m;
  }();
  return table;
}

Segmenter make_segmenter(const std::string& spec) {
  if (spec == "oracle") return Segmenter::oracle();
  constexpr std::string_view prefix = "external:";
  if (spec.rfind(prefix, 0) == 0) return Segmenter::external(spec.substr(prefix.size()));
  throw ConfigError("config key 'segmenter': expected 'oracle' or 'external:<command>'");
}

template <typename T>
DType dtype_of() {
  return sizeof(T) == sizeof(float) ? DType::kF32 : DType::kF64;
}

template <typename T>
void append_moments(Checkpoint& ckpt, const std::string& prefix, const nn::ParameterSet<T>& params,
                    const Adam<T>& opt) {
  const auto& entries = params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& shape = entries[i].second.shape();
    const auto& m = opt.first_moments()[i];
    const auto& v = opt.second_moments()[i];
    ckpt.arrays.push_back({prefix + entries[i].first + ".m", shape, std::vector<double>(m.begin(), m.end())});
    ckpt.arrays.push_back({prefix + entries[i].first + ".v", shape, std::vector<double>(v.begin(), v.end())});
  }
}

template <typename T>
void restore_moments(const Checkpoint& ckpt, const std::string& prefix, const nn::ParameterSet<T>& params,
                     Adam<T>& opt, std::int64_t steps) {
  std::vector<std::vector<T>> m, v;
  for (const auto& [name, _] : params.entries()) {
    const auto& am = ckpt.at(prefix + name + ".m").values;
    const auto& av = ckpt.at(prefix + name + ".v").values;
    m.emplace_back(am.begin(), am.end());
    v.emplace_back(av.begin(), av.end());
  }
  opt.restore(steps, std::move(m), std::move(v));
}

}  // namespace

void TrainConfig::validate() const {
  if (!(generator_lr >= 0) || !(discriminator_lr >= 0)) throw ConfigError("learning rates must be >= 0");
  if (batch_size < 1) throw ConfigError("config key 'batch_size': must be >= 1");
  if (epochs < 0 || max_steps < 0) throw ConfigError("epochs and max_steps must be >= 0");
  if (checkpoint_interval < 0) throw ConfigError("config key 'checkpoint_interval': must be >= 0");
  if (precision != "f32" && precision != "f64") throw ConfigError("config key 'precision': expected f32 or f64");
  weights.validate();
  swin.validate();
  disc.validate();
  make_segmenter(segmenter);
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(c, key, value);
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_train_config(ss.str());
}

std::string to_config_text(const TrainConfig& c) {
  std::ostringstream os;
  os << "generator_lr = " << fmt(c.generator_lr) << "\n"
     << "discriminator_lr = " << fmt(c.discriminator_lr) << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "epochs = " << c.epochs << "\n"
     << "max_steps = " << c.max_steps << "\n"
     << "beta1 = " << fmt(c.beta1) << "\n"
     << "beta2 = " << fmt(c.beta2) << "\n"
     << "adam_epsilon = " << fmt(c.adam_epsilon) << "\n"
     << "alpha = " << fmt(c.weights.alpha) << "\n"
     << "beta = " << fmt(c.weights.beta) << "\n"
     << "gamma = " << fmt(c.weights.gamma) << "\n"
     << "delta = " << fmt(c.weights.delta) << "\n";
  for (std::size_t i = 0; i < kFaceParts.size(); ++i)
    os << "omega_" << part_name(kFaceParts[i]) << " = " << fmt(c.weights.omega[i]) << "\n";
  os << "perceptual_weight = " << fmt(c.weights.perceptual_weight) << "\n"
     << "pixel_norm = " << pixel_norm_name(c.weights.pixel_norm) << "\n"
     << "mask_preset = " << mask_kind_name(c.mask_preset) << "\n"
     << "seed = " << c.seed << "\n"
     << "checkpoint_interval = " << c.checkpoint_interval << "\n"
     << "precision = " << c.precision << "\n"
     << "segmenter = " << c.segmenter << "\n"
     << "patch_size = " << c.swin.patch_size << "\n"
     << "embed_dim = " << c.swin.embed_dim << "\n"
     << "depths = " << join(c.swin.depths) << "\n"
     << "heads = " << join(c.swin.heads) << "\n"
     << "window_size = " << c.swin.window_size << "\n"
     << "mlp_ratio = " << c.swin.mlp_ratio << "\n"
     << "disc_layers = " << c.disc.layers << "\n"
     << "disc_base_channels = " << c.disc.base_channels << "\n"
     << "disc_max_multiplier = " << c.disc.max_multiplier << "\n"
     << "disc_kernel = " << c.disc.kernel << "\n";
  return os.str();
}

std::vector<Mask> step_masks(const TrainConfig& config, std::int64_t step, int count, int size) {
  std::vector<Mask> out;
  const MaskSpec spec = MaskSpec::preset(config.mask_preset);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed =
        Rng::derive(config.seed, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(i)}).next_u64();
    out.push_back(random_mask(spec, seed, size));
  }
  return out;
}

std::vector<int> epoch_order(std::uint64_t seed, std::int64_t epoch, int count) {
  std::vector<int> order(count);
  for (int i = 0; i < count; ++i) order[i] = i;
  Rng rng = Rng::derive(seed, {0x5348u, static_cast<std::uint64_t>(epoch)});
  for (int i = count - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
  return order;
}

template <typename T>
Trainer<T>::Trainer(const TrainConfig& config, int image_size)
    : config_(config),
      size_(image_size),
      segmenter_(make_segmenter(config.segmenter)),
      generator_(config.swin, Rng::derive(config.seed, {0x47u}).next_u64()),
      discs_(config.disc, Rng::derive(config.seed, {0x44u}).next_u64()),
      disc_params_([this] {
        nn::ParameterSet<T> all;
        for (const Critic<T>* c : discs_.all())
          for (const auto& [name, t] : c->params().entries()) all.adopt(name, t);
        return all;
      }()),
      gen_opt_(generator_.params(), {config.generator_lr, config.beta1, config.beta2, config.adam_epsilon}),
      disc_opt_(disc_params_, {config.discriminator_lr, config.beta1, config.beta2, config.adam_epsilon}) {
  config_.validate();
  config_.swin.check_image_side(image_size);
  if (config_.weights.perceptual_weight > 0)
    encoder_ = std::make_unique<RandomConvEncoder<T>>(Rng::derive(config.seed, {0x50u}).next_u64());
}

template <typename T>
LossReport Trainer<T>::train_step(const std::vector<const Sample*>& batch) {
  if (batch.empty()) throw ConfigError("train_step: empty batch");
  const int b = static_cast<int>(batch.size());
  std::vector<Image> images;
  std::vector<BinaryMap> holes;
  const auto masks = step_masks(config_, step_, b, size_);
  for (int i = 0; i < b; ++i) {
    if (batch[i]->size() != size_) throw ShapeError("train_step: sample size differs from the trainer's");
    images.push_back(batch[i]->image);
    holes.push_back(masks[i].grid);
  }
  const ad::Tensor<T> x = nn::images_to_tensor<T>(images);
  const ad::Tensor<T> m = nn::maps_to_tensor<T>(holes);
  const ad::Tensor<T> xhat = generator_.forward(x, m);

  std::vector<PartMaskSet> parts;
  if (segmenter_.mode() == Segmenter::Mode::kOracle) {
    for (const Sample* s : batch) parts.push_back(segmenter_.segment(*s));
  } else {
    for (const Image& img : nn::tensor_to_images(xhat)) parts.push_back(segmenter_.segment(img));
  }

  Objective<T> obj = total<T>(x, xhat, part_mask_tensors<T>(parts), discs_, config_.weights, encoder_.get());
  generator_.params().zero_grad();
  disc_params_.zero_grad();
  ad::add(obj.generator, obj.discriminator).backward();
  disc_opt_.step();
  gen_opt_.step();
  ++step_;
  return obj.report;
}

template <typename T>
Checkpoint Trainer<T>::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.dtype = dtype_of<T>();
  ckpt.swin = config_.swin;
  ckpt.disc = config_.disc;
  nlohmann::json state = {{"step", step_},
                          {"image_size", size_},
                          {"config", to_config_text(config_)},
                          {"adam_gen_steps", gen_opt_.steps()},
                          {"adam_disc_steps", disc_opt_.steps()}};
  ckpt.state_json = state.dump();
  append_parameters(ckpt, generator_.params());
  append_parameters(ckpt, disc_params_);
  append_moments(ckpt, "adam.", generator_.params(), gen_opt_);
  append_moments(ckpt, "adam.", disc_params_, disc_opt_);
  return ckpt;
}

template <typename T>
void Trainer<T>::restore(const Checkpoint& ckpt) {
  if (ckpt.dtype != dtype_of<T>())
    throw IntegrityError("checkpoint precision does not match the run's precision setting");
  if (!(ckpt.swin == config_.swin) || !(ckpt.disc == config_.disc))
    throw IntegrityError("checkpoint architecture differs from the config");
  const auto state = nlohmann::json::parse(ckpt.state_json);
  if (state.value("image_size", size_) != size_) throw IntegrityError("checkpoint was trained at another image size");
  restore_parameters(ckpt, generator_.params());
  restore_parameters(ckpt, disc_params_);
  restore_moments(ckpt, "adam.", generator_.params(), gen_opt_, state.at("adam_gen_steps").get<std::int64_t>());
  restore_moments(ckpt, "adam.", disc_params_, disc_opt_, state.at("adam_disc_steps").get<std::int64_t>());
  step_ = state.at("step").get<std::int64_t>();
}

std::int64_t planned_steps(const TrainConfig& config, int count) {
  if (config.max_steps > 0) return config.max_steps;
  const std::int64_t per_epoch = (count + config.batch_size - 1) / config.batch_size;
  return per_epoch * config.epochs;
}

namespace {

template <typename T>
TrainSummary run_training(const std::vector<Sample>& dataset, const TrainConfig& config, const TrainOptions& options) {
  const int n = static_cast<int>(dataset.size());
  const int size = dataset.front().size();
  for (const auto& s : dataset)
    if (s.size() != size) throw ConfigError("dataset mixes image sizes");

  Trainer<T> trainer(config, size);
  if (options.resume) trainer.restore(load_checkpoint(*options.resume));

  TrainSummary summary;
  std::filesystem::create_directories(options.out_dir);
  summary.log = options.out_dir / "log.csv";
  const bool append = options.resume.has_value() && std::filesystem::exists(summary.log);
  std::ofstream log(summary.log, append ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + summary.log.string());
  if (!append) {
    log << "step";
    for (const auto& c : LossReport::csv_columns()) log << "," << c;
    log << "\n";
  }

  const std::int64_t total_steps = planned_steps(config, n);
  const std::int64_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  std::int64_t cached_epoch = -1;
  std::vector<int> order;
  auto save = [&](const std::filesystem::path& p) { save_checkpoint(p, trainer.to_checkpoint()); };

  while (trainer.steps_done() < total_steps) {
    const std::int64_t s = trainer.steps_done();
    const std::int64_t epoch = s / per_epoch, k = s % per_epoch;
    if (epoch != cached_epoch) {
      order = epoch_order(config.seed, epoch, n);
      cached_epoch = epoch;
    }
    std::vector<const Sample*> batch;
    for (std::int64_t i = k * config.batch_size; i < std::min<std::int64_t>(n, (k + 1) * config.batch_size); ++i)
      batch.push_back(&dataset[order[i]]);
    LossReport rep = trainer.train_step(batch);

    log << s;
    for (double v : rep.csv_values()) log << "," << fmt(v);
    log << "\n";
    log.flush();
    if (options.on_step) options.on_step(s, rep);
    summary.reports.push_back(rep);

    if (config.checkpoint_interval > 0 && trainer.steps_done() % config.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_%06lld.bin", static_cast<long long>(trainer.steps_done()));
      save(options.out_dir / name);
    }
  }
  summary.steps = trainer.steps_done();
  summary.final_checkpoint = options.out_dir / "last.bin";
  save(summary.final_checkpoint);
  return summary;
}

}  // namespace

TrainSummary train(const std::vector<Sample>& dataset, const TrainConfig& config, const TrainOptions& options) {
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  config.validate();
  if (config.precision == "f64") return run_training<double>(dataset, config, options);
  return run_training<float>(dataset, config, options);
}

template class Trainer<float>;
template class Trainer<double>;

}  // namespace symface
