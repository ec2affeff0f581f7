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

#include "symface/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "symface/errors.hpp"

namespace symface {
namespace {

constexpr char kMagic[8] = {'S', 'Y', 'M', 'F', 'A', 'C', 'E', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& is, const std::filesystem::path& path) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(U))) throw FormatError("truncated checkpoint " + path.string());
  return v;
}

nlohmann::json disc_json(const DiscConfig& d) {
  return {{"layers", d.layers},
          {"base_channels", d.base_channels},
          {"max_multiplier", d.max_multiplier},
          {"kernel", d.kernel},
          {"leaky_slope", d.leaky_slope}};
}

DiscConfig disc_from_json(const nlohmann::json& j) {
  DiscConfig d;
  d.layers = j.at("layers").get<int>();
  d.base_channels = j.at("base_channels").get<int>();
  d.max_multiplier = j.at("max_multiplier").get<int>();
  d.kernel = j.at("kernel").get<int>();
  d.leaky_slope = j.at("leaky_slope").get<double>();
  return d;
}

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const NamedArray& Checkpoint::at(const std::string& name) const {
  if (const NamedArray* a = find(name)) return *a;
  throw IntegrityError("checkpoint has no array '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format_version"] = ckpt.format_version;
  header["dtype"] = ckpt.dtype == DType::kF32 ? "f32" : "f64";
  header["swin_config"] = nlohmann::json::parse(to_json(ckpt.swin));
  header["disc_config"] = disc_json(ckpt.disc);
  header["state"] = nlohmann::json::parse(ckpt.state_json);
  auto& list = header["arrays"] = nlohmann::json::array();
  for (const auto& a : ckpt.arrays) {
    if (ad::numel(a.shape) != static_cast<std::int64_t>(a.values.size()))
      throw ShapeError("checkpoint array '" + a.name + "' does not match its shape");
    list.push_back({{"name", a.name}, {"shape", a.shape}});
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, ckpt.format_version);
    put<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : ckpt.arrays)
      for (double v : a.values) {
        if (ckpt.dtype == DType::kF32) put<float>(os, static_cast<float>(v));
        else put<double>(os, v);
      }
    if (!os.flush()) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError(path.string() + " is not a symface checkpoint");
  Checkpoint ckpt;
  ckpt.format_version = get<std::uint32_t>(is, path);
  if (ckpt.format_version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint format_version " + std::to_string(ckpt.format_version) + " in " +
                      path.string());
  const auto len = get<std::uint64_t>(is, path);
  if (len > (1ull << 30)) throw FormatError("checkpoint header too large");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("truncated checkpoint header");

  try {
    const auto header = nlohmann::json::parse(text);
    if (header.at("format_version").get<std::uint32_t>() != ckpt.format_version)
      throw FormatError("checkpoint header disagrees with its format_version");
    const std::string dtype = header.at("dtype").get<std::string>();
    if (dtype != "f32" && dtype != "f64") throw FormatError("unknown checkpoint dtype " + dtype);
    ckpt.dtype = dtype == "f32" ? DType::kF32 : DType::kF64;
    ckpt.swin = swin_config_from_json(header.at("swin_config").dump());
    ckpt.disc = disc_from_json(header.at("disc_config"));
    ckpt.state_json = header.at("state").dump();
    for (const auto& a : header.at("arrays")) {
      NamedArray arr;
      arr.name = a.at("name").get<std::string>();
      arr.shape = a.at("shape").get<std::vector<int>>();
      arr.values.resize(static_cast<std::size_t>(ad::numel(arr.shape)));
      for (double& v : arr.values)
        v = ckpt.dtype == DType::kF32 ? static_cast<double>(get<float>(is, path)) : get<double>(is, path);
      ckpt.arrays.push_back(std::move(arr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint " + path.string());
  return ckpt;
}

template <typename T>
void append_parameters(Checkpoint& ckpt, const nn::ParameterSet<T>& params) {
  for (const auto& [name, t] : params.entries()) {
    NamedArray a{name, t.shape(), {}};
    a.values.assign(t.values().begin(), t.values().end());
    ckpt.arrays.push_back(std::move(a));
  }
}

template <typename T>
void restore_parameters(const Checkpoint& ckpt, nn::ParameterSet<T>& params) {
  for (auto& [name, t] : params.entries()) {
    const NamedArray& a = ckpt.at(name);
    if (a.shape != t.shape())
      throw IntegrityError("checkpoint array '" + name + "' has shape " + ad::to_string(a.shape) + ", expected " +
                           ad::to_string(t.shape()));
    auto dst = t.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(a.values[i]);
  }
}

template <typename T>
Generator<T> load_generator(const Checkpoint& ckpt) {
  Generator<T> g(ckpt.swin, 0);
  restore_parameters(ckpt, g.params());
  return g;
}

template void append_parameters<float>(Checkpoint&, const nn::ParameterSet<float>&);
template void append_parameters<double>(Checkpoint&, const nn::ParameterSet<double>&);
template void restore_parameters<float>(const Checkpoint&, nn::ParameterSet<float>&);
template void restore_parameters<double>(const Checkpoint&, nn::ParameterSet<double>&);
template Generator<float> load_generator<float>(const Checkpoint&);
template Generator<double> load_generator<double>(const Checkpoint&);

}  // namespace symface
