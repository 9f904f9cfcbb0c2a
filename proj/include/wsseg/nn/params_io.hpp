#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wsseg/error.hpp"
#include "wsseg/nn/unet.hpp"

// Parameter container, all integers and floats little-endian:
//   "WSSEGPRM"            8-byte magic
//   u32 format_version
//   u32 n, n bytes        config echo ("key=value\n" lines)
//   u32 tensor_count
//   per tensor: u32 name_len, name, u32 ndim, u32 dims[ndim]
//   payload               f32 values of every tensor in table order

namespace wsseg::nn {

static_assert(std::endian::native == std::endian::little,
              "parameter files are written in host byte order");

inline constexpr char kParamsMagic[8] = {'W', 'S', 'S', 'E', 'G', 'P', 'R', 'M'};

inline std::string config_echo(const ModelConfig& c) {
  std::ostringstream s;
  s << "depth=" << c.depth << "\nbase_channels=" << c.base_channels
    << "\nin_channels=" << c.in_channels << "\nout_classes=" << c.out_classes
    << "\nupsample=" << to_string(c.upsample) << "\n";
  return s.str();
}

inline ModelConfig parse_config_echo(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ShapeTableError("malformed config echo line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig c;
  try {
    c.depth = std::stoi(kv.at("depth"));
    c.base_channels = std::stoi(kv.at("base_channels"));
    c.in_channels = std::stoi(kv.at("in_channels"));
    c.out_classes = std::stoi(kv.at("out_classes"));
    const auto& up = kv.at("upsample");
    if (up == "bilinear") c.upsample = Upsample::bilinear;
    else if (up == "transposed") c.upsample = Upsample::transposed;
    else throw ShapeTableError("unknown upsample mode '" + up + "'");
  } catch (const std::out_of_range&) {
    throw ShapeTableError("config echo is incomplete");
  } catch (const std::invalid_argument&) {
    throw ShapeTableError("config echo holds a non-integer");
  }
  return c;
}

template <typename T>
std::vector<unsigned char> encode_params(const ModelParams<T>& params) {
  std::vector<unsigned char> out;
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4];
    std::memcpy(b, &v, 4);
    out.insert(out.end(), b, b + 4);
  };
  auto put_bytes = [&](const std::string& s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  };
  out.insert(out.end(), kParamsMagic, kParamsMagic + 8);
  put_u32(ModelParams<T>::kFormatVersion);
  put_bytes(config_echo(params.config));
  put_u32(static_cast<std::uint32_t>(params.table.size()));
  for (const auto& t : params.table) {
    put_bytes(t.name);
    put_u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(static_cast<std::uint32_t>(d));
  }
  for (const auto& v : params.values)
    for (T x : v) {
      const float f = static_cast<float>(x);
      unsigned char b[4];
      std::memcpy(b, &f, 4);
      out.insert(out.end(), b, b + 4);
    }
  return out;
}

/// Decodes a parameter container and checks its shape table against the
/// layout implied by its own config echo.
template <typename T>
ModelParams<T> decode_params(const std::vector<unsigned char>& bytes) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw ShapeTableError("parameter file is truncated");
  };
  auto get_u32 = [&]() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  };
  auto get_string = [&]() {
    const std::uint32_t n = get_u32();
    need(n);
    std::string s(bytes.begin() + pos, bytes.begin() + pos + n);
    pos += n;
    return s;
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kParamsMagic, 8) != 0)
    throw VersionError("not a parameter file (bad magic)");
  pos = 8;
  const std::uint32_t version = get_u32();
  if (version != ModelParams<T>::kFormatVersion)
    throw VersionError("unsupported parameter format version " + std::to_string(version));

  ModelParams<T> p;
  p.config = parse_config_echo(get_string());
  try {
    validate(p.config);
  } catch (const ConfigError& e) {
    throw ShapeTableError(std::string("invalid config echo: ") + e.what());
  }
  const UNetLayout layout(p.config);
  const std::uint32_t count = get_u32();
  if (count != layout.table.size())
    throw ShapeTableError("shape table has " + std::to_string(count) + " tensors, expected " +
                          std::to_string(layout.table.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = get_string();
    const std::uint32_t ndim = get_u32();
    if (ndim > 8) throw ShapeTableError("tensor rank too large");
    for (std::uint32_t d = 0; d < ndim; ++d) t.shape.push_back(static_cast<int>(get_u32()));
    const auto& want = layout.table[i];
    if (t.name != want.name || t.shape != want.shape)
      throw ShapeTableError("tensor " + std::to_string(i) + " ('" + t.name +
                            "') does not match the expected layout ('" + want.name + "')");
    p.table.push_back(std::move(t));
  }
  for (const auto& t : p.table) {
    const std::size_t n = element_count(t.shape);
    need(n * 4);
    std::vector<T> v(n);
    for (std::size_t k = 0; k < n; ++k) {
      float f;
      std::memcpy(&f, bytes.data() + pos + 4 * k, 4);
      v[k] = static_cast<T>(f);
    }
    pos += n * 4;
    p.values.push_back(std::move(v));
  }
  if (pos != bytes.size()) throw ShapeTableError("parameter file has trailing bytes");
  return p;
}

template <typename T>
void save_params(const ModelParams<T>& params, const std::filesystem::path& path) {
  const auto bytes = encode_params(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

template <typename T = float>
ModelParams<T> load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  return decode_params<T>(bytes);
}

/// Loads and additionally requires the stored config to equal `expected`.
template <typename T = float>
ModelParams<T> load_params(const std::filesystem::path& path, const ModelConfig& expected) {
  auto p = load_params<T>(path);
  if (!(p.config == expected))
    throw ShapeTableError("stored model config differs from the requested one:\n" +
                          config_echo(p.config) + "vs\n" + config_echo(expected));
  return p;
}

}  // namespace wsseg::nn
