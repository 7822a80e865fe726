// SPDX-License-Identifier: Apache-2.0
#include "ldseg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ldseg/errors.hpp"

namespace ldseg {

namespace {

constexpr char kMagic[8] = {'L', 'D', 'S', 'E', 'G', 'C', 'K', 'P'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CheckpointError("truncated file");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  auto n = read_pod<std::uint64_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw CheckpointError("truncated string");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, Checkpoint::kVersion);
  write_pod<std::int32_t>(os, ckpt.epoch);
  write_string(os, ckpt.config_echo);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, tensor] : ckpt.arrays) {
    write_string(os, name);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensor.ndim()));
    for (int d : tensor.shape()) write_pod<std::int32_t>(os, d);
    os.write(reinterpret_cast<const char*>(tensor.data()),
             static_cast<std::streamsize>(tensor.numel() * sizeof(double)));
  }
  if (!os) throw CheckpointError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("bad magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != Checkpoint::kVersion) {
    throw CheckpointError("unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(Checkpoint::kVersion) + ")");
  }
  Checkpoint ckpt;
  ckpt.epoch = read_pod<std::int32_t>(is);
  ckpt.config_echo = read_string(is);
  const auto count = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(is);
    const auto ndim = read_pod<std::uint32_t>(is);
    if (ndim < 1 || ndim > 4) throw CheckpointError("bad rank for array " + name);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = read_pod<std::int32_t>(is);
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!is) throw CheckpointError("truncated array " + name);
    ckpt.arrays[name] = std::move(t);
  }
  return ckpt;
}

Checkpoint snapshot(const LdnetModel& model, const std::string& config_echo, int epoch) {
  Checkpoint ckpt;
  ckpt.config_echo = config_echo;
  ckpt.epoch = epoch;
  for (const auto& [name, var] : model.params().all()) ckpt.arrays[name] = var->value;
  return ckpt;
}

void restore_model(const Checkpoint& ckpt, LdnetModel& model) {
  std::string diff;
  auto note = [&diff](const std::string& line) {
    if (!diff.empty()) diff += "; ";
    diff += line;
  };
  for (const auto& [name, var] : model.params().all()) {
    auto it = ckpt.arrays.find(name);
    if (it == ckpt.arrays.end()) {
      note("missing array '" + name + "'");
    } else if (!it->second.same_shape(var->value)) {
      note("'" + name + "' checkpoint " + it->second.shape_str() + " vs model " +
           var->value.shape_str());
    }
  }
  for (const auto& [name, tensor] : ckpt.arrays) {
    if (name.rfind("opt/", 0) == 0) continue;
    if (!model.params().has(name)) note("unexpected array '" + name + "'");
  }
  if (!diff.empty()) throw CheckpointError("shape disagreement: " + diff);
  for (const auto& [name, var] : model.params().all()) {
    var->value = ckpt.arrays.at(name);
  }
}

}  // namespace ldseg
