#include "otasim/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace otasim::nn {

namespace {

constexpr char kMagic[4] = {'O', 'T', 'C', 'K'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error("checkpoint: truncated file");
  }
  return v;
}

void put_tensor(std::ostream& os, const Tensor& t) {
  put<uint32_t>(os, static_cast<uint32_t>(t.shape.size()));
  for (int64_t d : t.shape) put<int64_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

Tensor get_tensor(std::istream& is) {
  const uint32_t nd = get<uint32_t>(is);
  if (nd > 8) throw std::runtime_error("checkpoint: implausible tensor rank");
  std::vector<int64_t> shape(nd);
  for (uint32_t i = 0; i < nd; ++i) shape[i] = get<int64_t>(is);
  Tensor t(shape);
  if (!is.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)))) {
    throw std::runtime_error("checkpoint: truncated tensor payload");
  }
  return t;
}

void put_layer(std::ostream& os, const Layer& l) {
  put<uint8_t>(os, static_cast<uint8_t>(l.kind));
  for (int64_t h : {l.in_channels, l.out_channels, l.kernel, l.stride, l.pad, l.fan_in, l.fan_out}) {
    put<int64_t>(os, h);
  }
  put<uint8_t>(os, l.has_params() ? 1 : 0);
  if (l.has_params()) {
    put_tensor(os, l.weights);
    put_tensor(os, l.bias);
  }
}

Layer get_layer(std::istream& is) {
  Layer l;
  const uint8_t kind = get<uint8_t>(is);
  if (kind > 3) throw std::runtime_error("checkpoint: unknown layer kind");
  l.kind = static_cast<LayerKind>(kind);
  l.in_channels = get<int64_t>(is);
  l.out_channels = get<int64_t>(is);
  l.kernel = get<int64_t>(is);
  l.stride = get<int64_t>(is);
  l.pad = get<int64_t>(is);
  l.fan_in = get<int64_t>(is);
  l.fan_out = get<int64_t>(is);
  if (get<uint8_t>(is)) {
    l.weights = get_tensor(is);
    l.bias = get_tensor(is);
  }
  return l;
}

}  // namespace

void save_checkpoint(const ModelSplit& model, uint64_t config_digest, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  os.write(kMagic, 4);
  put<uint32_t>(os, kVersion);
  put<uint64_t>(os, config_digest);
  put<double>(os, model.p);
  put<uint32_t>(os, static_cast<uint32_t>(model.front_end.size()));
  put<uint32_t>(os, static_cast<uint32_t>(model.back_end.size()));
  for (const Layer& l : model.front_end) put_layer(os, l);
  for (const Layer& l : model.back_end) put_layer(os, l);
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const uint32_t version = get<uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config_digest = get<uint64_t>(is);
  ck.model.p = get<double>(is);
  const uint32_t nf = get<uint32_t>(is);
  const uint32_t nb = get<uint32_t>(is);
  for (uint32_t i = 0; i < nf; ++i) ck.model.front_end.push_back(get_layer(is));
  for (uint32_t i = 0; i < nb; ++i) ck.model.back_end.push_back(get_layer(is));
  return ck;
}

uint64_t digest64(const std::string& text) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace otasim::nn
