#include "otasim/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace otasim::data {

namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("idx: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

std::vector<uint8_t> gunzip(const std::vector<uint8_t>& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) throw std::runtime_error("idx: zlib init failed");
  std::vector<uint8_t> out;
  out.reserve(in.size() * 4);
  std::vector<uint8_t> buf(1 << 16);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf.data();
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw std::runtime_error("idx: corrupt gzip stream");
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

std::vector<uint8_t> read_maybe_gz(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes);
  return bytes;
}

uint32_t be32(const std::vector<uint8_t>& b, size_t off) {
  if (off + 4 > b.size()) throw std::runtime_error("idx: truncated header");
  return (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) | (uint32_t(b[off + 2]) << 8) |
         uint32_t(b[off + 3]);
}

void put_be32(std::ostream& os, uint32_t v) {
  const char bytes[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  os.write(bytes, 4);
}

[[noreturn]] void length_error(const std::string& path, size_t expected, size_t actual) {
  throw std::runtime_error("idx: truncated payload in " + path + ": expected " +
                           std::to_string(expected) + " bytes, got " + std::to_string(actual));
}

bool file_exists(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return is.good();
}

}  // namespace

Tensor Dataset::sample(int64_t i) const {
  const int64_t h = images.dim(1), w = images.dim(2);
  Tensor s({h, w});
  std::copy_n(images.data.begin() + i * h * w, h * w, s.data.begin());
  return s;
}

Tensor load_idx_images(const std::string& path) {
  const std::vector<uint8_t> b = read_maybe_gz(path);
  const uint32_t magic = be32(b, 0);
  if (magic != kImageMagic) {
    throw std::runtime_error("idx: bad image magic in " + path + " (want 0x00000803)");
  }
  const int64_t n = be32(b, 4), h = be32(b, 8), w = be32(b, 12);
  const size_t expected = size_t(n) * size_t(h) * size_t(w);
  if (b.size() - 16 < expected) length_error(path, expected, b.size() - 16);
  Tensor out({n, h, w});
  for (size_t i = 0; i < expected; ++i) {
    out.data[i] = static_cast<double>(b[16 + i]) / 255.0;
  }
  return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
  const std::vector<uint8_t> b = read_maybe_gz(path);
  const uint32_t magic = be32(b, 0);
  if (magic != kLabelMagic) {
    throw std::runtime_error("idx: bad label magic in " + path + " (want 0x00000801)");
  }
  const size_t n = be32(b, 4);
  if (b.size() - 8 < n) length_error(path, n, b.size() - 8);
  std::vector<int> labels(n);
  for (size_t i = 0; i < n; ++i) labels[i] = b[8 + i];
  return labels;
}

void save_idx_images(const Tensor& images, const std::string& path) {
  if (images.ndim() != 3) throw std::invalid_argument("idx: images must be [N,H,W]");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("idx: cannot write " + path);
  put_be32(os, kImageMagic);
  put_be32(os, static_cast<uint32_t>(images.dim(0)));
  put_be32(os, static_cast<uint32_t>(images.dim(1)));
  put_be32(os, static_cast<uint32_t>(images.dim(2)));
  for (double v : images.data) {
    const double c = std::clamp(v, 0.0, 1.0);
    os.put(static_cast<char>(std::lround(c * 255.0)));
  }
}

void save_idx_labels(const std::vector<int>& labels, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("idx: cannot write " + path);
  put_be32(os, kLabelMagic);
  put_be32(os, static_cast<uint32_t>(labels.size()));
  for (int l : labels) os.put(static_cast<char>(l));
}

Dataset load_mnist(const std::string& root, const std::string& split, int64_t limit) {
  const std::string prefix = split == "train" ? "train" : "t10k";
  auto pick = [&](const std::string& stem) {
    const std::string plain = root + "/" + stem;
    if (file_exists(plain)) return plain;
    if (file_exists(plain + ".gz")) return plain + ".gz";
    throw std::runtime_error("mnist: missing " + plain + "[.gz]");
  };
  Dataset ds;
  ds.split = split;
  ds.images = load_idx_images(pick(prefix + "-images-idx3-ubyte"));
  ds.labels = load_idx_labels(pick(prefix + "-labels-idx1-ubyte"));
  if (ds.images.dim(0) != static_cast<int64_t>(ds.labels.size())) {
    throw std::runtime_error("mnist: image/label count mismatch");
  }
  if (limit > 0 && limit < ds.images.dim(0)) {
    const int64_t h = ds.images.dim(1), w = ds.images.dim(2);
    ds.images.data.resize(static_cast<size_t>(limit * h * w));
    ds.images.shape[0] = limit;
    ds.labels.resize(static_cast<size_t>(limit));
  }
  return ds;
}

Tensor rotate(const Tensor& image, double degrees, Interp interp) {
  if (image.ndim() != 2 || image.dim(0) != image.dim(1)) {
    throw std::invalid_argument("rotate: image must be square [H,H]");
  }
  const int64_t n = image.dim(0);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double rad = degrees * M_PI / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  Tensor out({n, n});
  for (int64_t y = 0; y < n; ++y) {
    for (int64_t x = 0; x < n; ++x) {
      // Inverse map: source = R(-theta) * (dst - center) + center.
      const double dx = static_cast<double>(x) - c;
      const double dy = static_cast<double>(y) - c;
      const double sx = cs * dx + sn * dy + c;
      const double sy = -sn * dx + cs * dy + c;
      double v = 0.0;
      if (interp == Interp::nearest) {
        const int64_t ix = static_cast<int64_t>(std::lround(sx));
        const int64_t iy = static_cast<int64_t>(std::lround(sy));
        if (ix >= 0 && ix < n && iy >= 0 && iy < n) {
          v = image.data[static_cast<size_t>(iy * n + ix)];
        }
      } else {
        const double fx = std::floor(sx), fy = std::floor(sy);
        const int64_t x0 = static_cast<int64_t>(fx), y0 = static_cast<int64_t>(fy);
        const double ax = sx - fx, ay = sy - fy;
        auto px = [&](int64_t yy, int64_t xx) -> double {
          if (xx < 0 || xx >= n || yy < 0 || yy >= n) return 0.0;
          return image.data[static_cast<size_t>(yy * n + xx)];
        };
        v = (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
            ay * ((1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
      }
      out.data[static_cast<size_t>(y * n + x)] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

ViewSet make_views(const Tensor& sample, int sensors, RngStream& rng) {
  if (sensors < 1) throw std::invalid_argument("views: need at least one sensor");
  ViewSet vs;
  vs.views.reserve(static_cast<size_t>(sensors));
  for (int m = 0; m < sensors; ++m) {
    const double angle = rng.uniform(0.0, 180.0);
    vs.angles_deg.push_back(angle);
    vs.views.push_back(rotate(sample, angle));
  }
  return vs;
}

Dataset synthetic_blobs(int64_t n, int classes, int64_t dims, double separation, uint64_t seed) {
  if (n <= 0 || classes <= 0 || dims <= 0) {
    throw std::invalid_argument("blobs: sizes must be positive");
  }
  RngStream rng(seed, {0x5b10b5});
  // Unit-norm class centers scaled by the separation.
  std::vector<std::vector<double>> centers(static_cast<size_t>(classes),
                                           std::vector<double>(static_cast<size_t>(dims)));
  for (auto& center : centers) {
    double norm2 = 0.0;
    for (double& v : center) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double inv = separation / std::sqrt(norm2);
    for (double& v : center) v *= inv;
  }
  Dataset ds;
  ds.split = "synthetic";
  ds.images = Tensor({n, 1, dims});
  ds.labels.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % classes);
    ds.labels[static_cast<size_t>(i)] = label;
    double* row = ds.images.data.data() + i * dims;
    const auto& center = centers[static_cast<size_t>(label)];
    for (int64_t d = 0; d < dims; ++d) row[d] = center[static_cast<size_t>(d)] + rng.normal();
  }
  // Shuffle sample order; labels stay attached.
  for (int64_t i = n - 1; i > 0; --i) {
    const int64_t j = static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(i + 1));
    std::swap(ds.labels[static_cast<size_t>(i)], ds.labels[static_cast<size_t>(j)]);
    for (int64_t d = 0; d < dims; ++d) {
      std::swap(ds.images.data[static_cast<size_t>(i * dims + d)],
                ds.images.data[static_cast<size_t>(j * dims + d)]);
    }
  }
  return ds;
}

}  // namespace otasim::data
