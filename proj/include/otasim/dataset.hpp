#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otasim/rng.hpp"
#include "otasim/tensor.hpp"

// Dataset ingestion and per-sensor view synthesis: IDX parsing (plain or
// gzip), random-rotation augmentation, and a synthetic cluster dataset for
// fast tests.

namespace otasim::data {

struct Dataset {
  Tensor images;            // [N,H,W] in [0,1] for image data; [N,1,D] for vectors
  std::vector<int> labels;  // class indices, length N
  std::string split;

  int64_t size() const { return images.dim(0); }
  /// One sample as a [H,W] (or [1,D]) tensor.
  Tensor sample(int64_t i) const;
};

/// Big-endian IDX image file (magic 0x00000803); accepts gzip input.
Tensor load_idx_images(const std::string& path);
/// Big-endian IDX label file (magic 0x00000801); accepts gzip input.
std::vector<int> load_idx_labels(const std::string& path);

void save_idx_images(const Tensor& images, const std::string& path);
void save_idx_labels(const std::vector<int>& labels, const std::string& path);

/// Loads <root>/{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz].
Dataset load_mnist(const std::string& root, const std::string& split, int64_t limit = 0);

enum class Interp { bilinear, nearest };

/// Rotates a square [H,W] image about its center; out-of-bounds pixels are 0
/// and outputs stay clamped to [0,1].
Tensor rotate(const Tensor& image, double degrees, Interp interp = Interp::bilinear);

struct ViewSet {
  std::vector<Tensor> views;
  std::vector<double> angles_deg;
};

/// M independent views of one sample, each rotated by an angle ~ U[0,180).
ViewSet make_views(const Tensor& sample, int sensors, RngStream& rng);

/// Gaussian class clusters with the given center separation; class counts
/// differ by at most one. Images come out as [N,1,dims].
Dataset synthetic_blobs(int64_t n, int classes, int64_t dims, double separation, uint64_t seed);

}  // namespace otasim::data
