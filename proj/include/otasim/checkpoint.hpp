#pragma once

#include <cstdint>
#include <string>

#include "otasim/nn.hpp"

namespace otasim::nn {

// Binary model container. Layout (all little-endian, documented in
// docs/checkpoint_format.md): magic "OTCK", u32 version, u64 config digest,
// f64 p, u32 front/back layer counts, then per layer: u8 kind, 7 x i64
// hyperparams, u8 has_params, and for parameterized layers the weight and
// bias tensors as (u32 ndim, i64 dims..., f64 data...).

struct Checkpoint {
  ModelSplit model;
  uint64_t config_digest = 0;
};

void save_checkpoint(const ModelSplit& model, uint64_t config_digest, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over a canonical config string; stored in the checkpoint so runs
/// can be traced back to their configuration.
uint64_t digest64(const std::string& text);

}  // namespace otasim::nn
