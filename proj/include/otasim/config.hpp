#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "otasim/energy.hpp"
#include "otasim/fusion.hpp"
#include "otasim/pcm.hpp"
#include "otasim/pipeline.hpp"

namespace otasim::config {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetBlock {
  std::string kind = "mnist";  // mnist | synthetic
  std::string root = "data/mnist";
  int64_t train_limit = 10000;
  int64_t test_limit = 2000;
  // synthetic parameters
  int64_t n_train = 2000, n_test = 500;
  int classes = 4;
  int64_t dims = 16;
  double separation = 6.0;
};

struct ModelBlock {
  std::string arch = "mnist_cnn";  // mnist_cnn | vector_mlp
  int64_t conv_channels = 10, kernel = 5, hidden = 50, classes = 10;
};

struct InferBlock {
  std::string checkpoint;
  int sensors = 1;
  double test_snr_db = 10.0;
  bool noiseless = false;
  double drift_time_s = 1.0;
  int prog_trials = 5, chan_trials = 5;
  bool energy = false;
};

struct TrainBlock {
  int sensors = 1;
  int epochs = 5;
  int batch_size = 32;
  double learning_rate = 0.001;
  double val_fraction = 0.1;
  int patience = 10;
  std::string init_from;
  bool rotate_views = true;
  double grad_clip_norm = 5.0;
};

struct EnergyBlock {
  energy::EnergySpec spec{50.0, 0.5, 1e-3, 15.0, 10};
  int64_t cells_per_sensor = 260;
};

/// Resolved experiment configuration: file values with defaults applied and
/// any command-line overrides folded in.
struct ExperimentConfig {
  uint64_t seed = 1;
  DatasetBlock dataset;
  ModelBlock model;
  pcm::PcmParams device;
  bool device_enabled = true;
  fusion::ChannelSpec channel;  // training channel
  fusion::FusionSpec fusion_spec;
  TrainBlock train;
  InferBlock infer;
  pipeline::SweepConfig sweep;
  EnergyBlock energy;
  std::string output_dir = "out";

  /// Canonical serialized form (sorted keys, fixed formatting); written
  /// beside outputs and hashed into checkpoints.
  std::string canonical_json() const;
};

struct Overrides {
  std::optional<uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> dataset_root;
};

/// Strict parse: unknown keys and type mismatches are errors naming the full
/// key path. An empty path yields the documented defaults.
ExperimentConfig parse_config(const std::string& path, const Overrides& overrides = {});

/// Parses from a JSON string (used by tests and for the empty-config case).
ExperimentConfig parse_config_text(const std::string& text, const Overrides& overrides = {});

}  // namespace otasim::config
