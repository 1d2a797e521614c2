#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otasim/dataset.hpp"
#include "otasim/energy.hpp"
#include "otasim/fusion.hpp"
#include "otasim/nn.hpp"
#include "otasim/pcm.hpp"

// Orchestrates offline training through the simulated channel, analog
// inference with PCM-noised front-ends, and the experiment sweeps.

namespace otasim::pipeline {

struct TrainConfig {
  int sensors = 1;
  fusion::ChannelSpec channel;
  fusion::FusionSpec fusion_spec;
  int epochs = 5;
  int batch_size = 32;
  double learning_rate = 0.001;
  uint64_t seed = 1;
  uint64_t stream_salt = 0;  // sweep cell index; keeps cells statistically apart
  std::string init_from;     // optional checkpoint trained for m-1 sensors
  double val_fraction = 0.1;
  int patience = 10;
  bool rotate_views = true;  // false: every sensor sees the sample as-is
  // Global L2 gradient-norm clip (0 disables). The lp fusion gradient
  // S^(1/p-1) spikes when the received superposition lands barely above the
  // clamp, so low-SNR training needs the spikes bounded.
  double grad_clip_norm = 5.0;
};

struct TrainResult {
  nn::ModelSplit model;          // best-validation snapshot
  double best_val_accuracy = 0.0;
  int best_epoch = -1;
  double initial_val_accuracy = 0.0;  // before the first update
  std::vector<double> epoch_val_accuracy;
  std::vector<double> epoch_snr_db;  // realized per-epoch training SNR draw
  double p_final = 1.0;
};

struct InferConfig {
  int sensors = 1;
  fusion::ChannelSpec channel;
  fusion::FusionSpec fusion_spec;
  pcm::PcmParams device;
  bool device_enabled = true;  // false: digital FP32 reference
  double drift_time_s = 1.0;   // elapsed since programming; device model
                               // evaluates at t = t_c + drift_time_s
  int prog_trials = 5;
  int chan_trials = 5;
  uint64_t seed = 1;
  uint64_t stream_salt = 0;
  bool rotate_views = true;
  bool with_energy = false;
  energy::EnergySpec energy_spec;
};

struct RunResult {
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;                // sample std over trials
  std::vector<double> trial_accuracies;     // programming-trial-major order
  std::vector<double> trial_sigma_n2;       // mean noise variance per trial
  double p_final = 1.0;
  int channel_uses = 1;
  std::optional<energy::EnergyReport> energy;
  double wall_time_s = 0.0;
};

/// Offline training (no PCM noise) of front end + back end + p through the
/// AWGN MAC. Keeps the best-validation model with the configured patience.
/// Sequential sensor-count initialization: pass init_model (or set
/// cfg.init_from to a checkpoint path) to continue from an m-1-sensor model.
TrainResult train(const data::Dataset& train_data, const nn::ModelSplit& architecture,
                  const TrainConfig& cfg, const nn::ModelSplit* init_model = nullptr);

/// Monte Carlo analog inference: prog_trials independent per-sensor device
/// programmings, each evaluated over chan_trials channel realizations.
RunResult infer(const data::Dataset& test_data, const nn::ModelSplit& model,
                const InferConfig& cfg);

enum class SweepKind { sensors, snr_matrix, drift };

struct SweepConfig {
  SweepKind kind = SweepKind::drift;
  std::vector<int> sensor_counts = {1, 2, 5};
  std::vector<double> train_snrs_db = {0.0, 5.0, 10.0};
  std::vector<double> test_snrs_db = {0.0, 5.0, 10.0};
  std::vector<double> drift_times_s = {1.0, 3600.0, 86400.0, 2592000.0, 31536000.0};
};

/// One CSV row per (cell, trial); see docs for the column contract.
struct SweepRow {
  std::string experiment_id;
  int sensors = 1;
  double train_snr_db = 0.0;
  double test_snr_db = 0.0;
  double drift_time_s = 0.0;
  int trial_id = 0;
  double accuracy = 0.0;
  double p_final = 1.0;
  double sigma_n2 = 0.0;
  std::optional<double> energy_total_j;
};

/// Runs the grid for the requested kind. Each cell derives its own streams
/// via stream_salt = cell index; a single-cell grid therefore reproduces a
/// plain infer() call.
std::vector<SweepRow> sweep(const data::Dataset& train_data, const data::Dataset& test_data,
                            const nn::ModelSplit& architecture, const TrainConfig& train_base,
                            const InferConfig& infer_base, const SweepConfig& grid);

}  // namespace otasim::pipeline
