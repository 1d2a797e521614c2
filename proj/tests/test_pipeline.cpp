#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "otasim/checkpoint.hpp"
#include "otasim/pipeline.hpp"

using namespace otasim;
using namespace otasim::pipeline;

namespace {

data::Dataset blobs_train() { return data::synthetic_blobs(400, 4, 12, 8.0, 500); }
data::Dataset blobs_test() { return data::synthetic_blobs(120, 4, 12, 8.0, 501); }

nn::ModelSplit blob_arch() { return nn::make_vector_split(12, 32, 4); }

TrainConfig blob_train_config() {
  TrainConfig tc;
  tc.sensors = 2;
  tc.channel.noiseless = true;
  tc.fusion_spec.mode = fusion::FusionMode::lp;
  tc.fusion_spec.p_trainable = true;
  tc.epochs = 5;
  tc.batch_size = 16;
  tc.learning_rate = 0.01;  // sanity-run pace; the toy problem needs few steps
  tc.seed = 900;
  tc.rotate_views = false;
  return tc;
}

InferConfig blob_infer_config() {
  InferConfig ic;
  ic.sensors = 2;
  ic.channel.noiseless = true;
  ic.fusion_spec.mode = fusion::FusionMode::lp;
  ic.device_enabled = false;
  ic.prog_trials = 1;
  ic.chan_trials = 1;
  ic.seed = 901;
  ic.rotate_views = false;
  return ic;
}

}  // namespace

TEST_CASE("separable blobs train to high accuracy; p starts in [0.95, 1.05]") {
  data::Dataset train_data = blobs_train();
  TrainConfig tc = blob_train_config();
  TrainResult tr = train(train_data, blob_arch(), tc);

  CHECK(tr.epoch_val_accuracy.size() == 5);
  CHECK(tr.best_val_accuracy >= 0.95);

  // Train-set accuracy through the noiseless digital path.
  InferConfig ic = blob_infer_config();
  RunResult rr = infer(train_data, tr.model, ic);
  CHECK(rr.accuracy_mean >= 0.99);
}

TEST_CASE("identical config and seed give identical checkpoints") {
  data::Dataset train_data = blobs_train();
  TrainConfig tc = blob_train_config();
  tc.epochs = 2;
  TrainResult a = train(train_data, blob_arch(), tc);
  TrainResult b = train(train_data, blob_arch(), tc);
  const std::string pa = "otasim_test_a.ckpt", pb = "otasim_test_b.ckpt";
  nn::save_checkpoint(a.model, 123, pa);
  nn::save_checkpoint(b.model, 123, pb);
  std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
  std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);
  std::remove(pa.c_str());
  std::remove(pb.c_str());

  // p initialization lands in [0.95, 1.05] before any update.
  TrainConfig probe = tc;
  probe.epochs = 1;
  probe.learning_rate = 1e-12;  // effectively frozen
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    probe.seed = seed;
    TrainResult tr = train(train_data, blob_arch(), probe);
    CHECK(tr.model.p >= 0.95 - 1e-9);
    CHECK(tr.model.p <= 1.05 + 1e-9);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  data::Dataset train_data = blobs_train();
  TrainConfig tc = blob_train_config();
  tc.epochs = 1;
  TrainResult tr = train(train_data, blob_arch(), tc);
  const std::string path = "otasim_test_rt.ckpt";
  nn::save_checkpoint(tr.model, 777, path);
  nn::Checkpoint ck = nn::load_checkpoint(path);
  CHECK(ck.config_digest == 777);
  CHECK(ck.model.p == tr.model.p);
  REQUIRE(ck.model.front_end.size() == tr.model.front_end.size());
  for (size_t i = 0; i < ck.model.front_end.size(); ++i) {
    CHECK(ck.model.front_end[i].weights.data == tr.model.front_end[i].weights.data);
    CHECK(ck.model.front_end[i].bias.data == tr.model.front_end[i].bias.data);
  }
  std::remove(path.c_str());
}

TEST_CASE("trial grid produces prog x chan accuracy samples") {
  data::Dataset train_data = blobs_train();
  data::Dataset test_data = blobs_test();
  TrainConfig tc = blob_train_config();
  tc.epochs = 2;
  TrainResult tr = train(train_data, blob_arch(), tc);

  InferConfig ic = blob_infer_config();
  ic.device_enabled = true;
  ic.channel.noiseless = false;
  ic.channel.snr_db = 10.0;
  ic.prog_trials = 5;
  ic.chan_trials = 5;
  RunResult rr = infer(test_data, tr.model, ic);
  CHECK(rr.trial_accuracies.size() == 25);
  CHECK(rr.accuracy_mean >= 0.0);
  CHECK(rr.accuracy_std >= 0.0);

  CHECK_THROWS_AS(
      [&] {
        InferConfig bad = ic;
        bad.drift_time_s = -1.0;
        return infer(test_data, tr.model, bad);
      }(),
      std::invalid_argument);
}

TEST_CASE("noiseless collapse: analog equals digital bit-identically in predictions") {
  data::Dataset train_data = blobs_train();
  data::Dataset test_data = blobs_test();
  TrainConfig tc = blob_train_config();
  tc.epochs = 2;
  TrainResult tr = train(train_data, blob_arch(), tc);

  InferConfig digital = blob_infer_config();
  RunResult dr = infer(test_data, tr.model, digital);

  InferConfig analog = digital;
  analog.device_enabled = true;
  analog.device.prog_noise = false;
  analog.device.drift_noise = false;
  analog.device.read_noise = false;
  RunResult ar = infer(test_data, tr.model, analog);

  CHECK(dr.trial_accuracies == ar.trial_accuracies);
}

TEST_CASE("sequential initialization starts near the previous model") {
  data::Dataset train_data = blobs_train();
  TrainConfig tc = blob_train_config();
  tc.sensors = 1;
  tc.epochs = 3;
  TrainResult first = train(train_data, blob_arch(), tc);

  TrainConfig next = tc;
  next.sensors = 2;
  next.epochs = 1;
  TrainResult second = train(train_data, blob_arch(), next, &first.model);
  CHECK(second.initial_val_accuracy >= first.best_val_accuracy - 0.05);

  // Architecture mismatch is a config error.
  nn::ModelSplit other = nn::make_vector_split(12, 8, 4);
  CHECK_THROWS_AS(train(train_data, other, next, &first.model), std::runtime_error);
}

TEST_CASE("init_from checkpoint path") {
  data::Dataset train_data = blobs_train();
  TrainConfig tc = blob_train_config();
  tc.epochs = 1;
  TrainResult tr = train(train_data, blob_arch(), tc);
  const std::string path = "otasim_test_init.ckpt";
  nn::save_checkpoint(tr.model, 1, path);
  TrainConfig next = tc;
  next.init_from = path;
  TrainResult tr2 = train(train_data, blob_arch(), next);
  CHECK(tr2.best_val_accuracy >= 0.0);
  std::remove(path.c_str());
}

TEST_CASE("single-cell drift grid reduces to a plain infer call") {
  data::Dataset train_data = blobs_train();
  data::Dataset test_data = blobs_test();
  TrainConfig tc = blob_train_config();
  tc.epochs = 2;
  InferConfig ic = blob_infer_config();
  ic.device_enabled = true;
  ic.channel.noiseless = false;
  ic.channel.snr_db = 5.0;
  ic.prog_trials = 2;
  ic.chan_trials = 2;

  SweepConfig grid;
  grid.kind = SweepKind::drift;
  grid.drift_times_s = {1.0};
  std::vector<SweepRow> rows = sweep(train_data, test_data, blob_arch(), tc, ic, grid);
  REQUIRE(rows.size() == 4);

  TrainResult tr = train(train_data, blob_arch(), tc);
  InferConfig direct = ic;
  direct.drift_time_s = 1.0;
  RunResult rr = infer(test_data, tr.model, direct);
  for (size_t t = 0; t < 4; ++t) {
    CHECK(rows[t].accuracy == rr.trial_accuracies[t]);
    CHECK(rows[t].sigma_n2 == rr.trial_sigma_n2[t]);
  }
}

TEST_CASE("average and exact-max baselines train end to end") {
  data::Dataset train_data = blobs_train();
  for (fusion::FusionMode mode : {fusion::FusionMode::average, fusion::FusionMode::exact_max}) {
    TrainConfig tc = blob_train_config();
    tc.fusion_spec.mode = mode;
    tc.fusion_spec.p_trainable = false;
    tc.channel.noiseless = false;
    tc.channel.snr_db = 15.0;
    TrainResult tr = train(train_data, blob_arch(), tc);
    CHECK(tr.best_val_accuracy >= 0.9);

    InferConfig ic = blob_infer_config();
    ic.fusion_spec.mode = mode;
    ic.channel.noiseless = false;
    ic.channel.snr_db = 15.0;
    RunResult rr = infer(train_data, tr.model, ic);
    CHECK(rr.accuracy_mean >= 0.9);
    CHECK(rr.channel_uses == (mode == fusion::FusionMode::exact_max ? 2 : 1));
  }
}

TEST_CASE("sweep kinds produce the expected grids") {
  data::Dataset train_data = data::synthetic_blobs(200, 3, 8, 8.0, 510);
  data::Dataset test_data = data::synthetic_blobs(60, 3, 8, 8.0, 511);
  nn::ModelSplit arch = nn::make_vector_split(8, 12, 3);
  TrainConfig tc = blob_train_config();
  tc.sensors = 1;
  tc.epochs = 1;
  tc.channel.noiseless = false;
  tc.channel.snr_db = 10.0;
  InferConfig ic = blob_infer_config();
  ic.device_enabled = true;
  ic.channel.noiseless = false;
  ic.prog_trials = 1;
  ic.chan_trials = 2;

  SweepConfig sensors_grid;
  sensors_grid.kind = SweepKind::sensors;
  sensors_grid.sensor_counts = {1, 2};
  std::vector<SweepRow> rows = sweep(train_data, test_data, arch, tc, ic, sensors_grid);
  // Per sensor count: 2 analog trials + 2 digital trials.
  CHECK(rows.size() == 8);
  CHECK(rows[0].experiment_id == "sensors");
  CHECK(rows[2].experiment_id == "sensors_digital");

  SweepConfig matrix;
  matrix.kind = SweepKind::snr_matrix;
  matrix.train_snrs_db = {0.0, 10.0};
  matrix.test_snrs_db = {0.0, 10.0};
  rows = sweep(train_data, test_data, arch, tc, ic, matrix);
  CHECK(rows.size() == 2 * 2 * 2);

  SweepConfig empty;
  empty.kind = SweepKind::drift;
  empty.drift_times_s = {};
  CHECK_THROWS_AS(sweep(train_data, test_data, arch, tc, ic, empty), std::invalid_argument);
}
