#include "otasim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace otasim::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error: " + (path.empty() ? what : path + ": " + what));
}

void require_keys(const json& obj, const std::string& path, const std::set<std::string>& known) {
  for (const auto& item : obj.items()) {
    if (!known.count(item.key())) {
      fail("", "unknown key " + (path.empty() ? item.key() : path + "." + item.key()));
    }
  }
}

template <typename T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(path + "." + key, "type mismatch");
  }
}

void read_positive(const json& obj, const std::string& path, const char* key, double& out) {
  read(obj, path, key, out);
  if (!(out > 0.0)) fail(path + "." + key, "must be positive");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const Overrides& overrides) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    fail("", std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail("", "top level must be an object");
  require_keys(root, "",
               {"seed", "dataset", "model", "device", "channel", "fusion", "train", "infer",
                "sweep", "energy", "output"});

  ExperimentConfig cfg;
  read(root, "", "seed", cfg.seed);

  if (root.contains("dataset")) {
    const json& d = root["dataset"];
    require_keys(d, "dataset",
                 {"kind", "root", "train_limit", "test_limit", "n_train", "n_test", "classes",
                  "dims", "separation"});
    read(d, "dataset", "kind", cfg.dataset.kind);
    if (cfg.dataset.kind != "mnist" && cfg.dataset.kind != "synthetic") {
      fail("dataset.kind", "must be \"mnist\" or \"synthetic\"");
    }
    read(d, "dataset", "root", cfg.dataset.root);
    read(d, "dataset", "train_limit", cfg.dataset.train_limit);
    read(d, "dataset", "test_limit", cfg.dataset.test_limit);
    read(d, "dataset", "n_train", cfg.dataset.n_train);
    read(d, "dataset", "n_test", cfg.dataset.n_test);
    read(d, "dataset", "classes", cfg.dataset.classes);
    read(d, "dataset", "dims", cfg.dataset.dims);
    read(d, "dataset", "separation", cfg.dataset.separation);
  }

  if (root.contains("model")) {
    const json& m = root["model"];
    require_keys(m, "model", {"arch", "conv_channels", "kernel", "hidden", "classes"});
    read(m, "model", "arch", cfg.model.arch);
    if (cfg.model.arch != "mnist_cnn" && cfg.model.arch != "vector_mlp") {
      fail("model.arch", "must be \"mnist_cnn\" or \"vector_mlp\"");
    }
    read(m, "model", "conv_channels", cfg.model.conv_channels);
    read(m, "model", "kernel", cfg.model.kernel);
    read(m, "model", "hidden", cfg.model.hidden);
    read(m, "model", "classes", cfg.model.classes);
  }

  if (root.contains("device")) {
    const json& d = root["device"];
    require_keys(d, "device",
                 {"g_min_us", "g_max_us", "t_c_s", "t_read_s", "prog_noise", "drift_noise",
                  "read_noise", "clamp_conductance", "enabled"});
    read(d, "device", "g_min_us", cfg.device.g_min);
    read(d, "device", "g_max_us", cfg.device.g_max);
    read_positive(d, "device", "t_c_s", cfg.device.t_c);
    read_positive(d, "device", "t_read_s", cfg.device.t_read);
    read(d, "device", "prog_noise", cfg.device.prog_noise);
    read(d, "device", "drift_noise", cfg.device.drift_noise);
    read(d, "device", "read_noise", cfg.device.read_noise);
    read(d, "device", "clamp_conductance", cfg.device.clamp_conductance);
    read(d, "device", "enabled", cfg.device_enabled);
    if (cfg.device.g_min < 0.0 || cfg.device.g_min >= cfg.device.g_max) {
      fail("device.g_min_us", "need 0 <= g_min < g_max");
    }
  }

  if (root.contains("channel")) {
    const json& c = root["channel"];
    require_keys(c, "channel", {"snr_mode", "snr_db", "lo_db", "hi_db", "noiseless"});
    std::string mode = "fixed";
    read(c, "channel", "snr_mode", mode);
    if (mode == "fixed") {
      cfg.channel.mode = fusion::SnrMode::fixed;
    } else if (mode == "uniform_linear") {
      cfg.channel.mode = fusion::SnrMode::uniform_linear;
    } else {
      fail("channel.snr_mode", "must be \"fixed\" or \"uniform_linear\"");
    }
    read(c, "channel", "snr_db", cfg.channel.snr_db);
    read(c, "channel", "lo_db", cfg.channel.lo_db);
    read(c, "channel", "hi_db", cfg.channel.hi_db);
    read(c, "channel", "noiseless", cfg.channel.noiseless);
    if (cfg.channel.lo_db > cfg.channel.hi_db) fail("channel.lo_db", "lo_db must be <= hi_db");
  }

  if (root.contains("fusion")) {
    const json& f = root["fusion"];
    require_keys(f, "fusion", {"mode", "p", "p_trainable"});
    std::string mode = "lp";
    read(f, "fusion", "mode", mode);
    if (mode == "lp") {
      cfg.fusion_spec.mode = fusion::FusionMode::lp;
    } else if (mode == "average") {
      cfg.fusion_spec.mode = fusion::FusionMode::average;
    } else if (mode == "exact_max") {
      cfg.fusion_spec.mode = fusion::FusionMode::exact_max;
    } else {
      fail("fusion.mode", "must be \"lp\", \"average\" or \"exact_max\"");
    }
    read(f, "fusion", "p", cfg.fusion_spec.p);
    if (!(cfg.fusion_spec.p > 0.0)) fail("fusion.p", "must be positive");
    read(f, "fusion", "p_trainable", cfg.fusion_spec.p_trainable);
    if (cfg.fusion_spec.p_trainable && cfg.fusion_spec.mode != fusion::FusionMode::lp) {
      fail("fusion.p_trainable", "trainable p requires lp mode");
    }
  }

  if (root.contains("train")) {
    const json& t = root["train"];
    require_keys(t, "train",
                 {"sensors", "epochs", "batch_size", "learning_rate", "val_fraction", "patience",
                  "init_from", "rotate_views", "grad_clip_norm"});
    read(t, "train", "sensors", cfg.train.sensors);
    read(t, "train", "epochs", cfg.train.epochs);
    read(t, "train", "batch_size", cfg.train.batch_size);
    read_positive(t, "train", "learning_rate", cfg.train.learning_rate);
    read(t, "train", "val_fraction", cfg.train.val_fraction);
    read(t, "train", "patience", cfg.train.patience);
    read(t, "train", "init_from", cfg.train.init_from);
    read(t, "train", "rotate_views", cfg.train.rotate_views);
    read(t, "train", "grad_clip_norm", cfg.train.grad_clip_norm);
    if (cfg.train.grad_clip_norm < 0.0) fail("train.grad_clip_norm", "must be >= 0");
    if (cfg.train.epochs < 1) fail("train.epochs", "must be >= 1");
    if (cfg.train.val_fraction < 0.0 || cfg.train.val_fraction > 0.5) {
      fail("train.val_fraction", "must be in [0, 0.5]");
    }
  }

  if (root.contains("infer")) {
    const json& i = root["infer"];
    require_keys(i, "infer",
                 {"checkpoint", "sensors", "test_snr_db", "noiseless", "drift_time_s",
                  "prog_trials", "chan_trials", "energy"});
    read(i, "infer", "checkpoint", cfg.infer.checkpoint);
    read(i, "infer", "sensors", cfg.infer.sensors);
    read(i, "infer", "test_snr_db", cfg.infer.test_snr_db);
    read(i, "infer", "noiseless", cfg.infer.noiseless);
    read(i, "infer", "drift_time_s", cfg.infer.drift_time_s);
    read(i, "infer", "prog_trials", cfg.infer.prog_trials);
    read(i, "infer", "chan_trials", cfg.infer.chan_trials);
    read(i, "infer", "energy", cfg.infer.energy);
    if (cfg.infer.drift_time_s < 0.0) fail("infer.drift_time_s", "must be nonnegative");
    if (cfg.infer.prog_trials < 1 || cfg.infer.chan_trials < 1) {
      fail("infer.prog_trials", "trial counts must be >= 1");
    }
  }

  if (root.contains("sweep")) {
    const json& s = root["sweep"];
    require_keys(s, "sweep",
                 {"kind", "sensor_counts", "train_snrs_db", "test_snrs_db", "drift_times_s"});
    std::string kind = "drift";
    read(s, "sweep", "kind", kind);
    if (kind == "sensors") {
      cfg.sweep.kind = pipeline::SweepKind::sensors;
    } else if (kind == "snr_matrix") {
      cfg.sweep.kind = pipeline::SweepKind::snr_matrix;
    } else if (kind == "drift") {
      cfg.sweep.kind = pipeline::SweepKind::drift;
    } else {
      fail("sweep.kind", "must be \"sensors\", \"snr_matrix\" or \"drift\"");
    }
    read(s, "sweep", "sensor_counts", cfg.sweep.sensor_counts);
    read(s, "sweep", "train_snrs_db", cfg.sweep.train_snrs_db);
    read(s, "sweep", "test_snrs_db", cfg.sweep.test_snrs_db);
    read(s, "sweep", "drift_times_s", cfg.sweep.drift_times_s);
  }

  if (root.contains("energy")) {
    const json& e = root["energy"];
    require_keys(e, "energy",
                 {"g_max_us", "v_max_v", "op_duration_s", "rpi_power_w", "cells_per_sensor",
                  "sensors"});
    read_positive(e, "energy", "g_max_us", cfg.energy.spec.g_max_us);
    read_positive(e, "energy", "v_max_v", cfg.energy.spec.v_max);
    read_positive(e, "energy", "op_duration_s", cfg.energy.spec.op_duration_s);
    read_positive(e, "energy", "rpi_power_w", cfg.energy.spec.rpi_power_w);
    read(e, "energy", "cells_per_sensor", cfg.energy.cells_per_sensor);
    read(e, "energy", "sensors", cfg.energy.spec.sensors);
  }

  if (root.contains("output")) {
    const json& o = root["output"];
    require_keys(o, "output", {"dir"});
    read(o, "output", "dir", cfg.output_dir);
  }

  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
  if (overrides.dataset_root) cfg.dataset.root = *overrides.dataset_root;

  // Referenced files must exist at load time.
  auto check_file = [](const char* key, const std::string& path) {
    if (path.empty()) return;
    std::ifstream probe(path, std::ios::binary);
    if (!probe) fail(key, "file not found: " + path);
  };
  check_file("train.init_from", cfg.train.init_from);
  check_file("infer.checkpoint", cfg.infer.checkpoint);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path, const Overrides& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config error: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), overrides);
}

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["seed"] = seed;
  j["dataset"] = {{"kind", dataset.kind},
                  {"root", dataset.root},
                  {"train_limit", dataset.train_limit},
                  {"test_limit", dataset.test_limit},
                  {"n_train", dataset.n_train},
                  {"n_test", dataset.n_test},
                  {"classes", dataset.classes},
                  {"dims", dataset.dims},
                  {"separation", dataset.separation}};
  j["model"] = {{"arch", model.arch},
                {"conv_channels", model.conv_channels},
                {"kernel", model.kernel},
                {"hidden", model.hidden},
                {"classes", model.classes}};
  j["device"] = {{"g_min_us", device.g_min},
                 {"g_max_us", device.g_max},
                 {"t_c_s", device.t_c},
                 {"t_read_s", device.t_read},
                 {"prog_noise", device.prog_noise},
                 {"drift_noise", device.drift_noise},
                 {"read_noise", device.read_noise},
                 {"clamp_conductance", device.clamp_conductance},
                 {"enabled", device_enabled}};
  j["channel"] = {{"snr_mode", channel.mode == fusion::SnrMode::fixed ? "fixed" : "uniform_linear"},
                  {"snr_db", channel.snr_db},
                  {"lo_db", channel.lo_db},
                  {"hi_db", channel.hi_db},
                  {"noiseless", channel.noiseless}};
  const char* fmode = fusion_spec.mode == fusion::FusionMode::lp
                          ? "lp"
                          : fusion_spec.mode == fusion::FusionMode::average ? "average"
                                                                            : "exact_max";
  j["fusion"] = {{"mode", fmode}, {"p", fusion_spec.p}, {"p_trainable", fusion_spec.p_trainable}};
  j["train"] = {{"sensors", train.sensors},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"val_fraction", train.val_fraction},
                {"patience", train.patience},
                {"init_from", train.init_from},
                {"rotate_views", train.rotate_views},
                {"grad_clip_norm", train.grad_clip_norm}};
  j["infer"] = {{"checkpoint", infer.checkpoint},
                {"sensors", infer.sensors},
                {"test_snr_db", infer.test_snr_db},
                {"noiseless", infer.noiseless},
                {"drift_time_s", infer.drift_time_s},
                {"prog_trials", infer.prog_trials},
                {"chan_trials", infer.chan_trials},
                {"energy", infer.energy}};
  const char* skind = sweep.kind == pipeline::SweepKind::sensors
                          ? "sensors"
                          : sweep.kind == pipeline::SweepKind::snr_matrix ? "snr_matrix" : "drift";
  j["sweep"] = {{"kind", skind},
                {"sensor_counts", sweep.sensor_counts},
                {"train_snrs_db", sweep.train_snrs_db},
                {"test_snrs_db", sweep.test_snrs_db},
                {"drift_times_s", sweep.drift_times_s}};
  j["energy"] = {{"g_max_us", energy.spec.g_max_us},
                 {"v_max_v", energy.spec.v_max},
                 {"op_duration_s", energy.spec.op_duration_s},
                 {"rpi_power_w", energy.spec.rpi_power_w},
                 {"cells_per_sensor", energy.cells_per_sensor},
                 {"sensors", energy.spec.sensors}};
  j["output"] = {{"dir", output_dir}};
  return j.dump(2) + "\n";
}

}  // namespace otasim::config
