#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "otasim/checkpoint.hpp"
#include "otasim/config.hpp"
#include "otasim/csvio.hpp"
#include "otasim/dataset.hpp"
#include "otasim/pipeline.hpp"
#include "otasim/svgplot.hpp"

namespace {

using namespace otasim;

struct CliFlags {
  std::string config_path;
  std::string out_dir;
  std::string dataset_root;
  std::string checkpoint;
  uint64_t seed = 0;
  bool seed_set = false;
  bool energy = false;
};

config::ExperimentConfig resolve_config(const CliFlags& flags) {
  config::Overrides ov;
  if (flags.seed_set) ov.seed = flags.seed;
  if (!flags.out_dir.empty()) ov.output_dir = flags.out_dir;
  if (!flags.dataset_root.empty()) {
    ov.dataset_root = flags.dataset_root;
  } else if (const char* env = std::getenv("OTASIM_DATASET_ROOT")) {
    ov.dataset_root = env;
  }
  config::ExperimentConfig cfg = flags.config_path.empty()
                                     ? config::parse_config_text("{}", ov)
                                     : config::parse_config(flags.config_path, ov);
  return cfg;
}

nn::ModelSplit build_architecture(const config::ExperimentConfig& cfg) {
  if (cfg.model.arch == "mnist_cnn") {
    return nn::make_mnist_split(cfg.model.conv_channels, cfg.model.kernel, cfg.model.hidden,
                                cfg.model.classes);
  }
  return nn::make_vector_split(cfg.dataset.dims, cfg.model.hidden, cfg.model.classes);
}

data::Dataset load_split(const config::ExperimentConfig& cfg, const std::string& split) {
  if (cfg.dataset.kind == "mnist") {
    const int64_t limit = split == "train" ? cfg.dataset.train_limit : cfg.dataset.test_limit;
    return data::load_mnist(cfg.dataset.root, split, limit);
  }
  const int64_t n = split == "train" ? cfg.dataset.n_train : cfg.dataset.n_test;
  // Disjoint streams for the two synthetic splits.
  return data::synthetic_blobs(n, cfg.dataset.classes, cfg.dataset.dims, cfg.dataset.separation,
                               cfg.seed + (split == "train" ? 0 : 1));
}

bool dataset_rotates(const config::ExperimentConfig& cfg) {
  return cfg.dataset.kind == "mnist" && cfg.train.rotate_views;
}

pipeline::TrainConfig make_train_config(const config::ExperimentConfig& cfg) {
  pipeline::TrainConfig tc;
  tc.sensors = cfg.train.sensors;
  tc.channel = cfg.channel;
  tc.fusion_spec = cfg.fusion_spec;
  tc.epochs = cfg.train.epochs;
  tc.batch_size = cfg.train.batch_size;
  tc.learning_rate = cfg.train.learning_rate;
  tc.seed = cfg.seed;
  tc.init_from = cfg.train.init_from;
  tc.val_fraction = cfg.train.val_fraction;
  tc.patience = cfg.train.patience;
  tc.rotate_views = dataset_rotates(cfg);
  tc.grad_clip_norm = cfg.train.grad_clip_norm;
  return tc;
}

pipeline::InferConfig make_infer_config(const config::ExperimentConfig& cfg) {
  pipeline::InferConfig ic;
  ic.sensors = cfg.infer.sensors;
  ic.channel.mode = fusion::SnrMode::fixed;
  ic.channel.snr_db = cfg.infer.test_snr_db;
  ic.channel.noiseless = cfg.infer.noiseless;
  ic.fusion_spec = cfg.fusion_spec;
  ic.device = cfg.device;
  ic.device_enabled = cfg.device_enabled;
  ic.drift_time_s = cfg.infer.drift_time_s;
  ic.prog_trials = cfg.infer.prog_trials;
  ic.chan_trials = cfg.infer.chan_trials;
  ic.seed = cfg.seed;
  ic.rotate_views = dataset_rotates(cfg);
  ic.with_energy = cfg.infer.energy;
  ic.energy_spec = cfg.energy.spec;
  return ic;
}

// Every run folder carries the resolved configuration it was produced from.
void write_snapshot(const config::ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream os(cfg.output_dir + "/config.json", std::ios::binary);
  os << cfg.canonical_json();
}

void write_energy_csv(const energy::EnergyReport& r, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  os << "field,value\n";
  os << "scope," << r.scope << "\n";
  char buf[64];
  auto put = [&](const char* k, double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    os << k << "," << buf << "\n";
  };
  for (size_t i = 0; i < r.per_sensor_j.size(); ++i) {
    put(("per_sensor_" + std::to_string(i) + "_j").c_str(), r.per_sensor_j[i]);
  }
  put("total_j", r.total_j);
  put("upper_bound_j", r.upper_bound_j);
  put("digital_total_j", r.digital_total_j);
  put("efficiency_ratio", r.efficiency_ratio);
  put("voltage_scale", r.voltage_scale);
}

void print_energy(const energy::EnergyReport& r) {
  std::printf("energy report (scope: %s)\n", r.scope.c_str());
  for (size_t i = 0; i < r.per_sensor_j.size(); ++i) {
    std::printf("  sensor %zu: %.6g J\n", i, r.per_sensor_j[i]);
  }
  if (r.total_j > 0.0) std::printf("  total:          %.6g J\n", r.total_j);
  std::printf("  upper bound:    %.6g J\n", r.upper_bound_j);
  std::printf("  digital total:  %.6g J\n", r.digital_total_j);
  std::printf("  efficiency:     %.6g x (digital / upper bound)\n", r.efficiency_ratio);
}

int cmd_train(const CliFlags& flags) {
  config::ExperimentConfig cfg = resolve_config(flags);
  write_snapshot(cfg);
  data::Dataset train_data = load_split(cfg, "train");
  nn::ModelSplit arch = build_architecture(cfg);
  pipeline::TrainConfig tc = make_train_config(cfg);
  pipeline::TrainResult tr = pipeline::train(train_data, arch, tc);
  const std::string ck_path = cfg.output_dir + "/model.ckpt";
  nn::save_checkpoint(tr.model, nn::digest64(cfg.canonical_json()), ck_path);
  std::printf("trained %d epochs (best epoch %d, val accuracy %.4f, p = %.4f)\n",
              static_cast<int>(tr.epoch_val_accuracy.size()), tr.best_epoch,
              tr.best_val_accuracy, tr.p_final);
  // Per-epoch log, including the realized training-SNR draws.
  std::ofstream log(cfg.output_dir + "/train_log.csv", std::ios::binary);
  log << "epoch,snr_db,val_accuracy\n";
  for (size_t e = 0; e < tr.epoch_val_accuracy.size(); ++e) {
    std::printf("  epoch %zu: val %.4f (snr %.2f dB)\n", e, tr.epoch_val_accuracy[e],
                tr.epoch_snr_db[e]);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g\n", e, tr.epoch_snr_db[e],
                  tr.epoch_val_accuracy[e]);
    log << buf;
  }
  std::printf("checkpoint: %s\n", ck_path.c_str());
  return 0;
}

int cmd_infer(const CliFlags& flags) {
  config::ExperimentConfig cfg = resolve_config(flags);
  if (!flags.checkpoint.empty()) cfg.infer.checkpoint = flags.checkpoint;
  if (flags.energy) cfg.infer.energy = true;
  if (cfg.infer.checkpoint.empty()) {
    std::fprintf(stderr, "infer: no checkpoint given (infer.checkpoint or --checkpoint)\n");
    return 2;
  }
  write_snapshot(cfg);
  data::Dataset test_data = load_split(cfg, "test");
  nn::ModelSplit model = nn::load_checkpoint(cfg.infer.checkpoint).model;
  pipeline::InferConfig ic = make_infer_config(cfg);
  pipeline::RunResult rr = pipeline::infer(test_data, model, ic);

  std::vector<pipeline::SweepRow> rows;
  for (size_t t = 0; t < rr.trial_accuracies.size(); ++t) {
    pipeline::SweepRow row;
    row.experiment_id = ic.device_enabled ? "infer" : "infer_digital";
    row.sensors = ic.sensors;
    row.train_snr_db = std::nan("");
    row.test_snr_db = ic.channel.snr_db;
    row.drift_time_s = ic.drift_time_s;
    row.trial_id = static_cast<int>(t);
    row.accuracy = rr.trial_accuracies[t];
    row.p_final = rr.p_final;
    row.sigma_n2 = rr.trial_sigma_n2[t];
    if (rr.energy) row.energy_total_j = rr.energy->total_j;
    rows.push_back(row);
  }
  csvio::emit_csv(rows, cfg.output_dir + "/infer.csv");
  std::printf("accuracy %.4f +- %.4f over %zu trials (p = %.4f, %d channel use%s)\n",
              rr.accuracy_mean, rr.accuracy_std, rr.trial_accuracies.size(), rr.p_final,
              rr.channel_uses, rr.channel_uses == 1 ? "" : "s");
  if (rr.energy) {
    print_energy(*rr.energy);
    write_energy_csv(*rr.energy, cfg.output_dir + "/energy.csv");
  }
  std::printf("rows: %s\n", (cfg.output_dir + "/infer.csv").c_str());
  return 0;
}

int cmd_sweep(const CliFlags& flags) {
  config::ExperimentConfig cfg = resolve_config(flags);
  write_snapshot(cfg);
  data::Dataset train_data = load_split(cfg, "train");
  data::Dataset test_data = load_split(cfg, "test");
  nn::ModelSplit arch = build_architecture(cfg);
  pipeline::TrainConfig tc = make_train_config(cfg);
  pipeline::InferConfig ic = make_infer_config(cfg);
  std::vector<pipeline::SweepRow> rows =
      pipeline::sweep(train_data, test_data, arch, tc, ic, cfg.sweep);
  const std::string csv_path = cfg.output_dir + "/sweep.csv";
  csvio::emit_csv(rows, csv_path);
  std::printf("sweep finished: %zu rows -> %s\n", rows.size(), csv_path.c_str());
  return 0;
}

int cmd_energy(const CliFlags& flags) {
  config::ExperimentConfig cfg = resolve_config(flags);
  write_snapshot(cfg);
  energy::EnergyReport r = energy::make_report(cfg.energy.cells_per_sensor, cfg.energy.spec);
  print_energy(r);
  write_energy_csv(r, cfg.output_dir + "/energy.csv");
  return 0;
}

int cmd_plot(const std::string& csv, const std::string& kind, const std::string& out) {
  svg::PlotKind pk;
  if (kind == "sensors") {
    pk = svg::PlotKind::sensors;
  } else if (kind == "snr_matrix") {
    pk = svg::PlotKind::snr_matrix;
  } else if (kind == "drift") {
    pk = svg::PlotKind::drift;
  } else {
    std::fprintf(stderr, "plot: unknown kind %s\n", kind.c_str());
    return 2;
  }
  svg::emit_plot(csv, pk, out);
  std::printf("plot: %s\n", out.c_str());
  return 0;
}

int cmd_dump_device_model(const CliFlags& flags) {
  config::ExperimentConfig cfg = resolve_config(flags);
  const pcm::PcmParams& d = cfg.device;
  std::printf("PCM device model constants\n");
  std::printf("  g_min                %.6g uS\n", d.g_min);
  std::printf("  g_max                %.6g uS\n", d.g_max);
  std::printf("  t_c                  %.6g s\n", d.t_c);
  std::printf("  t_read               %.6g s\n", d.t_read);
  std::printf("  sigma_prog(g/g_max)  max(%.6g x^2 + %.6g x + %.6g, 0) uS\n", d.prog_coeffs[0],
              d.prog_coeffs[1], d.prog_coeffs[2]);
  std::printf("  mu_nu(g)             clamp(-0.0155 ln g + 0.0244, [%.6g, %.6g])\n", d.mu_nu_lo,
              d.mu_nu_hi);
  std::printf("  sigma_nu(g)          clamp(-0.0125 ln g - 0.0059, [%.6g, %.6g])\n",
              d.sigma_nu_lo, d.sigma_nu_hi);
  std::printf("  Q_s(g)               min(0.0088 / g^0.65, %.6g)\n", d.q_s_cap);
  std::printf("  sigma_read(t)        g_drift * Q_s * sqrt(ln((t + t_c) / (2 t_read)))\n");
  std::printf("  drift(t)             g_prog * (t / t_c)^(-nu), nu ~ N(mu_nu, sigma_nu)\n");
  std::printf("  prog_noise %s, drift_noise %s, read_noise %s, clamp %s\n",
              d.prog_noise ? "on" : "off", d.drift_noise ? "on" : "off",
              d.read_noise ? "on" : "off", d.clamp_conductance ? "on" : "off");
  std::printf("  probe: sigma_prog(0) = %.6g uS, Q_s(25) = %.6g, mu_nu(25) = %.6g\n",
              pcm::sigma_prog(0.0, d), pcm::q_s(25.0, d), pcm::mu_nu(25.0, d));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"otasim: over-the-air multi-sensor inference simulator with PCM crossbar sensors"};
  app.require_subcommand(1);

  CliFlags flags;
  std::string plot_csv, plot_kind = "drift", plot_out = "plot.svg";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config_path, "experiment config (JSON)");
    sub->add_option("--out", flags.out_dir, "output directory override");
    sub->add_option("--dataset-root", flags.dataset_root,
                    "dataset root override (or OTASIM_DATASET_ROOT)");
    sub->add_option("--seed", flags.seed, "seed override")->each([&](const std::string&) {
      flags.seed_set = true;
    });
  };

  CLI::App* train = app.add_subcommand("train", "offline training through the AWGN MAC");
  add_common(train);
  CLI::App* infer = app.add_subcommand("infer", "analog or digital inference from a checkpoint");
  add_common(infer);
  infer->add_option("--checkpoint", flags.checkpoint, "model checkpoint path");
  infer->add_flag("--energy", flags.energy, "attach the MVM energy report");
  CLI::App* sweep = app.add_subcommand("sweep", "sensor / SNR-matrix / drift grid");
  add_common(sweep);
  CLI::App* energy_cmd = app.add_subcommand("energy", "energy worked example from the config");
  add_common(energy_cmd);
  CLI::App* plot = app.add_subcommand("plot", "render a result CSV as a static SVG");
  plot->add_option("--csv", plot_csv, "input CSV")->required();
  plot->add_option("--kind", plot_kind, "sensors | snr_matrix | drift");
  plot->add_option("--svg-out", plot_out, "output SVG path");
  CLI::App* dump = app.add_subcommand("dump-device-model", "print all device-model constants");
  add_common(dump);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(flags);
    if (infer->parsed()) return cmd_infer(flags);
    if (sweep->parsed()) return cmd_sweep(flags);
    if (energy_cmd->parsed()) return cmd_energy(flags);
    if (plot->parsed()) return cmd_plot(plot_csv, plot_kind, plot_out);
    if (dump->parsed()) return cmd_dump_device_model(flags);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
