#include "otasim/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "otasim/checkpoint.hpp"
#include "otasim/kernels.hpp"

namespace otasim::pipeline {

namespace {

// Stream tags; every independent random consumer gets its own namespace.
enum StreamTag : uint64_t {
  kInit = 1,
  kPcm = 2,
  kView = 3,
  kChan = 4,
  kRot = 5,
  kValNoise = 6,
  kValRot = 7,
  kPInit = 8,
  kShuffle = 9,
  kTrainNoise = 10,
  kSplit = 11,
};

bool is_square_image(const Tensor& sample) {
  return sample.ndim() == 2 && sample.dim(0) == sample.dim(1) && sample.dim(0) > 1;
}

// Stacks per-sample views into a batched input: [B,1,H,W] for images,
// [B,1,D] for vector data.
Tensor stack_views(const std::vector<Tensor>& views) {
  const Tensor& first = views[0];
  std::vector<int64_t> shape;
  if (is_square_image(first)) {
    shape = {static_cast<int64_t>(views.size()), 1, first.dim(0), first.dim(1)};
  } else {
    shape = {static_cast<int64_t>(views.size()), 1, first.size()};
  }
  Tensor out(shape);
  const int64_t per = first.size();
  for (size_t i = 0; i < views.size(); ++i) {
    std::copy(views[i].data.begin(), views[i].data.end(),
              out.data.begin() + static_cast<int64_t>(i) * per);
  }
  return out;
}

Tensor make_view(const Tensor& sample, bool rotate_views, RngStream& rng) {
  if (!rotate_views) return sample;
  if (!is_square_image(sample)) {
    throw std::invalid_argument("pipeline: rotation views require square images");
  }
  return data::rotate(sample, rng.uniform(0.0, 180.0));
}

double mean_sq_row(const double* row, int64_t d) {
  double acc = 0.0;
  for (int64_t i = 0; i < d; ++i) acc += row[i] * row[i];
  return acc / static_cast<double>(d);
}

struct BatchFusion {
  std::vector<Tensor> features;  // raw F_m, [B,d] each
  Tensor y;                      // received superposition (lp/average)
  Tensor fused;                  // back-end input
  std::vector<int> argmax;       // exact_max routing, B*d entries
  double sigma_n2 = 0.0;
};

// Whole-batch noise calibration: sigma_n^2 from the mean per-element power
// of the noiseless superposition of the transmitted signals.
BatchFusion fuse_forward_batch(std::vector<Tensor> features, fusion::FusionMode mode, double p,
                               double snr_db, bool noiseless, RngStream& rng) {
  BatchFusion bf;
  const size_t m_count = features.size();
  std::vector<Tensor> xs;
  xs.reserve(m_count);
  for (const Tensor& f : features) {
    xs.push_back(mode == fusion::FusionMode::lp ? fusion::preprocess(f, p) : f);
  }
  const double power = fusion::superposition_power(xs);
  bf.sigma_n2 =
      (noiseless || power <= 0.0) ? 0.0 : fusion::noise_variance_from_snr(power, snr_db);
  switch (mode) {
    case fusion::FusionMode::lp: {
      auto [y, mac] = fusion::mac_transmit(xs, bf.sigma_n2, rng);
      bf.fused = fusion::postprocess(y, p);
      bf.y = std::move(y);
      break;
    }
    case fusion::FusionMode::average: {
      auto [y, mac] = fusion::mac_transmit(xs, bf.sigma_n2, rng);
      bf.y = y;
      const double inv_m = 1.0 / static_cast<double>(m_count);
      for (double& v : y.data) v *= inv_m;
      bf.fused = std::move(y);
      break;
    }
    case fusion::FusionMode::exact_max: {
      const size_t n = features[0].data.size();
      bf.fused = Tensor(features[0].shape);
      bf.argmax.assign(n, 0);
      const double sd = bf.sigma_n2 > 0.0 ? std::sqrt(bf.sigma_n2) : 0.0;
      for (size_t m = 0; m < m_count; ++m) {
        for (size_t i = 0; i < n; ++i) {
          const double received =
              features[m].data[i] + (sd > 0.0 ? rng.normal(0.0, sd) : 0.0);
          if (m == 0 || received > bf.fused.data[i]) {
            bf.fused.data[i] = received;
            bf.argmax[i] = static_cast<int>(m);
          }
        }
      }
      break;
    }
  }
  bf.features = std::move(features);
  return bf;
}

// d L/d F_m and d L/d p from the upstream gradient at the fused features.
void fuse_backward_batch(const BatchFusion& bf, fusion::FusionMode mode, double p,
                         const Tensor& d_fused, std::vector<Tensor>* d_features, double* d_p) {
  const size_t m_count = bf.features.size();
  d_features->clear();
  *d_p = 0.0;
  switch (mode) {
    case fusion::FusionMode::lp: {
      fusion::FusionGradients fg = fusion::fusion_gradients(bf.y, bf.features, p);
      for (size_t m = 0; m < m_count; ++m) {
        Tensor g(d_fused.shape);
        for (size_t i = 0; i < g.data.size(); ++i) {
          g.data[i] = d_fused.data[i] * fg.d_features[m].data[i];
        }
        d_features->push_back(std::move(g));
      }
      for (size_t i = 0; i < d_fused.data.size(); ++i) {
        *d_p += d_fused.data[i] * fg.d_p_coord.data[i];
      }
      break;
    }
    case fusion::FusionMode::average: {
      const double inv_m = 1.0 / static_cast<double>(m_count);
      for (size_t m = 0; m < m_count; ++m) {
        Tensor g(d_fused.shape);
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] = d_fused.data[i] * inv_m;
        d_features->push_back(std::move(g));
      }
      break;
    }
    case fusion::FusionMode::exact_max: {
      for (size_t m = 0; m < m_count; ++m) d_features->push_back(Tensor(d_fused.shape));
      for (size_t i = 0; i < d_fused.data.size(); ++i) {
        (*d_features)[static_cast<size_t>(bf.argmax[i])].data[i] = d_fused.data[i];
      }
      break;
    }
  }
}

void check_architecture_match(const nn::ModelSplit& a, const nn::ModelSplit& b) {
  auto stack_match = [](const std::vector<nn::Layer>& x, const std::vector<nn::Layer>& y) {
    if (x.size() != y.size()) return false;
    for (size_t i = 0; i < x.size(); ++i) {
      if (x[i].kind != y[i].kind || x[i].weights.shape != y[i].weights.shape) return false;
    }
    return true;
  };
  if (!stack_match(a.front_end, b.front_end) || !stack_match(a.back_end, b.back_end)) {
    throw std::runtime_error("config error: init_from checkpoint architecture mismatch");
  }
}

struct ParamRefs {
  std::vector<Tensor*> params;
  std::vector<std::string> names;
};

ParamRefs collect_params(nn::ModelSplit& model) {
  ParamRefs out;
  auto add_stack = [&](std::vector<nn::Layer>& stack, const std::string& tag) {
    for (size_t i = 0; i < stack.size(); ++i) {
      if (!stack[i].has_params()) continue;
      out.params.push_back(&stack[i].weights);
      out.names.push_back(tag + std::to_string(i) + ".weights");
      out.params.push_back(&stack[i].bias);
      out.names.push_back(tag + std::to_string(i) + ".bias");
    }
  };
  add_stack(model.front_end, "front");
  add_stack(model.back_end, "back");
  return out;
}

double evaluate_digital(const nn::ModelSplit& model, const data::Dataset& ds,
                        const std::vector<int64_t>& idx, const TrainConfig& cfg, double snr_db,
                        uint64_t epoch_tag) {
  const int64_t n = static_cast<int64_t>(idx.size());
  if (n == 0) return 0.0;
  const int64_t batch = 256;
  int64_t correct = 0;
  const double p = model.p;
  for (int64_t b0 = 0, bi = 0; b0 < n; b0 += batch, ++bi) {
    const int64_t b1 = std::min(b0 + batch, n);
    std::vector<Tensor> feats;
    for (int m = 0; m < cfg.sensors; ++m) {
      std::vector<Tensor> views;
      views.reserve(static_cast<size_t>(b1 - b0));
      for (int64_t i = b0; i < b1; ++i) {
        RngStream vr(cfg.seed, {cfg.stream_salt, kValRot, static_cast<uint64_t>(idx[i]),
                                static_cast<uint64_t>(m)});
        views.push_back(make_view(ds.sample(idx[i]), cfg.rotate_views, vr));
      }
      feats.push_back(nn::forward(model.front_end, stack_views(views)));
    }
    RngStream nrng(cfg.seed, {cfg.stream_salt, kValNoise, epoch_tag, static_cast<uint64_t>(bi)});
    BatchFusion bf = fuse_forward_batch(std::move(feats), cfg.fusion_spec.mode, p, snr_db,
                                        cfg.channel.noiseless, nrng);
    Tensor logits = nn::forward(model.back_end, bf.fused);
    std::vector<int> preds = nn::predict(logits);
    for (int64_t i = b0; i < b1; ++i) {
      if (preds[static_cast<size_t>(i - b0)] == ds.labels[static_cast<size_t>(idx[i])]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

// Validation channel: the fixed training SNR, or the dB midpoint of a
// robust-training range (keeps the metric comparable across epochs).
double validation_snr_db(const fusion::ChannelSpec& ch) {
  if (ch.mode == fusion::SnrMode::fixed) return ch.snr_db;
  return 0.5 * (ch.lo_db + ch.hi_db);
}

}  // namespace

TrainResult train(const data::Dataset& train_data, const nn::ModelSplit& architecture,
                  const TrainConfig& cfg, const nn::ModelSplit* init_model) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (cfg.sensors < 1) throw std::invalid_argument("train: need at least one sensor");
  if (cfg.fusion_spec.p_trainable && cfg.fusion_spec.mode != fusion::FusionMode::lp) {
    throw std::invalid_argument("train: trainable p requires lp fusion");
  }

  nn::ModelSplit model = architecture;
  nn::ModelSplit loaded;
  bool have_init = false;
  if (init_model) {
    check_architecture_match(architecture, *init_model);
    model = *init_model;
    have_init = true;
  } else if (!cfg.init_from.empty()) {
    loaded = nn::load_checkpoint(cfg.init_from).model;
    check_architecture_match(architecture, loaded);
    model = loaded;
    have_init = true;
  } else {
    RngStream wrng(cfg.seed, {cfg.stream_salt, kInit});
    nn::init_weights(model.front_end, wrng);
    nn::init_weights(model.back_end, wrng);
  }

  if (cfg.fusion_spec.mode == fusion::FusionMode::lp) {
    if (!cfg.fusion_spec.p_trainable) {
      model.p = cfg.fusion_spec.p;
    } else if (!have_init) {
      RngStream prng(cfg.seed, {cfg.stream_salt, kPInit});
      model.p = 0.95 + prng.uniform(0.0, 0.1);
    }  // trainable + init_from: continue from the inherited p
  } else {
    model.p = 1.0;
  }

  // Train/validation split over a seeded permutation of the dataset.
  const int64_t n_total = train_data.size();
  std::vector<int64_t> order(static_cast<size_t>(n_total));
  std::iota(order.begin(), order.end(), 0);
  RngStream srng(cfg.seed, {cfg.stream_salt, kSplit});
  for (int64_t i = n_total - 1; i > 0; --i) {
    std::swap(order[static_cast<size_t>(i)],
              order[static_cast<size_t>(srng.next_u64() % static_cast<uint64_t>(i + 1))]);
  }
  const int64_t n_val = std::llround(cfg.val_fraction * static_cast<double>(n_total));
  std::vector<int64_t> train_idx(order.begin(), order.end() - n_val);
  std::vector<int64_t> val_idx(order.end() - n_val, order.end());

  const bool train_p = cfg.fusion_spec.p_trainable;
  Tensor log_p({1});
  log_p.data[0] = std::log(model.p);
  ParamRefs refs = collect_params(model);
  if (train_p) {
    refs.params.push_back(&log_p);
    refs.names.push_back("fusion.log_p");
  }
  nn::AdamState adam;
  adam.lr = cfg.learning_rate;
  adam.init(refs.params);

  const double val_snr = validation_snr_db(cfg.channel);
  TrainResult result;
  result.initial_val_accuracy = evaluate_digital(model, train_data, val_idx, cfg, val_snr, 0);

  nn::ModelSplit best = model;
  double best_acc = -1.0;
  int best_epoch = -1;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream erng(cfg.seed, {cfg.stream_salt, kShuffle, static_cast<uint64_t>(epoch)});
    const double epoch_snr = cfg.channel.draw_snr_db(erng);
    result.epoch_snr_db.push_back(epoch_snr);
    std::vector<int64_t> perm = train_idx;
    for (int64_t i = static_cast<int64_t>(perm.size()) - 1; i > 0; --i) {
      std::swap(perm[static_cast<size_t>(i)],
                perm[static_cast<size_t>(erng.next_u64() % static_cast<uint64_t>(i + 1))]);
    }

    const int64_t n_train = static_cast<int64_t>(perm.size());
    for (int64_t b0 = 0, bi = 0; b0 < n_train; b0 += cfg.batch_size, ++bi) {
      const int64_t b1 = std::min<int64_t>(b0 + cfg.batch_size, n_train);
      const int64_t bsz = b1 - b0;

      // Per-sensor views, angles redrawn every epoch.
      std::vector<Tensor> inputs;
      std::vector<nn::StackTrace> front_traces(static_cast<size_t>(cfg.sensors));
      std::vector<Tensor> feats;
      std::vector<int> labels;
      labels.reserve(static_cast<size_t>(bsz));
      for (int64_t i = b0; i < b1; ++i) {
        labels.push_back(train_data.labels[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
      }
      for (int m = 0; m < cfg.sensors; ++m) {
        std::vector<Tensor> views;
        views.reserve(static_cast<size_t>(bsz));
        for (int64_t i = b0; i < b1; ++i) {
          const int64_t gi = perm[static_cast<size_t>(i)];
          RngStream vr(cfg.seed, {cfg.stream_salt, kRot, static_cast<uint64_t>(epoch),
                                  static_cast<uint64_t>(gi), static_cast<uint64_t>(m)});
          views.push_back(make_view(train_data.sample(gi), cfg.rotate_views, vr));
        }
        feats.push_back(nn::forward(model.front_end, stack_views(views),
                                    &front_traces[static_cast<size_t>(m)]));
      }

      RngStream nrng(cfg.seed, {cfg.stream_salt, kTrainNoise, static_cast<uint64_t>(epoch),
                                static_cast<uint64_t>(bi)});
      BatchFusion bf = fuse_forward_batch(std::move(feats), cfg.fusion_spec.mode, model.p,
                                          epoch_snr, cfg.channel.noiseless, nrng);

      nn::StackTrace back_trace;
      Tensor logits = nn::forward(model.back_end, bf.fused, &back_trace);
      Tensor d_logits;
      nn::loss_softmax_xent_batch(logits, labels, &d_logits);
      nn::StackGrads back_grads = nn::backward(model.back_end, back_trace, d_logits);

      std::vector<Tensor> d_feats;
      double d_p = 0.0;
      fuse_backward_batch(bf, cfg.fusion_spec.mode, model.p, back_grads.d_input, &d_feats, &d_p);

      // Shared front-end weights: accumulate gradients across sensors.
      std::vector<Tensor> front_dw, front_db;
      for (int m = 0; m < cfg.sensors; ++m) {
        nn::StackGrads fg = nn::backward(model.front_end, front_traces[static_cast<size_t>(m)],
                                         d_feats[static_cast<size_t>(m)]);
        if (m == 0) {
          front_dw = std::move(fg.d_weights);
          front_db = std::move(fg.d_bias);
        } else {
          for (size_t li = 0; li < front_dw.size(); ++li) {
            for (size_t j = 0; j < front_dw[li].data.size(); ++j) {
              front_dw[li].data[j] += fg.d_weights[li].data[j];
            }
            for (size_t j = 0; j < front_db[li].data.size(); ++j) {
              front_db[li].data[j] += fg.d_bias[li].data[j];
            }
          }
        }
      }

      std::vector<const Tensor*> grads;
      std::vector<Tensor> own;
      own.reserve(2);
      for (size_t li = 0; li < model.front_end.size(); ++li) {
        if (!model.front_end[li].has_params()) continue;
        grads.push_back(&front_dw[li]);
        grads.push_back(&front_db[li]);
      }
      for (size_t li = 0; li < model.back_end.size(); ++li) {
        if (!model.back_end[li].has_params()) continue;
        grads.push_back(&back_grads.d_weights[li]);
        grads.push_back(&back_grads.d_bias[li]);
      }
      Tensor d_log_p({1});
      if (train_p) {
        d_log_p.data[0] = d_p * model.p;  // optimize log p to keep p > 0
        grads.push_back(&d_log_p);
      }
      if (cfg.grad_clip_norm > 0.0) {
        double norm_sq = 0.0;
        for (const Tensor* g : grads) {
          for (double v : g->data) norm_sq += v * v;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm > cfg.grad_clip_norm) {
          const double scale = cfg.grad_clip_norm / norm;
          for (size_t li = 0; li < front_dw.size(); ++li) {
            for (double& v : front_dw[li].data) v *= scale;
            for (double& v : front_db[li].data) v *= scale;
          }
          for (Tensor& t : back_grads.d_weights) {
            for (double& v : t.data) v *= scale;
          }
          for (Tensor& t : back_grads.d_bias) {
            for (double& v : t.data) v *= scale;
          }
          d_log_p.data[0] *= scale;
        }
      }
      nn::adam_step(adam, refs.params, grads, refs.names);
      if (train_p) model.p = std::exp(log_p.data[0]);
    }

    const double val_acc = evaluate_digital(model, train_data, val_idx, cfg, val_snr,
                                            static_cast<uint64_t>(epoch) + 1);
    result.epoch_val_accuracy.push_back(val_acc);
    if (val_acc > best_acc) {
      best_acc = val_acc;
      best = model;
      best_epoch = epoch;
    }
    if (cfg.patience > 0 && epoch - best_epoch >= cfg.patience) break;
  }

  if (best_epoch < 0) {
    best = model;
    best_acc = result.epoch_val_accuracy.empty() ? 0.0 : result.epoch_val_accuracy.back();
  }
  result.model = std::move(best);
  result.best_val_accuracy = best_acc;
  result.best_epoch = best_epoch;
  result.p_final = result.model.p;
  return result;
}

namespace {

// Replaces the parameters of every parameterized front-end layer with their
// PCM-noised readout; weights and biases of one layer share one crossbar.
std::vector<nn::Layer> noisy_front_end(const std::vector<nn::Layer>& front,
                                       const InferConfig& cfg, double t_abs, int prog_trial,
                                       int sensor) {
  std::vector<nn::Layer> out = front;
  for (size_t li = 0; li < out.size(); ++li) {
    if (!out[li].has_params()) continue;
    const int64_t nw = out[li].weights.size();
    const int64_t nb = out[li].bias.size();
    Tensor flat({nw + nb});
    std::copy(out[li].weights.data.begin(), out[li].weights.data.end(), flat.data.begin());
    std::copy(out[li].bias.data.begin(), out[li].bias.data.end(), flat.data.begin() + nw);
    RngStream rng(cfg.seed,
                  {cfg.stream_salt, kPcm, static_cast<uint64_t>(prog_trial),
                   static_cast<uint64_t>(sensor), static_cast<uint64_t>(li)});
    Tensor noisy = pcm::noisy_weights(flat, t_abs, cfg.device, rng);
    std::copy(noisy.data.begin(), noisy.data.begin() + nw, out[li].weights.data.begin());
    std::copy(noisy.data.begin() + nw, noisy.data.end(), out[li].bias.data.begin());
  }
  return out;
}

// MVM-only energy accounting over the first parameterized front-end layer,
// using the programming-trial-0 device state and RMS input voltages scaled
// so the largest activation maps to v_max.
energy::EnergyReport compute_energy_report(const data::Dataset& test,
                                           const std::vector<std::vector<Tensor>>& sensor_views,
                                           const nn::ModelSplit& model, const InferConfig& cfg,
                                           double t_abs) {
  const std::vector<nn::Layer>& front = model.front_end;
  size_t li = front.size();
  for (size_t i = 0; i < front.size(); ++i) {
    if (front[i].has_params()) {
      li = i;
      break;
    }
  }
  if (li == front.size()) throw std::runtime_error("energy: front end has no crossbar layer");
  const nn::Layer& layer = front[li];
  const int64_t n_cells = layer.param_count();

  energy::EnergySpec spec = cfg.energy_spec;
  spec.sensors = cfg.sensors;
  energy::EnergyReport report = energy::make_report(n_cells, spec);

  // Crossbar geometry: rows = fan-in (+1 bias line), cols = outputs.
  int64_t rows, cols;
  if (layer.kind == nn::LayerKind::conv2d) {
    rows = layer.in_channels * layer.kernel * layer.kernel + 1;
    cols = layer.out_channels;
  } else {
    rows = layer.fan_in + 1;
    cols = layer.fan_out;
  }

  // Global activation scale across all sensors' inputs.
  double max_abs = 0.0;
  for (const auto& views : sensor_views) {
    for (const Tensor& v : views) {
      for (double x : v.data) max_abs = std::max(max_abs, std::abs(x));
    }
  }
  const double scale = max_abs > 0.0 ? spec.v_max / max_abs : 0.0;
  report.voltage_scale = scale;

  for (int m = 0; m < cfg.sensors; ++m) {
    // Replay the trial-0 device state for this sensor.
    const int64_t nw = layer.weights.size();
    Tensor flat({nw + layer.bias.size()});
    std::copy(layer.weights.data.begin(), layer.weights.data.end(), flat.data.begin());
    std::copy(layer.bias.data.begin(), layer.bias.data.end(), flat.data.begin() + nw);
    RngStream rng(cfg.seed, {cfg.stream_salt, kPcm, 0, static_cast<uint64_t>(m),
                             static_cast<uint64_t>(li)});
    pcm::NoisyReadout readout = cfg.device_enabled
                                    ? pcm::noisy_readout(flat, t_abs, cfg.device, rng)
                                    : pcm::NoisyReadout{};
    Tensor pair_g({rows, cols});
    if (!cfg.device_enabled) {
      pcm::CrossbarProgram prog = pcm::map_weights(flat, cfg.device);
      readout.g_pos_read = prog.g_pos;
      readout.g_neg_read = prog.g_neg;
    }
    for (int64_t c = 0; c < cols; ++c) {
      for (int64_t r = 0; r < rows - 1; ++r) {
        const int64_t wi = c * (rows - 1) + r;  // [O, fan] layout, conv included
        pair_g.at2(r, c) = readout.g_pos_read.data[static_cast<size_t>(wi)] +
                           readout.g_neg_read.data[static_cast<size_t>(wi)];
      }
      const int64_t bias_i = nw + c;
      pair_g.at2(rows - 1, c) = readout.g_pos_read.data[static_cast<size_t>(bias_i)] +
                                readout.g_neg_read.data[static_cast<size_t>(bias_i)];
    }

    // RMS voltage per crossbar row over every MVM application (for conv,
    // one application per output position); bias line held at one unit.
    Tensor volt({rows});
    std::vector<double> sumsq(static_cast<size_t>(rows), 0.0);
    int64_t applications = 0;
    const auto& views = sensor_views[static_cast<size_t>(m)];
    if (layer.kind == nn::LayerKind::conv2d) {
      const int64_t k = layer.kernel, stride = layer.stride, pad = layer.pad;
      const int64_t h = views[0].dim(0), w = views[0].dim(1);
      const int64_t oh = kernels::conv_out_dim(h, k, stride, pad);
      const int64_t ow = kernels::conv_out_dim(w, k, stride, pad);
      for (const Tensor& img : views) {
        for (int64_t oy = 0; oy < oh; ++oy) {
          for (int64_t ox = 0; ox < ow; ++ox) {
            ++applications;
            for (int64_t kh = 0; kh < k; ++kh) {
              for (int64_t kw = 0; kw < k; ++kw) {
                const int64_t y = oy * stride - pad + kh;
                const int64_t x = ox * stride - pad + kw;
                if (y < 0 || y >= h || x < 0 || x >= w) continue;
                const double a = img.data[static_cast<size_t>(y * w + x)] * scale;
                sumsq[static_cast<size_t>(kh * k + kw)] += a * a;
              }
            }
          }
        }
      }
    } else {
      for (const Tensor& v : views) {
        ++applications;
        for (int64_t r = 0; r < rows - 1; ++r) {
          const double a = v.data[static_cast<size_t>(r)] * scale;
          sumsq[static_cast<size_t>(r)] += a * a;
        }
      }
    }
    for (int64_t r = 0; r < rows - 1; ++r) {
      volt.data[static_cast<size_t>(r)] =
          std::sqrt(sumsq[static_cast<size_t>(r)] / static_cast<double>(applications));
    }
    volt.data[static_cast<size_t>(rows - 1)] = std::min(scale, spec.v_max);

    report.per_sensor_j.push_back(energy::mvm_energy(pair_g, volt, spec.op_duration_s));
  }
  report.total_j = std::accumulate(report.per_sensor_j.begin(), report.per_sensor_j.end(), 0.0);
  return report;
}

}  // namespace

RunResult infer(const data::Dataset& test_data, const nn::ModelSplit& model,
                const InferConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  if (cfg.sensors < 1) throw std::invalid_argument("infer: need at least one sensor");
  if (cfg.prog_trials < 1 || cfg.chan_trials < 1) {
    throw std::invalid_argument("infer: trial counts must be >= 1");
  }
  if (cfg.drift_time_s < 0.0) {
    throw std::invalid_argument("infer: drift time must be nonnegative");
  }
  const double t_abs = cfg.device.t_c + cfg.drift_time_s;
  const double p = model.p;
  const int64_t n = test_data.size();
  const int m_count = cfg.sensors;

  // Test-set views are fixed per evaluation run: streams keyed by
  // (seed, sample, sensor) only, shared by every trial.
  std::vector<std::vector<Tensor>> sensor_views(static_cast<size_t>(m_count));
  for (int m = 0; m < m_count; ++m) {
    auto& views = sensor_views[static_cast<size_t>(m)];
    views.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      RngStream vr(cfg.seed, {cfg.stream_salt, kView, static_cast<uint64_t>(i),
                              static_cast<uint64_t>(m)});
      views.push_back(make_view(test_data.sample(i), cfg.rotate_views, vr));
    }
  }

  const int pt_count = cfg.prog_trials, ct_count = cfg.chan_trials;
  std::vector<int64_t> correct(static_cast<size_t>(pt_count * ct_count), 0);
  std::vector<double> sigma_sum(static_cast<size_t>(pt_count * ct_count), 0.0);
  const double snr_db = cfg.channel.snr_db;  // test channel is a fixed-SNR spec
  const bool lp_mode = cfg.fusion_spec.mode == fusion::FusionMode::lp;
  const bool avg_mode = cfg.fusion_spec.mode == fusion::FusionMode::average;

  const int64_t batch = 256;
  for (int pt = 0; pt < pt_count; ++pt) {
    std::vector<std::vector<nn::Layer>> fronts;
    fronts.reserve(static_cast<size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
      fronts.push_back(cfg.device_enabled
                           ? noisy_front_end(model.front_end, cfg, t_abs, pt, m)
                           : model.front_end);
    }

    for (int64_t b0 = 0; b0 < n; b0 += batch) {
      const int64_t b1 = std::min(b0 + batch, n);
      const int64_t bsz = b1 - b0;
      std::vector<Tensor> feats;
      for (int m = 0; m < m_count; ++m) {
        std::vector<Tensor> views(sensor_views[static_cast<size_t>(m)].begin() + b0,
                                  sensor_views[static_cast<size_t>(m)].begin() + b1);
        feats.push_back(nn::forward(fronts[static_cast<size_t>(m)], stack_views(views)));
      }
      const int64_t d = feats[0].dim(1);

      // Transmitted signals and the per-example noise calibration.
      std::vector<Tensor> xs;
      xs.reserve(static_cast<size_t>(m_count));
      for (const Tensor& f : feats) xs.push_back(lp_mode ? fusion::preprocess(f, p) : f);
      Tensor sup({bsz, d});
      for (const Tensor& x : xs) {
        for (size_t i = 0; i < sup.data.size(); ++i) sup.data[i] += x.data[i];
      }
      std::vector<double> sigma_row(static_cast<size_t>(bsz), 0.0);
      for (int64_t r = 0; r < bsz; ++r) {
        const double power = mean_sq_row(sup.data.data() + r * d, d);
        sigma_row[static_cast<size_t>(r)] =
            (cfg.channel.noiseless || power <= 0.0)
                ? 0.0
                : fusion::noise_variance_from_snr(power, snr_db);
      }

      for (int ct = 0; ct < ct_count; ++ct) {
        Tensor fused({bsz, d});
        for (int64_t r = 0; r < bsz; ++r) {
          RngStream rng(cfg.seed, {cfg.stream_salt, kChan, static_cast<uint64_t>(pt),
                                   static_cast<uint64_t>(ct), static_cast<uint64_t>(b0 + r)});
          const double sd = sigma_row[static_cast<size_t>(r)] > 0.0
                                ? std::sqrt(sigma_row[static_cast<size_t>(r)])
                                : 0.0;
          double* out = fused.data.data() + r * d;
          if (lp_mode || avg_mode) {
            const double* srow = sup.data.data() + r * d;
            for (int64_t j = 0; j < d; ++j) {
              double y = srow[j] + (sd > 0.0 ? rng.normal(0.0, sd) : 0.0);
              if (avg_mode) {
                out[j] = y / static_cast<double>(m_count);
              } else {
                y = y > 0.0 ? y : 0.0;
                out[j] = p == 1.0 ? y : std::pow(y, 1.0 / p);
              }
            }
          } else {  // exact elementwise max over orthogonal uses
            for (int m = 0; m < m_count; ++m) {
              const double* frow = xs[static_cast<size_t>(m)].data.data() + r * d;
              for (int64_t j = 0; j < d; ++j) {
                const double received = frow[j] + (sd > 0.0 ? rng.normal(0.0, sd) : 0.0);
                if (m == 0 || received > out[j]) out[j] = received;
              }
            }
          }
        }
        Tensor logits = nn::forward(model.back_end, fused);
        std::vector<int> preds = nn::predict(logits);
        const size_t trial = static_cast<size_t>(pt * ct_count + ct);
        for (int64_t r = 0; r < bsz; ++r) {
          if (preds[static_cast<size_t>(r)] == test_data.labels[static_cast<size_t>(b0 + r)]) {
            ++correct[trial];
          }
          sigma_sum[trial] += sigma_row[static_cast<size_t>(r)];
        }
      }
    }
  }

  RunResult result;
  result.p_final = p;
  result.channel_uses = cfg.fusion_spec.mode == fusion::FusionMode::exact_max ? m_count : 1;
  for (size_t t = 0; t < correct.size(); ++t) {
    result.trial_accuracies.push_back(static_cast<double>(correct[t]) /
                                      static_cast<double>(n));
    result.trial_sigma_n2.push_back(sigma_sum[t] / static_cast<double>(n));
  }
  const size_t n_trials = result.trial_accuracies.size();
  double mean = 0.0;
  for (double a : result.trial_accuracies) mean += a;
  mean /= static_cast<double>(n_trials);
  double var = 0.0;
  for (double a : result.trial_accuracies) var += (a - mean) * (a - mean);
  result.accuracy_mean = mean;
  result.accuracy_std = n_trials > 1 ? std::sqrt(var / static_cast<double>(n_trials - 1)) : 0.0;

  if (cfg.with_energy) {
    result.energy = compute_energy_report(test_data, sensor_views, model, cfg, t_abs);
  }
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

std::vector<SweepRow> sweep(const data::Dataset& train_data, const data::Dataset& test_data,
                            const nn::ModelSplit& architecture, const TrainConfig& train_base,
                            const InferConfig& infer_base, const SweepConfig& grid) {
  std::vector<SweepRow> rows;
  auto emit = [&rows](const std::string& id, int sensors, double train_snr, double test_snr,
                      double drift_t, const RunResult& rr) {
    for (size_t t = 0; t < rr.trial_accuracies.size(); ++t) {
      SweepRow row;
      row.experiment_id = id;
      row.sensors = sensors;
      row.train_snr_db = train_snr;
      row.test_snr_db = test_snr;
      row.drift_time_s = drift_t;
      row.trial_id = static_cast<int>(t);
      row.accuracy = rr.trial_accuracies[t];
      row.p_final = rr.p_final;
      row.sigma_n2 = rr.trial_sigma_n2[t];
      if (rr.energy) row.energy_total_j = rr.energy->total_j;
      rows.push_back(std::move(row));
    }
  };
  const bool robust_train = train_base.channel.mode == fusion::SnrMode::uniform_linear;
  const double train_snr_label =
      robust_train ? std::numeric_limits<double>::quiet_NaN() : train_base.channel.snr_db;

  switch (grid.kind) {
    case SweepKind::sensors: {
      if (grid.sensor_counts.empty()) throw std::invalid_argument("sweep: empty sensor grid");
      nn::ModelSplit prev_model;
      bool have_prev = false;
      for (size_t ci = 0; ci < grid.sensor_counts.size(); ++ci) {
        TrainConfig tc = train_base;
        tc.sensors = grid.sensor_counts[ci];
        tc.stream_salt = ci;
        // Sequential initialization: reuse the previous sensor count's model.
        TrainResult tr = train(train_data, architecture, tc, have_prev ? &prev_model : nullptr);
        prev_model = tr.model;
        have_prev = true;
        InferConfig ic = infer_base;
        ic.sensors = tc.sensors;
        ic.stream_salt = ci;
        emit("sensors", tc.sensors, train_snr_label, ic.channel.snr_db, ic.drift_time_s,
             infer(test_data, tr.model, ic));
        InferConfig dc = ic;
        dc.device_enabled = false;
        dc.prog_trials = 1;
        emit("sensors_digital", tc.sensors, train_snr_label, dc.channel.snr_db, dc.drift_time_s,
             infer(test_data, tr.model, dc));
      }
      break;
    }
    case SweepKind::snr_matrix: {
      if (grid.train_snrs_db.empty() || grid.test_snrs_db.empty()) {
        throw std::invalid_argument("sweep: empty SNR grid");
      }
      for (size_t r = 0; r < grid.train_snrs_db.size(); ++r) {
        TrainConfig tc = train_base;
        tc.channel.mode = fusion::SnrMode::fixed;
        tc.channel.snr_db = grid.train_snrs_db[r];
        tc.stream_salt = r;
        TrainResult tr = train(train_data, architecture, tc);
        for (size_t c = 0; c < grid.test_snrs_db.size(); ++c) {
          InferConfig ic = infer_base;
          ic.channel.mode = fusion::SnrMode::fixed;
          ic.channel.snr_db = grid.test_snrs_db[c];
          ic.stream_salt = r * grid.test_snrs_db.size() + c;
          emit("snr_matrix", ic.sensors, grid.train_snrs_db[r], grid.test_snrs_db[c],
               ic.drift_time_s, infer(test_data, tr.model, ic));
        }
      }
      break;
    }
    case SweepKind::drift: {
      if (grid.drift_times_s.empty()) throw std::invalid_argument("sweep: empty drift grid");
      TrainResult tr = train(train_data, architecture, train_base);
      for (size_t c = 0; c < grid.drift_times_s.size(); ++c) {
        InferConfig ic = infer_base;
        ic.drift_time_s = grid.drift_times_s[c];
        ic.stream_salt = c;
        emit("drift", ic.sensors, train_snr_label, ic.channel.snr_db, ic.drift_time_s,
             infer(test_data, tr.model, ic));
      }
      break;
    }
  }
  return rows;
}

}  // namespace otasim::pipeline
