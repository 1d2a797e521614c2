#pragma once

#include <optional>
#include <string>
#include <vector>

#include "otasim/rng.hpp"
#include "otasim/tensor.hpp"

namespace otasim::nn {

enum class LayerKind { conv2d, dense, relu, flatten };

std::string kind_name(LayerKind k);

/// One layer of the split network. relu/flatten carry no weights.
struct Layer {
  LayerKind kind = LayerKind::relu;

  // conv2d hyperparams
  int64_t in_channels = 0, out_channels = 0, kernel = 0, stride = 1, pad = 0;
  // dense hyperparams
  int64_t fan_in = 0, fan_out = 0;

  Tensor weights;  // conv: [OC,C,K,K]; dense: [O,F]
  Tensor bias;     // conv: [OC]; dense: [O]

  bool has_params() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }
  int64_t param_count() const { return has_params() ? weights.size() + bias.size() : 0; }
};

Layer make_conv2d(int64_t in_channels, int64_t out_channels, int64_t kernel, int64_t stride,
                  int64_t pad);
Layer make_dense(int64_t fan_in, int64_t fan_out);
Layer make_relu();
Layer make_flatten();

/// He-style uniform fan-in initialization for all parameterized layers.
void init_weights(std::vector<Layer>& stack, RngStream& rng);

/// Activations recorded during forward; activations[0] is the input,
/// activations[i+1] the output of layer i.
struct StackTrace {
  std::vector<Tensor> activations;
};

/// Runs the stack on a batched input. Pure: layers are never mutated.
/// Pass a trace to record intermediates for backward.
Tensor forward(const std::vector<Layer>& stack, const Tensor& input,
               StackTrace* trace = nullptr);

struct StackGrads {
  std::vector<Tensor> d_weights;  // empty tensor for parameterless layers
  std::vector<Tensor> d_bias;
  Tensor d_input;
};

/// Reverse pass; requires the trace of a prior forward over the same stack.
StackGrads backward(const std::vector<Layer>& stack, const StackTrace& trace,
                    const Tensor& d_output);

/// -log softmax(logits)[label] for a single 1-D logits vector.
double loss_softmax_xent(const Tensor& logits, int64_t label);

/// Mean loss over a batch [N,C]; also returns d(loss)/d(logits).
double loss_softmax_xent_batch(const Tensor& logits, const std::vector<int>& labels,
                               Tensor* d_logits);

/// argmax per row of [N,C].
std::vector<int> predict(const Tensor& logits);

// Bias-corrected Adam over a flat list of parameter tensors.
struct AdamState {
  int64_t step = 0;
  double lr = 0.001, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Tensor> m, v;

  void init(const std::vector<Tensor*>& params);
};

/// One update; `names` is used to identify the offending parameter when a
/// non-finite gradient is encountered.
void adam_step(AdamState& state, const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads,
               const std::vector<std::string>& names);

/// Sensor-side front end + device-side back end + fusion exponent.
struct ModelSplit {
  std::vector<Layer> front_end;
  std::vector<Layer> back_end;
  double p = 1.0;

  /// Flattened feature length at the split point for the given sample shape
  /// (without batch dim). Also validates front/back compatibility.
  int64_t feature_dim(const std::vector<int64_t>& sample_shape) const;
};

/// Table-style MNIST split: conv(1->channels, k x k, stride 1) + relu +
/// flatten | dense(d, hidden) + relu + dense(hidden, classes).
ModelSplit make_mnist_split(int64_t conv_channels = 10, int64_t kernel = 5, int64_t hidden = 50,
                            int64_t classes = 10, int64_t image_hw = 28);

/// Flat-vector split for synthetic data: flatten | dense + relu + dense.
ModelSplit make_vector_split(int64_t dims, int64_t hidden, int64_t classes);

}  // namespace otasim::nn
