#include "otasim/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "otasim/kernels.hpp"

namespace otasim {

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_str(const std::vector<int64_t>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace otasim

namespace otasim::nn {

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

Layer make_conv2d(int64_t in_channels, int64_t out_channels, int64_t kernel, int64_t stride,
                  int64_t pad) {
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || pad < 0) {
    throw std::invalid_argument("conv2d: bad hyperparams");
  }
  Layer l;
  l.kind = LayerKind::conv2d;
  l.in_channels = in_channels;
  l.out_channels = out_channels;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  l.weights = Tensor({out_channels, in_channels, kernel, kernel});
  l.bias = Tensor({out_channels});
  return l;
}

Layer make_dense(int64_t fan_in, int64_t fan_out) {
  if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("dense: bad fan sizes");
  Layer l;
  l.kind = LayerKind::dense;
  l.fan_in = fan_in;
  l.fan_out = fan_out;
  l.weights = Tensor({fan_out, fan_in});
  l.bias = Tensor({fan_out});
  return l;
}

Layer make_relu() {
  Layer l;
  l.kind = LayerKind::relu;
  return l;
}

Layer make_flatten() {
  Layer l;
  l.kind = LayerKind::flatten;
  return l;
}

void init_weights(std::vector<Layer>& stack, RngStream& rng) {
  for (Layer& l : stack) {
    if (!l.has_params()) continue;
    const int64_t fan_in = l.kind == LayerKind::conv2d
                               ? l.in_channels * l.kernel * l.kernel
                               : l.fan_in;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& w : l.weights.data) w = rng.uniform(-limit, limit);
    for (double& b : l.bias.data) b = 0.0;
  }
}

namespace {

std::vector<int64_t> flatten_shape(const std::vector<int64_t>& in) {
  int64_t rest = 1;
  for (size_t i = 1; i < in.size(); ++i) rest *= in[i];
  return {in[0], rest};
}

[[noreturn]] void shape_error(size_t layer_idx, const Layer& l, const std::string& what) {
  throw std::invalid_argument("layer " + std::to_string(layer_idx) + " (" + kind_name(l.kind) +
                              "): " + what);
}

}  // namespace

Tensor forward(const std::vector<Layer>& stack, const Tensor& input, StackTrace* trace) {
  Tensor cur = input;
  if (trace) {
    trace->activations.clear();
    trace->activations.push_back(cur);
  }
  for (size_t i = 0; i < stack.size(); ++i) {
    const Layer& l = stack[i];
    Tensor next;
    try {
      switch (l.kind) {
        case LayerKind::conv2d:
          next = kernels::conv2d_forward(cur, l.weights, l.bias, l.stride, l.pad);
          break;
        case LayerKind::dense:
          if (cur.ndim() != 2 || cur.dim(1) != l.fan_in) {
            shape_error(i, l, "expected input [N," + std::to_string(l.fan_in) + "], got " +
                                  shape_str(cur.shape));
          }
          next = kernels::dense_forward(cur, l.weights, l.bias);
          break;
        case LayerKind::relu:
          next = kernels::relu_forward(cur);
          break;
        case LayerKind::flatten:
          if (cur.ndim() < 2) shape_error(i, l, "expected batched input");
          next = cur.reshaped(flatten_shape(cur.shape));
          break;
      }
    } catch (const std::invalid_argument& e) {
      shape_error(i, l, e.what());
    }
    cur = std::move(next);
    if (trace) trace->activations.push_back(cur);
  }
  return cur;
}

StackGrads backward(const std::vector<Layer>& stack, const StackTrace& trace,
                    const Tensor& d_output) {
  if (trace.activations.size() != stack.size() + 1) {
    throw std::logic_error("backward: trace does not match stack (run forward first)");
  }
  StackGrads g;
  g.d_weights.resize(stack.size());
  g.d_bias.resize(stack.size());
  Tensor up = d_output;
  for (size_t ri = stack.size(); ri-- > 0;) {
    const Layer& l = stack[ri];
    const Tensor& in = trace.activations[ri];
    switch (l.kind) {
      case LayerKind::conv2d: {
        auto kg = kernels::conv2d_backward(in, l.weights, up, l.stride, l.pad);
        g.d_weights[ri] = std::move(kg.d_weights);
        g.d_bias[ri] = std::move(kg.d_bias);
        up = std::move(kg.d_input);
        break;
      }
      case LayerKind::dense: {
        auto kg = kernels::dense_backward(in, l.weights, up);
        g.d_weights[ri] = std::move(kg.d_weights);
        g.d_bias[ri] = std::move(kg.d_bias);
        up = std::move(kg.d_input);
        break;
      }
      case LayerKind::relu:
        up = kernels::relu_backward(in, up);
        break;
      case LayerKind::flatten:
        up = up.reshaped(in.shape);
        break;
    }
  }
  g.d_input = std::move(up);
  return g;
}

double loss_softmax_xent(const Tensor& logits, int64_t label) {
  if (logits.ndim() != 1) throw std::invalid_argument("loss: logits must be 1-D");
  const int64_t C = logits.dim(0);
  if (label < 0 || label >= C) {
    throw std::invalid_argument("loss: label " + std::to_string(label) + " out of range [0," +
                                std::to_string(C) + ")");
  }
  const double mx = *std::max_element(logits.data.begin(), logits.data.end());
  double lse = 0.0;
  for (double v : logits.data) lse += std::exp(v - mx);
  lse = std::log(lse) + mx;
  return lse - logits.data[static_cast<size_t>(label)];
}

double loss_softmax_xent_batch(const Tensor& logits, const std::vector<int>& labels,
                               Tensor* d_logits) {
  if (logits.ndim() != 2) throw std::invalid_argument("loss: logits must be [N,C]");
  const int64_t N = logits.dim(0), C = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != N) {
    throw std::invalid_argument("loss: label count mismatch");
  }
  if (d_logits) *d_logits = Tensor({N, C});
  double total = 0.0;
  for (int64_t n = 0; n < N; ++n) {
    const double* row = logits.data.data() + n * C;
    const int64_t label = labels[static_cast<size_t>(n)];
    if (label < 0 || label >= C) throw std::invalid_argument("loss: label out of range");
    const double mx = *std::max_element(row, row + C);
    double z = 0.0;
    for (int64_t c = 0; c < C; ++c) z += std::exp(row[c] - mx);
    total += std::log(z) + mx - row[label];
    if (d_logits) {
      double* grow = d_logits->data.data() + n * C;
      for (int64_t c = 0; c < C; ++c) {
        const double soft = std::exp(row[c] - mx) / z;
        grow[c] = (soft - (c == label ? 1.0 : 0.0)) / static_cast<double>(N);
      }
    }
  }
  return total / static_cast<double>(N);
}

std::vector<int> predict(const Tensor& logits) {
  if (logits.ndim() != 2) throw std::invalid_argument("predict: logits must be [N,C]");
  const int64_t N = logits.dim(0), C = logits.dim(1);
  std::vector<int> out(static_cast<size_t>(N));
  for (int64_t n = 0; n < N; ++n) {
    const double* row = logits.data.data() + n * C;
    out[static_cast<size_t>(n)] =
        static_cast<int>(std::max_element(row, row + C) - row);
  }
  return out;
}

void AdamState::init(const std::vector<Tensor*>& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const Tensor* p : params) {
    m.push_back(Tensor(p->shape));
    v.push_back(Tensor(p->shape));
  }
}

void adam_step(AdamState& state, const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads,
               const std::vector<std::string>& names) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw std::invalid_argument("adam: parameter/gradient/state count mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(g)) throw std::invalid_argument("adam: gradient shape mismatch");
    for (size_t j = 0; j < p.data.size(); ++j) {
      const double gv = g.data[j];
      if (!std::isfinite(gv)) {
        const std::string name = i < names.size() ? names[i] : std::to_string(i);
        throw std::runtime_error("adam: non-finite gradient in parameter " + name);
      }
      double& mj = state.m[i].data[j];
      double& vj = state.v[i].data[j];
      mj = state.beta1 * mj + (1.0 - state.beta1) * gv;
      vj = state.beta2 * vj + (1.0 - state.beta2) * gv * gv;
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      p.data[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

int64_t ModelSplit::feature_dim(const std::vector<int64_t>& sample_shape) const {
  std::vector<int64_t> in_shape = {1};
  in_shape.insert(in_shape.end(), sample_shape.begin(), sample_shape.end());
  Tensor probe(in_shape);
  Tensor feat = forward(front_end, probe);
  if (feat.ndim() != 2) {
    throw std::invalid_argument("model: front end must emit flat features; got " +
                                shape_str(feat.shape));
  }
  const int64_t d = feat.dim(1);
  for (const Layer& l : back_end) {
    if (l.kind == LayerKind::dense) {
      if (l.fan_in != d) {
        throw std::invalid_argument("model: back-end fan-in " + std::to_string(l.fan_in) +
                                    " != feature dim " + std::to_string(d));
      }
      break;
    }
  }
  return d;
}

ModelSplit make_mnist_split(int64_t conv_channels, int64_t kernel, int64_t hidden,
                            int64_t classes, int64_t image_hw) {
  ModelSplit m;
  m.front_end.push_back(make_conv2d(1, conv_channels, kernel, 1, 0));
  m.front_end.push_back(make_relu());
  m.front_end.push_back(make_flatten());
  const int64_t os = kernels::conv_out_dim(image_hw, kernel, 1, 0);
  const int64_t d = conv_channels * os * os;
  m.back_end.push_back(make_dense(d, hidden));
  m.back_end.push_back(make_relu());
  m.back_end.push_back(make_dense(hidden, classes));
  m.p = 1.0;
  return m;
}

ModelSplit make_vector_split(int64_t dims, int64_t hidden, int64_t classes) {
  ModelSplit m;
  m.front_end.push_back(make_flatten());
  m.front_end.push_back(make_dense(dims, hidden));
  m.front_end.push_back(make_relu());
  m.back_end.push_back(make_dense(hidden, classes));
  m.p = 1.0;
  return m;
}

}  // namespace otasim::nn
