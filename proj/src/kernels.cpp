#include "otasim/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace otasim::kernels {

int64_t conv_out_dim(int64_t n, int64_t k, int64_t stride, int64_t pad) {
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  int64_t span = n + 2 * pad - k;
  if (span < 0) throw std::invalid_argument("conv2d: kernel larger than padded input");
  return span / stride + 1;
}

namespace {

void check_conv_shapes(const Tensor& input, const Tensor& weights, const Tensor* bias) {
  if (input.ndim() != 4) throw std::invalid_argument("conv2d: input must be [N,C,H,W]");
  if (weights.ndim() != 4) throw std::invalid_argument("conv2d: weights must be [OC,C,K,K]");
  if (weights.dim(1) != input.dim(1)) {
    throw std::invalid_argument("conv2d: channel mismatch between input and weights");
  }
  if (bias && (bias->ndim() != 1 || bias->dim(0) != weights.dim(0))) {
    throw std::invalid_argument("conv2d: bias must be [OC]");
  }
}

void check_dense_shapes(const Tensor& input, const Tensor& weights, const Tensor* bias) {
  if (input.ndim() != 2) throw std::invalid_argument("dense: input must be [N,F]");
  if (weights.ndim() != 2) throw std::invalid_argument("dense: weights must be [O,F]");
  if (weights.dim(1) != input.dim(1)) {
    throw std::invalid_argument("dense: fan-in mismatch between input and weights");
  }
  if (bias && (bias->ndim() != 1 || bias->dim(0) != weights.dim(0))) {
    throw std::invalid_argument("dense: bias must be [O]");
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      int64_t stride, int64_t pad) {
  check_conv_shapes(input, weights, &bias);
  const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int64_t OC = weights.dim(0), K = weights.dim(2);
  const int64_t OH = conv_out_dim(H, K, stride, pad);
  const int64_t OW = conv_out_dim(W, K, stride, pad);
  const bool unit = stride == 1 && pad == 0;

  Tensor out({N, OC, OH, OW});
  const double* in = input.data.data();
  const double* w = weights.data.data();
  const double* b = bias.data.data();
  double* o = out.data.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t oc = 0; oc < OC; ++oc) {
      double* oplane = o + ((n * OC + oc) * OH) * OW;
      for (int64_t i = 0; i < OH * OW; ++i) oplane[i] = b[oc];
      for (int64_t c = 0; c < C; ++c) {
        const double* iplane = in + ((n * C + c) * H) * W;
        const double* wplane = w + ((oc * C + c) * K) * K;
        for (int64_t kh = 0; kh < K; ++kh) {
          for (int64_t kw = 0; kw < K; ++kw) {
            const double wv = wplane[kh * K + kw];
            if (unit) {
              // stride 1, no padding: every tap stays in bounds.
              for (int64_t oh = 0; oh < OH; ++oh) {
                const double* irow = iplane + (oh + kh) * W + kw;
                double* orow = oplane + oh * OW;
                for (int64_t ow = 0; ow < OW; ++ow) orow[ow] += wv * irow[ow];
              }
              continue;
            }
            for (int64_t oh = 0; oh < OH; ++oh) {
              const int64_t y = oh * stride - pad + kh;
              if (y < 0 || y >= H) continue;
              const double* irow = iplane + y * W;
              double* orow = oplane + oh * OW;
              for (int64_t ow = 0; ow < OW; ++ow) {
                const int64_t x = ow * stride - pad + kw;
                if (x < 0 || x >= W) continue;
                orow[ow] += wv * irow[x];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& d_out,
                            int64_t stride, int64_t pad) {
  check_conv_shapes(input, weights, nullptr);
  const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int64_t OC = weights.dim(0), K = weights.dim(2);
  const int64_t OH = conv_out_dim(H, K, stride, pad);
  const int64_t OW = conv_out_dim(W, K, stride, pad);
  if (d_out.shape != std::vector<int64_t>{N, OC, OH, OW}) {
    throw std::invalid_argument("conv2d: upstream gradient shape mismatch");
  }

  Conv2dGrads g{Tensor({N, C, H, W}), Tensor({OC, C, K, K}), Tensor({OC})};
  const double* in = input.data.data();
  const double* w = weights.data.data();
  const double* go = d_out.data.data();

  // d_bias: one thread per output channel.
#pragma omp parallel for schedule(static)
  for (int64_t oc = 0; oc < OC; ++oc) {
    double acc = 0.0;
    for (int64_t n = 0; n < N; ++n) {
      const double* gplane = go + ((n * OC + oc) * OH) * OW;
      for (int64_t i = 0; i < OH * OW; ++i) acc += gplane[i];
    }
    g.d_bias.data[static_cast<size_t>(oc)] = acc;
  }

  const bool unit = stride == 1 && pad == 0;

  // d_weights: one thread per (oc, c); inner sums run in fixed order. Four
  // independent accumulators break the add-latency chain on the unit path.
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t oc = 0; oc < OC; ++oc) {
    for (int64_t c = 0; c < C; ++c) {
      double* gw = g.d_weights.data.data() + ((oc * C + c) * K) * K;
      for (int64_t kh = 0; kh < K; ++kh) {
        for (int64_t kw = 0; kw < K; ++kw) {
          double acc = 0.0;
          if (unit) {
            double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
            for (int64_t n = 0; n < N; ++n) {
              const double* iplane = in + ((n * C + c) * H) * W;
              const double* gplane = go + ((n * OC + oc) * OH) * OW;
              for (int64_t oh = 0; oh < OH; ++oh) {
                const double* irow = iplane + (oh + kh) * W + kw;
                const double* grow = gplane + oh * OW;
                int64_t ow = 0;
                for (; ow + 4 <= OW; ow += 4) {
                  a0 += grow[ow] * irow[ow];
                  a1 += grow[ow + 1] * irow[ow + 1];
                  a2 += grow[ow + 2] * irow[ow + 2];
                  a3 += grow[ow + 3] * irow[ow + 3];
                }
                for (; ow < OW; ++ow) a0 += grow[ow] * irow[ow];
              }
            }
            acc = (a0 + a1) + (a2 + a3);
          } else {
            for (int64_t n = 0; n < N; ++n) {
              const double* iplane = in + ((n * C + c) * H) * W;
              const double* gplane = go + ((n * OC + oc) * OH) * OW;
              for (int64_t oh = 0; oh < OH; ++oh) {
                const int64_t y = oh * stride - pad + kh;
                if (y < 0 || y >= H) continue;
                const double* irow = iplane + y * W;
                const double* grow = gplane + oh * OW;
                for (int64_t ow = 0; ow < OW; ++ow) {
                  const int64_t x = ow * stride - pad + kw;
                  if (x < 0 || x >= W) continue;
                  acc += grow[ow] * irow[x];
                }
              }
            }
          }
          gw[kh * K + kw] = acc;
        }
      }
    }
  }

  // d_input: one thread per (n, c).
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      double* giplane = g.d_input.data.data() + ((n * C + c) * H) * W;
      for (int64_t oc = 0; oc < OC; ++oc) {
        const double* wplane = w + ((oc * C + c) * K) * K;
        const double* gplane = go + ((n * OC + oc) * OH) * OW;
        for (int64_t kh = 0; kh < K; ++kh) {
          for (int64_t kw = 0; kw < K; ++kw) {
            const double wv = wplane[kh * K + kw];
            if (wv == 0.0) continue;
            if (unit) {
              for (int64_t oh = 0; oh < OH; ++oh) {
                double* girow = giplane + (oh + kh) * W + kw;
                const double* grow = gplane + oh * OW;
                for (int64_t ow = 0; ow < OW; ++ow) girow[ow] += wv * grow[ow];
              }
              continue;
            }
            for (int64_t oh = 0; oh < OH; ++oh) {
              const int64_t y = oh * stride - pad + kh;
              if (y < 0 || y >= H) continue;
              double* girow = giplane + y * W;
              const double* grow = gplane + oh * OW;
              for (int64_t ow = 0; ow < OW; ++ow) {
                const int64_t x = ow * stride - pad + kw;
                if (x < 0 || x >= W) continue;
                girow[x] += wv * grow[ow];
              }
            }
          }
        }
      }
    }
  }
  return g;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  check_dense_shapes(input, weights, &bias);
  const int64_t N = input.dim(0), F = input.dim(1), O = weights.dim(0);
  Tensor out({N, O});
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t o = 0; o < O; ++o) {
      const double* irow = input.data.data() + n * F;
      const double* wrow = weights.data.data() + o * F;
      double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
      int64_t f = 0;
      for (; f + 4 <= F; f += 4) {
        a0 += wrow[f] * irow[f];
        a1 += wrow[f + 1] * irow[f + 1];
        a2 += wrow[f + 2] * irow[f + 2];
        a3 += wrow[f + 3] * irow[f + 3];
      }
      for (; f < F; ++f) a0 += wrow[f] * irow[f];
      out.data[static_cast<size_t>(n * O + o)] =
          bias.data[static_cast<size_t>(o)] + (a0 + a1) + (a2 + a3);
    }
  }
  return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& d_out) {
  check_dense_shapes(input, weights, nullptr);
  const int64_t N = input.dim(0), F = input.dim(1), O = weights.dim(0);
  if (d_out.shape != std::vector<int64_t>{N, O}) {
    throw std::invalid_argument("dense: upstream gradient shape mismatch");
  }
  DenseGrads g{Tensor({N, F}), Tensor({O, F}), Tensor({O})};
  const double* in = input.data.data();
  const double* w = weights.data.data();
  const double* go = d_out.data.data();

#pragma omp parallel for schedule(static)
  for (int64_t o = 0; o < O; ++o) {
    double* gw = g.d_weights.data.data() + o * F;
    double accb = 0.0;
    for (int64_t n = 0; n < N; ++n) {
      const double gv = go[n * O + o];
      accb += gv;
      const double* irow = in + n * F;
      for (int64_t f = 0; f < F; ++f) gw[f] += gv * irow[f];
    }
    g.d_bias.data[static_cast<size_t>(o)] = accb;
  }

#pragma omp parallel for schedule(static)
  for (int64_t n = 0; n < N; ++n) {
    double* gi = g.d_input.data.data() + n * F;
    for (int64_t o = 0; o < O; ++o) {
      const double gv = go[n * O + o];
      if (gv == 0.0) continue;
      const double* wrow = w + o * F;
      for (int64_t f = 0; f < F; ++f) gi[f] += gv * wrow[f];
    }
  }
  return g;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape);
  for (size_t i = 0; i < input.data.size(); ++i) {
    out.data[i] = input.data[i] > 0.0 ? input.data[i] : 0.0;
  }
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& d_out) {
  if (!input.same_shape(d_out)) {
    throw std::invalid_argument("relu: upstream gradient shape mismatch");
  }
  Tensor g(input.shape);
  for (size_t i = 0; i < input.data.size(); ++i) {
    g.data[i] = input.data[i] > 0.0 ? d_out.data[i] : 0.0;
  }
  return g;
}

// -------------------------------------------------------------------------
// Serial reference kernels: textbook loops, no pragmas, no skip tricks.

namespace serial {

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      int64_t stride, int64_t pad) {
  check_conv_shapes(input, weights, &bias);
  const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int64_t OC = weights.dim(0), K = weights.dim(2);
  const int64_t OH = conv_out_dim(H, K, stride, pad);
  const int64_t OW = conv_out_dim(W, K, stride, pad);
  Tensor out({N, OC, OH, OW});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t oc = 0; oc < OC; ++oc)
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          double acc = bias.data[static_cast<size_t>(oc)];
          for (int64_t c = 0; c < C; ++c)
            for (int64_t kh = 0; kh < K; ++kh)
              for (int64_t kw = 0; kw < K; ++kw) {
                const int64_t y = oh * stride - pad + kh;
                const int64_t x = ow * stride - pad + kw;
                if (y < 0 || y >= H || x < 0 || x >= W) continue;
                acc += weights.data[static_cast<size_t>(((oc * C + c) * K + kh) * K + kw)] *
                       input.data[static_cast<size_t>(((n * C + c) * H + y) * W + x)];
              }
          out.data[static_cast<size_t>(((n * OC + oc) * OH + oh) * OW + ow)] = acc;
        }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& d_out,
                            int64_t stride, int64_t pad) {
  check_conv_shapes(input, weights, nullptr);
  const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int64_t OC = weights.dim(0), K = weights.dim(2);
  const int64_t OH = conv_out_dim(H, K, stride, pad);
  const int64_t OW = conv_out_dim(W, K, stride, pad);
  Conv2dGrads g{Tensor({N, C, H, W}), Tensor({OC, C, K, K}), Tensor({OC})};
  for (int64_t n = 0; n < N; ++n)
    for (int64_t oc = 0; oc < OC; ++oc)
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          const double gv =
              d_out.data[static_cast<size_t>(((n * OC + oc) * OH + oh) * OW + ow)];
          g.d_bias.data[static_cast<size_t>(oc)] += gv;
          for (int64_t c = 0; c < C; ++c)
            for (int64_t kh = 0; kh < K; ++kh)
              for (int64_t kw = 0; kw < K; ++kw) {
                const int64_t y = oh * stride - pad + kh;
                const int64_t x = ow * stride - pad + kw;
                if (y < 0 || y >= H || x < 0 || x >= W) continue;
                const size_t wi = static_cast<size_t>(((oc * C + c) * K + kh) * K + kw);
                const size_t ii = static_cast<size_t>(((n * C + c) * H + y) * W + x);
                g.d_weights.data[wi] += gv * input.data[ii];
                g.d_input.data[ii] += gv * weights.data[wi];
              }
        }
  return g;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  check_dense_shapes(input, weights, &bias);
  const int64_t N = input.dim(0), F = input.dim(1), O = weights.dim(0);
  Tensor out({N, O});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t o = 0; o < O; ++o) {
      double acc = bias.data[static_cast<size_t>(o)];
      for (int64_t f = 0; f < F; ++f) {
        acc += weights.data[static_cast<size_t>(o * F + f)] *
               input.data[static_cast<size_t>(n * F + f)];
      }
      out.data[static_cast<size_t>(n * O + o)] = acc;
    }
  return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& d_out) {
  check_dense_shapes(input, weights, nullptr);
  const int64_t N = input.dim(0), F = input.dim(1), O = weights.dim(0);
  DenseGrads g{Tensor({N, F}), Tensor({O, F}), Tensor({O})};
  for (int64_t n = 0; n < N; ++n)
    for (int64_t o = 0; o < O; ++o) {
      const double gv = d_out.data[static_cast<size_t>(n * O + o)];
      g.d_bias.data[static_cast<size_t>(o)] += gv;
      for (int64_t f = 0; f < F; ++f) {
        g.d_weights.data[static_cast<size_t>(o * F + f)] +=
            gv * input.data[static_cast<size_t>(n * F + f)];
        g.d_input.data[static_cast<size_t>(n * F + f)] +=
            gv * weights.data[static_cast<size_t>(o * F + f)];
      }
    }
  return g;
}

}  // namespace serial

}  // namespace otasim::kernels
