#pragma once

#include "otasim/tensor.hpp"

// Data-parallel compute cores. The default entry points are OpenMP-parallel;
// kernels::serial holds the plain reference loops the tests compare against.
// Every output element is accumulated by exactly one thread in a fixed order,
// so results are bit-identical across thread counts.

namespace otasim::kernels {

struct Conv2dGrads {
  Tensor d_input;    // [N, C, H, W]
  Tensor d_weights;  // [OC, C, K, K]
  Tensor d_bias;     // [OC]
};

struct DenseGrads {
  Tensor d_input;    // [N, F]
  Tensor d_weights;  // [O, F]
  Tensor d_bias;     // [O]
};

int64_t conv_out_dim(int64_t n, int64_t k, int64_t stride, int64_t pad);

// input [N,C,H,W], weights [OC,C,K,K], bias [OC] -> [N,OC,OH,OW]
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      int64_t stride, int64_t pad);
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& d_out,
                            int64_t stride, int64_t pad);

// input [N,F], weights [O,F], bias [O] -> [N,O]
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& d_out);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& d_out);

namespace serial {
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      int64_t stride, int64_t pad);
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& d_out,
                            int64_t stride, int64_t pad);
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& d_out);
}  // namespace serial

}  // namespace otasim::kernels
