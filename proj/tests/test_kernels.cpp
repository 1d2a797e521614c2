#include <doctest.h>

#include "otasim/kernels.hpp"
#include "test_util.hpp"

using namespace otasim;
using namespace otasim::kernels;
using testutil::max_rel_err;
using testutil::random_tensor;

namespace {

// Sliding-window oracle, written as literally as possible: for every output
// position, lay the kernel over the padded input and sum.
Tensor conv_oracle(const Tensor& in, const Tensor& w, const Tensor& b, int64_t stride,
                   int64_t pad) {
  const int64_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int64_t OC = w.dim(0), K = w.dim(2);
  const int64_t PH = H + 2 * pad, PW = W + 2 * pad;
  Tensor padded({N, C, PH, PW});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
          padded.data[((n * C + c) * PH + y + pad) * PW + x + pad] =
              in.data[((n * C + c) * H + y) * W + x];
  const int64_t OH = (PH - K) / stride + 1, OW = (PW - K) / stride + 1;
  Tensor out({N, OC, OH, OW});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t oc = 0; oc < OC; ++oc)
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          double acc = b.data[oc];
          for (int64_t c = 0; c < C; ++c)
            for (int64_t kh = 0; kh < K; ++kh)
              for (int64_t kw = 0; kw < K; ++kw)
                acc += w.data[((oc * C + c) * K + kh) * K + kw] *
                       padded.data[((n * C + c) * PH + oh * stride + kh) * PW + ow * stride + kw];
          out.data[((n * OC + oc) * OH + oh) * OW + ow] = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("conv output size formula against the sliding-window oracle") {
  RngStream rng(11, {0});
  struct Shape {
    int64_t n, c, h, oc, k, stride, pad;
  };
  const Shape shapes[] = {
      {2, 1, 9, 3, 3, 1, 0}, {1, 2, 8, 2, 3, 2, 1}, {3, 1, 7, 4, 5, 1, 2},
      {2, 3, 6, 2, 2, 2, 0}, {1, 1, 28, 10, 5, 1, 0},
  };
  for (const auto& s : shapes) {
    Tensor in = random_tensor({s.n, s.c, s.h, s.h}, rng);
    Tensor w = random_tensor({s.oc, s.c, s.k, s.k}, rng);
    Tensor b = random_tensor({s.oc}, rng);
    Tensor got = conv2d_forward(in, w, b, s.stride, s.pad);
    Tensor want = conv_oracle(in, w, b, s.stride, s.pad);
    CHECK(got.shape == want.shape);
    CHECK(got.dim(2) == conv_out_dim(s.h, s.k, s.stride, s.pad));
    CHECK(max_rel_err(got, want) < 1e-12);
  }
}

TEST_CASE("parallel kernels match the serial reference") {
  RngStream rng(12, {0});
  for (int rep = 0; rep < 3; ++rep) {
    Tensor in = random_tensor({2, 2, 10, 10}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    const int64_t stride = 1 + rep % 2, pad = rep % 2;
    Tensor fwd = conv2d_forward(in, w, b, stride, pad);
    Tensor fwd_ref = serial::conv2d_forward(in, w, b, stride, pad);
    CHECK(max_rel_err(fwd, fwd_ref) < 1e-13);

    Tensor dout = random_tensor(fwd.shape, rng);
    Conv2dGrads g = conv2d_backward(in, w, dout, stride, pad);
    Conv2dGrads gr = serial::conv2d_backward(in, w, dout, stride, pad);
    CHECK(max_rel_err(g.d_input, gr.d_input) < 1e-12);
    CHECK(max_rel_err(g.d_weights, gr.d_weights) < 1e-12);
    CHECK(max_rel_err(g.d_bias, gr.d_bias) < 1e-12);
  }

  Tensor in = random_tensor({4, 17}, rng);
  Tensor w = random_tensor({6, 17}, rng);
  Tensor b = random_tensor({6}, rng);
  Tensor fwd = dense_forward(in, w, b);
  CHECK(max_rel_err(fwd, serial::dense_forward(in, w, b)) < 1e-13);
  Tensor dout = random_tensor(fwd.shape, rng);
  DenseGrads g = dense_backward(in, w, dout);
  DenseGrads gr = serial::dense_backward(in, w, dout);
  CHECK(max_rel_err(g.d_input, gr.d_input) < 1e-12);
  CHECK(max_rel_err(g.d_weights, gr.d_weights) < 1e-12);
  CHECK(max_rel_err(g.d_bias, gr.d_bias) < 1e-12);
}

TEST_CASE("conv shape errors") {
  RngStream rng(13, {0});
  Tensor in = random_tensor({1, 2, 6, 6}, rng);
  Tensor w = random_tensor({3, 1, 3, 3}, rng);  // channel mismatch
  Tensor b = random_tensor({3}, rng);
  CHECK_THROWS_AS(conv2d_forward(in, w, b, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(conv_out_dim(4, 7, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(conv_out_dim(8, 3, 0, 0), std::invalid_argument);
}
