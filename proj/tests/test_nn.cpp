#include <doctest.h>

#include <cmath>

#include "otasim/nn.hpp"
#include "test_util.hpp"

using namespace otasim;
using namespace otasim::nn;
using testutil::max_rel_err;
using testutil::random_tensor;

namespace {

// Central finite differences of a scalar loss with respect to one tensor.
template <typename LossFn>
Tensor fd_grad(Tensor& x, LossFn loss, double h = 1e-5) {
  Tensor g(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double keep = x.data[i];
    x.data[i] = keep + h;
    const double up = loss();
    x.data[i] = keep - h;
    const double down = loss();
    x.data[i] = keep;
    g.data[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double sum_sq(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data) acc += v * v;
  return acc;
}

}  // namespace

TEST_CASE("mnist front end emits 5760 features") {
  ModelSplit m = make_mnist_split();
  RngStream rng(1, {0});
  init_weights(m.front_end, rng);
  init_weights(m.back_end, rng);
  Tensor input({2, 1, 28, 28});
  for (double& v : input.data) v = rng.uniform(0.0, 1.0);
  Tensor f = forward(m.front_end, input);
  CHECK(f.shape == std::vector<int64_t>{2, 5760});
  CHECK(m.feature_dim({1, 28, 28}) == 5760);
  // Front end weight count matches the 260-parameter crossbar.
  CHECK(m.front_end[0].param_count() == 260);
}

TEST_CASE("relu and identity dense forward") {
  std::vector<Layer> relu_stack = {make_relu()};
  Tensor x({1, 3}, {-1.0, 0.0, 2.0});
  Tensor y = forward(relu_stack, x);
  CHECK(y.data == std::vector<double>{0.0, 0.0, 2.0});

  Layer dense = make_dense(3, 3);
  for (int i = 0; i < 3; ++i) dense.weights.at2(i, i) = 1.0;
  std::vector<Layer> id_stack = {dense};
  Tensor out = forward(id_stack, x);
  CHECK(out.data == x.data);
}

TEST_CASE("forward is pure and deterministic") {
  RngStream rng(2, {0});
  ModelSplit m = make_vector_split(8, 6, 3);
  init_weights(m.front_end, rng);
  Tensor x = random_tensor({4, 1, 8}, rng);
  Tensor a = forward(m.front_end, x);
  Tensor b = forward(m.front_end, x);
  CHECK(a.data == b.data);
}

TEST_CASE("shape error names the offending layer") {
  ModelSplit m = make_mnist_split();
  Tensor bad({1, 1, 14, 14});
  try {
    forward(m.back_end, bad);
    FAIL("expected a dimension error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("layer 0 (dense)") != std::string::npos);
  }
}

TEST_CASE("softmax cross-entropy examples") {
  Tensor uniform({10});
  CHECK(loss_softmax_xent(uniform, 3) == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  Tensor extreme({2}, {1000.0, 0.0});
  CHECK(loss_softmax_xent(extreme, 0) == doctest::Approx(0.0).epsilon(1e-12));

  Tensor pair({2}, {0.0, 0.0});
  CHECK(loss_softmax_xent(pair, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(loss_softmax_xent(pair, 2), std::invalid_argument);
  CHECK_THROWS_AS(loss_softmax_xent(pair, -1), std::invalid_argument);
}

TEST_CASE("softmax cross-entropy shift invariance") {
  RngStream rng(3, {0});
  for (int rep = 0; rep < 20; ++rep) {
    Tensor logits = random_tensor({7}, rng, -3.0, 3.0);
    const double base = loss_softmax_xent(logits, rep % 7);
    Tensor shifted = logits;
    const double c = rng.uniform(-10.0, 10.0);
    for (double& v : shifted.data) v += c;
    CHECK(std::abs(loss_softmax_xent(shifted, rep % 7) - base) < 1e-12);
  }
}

TEST_CASE("input gradient of an identity network under L = f(x)^2") {
  // d/dx x^2 = 2x; at x = 3 the gradient is 6.
  Layer dense = make_dense(1, 1);
  dense.weights.data[0] = 1.0;
  std::vector<Layer> stack = {dense};
  Tensor x({1, 1}, {3.0});
  StackTrace trace;
  Tensor f = forward(stack, x, &trace);
  Tensor upstream({1, 1}, {2.0 * f.data[0]});
  StackGrads g = backward(stack, trace, upstream);
  CHECK(g.d_input.data[0] == doctest::Approx(6.0).epsilon(1e-12));

  auto loss = [&] { return sum_sq(forward(stack, x)); };
  Tensor fd = fd_grad(x, loss);
  CHECK(std::abs(g.d_input.data[0] - fd.data[0]) / 6.0 < 1e-6);
}

TEST_CASE("backward before forward is a state error") {
  std::vector<Layer> stack = {make_relu()};
  StackTrace empty;
  Tensor up({1, 2});
  CHECK_THROWS_AS(backward(stack, empty, up), std::logic_error);
}

TEST_CASE("zero upstream gradient zeroes all parameter gradients") {
  RngStream rng(4, {0});
  ModelSplit m = make_vector_split(6, 5, 4);
  init_weights(m.front_end, rng);
  Tensor x = random_tensor({3, 1, 6}, rng);
  StackTrace trace;
  Tensor f = forward(m.front_end, x, &trace);
  StackGrads g = backward(m.front_end, trace, Tensor(f.shape));
  for (const Tensor& dw : g.d_weights) {
    for (double v : dw.data) CHECK(v == 0.0);
  }
}

TEST_CASE("dense weight gradient equals input x upstream on one sample") {
  RngStream rng(5, {0});
  Layer dense = make_dense(4, 3);
  for (double& v : dense.weights.data) v = rng.uniform(-1.0, 1.0);
  std::vector<Layer> stack = {dense};
  Tensor x = random_tensor({1, 4}, rng);
  StackTrace trace;
  forward(stack, x, &trace);
  Tensor up = random_tensor({1, 3}, rng);
  StackGrads g = backward(stack, trace, up);
  for (int64_t o = 0; o < 3; ++o) {
    for (int64_t f = 0; f < 4; ++f) {
      CHECK(g.d_weights[0].at2(o, f) ==
            doctest::Approx(up.data[o] * x.data[f]).epsilon(1e-12));
    }
  }
}

TEST_CASE("analytic gradients match central finite differences per layer kind") {
  RngStream rng(6, {0});
  // conv2d + relu + flatten + dense, checked jointly under L = sum(out^2).
  std::vector<Layer> stack;
  stack.push_back(make_conv2d(2, 3, 3, 1, 1));
  stack.push_back(make_relu());
  stack.push_back(make_flatten());
  stack.push_back(make_dense(3 * 6 * 6, 5));
  init_weights(stack, rng);
  // Keep relu inputs away from the kink so the FD probe is well-conditioned.
  Tensor x = random_tensor({2, 2, 6, 6}, rng, 0.5, 1.5);

  StackTrace trace;
  Tensor out = forward(stack, x, &trace);
  Tensor up(out.shape);
  for (size_t i = 0; i < out.data.size(); ++i) up.data[i] = 2.0 * out.data[i];
  StackGrads g = backward(stack, trace, up);

  auto loss = [&] { return sum_sq(forward(stack, x)); };
  Tensor fd_x = fd_grad(x, loss);
  CHECK(max_rel_err(g.d_input, fd_x, 1e-4) < 1e-4);
  Tensor fd_wc = fd_grad(stack[0].weights, loss);
  CHECK(max_rel_err(g.d_weights[0], fd_wc, 1e-4) < 1e-4);
  Tensor fd_bc = fd_grad(stack[0].bias, loss);
  CHECK(max_rel_err(g.d_bias[0], fd_bc, 1e-4) < 1e-4);
  Tensor fd_wd = fd_grad(stack[3].weights, loss);
  CHECK(max_rel_err(g.d_weights[3], fd_wd, 1e-4) < 1e-4);
}

TEST_CASE("adam first step and fixed point") {
  Tensor param({1});
  AdamState st;
  st.init({&param});
  Tensor grad({1}, {1.0});
  adam_step(st, {&param}, {&grad}, {"p"});
  CHECK(param.data[0] == doctest::Approx(-0.001).epsilon(1e-6));
  CHECK(st.step == 1);

  Tensor zero_param({3});
  AdamState st2;
  st2.init({&zero_param});
  Tensor zero_grad({3});
  for (int i = 0; i < 5; ++i) adam_step(st2, {&zero_param}, {&zero_grad}, {"p"});
  for (double v : zero_param.data) CHECK(v == 0.0);
}

TEST_CASE("adam rejects non-finite gradients by name") {
  Tensor param({2});
  AdamState st;
  st.init({&param});
  Tensor grad({2}, {0.0, std::nan("")});
  try {
    adam_step(st, {&param}, {&grad}, {"front0.weights"});
    FAIL("expected numeric error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("front0.weights") != std::string::npos);
  }
}

TEST_CASE("adam runs are bit-identical for identical seeds") {
  auto run = [] {
    RngStream rng(77, {0});
    Layer dense = make_dense(4, 4);
    std::vector<Layer> stack = {dense};
    init_weights(stack, rng);
    AdamState st;
    st.init({&stack[0].weights});
    for (int step = 0; step < 10; ++step) {
      Tensor g = testutil::random_tensor({4, 4}, rng);
      adam_step(st, {&stack[0].weights}, {&g}, {"w"});
    }
    return stack[0].weights.data;
  };
  CHECK(run() == run());
}
