#include "doctest.h"

#include <cmath>

#include "ack/error.hpp"
#include "ack/kernels.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace ack;
using oracle::random_tensor;

using gradcheck::random_conv;
using gradcheck::random_input;

TEST_SUITE("kernels") {
  TEST_CASE("pointwise identity passes values through") {
    Tensor x({1, 2, 1, 1}, {3, 5});
    Tensor w({2, 2, 1, 1}, {1, 0, 0, 1});
    std::vector<Real> b(2, 0.0);
    Tensor y = conv2d_forward(x, w, b, pointwise(2, 2));
    CHECK(y[0] == 3.0);
    CHECK(y[1] == 5.0);
  }

  TEST_CASE("padded all-ones window sums") {
    ConvSpec s{1, 1, {3, 3}, {1, 1}, {1, 1}, 1};
    Tensor y = conv2d_forward(Tensor({1, 1, 2, 2}, 1.0), Tensor({1, 1, 3, 3}, 1.0), std::vector<Real>{0.0}, s);
    CHECK(y.shape() == Shape{1, 1, 2, 2});
    for (Real v : y.data()) CHECK(v == 4.0);
  }

  TEST_CASE("optimized conv matches the seven-loop oracle") {
    Rng rng(11);
    {
      ConvSpec s{3, 4, {3, 3}, {1, 1}, {1, 1}, 1};
      Tensor x = random_tensor({1, 3, 5, 5}, rng), w = random_tensor(s.weight_shape(), rng);
      std::vector<Real> b{0.1, -0.2, 0.3, 0.0};
      CHECK(max_abs_diff(conv2d_forward(x, w, b, s), oracle::conv2d(x, w, b, s)) <= 1e-12);
    }
    for (int i = 0; i < 100; ++i) {
      const ConvSpec s = random_conv(rng);
      const Shape in = random_input(s, rng);
      Tensor x = random_tensor(in, rng), w = random_tensor(s.weight_shape(), rng);
      std::vector<Real> b(s.c_out);
      for (auto& v : b) v = rng.uniform(-1, 1);
      CHECK(max_abs_diff(conv2d_forward(x, w, b, s), oracle::conv2d(x, w, b, s)) <= 1e-12);
    }
  }

  TEST_CASE("grouped conv equals independent per-group convs") {
    Rng rng(5);
    const ConvSpec s = grouped(6, 9, 3, 3);
    Tensor x = random_tensor({2, 6, 5, 4}, rng), w = random_tensor(s.weight_shape(), rng);
    std::vector<Real> b(9);
    for (auto& v : b) v = rng.uniform(-1, 1);
    const Tensor y = conv2d_forward(x, w, b, s);
    for (std::size_t g = 0; g < 3; ++g) {
      const ConvSpec part{2, 3, s.kernel, s.stride, s.padding, 1};
      Tensor xg({2, 2, 5, 4}), wg(part.weight_shape());
      for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 2; ++c)
          for (std::size_t i = 0; i < 20; ++i) xg.plane(n, c)[i] = x.plane(n, 2 * g + c)[i];
      for (std::size_t i = 0; i < wg.size(); ++i) wg[i] = w[g * wg.size() + i];
      const Tensor yg = conv2d_forward(xg, wg, std::span<const Real>(b).subspan(3 * g, 3), part);
      for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t i = 0; i < 20; ++i) CHECK(yg.plane(n, c)[i] == doctest::Approx(y.plane(n, 3 * g + c)[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("conv spec validation") {
    CHECK_THROWS_AS((ConvSpec{4, 6, {3, 3}, {1, 1}, {1, 1}, 4}.validate()), ConfigError);
    CHECK_THROWS_AS((ConvSpec{0, 6, {3, 3}, {1, 1}, {1, 1}, 1}.validate()), ConfigError);
    CHECK_THROWS_AS((ConvSpec{1, 1, {5, 5}, {1, 1}, {0, 0}, 1}.output_shape({1, 1, 3, 3})), DimensionError);
    CHECK(depthwise(8, 2, 3, 1).is_depthwise());
    CHECK(pointwise(3, 4).is_pointwise());
  }

  TEST_CASE("conv backward: zero and identity cases") {
    Rng rng(2);
    const ConvSpec s = pointwise(3, 3);
    Tensor x = random_tensor({1, 3, 2, 2}, rng);
    Tensor id({3, 3, 1, 1});
    for (std::size_t i = 0; i < 3; ++i) id(i, i, 0, 0) = 1.0;
    const ConvGrads zero = conv2d_backward(Tensor({1, 3, 2, 2}), x, id, s);
    for (Real v : zero.input.data()) CHECK(v == 0.0);
    for (Real v : zero.weights.data()) CHECK(v == 0.0);
    const Tensor go = random_tensor({1, 3, 2, 2}, rng);
    CHECK(conv2d_backward(go, x, id, s).input == go);
  }

  TEST_CASE("conv backward matches finite differences") {
    Rng rng(21);
    for (int i = 0; i < 20; ++i) {
      const ConvSpec s = random_conv(rng);
      CHECK(gradcheck::conv(s, random_input(s, rng), rng) <= 1e-5);
    }
    CHECK(gradcheck::conv(depthwise(2, 3, 3, 2), {2, 2, 5, 5}, rng) <= 1e-5);
  }

  TEST_CASE("maxpool single window and constant input") {
    const PoolResult r = maxpool2d_forward(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), PoolSpec{});
    CHECK(r.output.size() == 1);
    CHECK(r.output[0] == 4.0);
    CHECK(r.indices.offsets[0] == 3);
    const PoolResult c = maxpool2d_forward(Tensor({1, 2, 4, 4}, 7.0), PoolSpec{});
    for (Real v : c.output.data()) CHECK(v == 7.0);
  }

  TEST_CASE("maxpool ties go to the lowest offset, indices are global") {
    const PoolResult r = maxpool2d_forward(Tensor({2, 1, 2, 2}, 1.0), PoolSpec{});
    CHECK(r.indices.offsets == std::vector<std::size_t>{0, 4});
  }

  TEST_CASE("maxpool equals brute-force window scan") {
    Rng rng(8);
    for (int t = 0; t < 10; ++t) {
      const PoolSpec p{{1 + rng.below(3), 1 + rng.below(3)}, {1 + rng.below(3), 1 + rng.below(3)}};
      const Tensor x = random_tensor({1 + rng.below(2), 2, 6, 6}, rng);
      const PoolResult r = maxpool2d_forward(x, p);
      const oracle::Pooled o = oracle::maxpool(x, p);
      CHECK(r.output == o.out);
      CHECK(r.indices.offsets == o.where);
    }
    CHECK_THROWS_AS(maxpool2d_forward(Tensor({1, 1, 1, 1}), PoolSpec{}), DimensionError);
  }

  TEST_CASE("unpool places maxima back") {
    const Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
    const PoolResult r = maxpool2d_forward(x, PoolSpec{});
    const Tensor u = unpool2d_forward(r.output, r.indices, x.shape());
    CHECK(u == Tensor({1, 1, 2, 2}, {0, 0, 0, 4}));
    const Tensor z = unpool2d_forward(Tensor(r.output.shape()), r.indices, x.shape());
    for (Real v : z.data()) CHECK(v == 0.0);
  }

  TEST_CASE("random pool/unpool round trip") {
    Rng rng(9);
    const Tensor x = random_tensor({2, 3, 6, 6}, rng);
    const PoolResult r = maxpool2d_forward(x, PoolSpec{});
    const Tensor u = unpool2d_forward(r.output, r.indices, x.shape());
    Tensor expect(x.shape());
    for (std::size_t i = 0; i < r.indices.offsets.size(); ++i) expect[r.indices.offsets[i]] = x[r.indices.offsets[i]];
    CHECK(u == expect);
  }

  TEST_CASE("unpool rejects indices outside the target") {
    const PoolResult r = maxpool2d_forward(Tensor({1, 1, 4, 4}, 1.0), PoolSpec{});
    PoolIndices bad = r.indices;
    bad.offsets[1] = 1000;
    CHECK_THROWS_AS(unpool2d_forward(r.output, bad, {1, 1, 4, 4}), IntegrityError);
  }

  TEST_CASE("pool and unpool gradients") {
    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
      CHECK(gradcheck::maxpool(rng) <= 1e-4);
      CHECK(gradcheck::unpool(rng) <= 1e-5);
    }
  }

  TEST_CASE("nearest upsample gradient") {
    Rng rng(13);
    const Tensor k = random_tensor({1, 2, 3, 3}, rng);
    CHECK(upsample_nearest_forward(k, PoolSpec{}, {1, 2, 7, 6})(0, 1, 6, 5) == k(0, 1, 2, 2));
    for (int t = 0; t < 20; ++t) CHECK(gradcheck::upsample(rng) <= 1e-5);
  }

  TEST_CASE("relu") {
    CHECK(relu_forward(Tensor({1, 1, 1, 3}, {-1, 0, 2})) == Tensor({1, 1, 1, 3}, {0, 0, 2}));
    const Tensor pos({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(relu_forward(pos) == pos);
    Rng rng(14);
    for (int t = 0; t < 20; ++t) CHECK(gradcheck::relu(rng) <= 1e-5);
  }

  TEST_CASE("sigmoid is stable and differentiable") {
    const Tensor s = sigmoid_forward(Tensor({1, 1, 1, 3}, {-1000, 0, 1000}));
    CHECK(s[0] == 0.0);
    CHECK(s[1] == 0.5);
    CHECK(s[2] == 1.0);
    Rng rng(15);
    for (int t = 0; t < 20; ++t) CHECK(gradcheck::sigmoid(rng) <= 1e-5);
  }

  TEST_CASE("global average pooling") {
    CHECK(global_avg_pool(Tensor({1, 1, 3, 3}, 7.0))[0] == 7.0);
    CHECK(global_avg_pool(Tensor({1, 1, 2, 2}, {1, 3, 5, 7}))[0] == 4.0);
    Rng rng(16);
    for (int t = 0; t < 20; ++t) {
      const Tensor x = random_tensor({1 + rng.below(2), 1 + rng.below(4), 1 + rng.below(8), 1 + rng.below(8)}, rng);
      const Tensor g = global_avg_pool(x);
      const Shape s = x.shape();
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c) {
          Real sum = 0.0;
          for (std::size_t i = 0; i < s.plane(); ++i) sum += x.plane(n, c)[i];
          CHECK(g(n, c, 0, 0) == doctest::Approx(sum / static_cast<Real>(s.plane())).epsilon(1e-14));
        }
      CHECK(gradcheck::gap(rng) <= 1e-5);
    }
  }

  TEST_CASE("fully connected") {
    const Tensor x({1, 3, 1, 1}, {1, -2, 3});
    Tensor id({3, 3, 1, 1});
    for (std::size_t i = 0; i < 3; ++i) id(i, i, 0, 0) = 1.0;
    CHECK(fully_connected(x, id, std::vector<Real>(3, 0.0)) == x);
    CHECK(fully_connected(x, Tensor({2, 3, 1, 1}), std::vector<Real>{4, 5}) == Tensor({1, 2, 1, 1}, {4, 5}));

    Rng rng(17);
    for (int t = 0; t < 20; ++t) CHECK(gradcheck::fc(rng) <= 1e-5);
  }

  TEST_CASE("softmax and cross-entropy") {
    const auto p = softmax(std::vector<Real>(10, 0.0));
    for (Real v : p) CHECK(v == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(cross_entropy(p, 3) == doctest::Approx(2.302585).epsilon(1e-6));
    const auto big = softmax(std::vector<Real>{1000, 0});
    CHECK(big[0] == 1.0);
    CHECK(big[1] == 0.0);
    CHECK(std::isfinite(cross_entropy(big, 1)));
    CHECK_THROWS_AS(softmax(std::vector<Real>{}), ConfigError);

    Rng rng(18);
    for (int t = 0; t < 20; ++t) CHECK(gradcheck::softmax_ce(rng) <= 1e-5);
  }
}
