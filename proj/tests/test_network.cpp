#include "doctest.h"

#include <algorithm>

#include "ack/error.hpp"
#include "ack/network.hpp"
#include "support/gradcheck.hpp"
#include "support/nets.hpp"
#include "support/oracles.hpp"

using namespace ack;
using oracle::random_tensor;

using gradcheck::randomized;

TEST_SUITE("network") {
  TEST_CASE("seeded initialization") {
    const NetworkSpec spec = parse_dsl(nets::kTinyResidual);
    CHECK(Network::compile(spec, 4).flat_params() == Network::compile(spec, 4).flat_params());
    CHECK(Network::compile(spec, 4).flat_params() != Network::compile(spec, 5).flat_params());
  }

  TEST_CASE("parameter enumeration matches the layer sizes") {
    const Network net = Network::compile(parse_dsl(nets::kTinyResidual), 1);
    std::size_t total = 0;
    std::vector<std::string> names;
    net.visit([&](const ParamSlot<const Real>& s) {
      total += s.values.size();
      names.push_back(s.name);
    });
    CHECK(total == net.param_count());
    CHECK(net.flat_params().size() == total);
    CHECK(names.front() == "layer1.conv.weight");
    CHECK(std::find(names.begin(), names.end(), "layer3.vac.scale") != names.end());
  }

  TEST_CASE("forward equals the naive layer-by-layer executor") {
    for (const char* text : {nets::kTinyResidual, nets::kTinyVariants}) {
      Network net = randomized(text, 7);
      Rng rng(8);
      const Tensor x = random_tensor(net.spec().input_shape(3), rng);
      CHECK(max_abs_diff(net.forward(x), oracle::run_network(net, x)) <= 1e-12);
      const Tensor zero(net.spec().input_shape(1));
      CHECK(max_abs_diff(net.forward(zero), oracle::run_network(net, zero)) <= 1e-12);
    }
  }

  TEST_CASE("rows of the output sum to one") {
    const Network net = Network::compile(parse_dsl(nets::kTinyVariants), 3);
    Rng rng(4);
    const Tensor p = net.forward(random_tensor(net.spec().input_shape(5), rng, 0, 1));
    for (std::size_t b = 0; b < 5; ++b) {
      Real sum = 0.0;
      for (std::size_t k = 0; k < 5; ++k) sum += p(b, k, 0, 0);
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("end-to-end gradients match finite differences") {
    Rng rng(9);
    for (const char* text : {nets::kTinyResidual, nets::kTinyVariants}) {
      for (int t = 0; t < 3; ++t) {
        Network net = randomized(text, 10 + t);
        CHECK(gradcheck::network(net, 2, 60, rng) <= 1e-4);
      }
    }
  }

  TEST_CASE("input shape is checked") {
    const Network net = Network::compile(parse_dsl(nets::kTinyResidual), 1);
    CHECK_THROWS_AS(net.forward(Tensor({1, 1, 6, 6})), DimensionError);
    Tensor x(net.spec().input_shape(2));
    CHECK_THROWS_AS(net.backward(net.forward_train(x), std::vector<std::size_t>{0}), DimensionError);
    CHECK_THROWS_AS(net.backward(net.forward_train(x), std::vector<std::size_t>{0, 9}), DimensionError);
  }
}
