#include "doctest.h"

#include <cmath>

#include "ack/complexity.hpp"
#include "ack/error.hpp"
#include "ack/network.hpp"
#include "support/nets.hpp"
#include "support/oracles.hpp"

using namespace ack;

TEST_SUITE("complexity") {
  TEST_CASE("single-layer conventions") {
    CHECK(conv_mult_adds(pointwise(3, 8), {1, 3, 4, 4}) == 384);
    CHECK(conv_mult_adds(depthwise(8, 1, 3, 1), {1, 8, 4, 4}) == 1152);

    oracle::counters() = {};
    Rng rng(1);
    const ConvSpec dw = depthwise(8, 1, 3, 1);
    oracle::conv2d(oracle::random_tensor({1, 8, 4, 4}, rng), Tensor(dw.weight_shape()), {}, dw);
    CHECK(oracle::counters().mults == 1152);
  }

  TEST_CASE("fc-only network and tail layers") {
    const NetworkSpec s = parse_dsl("input 4 1 1\ngap\nfc 2\nsoftmax\n");
    const ComplexityReport r = count_mult_adds(s, s.input_shape());
    CHECK(r.total_params == 10);
    CHECK(count_params(s) == 10);
    CHECK(r.rows[1].mult_adds == 0);
    CHECK(r.rows[3].mult_adds == 0);
    CHECK(r.total_mult_adds == 8);
  }

  TEST_CASE("vac example") {
    const NetworkSpec s = parse_dsl("input 16 8 8\nvac dm4 e1:4 e2:4 um16 g4\ngap\nfc 2\nsoftmax\n");
    CHECK(count_mult_adds(s, s.input_shape()).rows[1].params == 209);
  }

  TEST_CASE("counts match parameter enumeration and the instrumented executor") {
    for (const char* text : {nets::kTinyResidual, nets::kTinyVariants}) {
      const NetworkSpec s = parse_dsl(text);
      const ComplexityReport r = count_mult_adds(s, s.input_shape());
      CHECK(r.total_params == Network::compile(s, 1).param_count());
      const oracle::Counters c = oracle::instrumented(s);
      CHECK(r.total_mult_adds == c.mults);
      const ComplexityReport with_bias = count_mult_adds(s, s.input_shape(), 32, CountOptions{true});
      CHECK(with_bias.total_mult_adds == c.mults + c.bias_adds);
    }
  }

  TEST_CASE("memory and csv output") {
    const NetworkSpec s = parse_dsl(nets::kTinyResidual);
    const ComplexityReport r32 = count_mult_adds(s, s.input_shape(), 32);
    const ComplexityReport r8 = count_mult_adds(s, s.input_shape(), 8);
    CHECK(r32.total_bytes() == 4 * r8.total_bytes());
    const std::string csv = r8.csv();
    CHECK(csv.rfind("name,params,mult_adds,bits,bytes\n", 0) == 0);
    CHECK(csv.find("total," + std::to_string(r8.total_params) + "," + std::to_string(r8.total_mult_adds) + ",8," +
                   std::to_string(r8.total_bytes())) != std::string::npos);
    CHECK(r8.table().find(std::to_string(r8.total_mult_adds)) != std::string::npos);
    CHECK_THROWS_AS(count_mult_adds(s, s.input_shape(), 16), DomainError);
  }

  TEST_CASE("larger inputs scale spatial layers only") {
    const NetworkSpec s = parse_dsl("input 1 8 8\nconv c4 k3 p1\ngap\nfc 2\nsoftmax\n");
    const ComplexityReport a = count_mult_adds(s, {1, 1, 8, 8});
    CHECK(a.rows[1].mult_adds == 9 * 4 * 64);
    const ComplexityReport b = count_mult_adds(s, {1, 1, 16, 16});
    CHECK(b.rows[1].mult_adds == 4 * a.rows[1].mult_adds);
    CHECK(b.rows[3].mult_adds == a.rows[3].mult_adds);
    CHECK(b.total_params == a.total_params);
    CHECK_THROWS_AS(count_mult_adds(s, {1, 2, 8, 8}), DimensionError);
  }

  TEST_CASE("ratio table") {
    const ModelRow v1{"MobileNet-V1", 3260e3, 567.5e6, 32};
    const ModelRow b{"AttendNet-B", 782e3, 191.3e6, 8};
    const ModelRow atto{"AttoNet-B", 1870e3, 277.5e6, 32};
    const RatioRow r = ratio(v1, b);
    CHECK(r.params == doctest::Approx(4.17).epsilon(0.002));
    CHECK(r.mult_adds == doctest::Approx(2.97).epsilon(0.002));
    CHECK(r.memory == doctest::Approx(16.68).epsilon(0.001));
    const RatioRow r2 = ratio(atto, b);
    CHECK(r2.params == doctest::Approx(2.39).epsilon(0.002));
    CHECK(r2.mult_adds == doctest::Approx(1.45).epsilon(0.002));
    CHECK(r2.memory == doctest::Approx(9.57).epsilon(0.001));
    const RatioRow same = ratio(b, b);
    CHECK(same.params == 1.0);
    CHECK(same.mult_adds == 1.0);
    CHECK(same.memory == 1.0);
    CHECK_THROWS_AS(ratio(v1, ModelRow{"zero", 0, 1, 8}), DomainError);
    CHECK(compare({v1, b, atto}).size() == 6);
    CHECK_THROWS_AS(compare({v1}), ConfigError);
  }

  TEST_CASE("model csv parsing") {
    const auto rows = parse_model_csv("name,params,mult_adds,bits\nA,3260K,567.5M,32\nB,782000,191300000,8\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].params == 3260e3);
    CHECK(rows[0].mult_adds == 567.5e6);
    CHECK(rows[1].bits == 8);
    CHECK_THROWS_AS(parse_model_csv("name,params\n"), ParseError);
    CHECK_THROWS_AS(parse_model_csv("name,params,mult_adds,bits\nA,1x,2,32\n"), ParseError);
    CHECK_THROWS_AS(parse_model_csv("name,params,mult_adds,bits\nA,1,2,16\n"), ParseError);
    const std::string csv = format_ratio_csv(compare(rows));
    CHECK(csv.find("A,B,4.17,2.97,16.68") != std::string::npos);
  }
}
