#include "ack/pepe.hpp"

#include <array>
#include <string>

#include "ack/error.hpp"

namespace ack {

namespace {

std::string n(std::size_t v) { return std::to_string(v); }

std::array<ConvSpec, 4> specs(const PepeConfig& c) {
  return {c.project1_spec(), c.expand1_spec(), c.project2_spec(), c.expand2_spec()};
}

std::array<const ConvParams*, 4> layers(const PepeParams& p) {
  return {&p.project1, &p.expand1, &p.project2, &p.expand2};
}

}  // namespace

void PepeConfig::validate() const {
  if (c_in == 0 || p1 == 0 || e1 == 0 || p2 == 0 || e2 == 0 || dw_kernel == 0 || stride == 0) {
    throw ConfigError("pepe: channel counts, kernel and stride must be >= 1");
  }
  if (p1 >= c_in) throw ConfigError("pepe: first projection p1=" + n(p1) + " must be < input channels " + n(c_in));
  if (e1 < p1) throw ConfigError("pepe: first expansion e1=" + n(e1) + " must be >= p1=" + n(p1));
  if (e1 % p1 != 0) {
    throw ConfigError("pepe: depthwise multiplier e1/p1 = " + n(e1) + "/" + n(p1) + " is not an integer");
  }
  if (p2 >= e1) throw ConfigError("pepe: second projection p2=" + n(p2) + " must be < e1=" + n(e1));
  if (e2 < p2) throw ConfigError("pepe: second expansion e2=" + n(e2) + " must be >= p2=" + n(p2));
  if (dw_kernel % 2 == 0) throw ConfigError("pepe: depthwise kernel must be odd, got " + n(dw_kernel));
}

PepeParams PepeParams::zeros(const PepeConfig& config) {
  config.validate();
  return PepeParams{ConvParams::zeros(config.project1_spec()), ConvParams::zeros(config.expand1_spec()),
                    ConvParams::zeros(config.project2_spec()), ConvParams::zeros(config.expand2_spec())};
}

PepeParams PepeParams::init(const PepeConfig& config, Rng& rng) {
  PepeParams p = zeros(config);
  init_fan_in(p.project1.weights, rng);
  init_fan_in(p.expand1.weights, rng);
  init_fan_in(p.project2.weights, rng);
  init_fan_in(p.expand2.weights, rng);
  return p;
}

std::uint64_t fingerprint(const PepeParams& params) {
  Fingerprint fp;
  visit_params(params, "", [&](const ParamSlot<const Real>& slot) { fp.add(slot.values); });
  return fp.value();
}

std::pair<Tensor, PepeCache> pepe_forward(const Tensor& input, const PepeParams& params, const PepeConfig& config) {
  config.validate();
  if (input.shape().c != config.c_in) {
    throw ConfigError("pepe: expects " + n(config.c_in) + " input channels, got " + input.shape().str());
  }
  PepeCache c;
  c.config = config;
  c.params_fingerprint = fingerprint(params);
  const auto conv = specs(config);
  const auto weights = layers(params);
  Tensor x = input;
  for (std::size_t i = 0; i < 4; ++i) {
    c.inputs[i] = x;
    c.pre[i] = conv2d_forward(x, *weights[i], conv[i]);
    x = config.activation == Activation::kRelu ? relu_forward(c.pre[i]) : c.pre[i];
  }
  return {std::move(x), std::move(c)};
}

PepeGrads pepe_backward(const Tensor& grad_out, const PepeCache& cache, const PepeParams& params,
                        const PepeConfig& config) {
  if (cache.config != config || cache.params_fingerprint != fingerprint(params)) {
    throw IntegrityError("pepe: cache was produced by a different configuration or parameter state");
  }
  const auto conv = specs(config);
  const auto weights = layers(params);
  PepeGrads g{Tensor(cache.inputs[0].shape()), PepeParams::zeros(config)};
  std::array<ConvParams*, 4> out = {&g.params.project1, &g.params.expand1, &g.params.project2, &g.params.expand2};
  Tensor grad = grad_out;
  for (std::size_t i = 4; i-- > 0;) {
    if (config.activation == Activation::kRelu) grad = relu_backward(grad, cache.pre[i]);
    ConvGrads cg = conv2d_backward(grad, cache.inputs[i], weights[i]->weights, conv[i]);
    *out[i] = ConvParams{std::move(cg.weights), std::move(cg.bias)};
    grad = std::move(cg.input);
  }
  g.input = std::move(grad);
  return g;
}

std::size_t pepe_param_count(const PepeConfig& config) {
  config.validate();
  std::size_t total = 0;
  for (const ConvSpec& s : specs(config)) total += s.weight_count() + s.c_out;
  return total;
}

}  // namespace ack
