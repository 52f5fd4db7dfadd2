#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "ack/kernels.hpp"
#include "ack/params.hpp"
#include "ack/tensor.hpp"

// Projection-expansion-projection-expansion block:
//   pointwise c_in -> p1, depthwise p1 -> e1 (multiplier e1 / p1, optional stride),
//   pointwise e1 -> p2, pointwise p2 -> e2; activation after each layer.
namespace ack {

struct PepeConfig {
  std::size_t c_in = 0;
  std::size_t p1 = 0;
  std::size_t e1 = 0;
  std::size_t p2 = 0;
  std::size_t e2 = 0;
  std::size_t dw_kernel = 3;
  std::size_t stride = 1;
  Activation activation = Activation::kRelu;

  void validate() const;

  ConvSpec project1_spec() const { return pointwise(c_in, p1); }
  ConvSpec expand1_spec() const { return depthwise(p1, e1 / p1, dw_kernel, stride); }
  ConvSpec project2_spec() const { return pointwise(e1, p2); }
  ConvSpec expand2_spec() const { return pointwise(p2, e2); }

  friend bool operator==(const PepeConfig&, const PepeConfig&) = default;
};

struct PepeParams {
  ConvParams project1;
  ConvParams expand1;
  ConvParams project2;
  ConvParams expand2;

  static PepeParams zeros(const PepeConfig& config);
  static PepeParams init(const PepeConfig& config, Rng& rng);
};

template <typename P, typename Fn>
  requires std::is_same_v<std::remove_const_t<P>, PepeParams>
void visit_params(P& p, const std::string& prefix, Fn&& fn) {
  visit_params(p.project1, prefix + ".project1", fn);
  visit_params(p.expand1, prefix + ".expand1", fn);
  visit_params(p.project2, prefix + ".project2", fn);
  visit_params(p.expand2, prefix + ".expand2", fn);
}

std::uint64_t fingerprint(const PepeParams& params);

struct PepeCache {
  PepeConfig config;
  std::uint64_t params_fingerprint = 0;
  // Input of each of the four layers, and each layer's pre-activation output.
  Tensor inputs[4];
  Tensor pre[4];
};

struct PepeGrads {
  Tensor input;
  PepeParams params;
};

std::pair<Tensor, PepeCache> pepe_forward(const Tensor& input, const PepeParams& params, const PepeConfig& config);
PepeGrads pepe_backward(const Tensor& grad_out, const PepeCache& cache, const PepeParams& params,
                        const PepeConfig& config);

std::size_t pepe_param_count(const PepeConfig& config);

}  // namespace ack
