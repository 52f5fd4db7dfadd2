#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ack/kernels.hpp"
#include "ack/params.hpp"
#include "ack/tensor.hpp"

// Visual attention condenser: a stand-alone self-attention block.
//
//   V'   = M(V)          pointwise down-mixing to c_down channels
//   Q    = C(V')         max pooling (indices kept)
//   K    = E(Q)          grouped conv -> activation -> pointwise conv -> sigmoid
//   A    = X(K)          max-unpooling with C's indices (or nearest upsample)
//   V''  = F(V', A, S)   V' * A * S elementwise
//   V''' = M'(V'')       pointwise up-mixing back to c_in channels
//
// The block preserves the input shape, so it can replace any shape-preserving
// layer in a network.
namespace ack {

enum class Expansion { kMaxUnpool, kNearest };
enum class ScaleMode { kScalar, kPerChannel };

struct VacConfig {
  std::size_t c_in = 0;
  std::size_t c_down = 0;
  std::size_t e1 = 0;
  std::size_t e2 = 0;
  std::size_t c_up = 0;
  PoolSpec pool{};
  std::size_t embed_kernel = 3;
  std::size_t embed_groups = 1;
  Expansion expansion = Expansion::kMaxUnpool;
  ScaleMode scale_mode = ScaleMode::kScalar;
  Activation down_activation = Activation::kRelu;
  Activation up_activation = Activation::kRelu;

  // Throws ConfigError naming the violated rule.
  void validate() const;

  ConvSpec down_spec() const { return pointwise(c_in, c_down); }
  ConvSpec embed_grouped_spec() const { return grouped(c_down, e1, embed_kernel, embed_groups); }
  ConvSpec embed_pointwise_spec() const { return pointwise(e1, e2); }
  ConvSpec up_spec() const { return pointwise(c_down, c_up); }
  std::size_t scale_count() const { return scale_mode == ScaleMode::kScalar ? 1 : c_down; }

  friend bool operator==(const VacConfig&, const VacConfig&) = default;
};

struct VacParams {
  ConvParams down_mix;
  ConvParams embed_grouped;
  ConvParams embed_pointwise;
  ConvParams up_mix;
  std::vector<Real> scale;

  // Zero weights and biases, scale 1.
  static VacParams zeros(const VacConfig& config);
  // Fan-in uniform weights, zero biases, scale 1.
  static VacParams init(const VacConfig& config, Rng& rng);
};

template <typename P, typename Fn>
  requires std::is_same_v<std::remove_const_t<P>, VacParams>
void visit_params(P& p, const std::string& prefix, Fn&& fn) {
  using R = real_for<P>;
  visit_params(p.down_mix, prefix + ".down_mix", fn);
  visit_params(p.embed_grouped, prefix + ".embed_grouped", fn);
  visit_params(p.embed_pointwise, prefix + ".embed_pointwise", fn);
  visit_params(p.up_mix, prefix + ".up_mix", fn);
  fn(ParamSlot<R>{prefix + ".scale", ParamKind::kScale, std::span<R>(p.scale), p.scale.size()});
}

std::uint64_t fingerprint(const VacParams& params);

struct VacCache {
  VacConfig config;
  std::uint64_t params_fingerprint = 0;
  Tensor input;        // V
  Tensor down_pre;     // M(V) before activation
  Tensor mixed;        // V'
  PoolIndices indices;
  Tensor condensed;    // Q
  Tensor embed_pre;    // grouped conv output before activation
  Tensor embed_hidden;
  Tensor embedding;    // K, after sigmoid
  Tensor attention;    // A
  Tensor attended;     // V''
  Tensor up_pre;       // M'(V'') before activation
};

struct VacGrads {
  Tensor input;
  VacParams params;
};

std::pair<Tensor, VacCache> vac_forward(const Tensor& input, const VacParams& params, const VacConfig& config);
VacGrads vac_backward(const Tensor& grad_out, const VacCache& cache, const VacParams& params,
                      const VacConfig& config);

std::size_t vac_param_count(const VacConfig& config);

}  // namespace ack
