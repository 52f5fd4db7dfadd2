#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ack/rng.hpp"
#include "ack/tensor.hpp"

// Primitive forward/backward kernels. All kernels are pure functions of their
// arguments and process the whole batch.
namespace ack {

struct Size2 {
  std::size_t h = 1;
  std::size_t w = 1;
  friend bool operator==(const Size2&, const Size2&) = default;
};

enum class Activation { kNone, kRelu };

struct ConvSpec {
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  Size2 kernel{1, 1};
  Size2 stride{1, 1};
  Size2 padding{0, 0};
  std::size_t groups = 1;

  // Throws ConfigError on zero sizes or groups that do not divide channels.
  void validate() const;
  // Throws DimensionError if the input does not fit.
  Shape output_shape(const Shape& input) const;
  Shape weight_shape() const { return {c_out, c_in / groups, kernel.h, kernel.w}; }

  bool is_pointwise() const { return kernel == Size2{1, 1} && groups == 1; }
  bool is_depthwise() const { return groups == c_in && groups > 1 && c_out % c_in == 0; }

  std::size_t weight_count() const { return c_out * (c_in / groups) * kernel.h * kernel.w; }

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

// Convenience constructors for the three conv flavours used by the blocks.
ConvSpec pointwise(std::size_t c_in, std::size_t c_out);
ConvSpec depthwise(std::size_t channels, std::size_t multiplier, std::size_t kernel, std::size_t stride);
ConvSpec grouped(std::size_t c_in, std::size_t c_out, std::size_t kernel, std::size_t groups);

struct ConvParams {
  Tensor weights;
  std::vector<Real> bias;

  static ConvParams zeros(const ConvSpec& spec);
};

// Uniform in +-sqrt(6 / fan_in) for weights; biases are left untouched.
void init_fan_in(Tensor& weights, Rng& rng);

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, std::span<const Real> bias, const ConvSpec& spec);
inline Tensor conv2d_forward(const Tensor& input, const ConvParams& p, const ConvSpec& spec) {
  return conv2d_forward(input, p.weights, p.bias, spec);
}

struct ConvGrads {
  Tensor input;
  Tensor weights;
  std::vector<Real> bias;
};

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& saved_input, const Tensor& weights,
                          const ConvSpec& spec);

struct PoolSpec {
  Size2 kernel{2, 2};
  Size2 stride{2, 2};
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

// Flat offsets into the pooled input tensor, one per pooled output element.
struct PoolIndices {
  Shape output_shape;
  Shape input_shape;
  std::vector<std::size_t> offsets;
};

struct PoolResult {
  Tensor output;
  PoolIndices indices;
};

Shape pool_output_shape(const Shape& input, const PoolSpec& pool);
// Ties go to the lowest flat offset.
PoolResult maxpool2d_forward(const Tensor& input, const PoolSpec& pool);
Tensor maxpool2d_backward(const Tensor& grad_out, const PoolIndices& indices);

// Writes each input value at its recorded offset in a zero tensor of out_shape.
Tensor unpool2d_forward(const Tensor& input, const PoolIndices& indices, const Shape& out_shape);
Tensor unpool2d_backward(const Tensor& grad_out, const PoolIndices& indices);

// Nearest-neighbour expansion: output(y, x) reads input(min(y / sh, hq - 1), min(x / sw, wq - 1)).
Tensor upsample_nearest_forward(const Tensor& input, const PoolSpec& pool, const Shape& out_shape);
Tensor upsample_nearest_backward(const Tensor& grad_out, const PoolSpec& pool, const Shape& in_shape);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& grad_out, const Tensor& saved_input);
void relu_inplace(Tensor& t);

Tensor sigmoid_forward(const Tensor& input);
// Takes the forward output, not the input.
Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& saved_output);

Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& input_shape);

// weights (out, in, 1, 1); input (n, c, h, w) is flattened per sample to c*h*w == in.
Tensor fully_connected(const Tensor& input, const Tensor& weights, std::span<const Real> bias);

struct FcGrads {
  Tensor input;
  Tensor weights;
  std::vector<Real> bias;
};

FcGrads fully_connected_backward(const Tensor& grad_out, const Tensor& saved_input, const Tensor& weights);

// Max-subtracted softmax.
std::vector<Real> softmax(std::span<const Real> logits);
// Row-wise softmax over the channel axis of an (n, k, 1, 1) tensor.
Tensor softmax_rows(const Tensor& logits);
// -ln p[label], with p clamped away from zero.
Real cross_entropy(std::span<const Real> probs, std::size_t label);
// d(cross_entropy(softmax(z)))/dz = probs - one_hot(label).
std::vector<Real> softmax_cross_entropy_backward(std::span<const Real> probs, std::size_t label);

}  // namespace ack
