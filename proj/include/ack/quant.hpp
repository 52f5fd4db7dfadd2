#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ack/network.hpp"

// Post-training symmetric 8-bit weight quantization. Activations and biases
// stay in full precision; inference uses dequantize-then-compute semantics.
namespace ack {

enum class QuantMode : std::uint8_t { kPerTensor = 0, kPerChannel = 1 };

struct QuantizedBlob {
  QuantMode mode = QuantMode::kPerTensor;
  std::vector<std::int8_t> values;
  // One scale per group: a single one per tensor, or one per output channel.
  std::vector<Real> scales;

  std::size_t group_size() const { return values.size() / scales.size(); }
  std::vector<Real> dequantize() const;
  friend bool operator==(const QuantizedBlob&, const QuantizedBlob&) = default;
};

// scale = max|w| / 127 per group (1 for an all-zero group); values rounded half away from zero.
QuantizedBlob quantize_blob(std::span<const Real> weights, std::size_t rows, QuantMode mode);

// Either a quantized weight array or a full-precision bias/scale array, in
// the network's parameter visit order.
using StoredParam = std::variant<QuantizedBlob, std::vector<Real>>;

class QuantizedNetwork {
 public:
  QuantizedNetwork(const NetworkSpec& spec, std::vector<StoredParam> params);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<StoredParam>& params() const { return params_; }
  // The real-valued network whose weights are the dequantized blobs.
  const Network& dequantized() const { return dequantized_; }

  std::size_t param_count() const { return dequantized_.param_count(); }
  std::size_t scale_count() const;

 private:
  NetworkSpec spec_;
  std::vector<StoredParam> params_;
  Network dequantized_;
};

QuantizedNetwork quantize_weights(const Network& net, QuantMode mode);
Tensor quantized_forward(const QuantizedNetwork& qnet, const Tensor& batch);

// ceil(params * bits / 8); bits must be 8 or 32.
std::uint64_t weight_memory_bytes(std::uint64_t params, unsigned bits);
std::uint64_t weight_memory_bytes(const Network& net, unsigned bits);
// Optionally adds 4 bytes (one 32-bit float) per quantization scale.
std::uint64_t weight_memory_bytes(const QuantizedNetwork& qnet, unsigned bits, bool include_scales = false);

}  // namespace ack
