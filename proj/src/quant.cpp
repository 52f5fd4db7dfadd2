#include "ack/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ack/error.hpp"

namespace ack {

std::vector<Real> QuantizedBlob::dequantize() const {
  std::vector<Real> out(values.size());
  const std::size_t per = group_size();
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<Real>(values[i]) * scales[i / per];
  return out;
}

QuantizedBlob quantize_blob(std::span<const Real> weights, std::size_t rows, QuantMode mode) {
  if (weights.empty()) throw ConfigError("cannot quantize an empty weight array");
  const std::size_t groups = mode == QuantMode::kPerTensor ? 1 : rows;
  if (groups == 0 || weights.size() % groups != 0) {
    throw DimensionError(std::to_string(weights.size()) + " weights cannot be split into " + std::to_string(groups) +
                         " channels");
  }
  const std::size_t per = weights.size() / groups;
  QuantizedBlob blob{mode, std::vector<std::int8_t>(weights.size()), std::vector<Real>(groups)};
  for (std::size_t g = 0; g < groups; ++g) {
    auto group = weights.subspan(g * per, per);
    Real max_abs = 0.0;
    for (Real w : group) max_abs = std::max(max_abs, std::abs(w));
    const Real scale = max_abs > 0.0 ? max_abs / 127.0 : 1.0;
    blob.scales[g] = scale;
    for (std::size_t i = 0; i < per; ++i) {
      // std::round rounds half away from zero.
      const Real q = std::clamp(std::round(group[i] / scale), -127.0, 127.0);
      blob.values[g * per + i] = static_cast<std::int8_t>(q);
    }
  }
  return blob;
}

QuantizedNetwork::QuantizedNetwork(const NetworkSpec& spec, std::vector<StoredParam> params)
    : spec_(spec), params_(std::move(params)), dequantized_(Network::compile(spec, 0)) {
  std::vector<Real> flat;
  flat.reserve(dequantized_.param_count());
  for (const StoredParam& p : params_) {
    if (const auto* q = std::get_if<QuantizedBlob>(&p)) {
      auto values = q->dequantize();
      flat.insert(flat.end(), values.begin(), values.end());
    } else {
      const auto& values = std::get<std::vector<Real>>(p);
      flat.insert(flat.end(), values.begin(), values.end());
    }
  }
  dequantized_.set_flat_params(flat);
}

std::size_t QuantizedNetwork::scale_count() const {
  std::size_t total = 0;
  for (const StoredParam& p : params_) {
    if (const auto* q = std::get_if<QuantizedBlob>(&p)) total += q->scales.size();
  }
  return total;
}

QuantizedNetwork quantize_weights(const Network& net, QuantMode mode) {
  std::vector<StoredParam> params;
  net.visit([&](const ParamSlot<const Real>& slot) {
    if (slot.kind == ParamKind::kWeight) {
      params.emplace_back(quantize_blob(slot.values, slot.rows, mode));
    } else {
      params.emplace_back(std::vector<Real>(slot.values.begin(), slot.values.end()));
    }
  });
  return QuantizedNetwork(net.spec(), std::move(params));
}

Tensor quantized_forward(const QuantizedNetwork& qnet, const Tensor& batch) {
  return qnet.dequantized().forward(batch);
}

std::uint64_t weight_memory_bytes(std::uint64_t params, unsigned bits) {
  if (bits != 8 && bits != 32) throw DomainError("weight precision must be 8 or 32 bits, got " + std::to_string(bits));
  return (params * bits + 7) / 8;
}

std::uint64_t weight_memory_bytes(const Network& net, unsigned bits) { return weight_memory_bytes(net.param_count(), bits); }

std::uint64_t weight_memory_bytes(const QuantizedNetwork& qnet, unsigned bits, bool include_scales) {
  std::uint64_t bytes = weight_memory_bytes(qnet.param_count(), bits);
  if (include_scales) bytes += 4 * qnet.scale_count();
  return bytes;
}

}  // namespace ack
