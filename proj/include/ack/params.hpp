#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>

#include "ack/kernels.hpp"

namespace ack {

enum class ParamKind { kWeight, kBias, kScale };

// One learnable array as seen by optimizers, quantizers and serializers.
// `rows` is the number of output channels the values are split into.
template <typename T>
struct ParamSlot {
  std::string name;
  ParamKind kind;
  std::span<T> values;
  std::size_t rows;
};

template <typename P>
using real_for = std::conditional_t<std::is_const_v<P>, const Real, Real>;

template <typename P, typename Fn>
  requires std::is_same_v<std::remove_const_t<P>, ConvParams>
void visit_params(P& p, const std::string& prefix, Fn&& fn) {
  using R = real_for<P>;
  const std::size_t rows = p.weights.shape().n;
  fn(ParamSlot<R>{prefix + ".weight", ParamKind::kWeight, std::span<R>(p.weights.data()), rows});
  fn(ParamSlot<R>{prefix + ".bias", ParamKind::kBias, std::span<R>(p.bias), rows});
}

// FNV-1a over the raw bytes of every parameter, used to detect stale caches.
class Fingerprint {
 public:
  void add(std::span<const Real> values);
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 1469598103934665603ULL;
};

}  // namespace ack
