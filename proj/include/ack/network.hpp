#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ack/dsl.hpp"
#include "ack/kernels.hpp"
#include "ack/params.hpp"
#include "ack/pepe.hpp"
#include "ack/tensor.hpp"
#include "ack/vac.hpp"

namespace ack {

struct ConvLayer {
  ConvLayerSpec spec;
  ConvParams params;
};

struct VacLayer {
  VacConfig config;
  VacParams params;
};

struct PepeLayer {
  PepeConfig config;
  PepeParams params;
};

struct FcLayer {
  FullyConnected spec;
  ConvParams params;  // weights (out, in, 1, 1)
};

using Layer = std::variant<InputLayer, ConvLayer, VacLayer, PepeLayer, ResidualBegin, ResidualEnd, GlobalAvgPool,
                           FcLayer, Softmax>;

// Per-layer state kept by forward_train for the backward pass.
struct ConvCache {
  Tensor input;
  Tensor pre;
};
struct GapCache {
  Shape input;
};
struct FcCache {
  Tensor input;
};
using LayerCache = std::variant<std::monostate, ConvCache, VacCache, PepeCache, GapCache, FcCache>;

struct Trace {
  std::vector<LayerCache> caches;
  Tensor probs;
};

struct BatchGradients {
  Real loss_sum = 0.0;          // sum of per-sample cross-entropy
  std::vector<Real> gradient;   // d(loss_sum)/d(params), in visit order
};

// A compiled NetworkSpec with allocated parameters.
class Network {
 public:
  // Deterministic initialization: identical seeds give bitwise-identical parameters.
  static Network compile(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  // Row-stochastic (n, classes, 1, 1) probabilities.
  Tensor forward(const Tensor& batch) const;
  Trace forward_train(const Tensor& batch) const;
  BatchGradients backward(const Trace& trace, std::span<const std::size_t> labels) const;

  std::size_t param_count() const;
  std::vector<Real> flat_params() const;
  void set_flat_params(std::span<const Real> values);

  template <typename Fn>
  void visit(Fn&& fn) {
    visit_layers(*this, fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    visit_layers(*this, fn);
  }

 private:
  template <typename Self, typename Fn>
  static void visit_layers(Self& self, Fn& fn);

  void check_input(const Tensor& batch) const;

  NetworkSpec spec_;
  std::vector<Layer> layers_;
};

template <typename Self, typename Fn>
void Network::visit_layers(Self& self, Fn& fn) {
  for (std::size_t i = 0; i < self.layers_.size(); ++i) {
    auto& layer = self.layers_[i];
    const std::string prefix = "layer" + std::to_string(i);
    if (auto* c = std::get_if<ConvLayer>(&layer)) {
      visit_params(c->params, prefix + ".conv", fn);
    } else if (auto* v = std::get_if<VacLayer>(&layer)) {
      visit_params(v->params, prefix + ".vac", fn);
    } else if (auto* p = std::get_if<PepeLayer>(&layer)) {
      visit_params(p->params, prefix + ".pepe", fn);
    } else if (auto* f = std::get_if<FcLayer>(&layer)) {
      visit_params(f->params, prefix + ".fc", fn);
    }
  }
}

}  // namespace ack
