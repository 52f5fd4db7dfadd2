#include "ack/network.hpp"

#include <algorithm>
#include <string>

#include "ack/error.hpp"
#include "ack/rng.hpp"

namespace ack {

namespace {

// Number of parameter scalars owned by each layer.
std::size_t layer_param_count(const Layer& layer) {
  std::size_t total = 0;
  auto add = [&](const ParamSlot<const Real>& s) { total += s.values.size(); };
  if (auto* c = std::get_if<ConvLayer>(&layer)) visit_params(c->params, "", add);
  if (auto* v = std::get_if<VacLayer>(&layer)) visit_params(v->params, "", add);
  if (auto* p = std::get_if<PepeLayer>(&layer)) visit_params(p->params, "", add);
  if (auto* f = std::get_if<FcLayer>(&layer)) visit_params(f->params, "", add);
  return total;
}

template <typename P>
void write_grads(const P& grads, std::vector<Real>& out, std::size_t offset) {
  visit_params(grads, "", [&](const ParamSlot<const Real>& s) {
    std::copy(s.values.begin(), s.values.end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += s.values.size();
  });
}

}  // namespace

Network Network::compile(const NetworkSpec& spec, std::uint64_t seed) {
  validate(spec);
  Network net;
  net.spec_ = spec;
  Rng rng(seed);
  for (const LayerSpec& ls : spec.layers) {
    if (auto* in = std::get_if<InputLayer>(&ls)) {
      net.layers_.emplace_back(*in);
    } else if (auto* cv = std::get_if<ConvLayerSpec>(&ls)) {
      ConvParams p = ConvParams::zeros(cv->conv);
      init_fan_in(p.weights, rng);
      net.layers_.emplace_back(ConvLayer{*cv, std::move(p)});
    } else if (auto* v = std::get_if<VacConfig>(&ls)) {
      net.layers_.emplace_back(VacLayer{*v, VacParams::init(*v, rng)});
    } else if (auto* pe = std::get_if<PepeConfig>(&ls)) {
      net.layers_.emplace_back(PepeLayer{*pe, PepeParams::init(*pe, rng)});
    } else if (auto* fc = std::get_if<FullyConnected>(&ls)) {
      ConvParams p{Tensor({fc->out, fc->in, 1, 1}), std::vector<Real>(fc->out, 0.0)};
      init_fan_in(p.weights, rng);
      net.layers_.emplace_back(FcLayer{*fc, std::move(p)});
    } else if (std::holds_alternative<ResidualBegin>(ls)) {
      net.layers_.emplace_back(ResidualBegin{});
    } else if (std::holds_alternative<ResidualEnd>(ls)) {
      net.layers_.emplace_back(ResidualEnd{});
    } else if (std::holds_alternative<GlobalAvgPool>(ls)) {
      net.layers_.emplace_back(GlobalAvgPool{});
    } else {
      net.layers_.emplace_back(Softmax{});
    }
  }
  return net;
}

void Network::check_input(const Tensor& batch) const {
  const Shape expected = spec_.input_shape(batch.shape().n);
  if (batch.shape() != expected) {
    throw DimensionError("network expects input " + expected.str() + ", got " + batch.shape().str());
  }
}

Tensor Network::forward(const Tensor& batch) const { return forward_train(batch).probs; }

Trace Network::forward_train(const Tensor& batch) const {
  check_input(batch);
  Trace trace;
  trace.caches.resize(layers_.size());
  std::vector<Tensor> skips;
  Tensor x = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    if (auto* c = std::get_if<ConvLayer>(&layer)) {
      ConvCache cache{x, conv2d_forward(x, c->params, c->spec.conv)};
      x = c->spec.activation == Activation::kRelu ? relu_forward(cache.pre) : cache.pre;
      trace.caches[i] = std::move(cache);
    } else if (auto* v = std::get_if<VacLayer>(&layer)) {
      auto [out, cache] = vac_forward(x, v->params, v->config);
      x = std::move(out);
      trace.caches[i] = std::move(cache);
    } else if (auto* p = std::get_if<PepeLayer>(&layer)) {
      auto [out, cache] = pepe_forward(x, p->params, p->config);
      x = std::move(out);
      trace.caches[i] = std::move(cache);
    } else if (std::holds_alternative<ResidualBegin>(layer)) {
      skips.push_back(x);
    } else if (std::holds_alternative<ResidualEnd>(layer)) {
      x += skips.back();
      skips.pop_back();
    } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
      trace.caches[i] = GapCache{x.shape()};
      x = global_avg_pool(x);
    } else if (auto* f = std::get_if<FcLayer>(&layer)) {
      trace.caches[i] = FcCache{x};
      x = fully_connected(x, f->params.weights, f->params.bias);
    } else if (std::holds_alternative<Softmax>(layer)) {
      x = softmax_rows(x);
    }
  }
  trace.probs = std::move(x);
  return trace;
}

BatchGradients Network::backward(const Trace& trace, std::span<const std::size_t> labels) const {
  if (trace.caches.size() != layers_.size()) throw IntegrityError("trace does not belong to this network");
  const Shape ps = trace.probs.shape();
  if (labels.size() != ps.n) {
    throw DimensionError("got " + std::to_string(labels.size()) + " labels for a batch of " + std::to_string(ps.n));
  }
  const std::size_t k = ps.c;

  std::vector<std::size_t> offsets(layers_.size() + 1, 0);
  for (std::size_t i = 0; i < layers_.size(); ++i) offsets[i + 1] = offsets[i] + layer_param_count(layers_[i]);

  BatchGradients out;
  out.gradient.assign(offsets.back(), 0.0);
  Tensor grad(ps);
  for (std::size_t n = 0; n < ps.n; ++n) {
    auto row = trace.probs.data().subspan(n * k, k);
    out.loss_sum += cross_entropy(row, labels[n]);
    auto g = softmax_cross_entropy_backward(row, labels[n]);
    std::copy(g.begin(), g.end(), grad.raw() + n * k);
  }

  std::vector<Tensor> skips;
  // The softmax layer is folded into the loss gradient above.
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Layer& layer = layers_[i];
    const LayerCache& cache = trace.caches[i];
    if (auto* c = std::get_if<ConvLayer>(&layer)) {
      const auto& cc = std::get<ConvCache>(cache);
      if (c->spec.activation == Activation::kRelu) grad = relu_backward(grad, cc.pre);
      ConvGrads g = conv2d_backward(grad, cc.input, c->params.weights, c->spec.conv);
      write_grads(ConvParams{std::move(g.weights), std::move(g.bias)}, out.gradient, offsets[i]);
      grad = std::move(g.input);
    } else if (auto* v = std::get_if<VacLayer>(&layer)) {
      VacGrads g = vac_backward(grad, std::get<VacCache>(cache), v->params, v->config);
      write_grads(g.params, out.gradient, offsets[i]);
      grad = std::move(g.input);
    } else if (auto* p = std::get_if<PepeLayer>(&layer)) {
      PepeGrads g = pepe_backward(grad, std::get<PepeCache>(cache), p->params, p->config);
      write_grads(g.params, out.gradient, offsets[i]);
      grad = std::move(g.input);
    } else if (std::holds_alternative<ResidualEnd>(layer)) {
      skips.push_back(grad);
    } else if (std::holds_alternative<ResidualBegin>(layer)) {
      grad += skips.back();
      skips.pop_back();
    } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
      grad = global_avg_pool_backward(grad, std::get<GapCache>(cache).input);
    } else if (auto* f = std::get_if<FcLayer>(&layer)) {
      FcGrads g = fully_connected_backward(grad, std::get<FcCache>(cache).input, f->params.weights);
      write_grads(ConvParams{std::move(g.weights), std::move(g.bias)}, out.gradient, offsets[i]);
      grad = std::move(g.input);
    }
  }
  return out;
}

std::size_t Network::param_count() const {
  std::size_t total = 0;
  for (const Layer& layer : layers_) total += layer_param_count(layer);
  return total;
}

std::vector<Real> Network::flat_params() const {
  std::vector<Real> flat;
  flat.reserve(param_count());
  visit([&](const ParamSlot<const Real>& s) { flat.insert(flat.end(), s.values.begin(), s.values.end()); });
  return flat;
}

void Network::set_flat_params(std::span<const Real> values) {
  if (values.size() != param_count()) {
    throw DimensionError("expected " + std::to_string(param_count()) + " parameters, got " +
                         std::to_string(values.size()));
  }
  std::size_t offset = 0;
  visit([&](const ParamSlot<Real>& s) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), s.values.size(), s.values.begin());
    offset += s.values.size();
  });
}

}  // namespace ack
