#pragma once

// Reference implementations used only by tests. They are written for clarity
// rather than speed and share no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ack/network.hpp"

namespace oracle {

using ack::Real;
using ack::Shape;
using ack::Tensor;

// Every multiplication performed by the naive executor goes through mul().
struct Counters {
  std::uint64_t mults = 0;
  std::uint64_t bias_adds = 0;
};
inline Counters& counters() {
  static thread_local Counters c;
  return c;
}
inline Real mul(Real a, Real b) {
  ++counters().mults;
  return a * b;
}
inline Real add_bias(Real acc, Real b) {
  ++counters().bias_adds;
  return acc + b;
}

inline Tensor conv2d(const Tensor& x, const Tensor& w, std::span<const Real> bias, const ack::ConvSpec& s) {
  const Shape in = x.shape();
  const std::size_t ho = (in.h + 2 * s.padding.h - s.kernel.h) / s.stride.h + 1;
  const std::size_t wo = (in.w + 2 * s.padding.w - s.kernel.w) / s.stride.w + 1;
  const std::size_t cin_g = s.c_in / s.groups;
  const std::size_t cout_g = s.c_out / s.groups;
  Tensor y({in.n, s.c_out, ho, wo});
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t oc = 0; oc < s.c_out; ++oc)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const std::size_t g = oc / cout_g;
          Real acc = 0.0;
          for (std::size_t ic = 0; ic < cin_g; ++ic)
            for (std::size_t ky = 0; ky < s.kernel.h; ++ky)
              for (std::size_t kx = 0; kx < s.kernel.w; ++kx) {
                const long iy = static_cast<long>(oy * s.stride.h + ky) - static_cast<long>(s.padding.h);
                const long ix = static_cast<long>(ox * s.stride.w + kx) - static_cast<long>(s.padding.w);
                const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(in.h) && ix < static_cast<long>(in.w);
                // padded taps multiply a zero, and still count
                const Real v = inside ? x(n, g * cin_g + ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) : 0.0;
                acc += mul(v, w(oc, ic, ky, kx));
              }
          y(n, oc, oy, ox) = bias.empty() ? acc : add_bias(acc, bias[oc]);
        }
  return y;
}

inline Tensor conv2d(const Tensor& x, const ack::ConvParams& p, const ack::ConvSpec& s) {
  return conv2d(x, p.weights, p.bias, s);
}

inline Tensor apply(const Tensor& x, ack::Activation a) {
  Tensor y = x;
  if (a == ack::Activation::kRelu)
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(0.0, y[i]);
  return y;
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return y;
}

struct Pooled {
  Tensor out;
  std::vector<std::size_t> where;  // flat input offset of each output
};

inline Pooled maxpool(const Tensor& x, const ack::PoolSpec& p) {
  const Shape in = x.shape();
  const std::size_t ho = (in.h - p.kernel.h) / p.stride.h + 1;
  const std::size_t wo = (in.w - p.kernel.w) / p.stride.w + 1;
  Pooled r{Tensor({in.n, in.c, ho, wo}), {}};
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          std::size_t best = x.offset(n, c, oy * p.stride.h, ox * p.stride.w);
          for (std::size_t ky = 0; ky < p.kernel.h; ++ky)
            for (std::size_t kx = 0; kx < p.kernel.w; ++kx) {
              const std::size_t at = x.offset(n, c, oy * p.stride.h + ky, ox * p.stride.w + kx);
              if (x[at] > x[best] || (x[at] == x[best] && at < best)) best = at;
            }
          r.out(n, c, oy, ox) = x[best];
          r.where.push_back(best);
        }
  return r;
}

inline Tensor vac(const Tensor& v, const ack::VacParams& p, const ack::VacConfig& cfg, Tensor* attention = nullptr) {
  const Tensor mixed = apply(conv2d(v, p.down_mix, cfg.down_spec()), cfg.down_activation);
  const Pooled q = maxpool(mixed, cfg.pool);
  const Tensor hidden = apply(conv2d(q.out, p.embed_grouped, cfg.embed_grouped_spec()), ack::Activation::kRelu);
  const Tensor k = sigmoid(conv2d(hidden, p.embed_pointwise, cfg.embed_pointwise_spec()));
  Tensor a(mixed.shape());
  if (cfg.expansion == ack::Expansion::kMaxUnpool) {
    for (std::size_t i = 0; i < k.size(); ++i) a[q.where[i]] = k[i];
  } else {
    const Shape ks = k.shape();
    const Shape ms = mixed.shape();
    for (std::size_t n = 0; n < ms.n; ++n)
      for (std::size_t c = 0; c < ms.c; ++c)
        for (std::size_t y = 0; y < ms.h; ++y)
          for (std::size_t x = 0; x < ms.w; ++x)
            a(n, c, y, x) = k(n, c, std::min(y / cfg.pool.stride.h, ks.h - 1), std::min(x / cfg.pool.stride.w, ks.w - 1));
  }
  if (attention) *attention = a;
  Tensor gated(mixed.shape());
  const Shape ms = mixed.shape();
  for (std::size_t i = 0; i < gated.size(); ++i) {
    const std::size_t c = (i / ms.plane()) % ms.c;
    const Real s = cfg.scale_mode == ack::ScaleMode::kScalar ? p.scale[0] : p.scale[c];
    gated[i] = mul(mul(mixed[i], a[i]), s);
  }
  return apply(conv2d(gated, p.up_mix, cfg.up_spec()), cfg.up_activation);
}

inline Tensor pepe(const Tensor& x, const ack::PepeParams& p, const ack::PepeConfig& cfg) {
  Tensor y = apply(conv2d(x, p.project1, cfg.project1_spec()), cfg.activation);
  y = apply(conv2d(y, p.expand1, cfg.expand1_spec()), cfg.activation);
  y = apply(conv2d(y, p.project2, cfg.project2_spec()), cfg.activation);
  return apply(conv2d(y, p.expand2, cfg.expand2_spec()), cfg.activation);
}

// Forward pass of a whole compiled network, layer by layer, through the
// counting primitives above. Returns class probabilities (n, k, 1, 1).
inline Tensor run_network(const ack::Network& net, const Tensor& batch) {
  Tensor x = batch;
  std::vector<Tensor> skips;
  for (const auto& layer : net.layers()) {
    if (auto* c = std::get_if<ack::ConvLayer>(&layer)) {
      x = apply(conv2d(x, c->params, c->spec.conv), c->spec.activation);
    } else if (auto* v = std::get_if<ack::VacLayer>(&layer)) {
      x = vac(x, v->params, v->config);
    } else if (auto* p = std::get_if<ack::PepeLayer>(&layer)) {
      x = pepe(x, p->params, p->config);
    } else if (std::holds_alternative<ack::ResidualBegin>(layer)) {
      skips.push_back(x);
    } else if (std::holds_alternative<ack::ResidualEnd>(layer)) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += skips.back()[i];
      skips.pop_back();
    } else if (std::holds_alternative<ack::GlobalAvgPool>(layer)) {
      const Shape s = x.shape();
      Tensor g({s.n, s.c, 1, 1});
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c) {
          Real sum = 0.0;
          for (std::size_t i = 0; i < s.plane(); ++i) sum += x[x.offset(n, c, 0, 0) + i];
          g(n, c, 0, 0) = sum / static_cast<Real>(s.plane());
        }
      x = g;
    } else if (auto* f = std::get_if<ack::FcLayer>(&layer)) {
      const std::size_t n = x.shape().n, in = f->spec.in, out = f->spec.out;
      Tensor y({n, out, 1, 1});
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t o = 0; o < out; ++o) {
          Real acc = 0.0;
          for (std::size_t i = 0; i < in; ++i) acc += mul(x[b * in + i], f->params.weights[o * in + i]);
          y(b, o, 0, 0) = add_bias(acc, f->params.bias[o]);
        }
      x = y;
    } else if (std::holds_alternative<ack::Softmax>(layer)) {
      const std::size_t n = x.shape().n, k = x.shape().c;
      for (std::size_t b = 0; b < n; ++b) {
        Real m = x[b * k];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, x[b * k + j]);
        Real z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(x[b * k + j] - m);
        for (std::size_t j = 0; j < k; ++j) x[b * k + j] = std::exp(x[b * k + j] - m) / z;
      }
    }
  }
  return x;
}

// Central differences of a scalar function of a parameter vector.
// Multiplications and bias additions of the naive executor on one zero sample.
inline Counters instrumented(const ack::NetworkSpec& spec) {
  const ack::Network net = ack::Network::compile(spec, 1);
  counters() = {};
  run_network(net, Tensor(spec.input_shape(1)));
  return counters();
}

inline std::vector<Real> numeric_gradient(std::vector<Real>& x, const std::function<Real()>& f, Real h = 1e-6) {
  std::vector<Real> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real keep = x[i];
    x[i] = keep + h;
    const Real up = f();
    x[i] = keep - h;
    const Real down = f();
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline Real relative_error(std::span<const Real> a, std::span<const Real> b) {
  Real diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const Real denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

inline Real dot(std::span<const Real> a, std::span<const Real> b) {
  Real s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Tensor random_tensor(const Shape& s, ack::Rng& rng, Real lo = -1.0, Real hi = 1.0) {
  Tensor t(s);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace oracle
