#include "ack/vac.hpp"

#include <string>

#include "ack/error.hpp"

namespace ack {

namespace {

std::string n(std::size_t v) { return std::to_string(v); }

Tensor activate(const Tensor& pre, Activation act) { return act == Activation::kRelu ? relu_forward(pre) : pre; }

Tensor activate_backward(const Tensor& grad, const Tensor& pre, Activation act) {
  return act == Activation::kRelu ? relu_backward(grad, pre) : grad;
}

Real scale_at(const std::vector<Real>& scale, std::size_t channel) {
  return scale.size() == 1 ? scale[0] : scale[channel];
}

}  // namespace

void VacConfig::validate() const {
  if (c_in == 0 || c_down == 0 || e1 == 0 || e2 == 0 || c_up == 0) {
    throw ConfigError("vac: all channel counts must be >= 1");
  }
  if (c_down > c_in) {
    throw ConfigError("vac: down-mixed channels dm=" + n(c_down) + " exceed input channels " + n(c_in));
  }
  if (c_up != c_in) {
    throw ConfigError("vac: up-mixed channels um=" + n(c_up) + " must equal input channels " + n(c_in));
  }
  if (e2 != c_down) {
    throw ConfigError("vac: second embedding layer e2=" + n(e2) + " must equal down-mixed channels dm=" + n(c_down));
  }
  if (embed_kernel == 0 || embed_kernel % 2 == 0) {
    throw ConfigError("vac: embedding kernel must be odd, got " + n(embed_kernel));
  }
  if (embed_groups == 0 || c_down % embed_groups != 0 || e1 % embed_groups != 0) {
    throw ConfigError("vac: embedding groups g=" + n(embed_groups) + " must divide dm=" + n(c_down) +
                      " and e1=" + n(e1));
  }
  if (pool.kernel.h == 0 || pool.kernel.w == 0 || pool.stride.h == 0 || pool.stride.w == 0) {
    throw ConfigError("vac: pooling kernel and stride must be >= 1");
  }
}

VacParams VacParams::zeros(const VacConfig& config) {
  config.validate();
  return VacParams{ConvParams::zeros(config.down_spec()), ConvParams::zeros(config.embed_grouped_spec()),
                   ConvParams::zeros(config.embed_pointwise_spec()), ConvParams::zeros(config.up_spec()),
                   std::vector<Real>(config.scale_count(), 1.0)};
}

VacParams VacParams::init(const VacConfig& config, Rng& rng) {
  VacParams p = zeros(config);
  init_fan_in(p.down_mix.weights, rng);
  init_fan_in(p.embed_grouped.weights, rng);
  init_fan_in(p.embed_pointwise.weights, rng);
  init_fan_in(p.up_mix.weights, rng);
  return p;
}

std::uint64_t fingerprint(const VacParams& params) {
  Fingerprint fp;
  visit_params(params, "", [&](const ParamSlot<const Real>& slot) { fp.add(slot.values); });
  return fp.value();
}

std::pair<Tensor, VacCache> vac_forward(const Tensor& input, const VacParams& params, const VacConfig& config) {
  config.validate();
  const Shape in = input.shape();
  if (in.c != config.c_in) {
    throw ConfigError("vac: expects " + n(config.c_in) + " input channels, got " + in.str());
  }
  if (in.h < config.pool.kernel.h || in.w < config.pool.kernel.w) {
    throw ConfigError("vac: input " + in.str() + " smaller than the condensation window");
  }
  if (params.scale.size() != config.scale_count()) {
    throw ConfigError("vac: expected " + n(config.scale_count()) + " scale values, got " + n(params.scale.size()));
  }

  VacCache c;
  c.config = config;
  c.params_fingerprint = fingerprint(params);
  c.input = input;
  c.down_pre = conv2d_forward(input, params.down_mix, config.down_spec());
  c.mixed = activate(c.down_pre, config.down_activation);

  PoolResult pooled = maxpool2d_forward(c.mixed, config.pool);
  c.condensed = std::move(pooled.output);
  c.indices = std::move(pooled.indices);

  c.embed_pre = conv2d_forward(c.condensed, params.embed_grouped, config.embed_grouped_spec());
  c.embed_hidden = relu_forward(c.embed_pre);
  c.embedding = sigmoid_forward(conv2d_forward(c.embed_hidden, params.embed_pointwise, config.embed_pointwise_spec()));

  c.attention = config.expansion == Expansion::kMaxUnpool
                    ? unpool2d_forward(c.embedding, c.indices, c.mixed.shape())
                    : upsample_nearest_forward(c.embedding, config.pool, c.mixed.shape());

  const Shape ms = c.mixed.shape();
  c.attended = Tensor(ms);
  for (std::size_t b = 0; b < ms.n; ++b) {
    for (std::size_t ch = 0; ch < ms.c; ++ch) {
      const Real s = scale_at(params.scale, ch);
      const Real* v = c.mixed.plane(b, ch);
      const Real* a = c.attention.plane(b, ch);
      Real* out = c.attended.plane(b, ch);
      for (std::size_t i = 0; i < ms.plane(); ++i) out[i] = v[i] * a[i] * s;
    }
  }

  c.up_pre = conv2d_forward(c.attended, params.up_mix, config.up_spec());
  Tensor out = activate(c.up_pre, config.up_activation);
  return {std::move(out), std::move(c)};
}

VacGrads vac_backward(const Tensor& grad_out, const VacCache& cache, const VacParams& params,
                      const VacConfig& config) {
  if (cache.config != config || cache.params_fingerprint != fingerprint(params)) {
    throw IntegrityError("vac: cache was produced by a different configuration or parameter state");
  }
  if (grad_out.shape() != cache.input.shape()) {
    throw DimensionError("vac: upstream gradient " + grad_out.shape().str() + " does not match output " +
                         cache.input.shape().str());
  }

  VacGrads g{Tensor(cache.input.shape()), VacParams::zeros(config)};

  const Tensor g_up_pre = activate_backward(grad_out, cache.up_pre, config.up_activation);
  ConvGrads up = conv2d_backward(g_up_pre, cache.attended, params.up_mix.weights, config.up_spec());
  g.params.up_mix = ConvParams{std::move(up.weights), std::move(up.bias)};
  const Tensor& g_attended = up.input;

  const Shape ms = cache.mixed.shape();
  Tensor g_mixed(ms);
  Tensor g_attention(ms);
  std::fill(g.params.scale.begin(), g.params.scale.end(), 0.0);
  for (std::size_t b = 0; b < ms.n; ++b) {
    for (std::size_t ch = 0; ch < ms.c; ++ch) {
      const Real s = scale_at(params.scale, ch);
      const Real* v = cache.mixed.plane(b, ch);
      const Real* a = cache.attention.plane(b, ch);
      const Real* go = g_attended.plane(b, ch);
      Real* gv = g_mixed.plane(b, ch);
      Real* ga = g_attention.plane(b, ch);
      Real gs = 0.0;
      for (std::size_t i = 0; i < ms.plane(); ++i) {
        gv[i] = go[i] * a[i] * s;
        ga[i] = go[i] * v[i] * s;
        gs += go[i] * v[i] * a[i];
      }
      g.params.scale[g.params.scale.size() == 1 ? 0 : ch] += gs;
    }
  }

  const Tensor g_embedding = config.expansion == Expansion::kMaxUnpool
                                 ? unpool2d_backward(g_attention, cache.indices)
                                 : upsample_nearest_backward(g_attention, config.pool, cache.embedding.shape());
  const Tensor g_embed_logits = sigmoid_backward(g_embedding, cache.embedding);
  ConvGrads ep = conv2d_backward(g_embed_logits, cache.embed_hidden, params.embed_pointwise.weights,
                                 config.embed_pointwise_spec());
  g.params.embed_pointwise = ConvParams{std::move(ep.weights), std::move(ep.bias)};

  ConvGrads eg = conv2d_backward(relu_backward(ep.input, cache.embed_pre), cache.condensed,
                                 params.embed_grouped.weights, config.embed_grouped_spec());
  g.params.embed_grouped = ConvParams{std::move(eg.weights), std::move(eg.bias)};

  g_mixed += maxpool2d_backward(eg.input, cache.indices);

  ConvGrads down = conv2d_backward(activate_backward(g_mixed, cache.down_pre, config.down_activation), cache.input,
                                   params.down_mix.weights, config.down_spec());
  g.params.down_mix = ConvParams{std::move(down.weights), std::move(down.bias)};
  g.input = std::move(down.input);
  return g;
}

std::size_t vac_param_count(const VacConfig& config) {
  config.validate();
  const std::size_t k2 = config.embed_kernel * config.embed_kernel;
  return (config.c_in * config.c_down + config.c_down) +
         (k2 * (config.c_down / config.embed_groups) * config.e1 + config.e1) +
         (config.e1 * config.e2 + config.e2) + (config.c_down * config.c_up + config.c_up) + config.scale_count();
}

}  // namespace ack
