#include "ack/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ack/error.hpp"

namespace ack {

namespace {

std::string conv_str(const ConvSpec& s) {
  return "conv(" + std::to_string(s.c_in) + "->" + std::to_string(s.c_out) + ", k" + std::to_string(s.kernel.h) +
         "x" + std::to_string(s.kernel.w) + ", g" + std::to_string(s.groups) + ")";
}

// Output columns [lo, hi) whose input column ox * stride + tap - pad lies in [0, extent).
struct Span1 {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

Span1 valid_range(std::size_t out_extent, std::size_t in_extent, std::size_t tap, std::size_t pad,
                  std::size_t stride) {
  // ox * stride + tap >= pad  and  ox * stride + tap < in_extent + pad
  std::size_t lo = 0;
  if (tap < pad) lo = (pad - tap + stride - 1) / stride;
  std::size_t limit = in_extent + pad;
  if (tap >= limit) return {0, 0};
  std::size_t hi = (limit - tap + stride - 1) / stride;
  hi = std::min(hi, out_extent);
  if (lo >= hi) return {0, 0};
  return {lo, hi};
}

void check_conv_args(const Tensor& input, const Tensor& weights, std::size_t bias_size, const ConvSpec& spec) {
  spec.validate();
  if (input.shape().c != spec.c_in) {
    throw DimensionError(conv_str(spec) + " expects " + std::to_string(spec.c_in) + " input channels, got " +
                         input.shape().str());
  }
  if (weights.shape() != spec.weight_shape()) {
    throw DimensionError(conv_str(spec) + " expects weights " + spec.weight_shape().str() + ", got " +
                         weights.shape().str());
  }
  if (bias_size != spec.c_out) {
    throw DimensionError(conv_str(spec) + " expects " + std::to_string(spec.c_out) + " biases, got " +
                         std::to_string(bias_size));
  }
}

}  // namespace

void ConvSpec::validate() const {
  if (c_in == 0 || c_out == 0 || kernel.h == 0 || kernel.w == 0 || stride.h == 0 || stride.w == 0 || groups == 0) {
    throw ConfigError(conv_str(*this) + ": channels, kernel, stride and groups must be >= 1");
  }
  if (c_in % groups != 0 || c_out % groups != 0) {
    throw ConfigError(conv_str(*this) + ": groups must divide both channel counts");
  }
}

Shape ConvSpec::output_shape(const Shape& input) const {
  validate();
  if (input.c != c_in) {
    throw DimensionError(conv_str(*this) + " expects " + std::to_string(c_in) + " channels, got " + input.str());
  }
  const std::size_t ph = input.h + 2 * padding.h;
  const std::size_t pw = input.w + 2 * padding.w;
  if (kernel.h > ph || kernel.w > pw) {
    throw DimensionError(conv_str(*this) + ": kernel larger than padded input " + input.str());
  }
  return {input.n, c_out, (ph - kernel.h) / stride.h + 1, (pw - kernel.w) / stride.w + 1};
}

ConvSpec pointwise(std::size_t c_in, std::size_t c_out) { return ConvSpec{c_in, c_out, {1, 1}, {1, 1}, {0, 0}, 1}; }

ConvSpec depthwise(std::size_t channels, std::size_t multiplier, std::size_t kernel, std::size_t stride) {
  return ConvSpec{channels, channels * multiplier, {kernel, kernel}, {stride, stride}, {kernel / 2, kernel / 2},
                  channels};
}

ConvSpec grouped(std::size_t c_in, std::size_t c_out, std::size_t kernel, std::size_t groups) {
  return ConvSpec{c_in, c_out, {kernel, kernel}, {1, 1}, {kernel / 2, kernel / 2}, groups};
}

ConvParams ConvParams::zeros(const ConvSpec& spec) {
  spec.validate();
  return ConvParams{Tensor(spec.weight_shape()), std::vector<Real>(spec.c_out, 0.0)};
}

void init_fan_in(Tensor& weights, Rng& rng) {
  const Shape& s = weights.shape();
  const double fan_in = static_cast<double>(s.c * s.h * s.w);
  const double bound = std::sqrt(6.0 / fan_in);
  for (Real& v : weights.data()) v = rng.uniform(-bound, bound);
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, std::span<const Real> bias, const ConvSpec& spec) {
  check_conv_args(input, weights, bias.size(), spec);
  const Shape in = input.shape();
  const Shape out_shape = spec.output_shape(in);
  Tensor out(out_shape);

  const std::size_t cin_g = spec.c_in / spec.groups;
  const std::size_t cout_g = spec.c_out / spec.groups;
  const std::size_t kh = spec.kernel.h, kw = spec.kernel.w;
  const std::size_t sh = spec.stride.h, sw = spec.stride.w;
  const std::size_t oh = out_shape.h, ow = out_shape.w;

  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t oc = 0; oc < spec.c_out; ++oc) {
      Real* dst = out.plane(n, oc);
      std::fill(dst, dst + oh * ow, bias[oc]);
      const std::size_t g = oc / cout_g;
      for (std::size_t icg = 0; icg < cin_g; ++icg) {
        const Real* src = input.plane(n, g * cin_g + icg);
        const Real* wk = weights.raw() + weights.offset(oc, icg, 0, 0);
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const Span1 rows = valid_range(oh, in.h, ky, spec.padding.h, sh);
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const Span1 cols = valid_range(ow, in.w, kx, spec.padding.w, sw);
            const Real wv = wk[ky * kw + kx];
            for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
              const Real* row_in = src + (oy * sh + ky - spec.padding.h) * in.w;
              Real* row_out = dst + oy * ow;
              if (sw == 1) {
                const Real* base = row_in + kx - spec.padding.w;
                for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) row_out[ox] += wv * base[ox];
              } else {
                for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) {
                  row_out[ox] += wv * row_in[ox * sw + kx - spec.padding.w];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& saved_input, const Tensor& weights,
                          const ConvSpec& spec) {
  check_conv_args(saved_input, weights, spec.c_out, spec);
  const Shape in = saved_input.shape();
  const Shape out_shape = spec.output_shape(in);
  if (grad_out.shape() != out_shape) {
    throw DimensionError(conv_str(spec) + ": grad_out " + grad_out.shape().str() + " does not match output " +
                         out_shape.str());
  }
  ConvGrads g{Tensor(in), Tensor(weights.shape()), std::vector<Real>(spec.c_out, 0.0)};

  const std::size_t cin_g = spec.c_in / spec.groups;
  const std::size_t cout_g = spec.c_out / spec.groups;
  const std::size_t kh = spec.kernel.h, kw = spec.kernel.w;
  const std::size_t sh = spec.stride.h, sw = spec.stride.w;
  const std::size_t oh = out_shape.h, ow = out_shape.w;

  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t oc = 0; oc < spec.c_out; ++oc) {
      const Real* go = grad_out.plane(n, oc);
      Real bsum = 0.0;
      for (std::size_t i = 0; i < oh * ow; ++i) bsum += go[i];
      g.bias[oc] += bsum;

      const std::size_t grp = oc / cout_g;
      for (std::size_t icg = 0; icg < cin_g; ++icg) {
        const std::size_t ic = grp * cin_g + icg;
        const Real* src = saved_input.plane(n, ic);
        Real* gin = g.input.plane(n, ic);
        const Real* wk = weights.raw() + weights.offset(oc, icg, 0, 0);
        Real* gw = &g.weights(oc, icg, 0, 0);
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const Span1 rows = valid_range(oh, in.h, ky, spec.padding.h, sh);
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const Span1 cols = valid_range(ow, in.w, kx, spec.padding.w, sw);
            const Real wv = wk[ky * kw + kx];
            Real wsum = 0.0;
            for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
              const std::size_t row_off = (oy * sh + ky - spec.padding.h) * in.w;
              const Real* row_in = src + row_off;
              Real* row_gin = gin + row_off;
              const Real* row_go = go + oy * ow;
              for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) {
                const std::size_t ix = ox * sw + kx - spec.padding.w;
                wsum += row_go[ox] * row_in[ix];
                row_gin[ix] += wv * row_go[ox];
              }
            }
            gw[ky * kw + kx] += wsum;
          }
        }
      }
    }
  }
  return g;
}

Shape pool_output_shape(const Shape& input, const PoolSpec& pool) {
  if (pool.kernel.h == 0 || pool.kernel.w == 0 || pool.stride.h == 0 || pool.stride.w == 0) {
    throw ConfigError("pooling kernel and stride must be >= 1");
  }
  if (pool.kernel.h > input.h || pool.kernel.w > input.w) {
    throw DimensionError("pooling window " + std::to_string(pool.kernel.h) + "x" + std::to_string(pool.kernel.w) +
                         " larger than input " + input.str());
  }
  return {input.n, input.c, (input.h - pool.kernel.h) / pool.stride.h + 1,
          (input.w - pool.kernel.w) / pool.stride.w + 1};
}

PoolResult maxpool2d_forward(const Tensor& input, const PoolSpec& pool) {
  const Shape in = input.shape();
  const Shape os = pool_output_shape(in, pool);
  PoolResult r{Tensor(os), PoolIndices{os, in, std::vector<std::size_t>(os.size())}};
  std::size_t k = 0;
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t c = 0; c < in.c; ++c) {
      const std::size_t base = input.offset(n, c, 0, 0);
      for (std::size_t oy = 0; oy < os.h; ++oy) {
        for (std::size_t ox = 0; ox < os.w; ++ox, ++k) {
          std::size_t best = base + oy * pool.stride.h * in.w + ox * pool.stride.w;
          Real best_v = input[best];
          for (std::size_t py = 0; py < pool.kernel.h; ++py) {
            for (std::size_t px = 0; px < pool.kernel.w; ++px) {
              const std::size_t off = base + (oy * pool.stride.h + py) * in.w + ox * pool.stride.w + px;
              // Strict comparison in row-major scan keeps the lowest offset on ties.
              if (input[off] > best_v) {
                best_v = input[off];
                best = off;
              }
            }
          }
          r.output[k] = best_v;
          r.indices.offsets[k] = best;
        }
      }
    }
  }
  return r;
}

namespace {

void check_indices(const PoolIndices& idx, const Shape& pooled, const Shape& full) {
  if (pooled != idx.output_shape) {
    throw DimensionError("pooled tensor " + pooled.str() + " does not match indices " + idx.output_shape.str());
  }
  if (idx.offsets.size() != pooled.size()) {
    throw IntegrityError("pool indices hold " + std::to_string(idx.offsets.size()) + " offsets for " +
                         std::to_string(pooled.size()) + " values");
  }
  for (std::size_t off : idx.offsets) {
    if (off >= full.size()) {
      throw IntegrityError("pool index " + std::to_string(off) + " outside tensor " + full.str());
    }
  }
}

}  // namespace

Tensor maxpool2d_backward(const Tensor& grad_out, const PoolIndices& indices) {
  check_indices(indices, grad_out.shape(), indices.input_shape);
  Tensor g(indices.input_shape);
  for (std::size_t k = 0; k < indices.offsets.size(); ++k) g[indices.offsets[k]] += grad_out[k];
  return g;
}

Tensor unpool2d_forward(const Tensor& input, const PoolIndices& indices, const Shape& out_shape) {
  check_indices(indices, input.shape(), out_shape);
  Tensor out(out_shape);
  // Overlapping windows may pick the same position; the later window wins, matching a plain scatter.
  for (std::size_t k = 0; k < indices.offsets.size(); ++k) out[indices.offsets[k]] = input[k];
  return out;
}

Tensor unpool2d_backward(const Tensor& grad_out, const PoolIndices& indices) {
  Tensor g(indices.output_shape);
  check_indices(indices, g.shape(), grad_out.shape());
  // Mirror the overwrite semantics: only the last writer of a position receives its gradient.
  std::vector<std::size_t> owner(grad_out.size(), indices.offsets.size());
  for (std::size_t k = 0; k < indices.offsets.size(); ++k) owner[indices.offsets[k]] = k;
  for (std::size_t k = 0; k < indices.offsets.size(); ++k) {
    if (owner[indices.offsets[k]] == k) g[k] = grad_out[indices.offsets[k]];
  }
  return g;
}

Tensor upsample_nearest_forward(const Tensor& input, const PoolSpec& pool, const Shape& out_shape) {
  const Shape in = input.shape();
  if (out_shape.n != in.n || out_shape.c != in.c) {
    throw DimensionError("upsample cannot map " + in.str() + " to " + out_shape.str());
  }
  Tensor out(out_shape);
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t c = 0; c < in.c; ++c) {
      const Real* src = input.plane(n, c);
      Real* dst = out.plane(n, c);
      for (std::size_t y = 0; y < out_shape.h; ++y) {
        const std::size_t sy = std::min(y / pool.stride.h, in.h - 1);
        for (std::size_t x = 0; x < out_shape.w; ++x) {
          dst[y * out_shape.w + x] = src[sy * in.w + std::min(x / pool.stride.w, in.w - 1)];
        }
      }
    }
  }
  return out;
}

Tensor upsample_nearest_backward(const Tensor& grad_out, const PoolSpec& pool, const Shape& in_shape) {
  const Shape os = grad_out.shape();
  if (os.n != in_shape.n || os.c != in_shape.c) {
    throw DimensionError("upsample gradient " + os.str() + " does not match " + in_shape.str());
  }
  Tensor g(in_shape);
  for (std::size_t n = 0; n < os.n; ++n) {
    for (std::size_t c = 0; c < os.c; ++c) {
      const Real* src = grad_out.plane(n, c);
      Real* dst = g.plane(n, c);
      for (std::size_t y = 0; y < os.h; ++y) {
        const std::size_t sy = std::min(y / pool.stride.h, in_shape.h - 1);
        for (std::size_t x = 0; x < os.w; ++x) {
          dst[sy * in_shape.w + std::min(x / pool.stride.w, in_shape.w - 1)] += src[y * os.w + x];
        }
      }
    }
  }
  return g;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  relu_inplace(out);
  return out;
}

void relu_inplace(Tensor& t) {
  for (Real& v : t.data()) v = v > 0.0 ? v : 0.0;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& saved_input) {
  if (grad_out.shape() != saved_input.shape()) {
    throw DimensionError("relu gradient " + grad_out.shape().str() + " vs input " + saved_input.shape().str());
  }
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = saved_input[i] > 0.0 ? grad_out[i] : 0.0;
  return g;
}

Tensor sigmoid_forward(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Real x = input[i];
    // Branches keep exp() from overflowing for large |x|.
    if (x >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const Real e = std::exp(x);
      out[i] = e / (1.0 + e);
    }
  }
  return out;
}

Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& saved_output) {
  if (grad_out.shape() != saved_output.shape()) {
    throw DimensionError("sigmoid gradient " + grad_out.shape().str() + " vs output " + saved_output.shape().str());
  }
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * saved_output[i] * (1.0 - saved_output[i]);
  return g;
}

Tensor global_avg_pool(const Tensor& input) {
  const Shape s = input.shape();
  Tensor out({s.n, s.c, 1, 1});
  const Real inv = 1.0 / static_cast<Real>(s.plane());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const Real* p = input.plane(n, c);
      Real sum = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
      out(n, c, 0, 0) = sum * inv;
    }
  }
  return out;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& input_shape) {
  if (grad_out.shape() != Shape{input_shape.n, input_shape.c, 1, 1}) {
    throw DimensionError("pooled gradient " + grad_out.shape().str() + " does not match input " + input_shape.str());
  }
  Tensor g(input_shape);
  const Real inv = 1.0 / static_cast<Real>(input_shape.plane());
  for (std::size_t n = 0; n < input_shape.n; ++n) {
    for (std::size_t c = 0; c < input_shape.c; ++c) {
      Real* p = g.plane(n, c);
      std::fill(p, p + input_shape.plane(), grad_out(n, c, 0, 0) * inv);
    }
  }
  return g;
}

namespace {

void check_fc(const Tensor& input, const Tensor& weights, std::size_t bias_size) {
  const Shape in = input.shape();
  const Shape ws = weights.shape();
  const std::size_t features = in.c * in.h * in.w;
  if (ws.c != features || ws.h != 1 || ws.w != 1) {
    throw DimensionError("fully connected weights " + ws.str() + " do not accept " + std::to_string(features) +
                         " input features");
  }
  if (bias_size != ws.n) {
    throw DimensionError("fully connected layer has " + std::to_string(ws.n) + " outputs but " +
                         std::to_string(bias_size) + " biases");
  }
}

}  // namespace

Tensor fully_connected(const Tensor& input, const Tensor& weights, std::span<const Real> bias) {
  check_fc(input, weights, bias.size());
  const std::size_t batch = input.shape().n;
  const std::size_t in_f = weights.shape().c;
  const std::size_t out_f = weights.shape().n;
  Tensor out({batch, out_f, 1, 1});
  for (std::size_t n = 0; n < batch; ++n) {
    const Real* x = input.raw() + n * in_f;
    for (std::size_t o = 0; o < out_f; ++o) {
      const Real* w = weights.raw() + o * in_f;
      Real acc = bias[o];
      for (std::size_t i = 0; i < in_f; ++i) acc += w[i] * x[i];
      out[n * out_f + o] = acc;
    }
  }
  return out;
}

FcGrads fully_connected_backward(const Tensor& grad_out, const Tensor& saved_input, const Tensor& weights) {
  check_fc(saved_input, weights, weights.shape().n);
  const std::size_t batch = saved_input.shape().n;
  const std::size_t in_f = weights.shape().c;
  const std::size_t out_f = weights.shape().n;
  if (grad_out.shape() != Shape{batch, out_f, 1, 1}) {
    throw DimensionError("fully connected gradient " + grad_out.shape().str() + " does not match " +
                         std::to_string(batch) + "x" + std::to_string(out_f));
  }
  FcGrads g{Tensor(saved_input.shape()), Tensor(weights.shape()), std::vector<Real>(out_f, 0.0)};
  for (std::size_t n = 0; n < batch; ++n) {
    const Real* x = saved_input.raw() + n * in_f;
    Real* gx = g.input.raw() + n * in_f;
    for (std::size_t o = 0; o < out_f; ++o) {
      const Real go = grad_out[n * out_f + o];
      const Real* w = weights.raw() + o * in_f;
      Real* gw = g.weights.raw() + o * in_f;
      g.bias[o] += go;
      for (std::size_t i = 0; i < in_f; ++i) {
        gw[i] += go * x[i];
        gx[i] += go * w[i];
      }
    }
  }
  return g;
}

std::vector<Real> softmax(std::span<const Real> logits) {
  if (logits.empty()) throw ConfigError("softmax of an empty vector");
  const Real top = *std::max_element(logits.begin(), logits.end());
  std::vector<Real> p(logits.size());
  Real sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (Real& v : p) v /= sum;
  return p;
}

Tensor softmax_rows(const Tensor& logits) {
  const Shape s = logits.shape();
  const std::size_t k = s.c * s.h * s.w;
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    auto p = softmax(logits.data().subspan(n * k, k));
    std::copy(p.begin(), p.end(), out.raw() + n * k);
  }
  return out;
}

Real cross_entropy(std::span<const Real> probs, std::size_t label) {
  if (probs.empty()) throw ConfigError("cross entropy of an empty vector");
  if (label >= probs.size()) {
    throw DimensionError("label " + std::to_string(label) + " outside " + std::to_string(probs.size()) + " classes");
  }
  return -std::log(std::max(probs[label], std::numeric_limits<Real>::min()));
}

std::vector<Real> softmax_cross_entropy_backward(std::span<const Real> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw DimensionError("label " + std::to_string(label) + " outside " + std::to_string(probs.size()) + " classes");
  }
  std::vector<Real> g(probs.begin(), probs.end());
  g[label] -= 1.0;
  return g;
}

}  // namespace ack
