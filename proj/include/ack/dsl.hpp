#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ack/kernels.hpp"
#include "ack/pepe.hpp"
#include "ack/vac.hpp"

// Line-oriented architecture description.
//
//   input C H W
//   conv c:8 k:3 s:1 p:1 [g:1] [act:relu|none]      (p:same -> k/2)
//   vac dm:4 e1:4 e2:4 um:16 [pool:2] [pstride:2] [ek:3] [g:1]
//       [expand:unpool|nearest] [scale:scalar|channel] [down_act:relu|none] [up_act:relu|none]
//   pepe p1:8 e1:16 p2:8 e2:32 [k:3] [s:1]
//   res{ ... }res                                   shape-preserving residual group
//   gap
//   fc N
//   softmax
//
// Options may be written key:value, keyvalue (for alphabetic keys, e.g. c8)
// or key value. Sizes accept N or HxW. '#' starts a comment.
namespace ack {

struct InputLayer {
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;
  friend bool operator==(const InputLayer&, const InputLayer&) = default;
};

struct ConvLayerSpec {
  ConvSpec conv;
  Activation activation = Activation::kRelu;
  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct ResidualBegin {
  friend bool operator==(const ResidualBegin&, const ResidualBegin&) = default;
};
struct ResidualEnd {
  friend bool operator==(const ResidualEnd&, const ResidualEnd&) = default;
};
struct GlobalAvgPool {
  friend bool operator==(const GlobalAvgPool&, const GlobalAvgPool&) = default;
};
struct FullyConnected {
  std::size_t in = 0;
  std::size_t out = 0;
  friend bool operator==(const FullyConnected&, const FullyConnected&) = default;
};
struct Softmax {
  friend bool operator==(const Softmax&, const Softmax&) = default;
};

using LayerSpec = std::variant<InputLayer, ConvLayerSpec, VacConfig, PepeConfig, ResidualBegin, ResidualEnd,
                               GlobalAvgPool, FullyConnected, Softmax>;

std::string layer_kind(const LayerSpec& layer);

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  // 1-based source line of each layer; 0 for specs built in code.
  std::vector<std::size_t> lines;

  const InputLayer& input() const { return std::get<InputLayer>(layers.front()); }
  Shape input_shape(std::size_t batch = 1) const { return {batch, input().c, input().h, input().w}; }
  std::size_t classes() const;

  // Canonical text; parse_dsl(to_text()) reproduces the spec.
  std::string to_text() const;

  friend bool operator==(const NetworkSpec& a, const NetworkSpec& b) { return a.layers == b.layers; }
};

// Throws ParseError (line, column) on syntax or validation failures.
NetworkSpec parse_dsl(std::string_view text);
NetworkSpec parse_dsl_file(const std::string& path);

// Channel chaining, spatial fit, residual shape preservation and the
// gap -> fc -> softmax tail. Throws ParseError located at the offending layer.
void validate(const NetworkSpec& spec);

// Output shape of every layer for the given input, after validation.
std::vector<Shape> layer_output_shapes(const NetworkSpec& spec, const Shape& input);

}  // namespace ack
