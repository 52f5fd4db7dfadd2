#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ack/dsl.hpp"

// Exact parameter / multiply-add / weight-memory accounting.
//
// Mult-add convention: one per scalar multiplication in a forward pass.
// Convolutions count every kernel tap of every output, zero padding included;
// the attention product V' * A * S counts two per element of V'. Pooling,
// unpooling, activations, sigmoid, softmax, additions and divisions count zero.
// Bias additions are excluded unless CountOptions::bias_adds is set.
namespace ack {

struct CountOptions {
  bool bias_adds = false;
};

struct ComplexityRow {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t mult_adds = 0;
};

struct ComplexityReport {
  Shape input;
  unsigned bits = 32;
  std::vector<ComplexityRow> rows;
  std::uint64_t total_params = 0;
  std::uint64_t total_mult_adds = 0;

  std::uint64_t bytes(std::uint64_t params) const;
  std::uint64_t total_bytes() const { return bytes(total_params); }

  // Aligned text table with a trailing total row.
  std::string table() const;
  // name,params,mult_adds,bits,bytes (header, rows, then "total").
  std::string csv() const;
};

ComplexityReport count_mult_adds(const NetworkSpec& spec, const Shape& input, unsigned bits = 32,
                                 CountOptions options = {});
std::uint64_t count_params(const NetworkSpec& spec);

std::uint64_t conv_mult_adds(const ConvSpec& spec, const Shape& input);

// A published or measured model for side-by-side ratios.
struct ModelRow {
  std::string name;
  double params = 0.0;
  double mult_adds = 0.0;
  unsigned bits = 32;

  double memory_bits() const { return params * static_cast<double>(bits); }
};

// How many times larger `numerator` is than `denominator`.
struct RatioRow {
  std::string numerator;
  std::string denominator;
  double params = 0.0;
  double mult_adds = 0.0;
  double memory = 0.0;
};

// Throws DomainError on a zero denominator.
RatioRow ratio(const ModelRow& numerator, const ModelRow& denominator);
// Every ordered pair (i, j), i != j. Needs at least two rows.
std::vector<RatioRow> compare(const std::vector<ModelRow>& models);

// Accepts plain numbers or K/M/G suffixes ("3260K", "567.5M").
double parse_count(const std::string& text);
// CSV with header name,params,mult_adds,bits.
std::vector<ModelRow> parse_model_csv(const std::string& text);

// Ratios printed with two decimals.
std::string format_ratio_table(const std::vector<RatioRow>& rows);
std::string format_ratio_csv(const std::vector<RatioRow>& rows);

}  // namespace ack
