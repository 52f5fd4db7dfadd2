#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ack/network.hpp"
#include "ack/quant.hpp"

// Model container, all integers little-endian:
//
//   "ACNK"  u32 version (1)
//   u32 spec_len, spec_len bytes of canonical network text
//   u32 blob_count, then per parameter array in visit order:
//     u8 tag, u64 payload_len, payload
//       tag 0 (f64):  u64 count, count x f64
//       tag 1 (i8):   u8 mode, u64 scale_count, scale_count x f64, u64 count, count x i8
namespace ack {

inline constexpr char kModelMagic[4] = {'A', 'C', 'N', 'K'};
inline constexpr std::uint32_t kModelVersion = 1;

struct ModelFile {
  NetworkSpec spec;
  std::vector<StoredParam> params;

  bool quantized() const;
};

std::vector<std::uint8_t> encode_model(const ModelFile& model);
// Throws FormatError on bad magic, unsupported version, truncation or
// blobs that do not fit the embedded network description.
ModelFile decode_model(const std::vector<std::uint8_t>& bytes);

ModelFile to_model_file(const Network& net);
ModelFile to_model_file(const QuantizedNetwork& qnet);

void save_model(const ModelFile& model, const std::string& path);
ModelFile read_model(const std::string& path);

// Quantized blobs are dequantized into real weights.
Network load_network(const std::string& path);
QuantizedNetwork load_quantized(const std::string& path);

}  // namespace ack
