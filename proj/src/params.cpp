#include "ack/params.hpp"

#include <cstring>

namespace ack {

void Fingerprint::add(std::span<const Real> values) {
  for (Real v : values) {
    unsigned char bytes[sizeof(Real)];
    std::memcpy(bytes, &v, sizeof(Real));
    for (unsigned char b : bytes) {
      hash_ ^= b;
      hash_ *= 1099511628211ULL;
    }
  }
}

}  // namespace ack
