#include "ack/dataset.hpp"

#include <fstream>
#include <iterator>

#include "ack/error.hpp"

namespace ack {

namespace {

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at, const char* file) {
  if (at + 4 > b.size()) throw FormatError(std::string(file) + " truncated in header");
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace

void Dataset::validate() const {
  if (images.shape().n != labels.size()) {
    throw ConfigError("dataset has " + std::to_string(images.shape().n) + " images but " +
                      std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw ConfigError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) + " outside " +
                        std::to_string(classes) + " classes");
    }
  }
}

Dataset Dataset::slice(std::size_t first, std::size_t count) const {
  return Dataset{images.slice_batch(first, count),
                 std::vector<std::size_t>(labels.begin() + static_cast<std::ptrdiff_t>(first),
                                          labels.begin() + static_cast<std::ptrdiff_t>(first + count)),
                 classes};
}

Dataset Dataset::gather(const std::vector<std::size_t>& order) const {
  const Shape s = images.shape();
  const std::size_t per = s.c * s.plane();
  Dataset out{Tensor({order.size(), s.c, s.h, s.w}), std::vector<std::size_t>(order.size()), classes};
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::copy_n(images.raw() + order[i] * per, per, out.images.raw() + i * per);
    out.labels[i] = labels[order[i]];
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Dataset decode_idx(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels) {
  if (images.empty()) throw FormatError("image file is empty (truncated)");
  if (labels.empty()) throw FormatError("label file is empty (truncated)");
  const std::uint32_t img_magic = be32(images, 0, "image file");
  if (img_magic != 0x00000803) throw FormatError("image file has bad magic " + std::to_string(img_magic));
  const std::uint32_t lbl_magic = be32(labels, 0, "label file");
  if (lbl_magic != 0x00000801) throw FormatError("label file has bad magic " + std::to_string(lbl_magic));

  const std::size_t n = be32(images, 4, "image file");
  const std::size_t rows = be32(images, 8, "image file");
  const std::size_t cols = be32(images, 12, "image file");
  const std::size_t ln = be32(labels, 4, "label file");
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("image file declares an empty dataset");
  if (images.size() != 16 + n * rows * cols) {
    throw FormatError("image file is " + std::to_string(images.size()) + " bytes, header implies " +
                      std::to_string(16 + n * rows * cols) + " (truncated or padded)");
  }
  if (labels.size() != 8 + ln) {
    throw FormatError("label file is " + std::to_string(labels.size()) + " bytes, header implies " +
                      std::to_string(8 + ln));
  }
  if (ln != n) {
    throw FormatError("count mismatch: " + std::to_string(n) + " images vs " + std::to_string(ln) + " labels");
  }
  Dataset d{Tensor({n, 1, rows, cols}), std::vector<std::size_t>(n), 10};
  for (std::size_t i = 0; i < n * rows * cols; ++i) d.images[i] = images[16 + i] / 255.0;
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = labels[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.classes = std::max<std::size_t>(10, max_label + 1);
  return d;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  return decode_idx(read_file(images_path), read_file(labels_path));
}

Dataset decode_cifar10(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t kRecord = 3073;
  if (bytes.empty() || bytes.size() % kRecord != 0) {
    throw FormatError("CIFAR-10 data is " + std::to_string(bytes.size()) + " bytes, not a multiple of 3073");
  }
  const std::size_t n = bytes.size() / kRecord;
  Dataset d{Tensor({n, 3, 32, 32}), std::vector<std::size_t>(n), 10};
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kRecord;
    if (rec[0] > 9) throw FormatError("CIFAR-10 record " + std::to_string(i) + " has label " + std::to_string(rec[0]));
    d.labels[i] = rec[0];
    for (std::size_t k = 0; k < 3072; ++k) d.images[i * 3072 + k] = rec[1 + k] / 255.0;
  }
  return d;
}

Dataset load_cifar10(const std::vector<std::string>& paths) {
  std::vector<std::uint8_t> all;
  for (const auto& p : paths) {
    auto b = read_file(p);
    all.insert(all.end(), b.begin(), b.end());
  }
  return decode_cifar10(all);
}

}  // namespace ack
