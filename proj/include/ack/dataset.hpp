#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ack/tensor.hpp"

namespace ack {

struct Dataset {
  Tensor images;  // (n, c, h, w), pixels / 255
  std::vector<std::size_t> labels;
  std::size_t classes = 10;

  std::size_t size() const { return labels.size(); }
  // Throws ConfigError if images and labels disagree or a label is out of range.
  void validate() const;
  // Rows [first, first + count).
  Dataset slice(std::size_t first, std::size_t count) const;
  // Rows in the given order.
  Dataset gather(const std::vector<std::size_t>& order) const;
};

// IDX image (magic 0x00000803) and label (0x00000801) files, big-endian dims.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
Dataset decode_idx(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels);

// CIFAR-10 binary batches: 3073-byte records (label, 1024 R, 1024 G, 1024 B).
Dataset load_cifar10(const std::vector<std::string>& paths);
Dataset decode_cifar10(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::string& path);

}  // namespace ack
