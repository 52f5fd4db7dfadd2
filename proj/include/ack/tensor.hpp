#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ack {

using Real = double;

struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t size() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::ostream& operator<<(std::ostream& os, const Shape& s);

// Dense (n, c, h, w) tensor, row-major, value semantics.
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(Shape shape, Real fill = 0.0);
  Tensor(Shape shape, std::vector<Real> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  Real* raw() { return data_.data(); }
  const Real* raw() const { return data_.data(); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  Real& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return data_[offset(n, c, h, w)]; }
  Real operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }
  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  // Pointer to the (n, c) plane.
  Real* plane(std::size_t n, std::size_t c) { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
  const Real* plane(std::size_t n, std::size_t c) const { return data_.data() + (n * shape_.c + c) * shape_.plane(); }

  // Same data, new shape of equal size.
  Tensor reshaped(Shape shape) const;
  // Samples [first, first + count) along the batch axis.
  Tensor slice_batch(std::size_t first, std::size_t count) const;

  void fill(Real value);
  Tensor& operator+=(const Tensor& other);

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_;
  std::vector<Real> data_;
};

// Largest elementwise |a - b|; shapes must agree.
Real max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace ack
