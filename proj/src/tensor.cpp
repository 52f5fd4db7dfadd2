#include "ack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ack/error.hpp"

namespace ack {

std::string Shape::str() const {
  std::ostringstream os;
  os << *this;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Shape& s) {
  return os << '(' << s.n << ", " << s.c << ", " << s.h << ", " << s.w << ')';
}

namespace {

void check_dims(const Shape& shape) {
  if (shape.n == 0 || shape.c == 0 || shape.h == 0 || shape.w == 0) {
    throw DimensionError("tensor dimensions must all be >= 1, got " + shape.str());
  }
}

}  // namespace

Tensor::Tensor(Shape shape, Real fill) : shape_(shape) {
  check_dims(shape_);
  data_.assign(shape_.size(), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(shape), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_.size()) {
    throw DimensionError("tensor " + shape_.str() + " needs " + std::to_string(shape_.size()) + " values, got " +
                         std::to_string(data_.size()));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.size() != shape_.size()) {
    throw DimensionError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

Tensor Tensor::slice_batch(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > shape_.n) {
    throw DimensionError("batch slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                         ") outside " + shape_.str());
  }
  const std::size_t per = shape_.c * shape_.plane();
  auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * per);
  return Tensor({count, shape_.c, shape_.h, shape_.w}, std::vector<Real>(begin, begin + static_cast<std::ptrdiff_t>(count * per)));
}

void Tensor::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw DimensionError("cannot add " + other.shape_.str() + " to " + shape_.str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

Real max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("cannot compare " + a.shape().str() + " with " + b.shape().str());
  }
  Real worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace ack
