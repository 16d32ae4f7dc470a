#include "mmbsn/tensor.hpp"

#include <algorithm>

namespace mmbsn {

std::string Shape4::str() const {
  return "(" + std::to_string(batch) + ", " + std::to_string(channels) + ", " +
         std::to_string(height) + ", " + std::to_string(width) + ")";
}

namespace {
void check_dims(const Shape4& s) {
  if (s.batch == 0 || s.channels == 0 || s.height == 0 || s.width == 0) {
    throw ShapeError("tensor dimensions must be >= 1, got " + s.str());
  }
}
}  // namespace

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape) {
  check_dims(shape_);
  data_.assign(shape_.numel(), fill);
}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_.numel()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_.str());
  }
}

void Tensor4::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor4 Tensor4::slice_batch(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > shape_.batch) {
    throw ShapeError("batch slice out of range");
  }
  Shape4 s = shape_;
  s.batch = count;
  const std::size_t per = shape_.channels * shape_.plane();
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
                          data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per));
  return Tensor4(s, std::move(out));
}

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": dimension mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

}  // namespace mmbsn
