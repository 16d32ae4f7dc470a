#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmbsn {

/// Raised whenever operand shapes do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape4 {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t numel() const { return batch * channels * height * width; }
  std::size_t plane() const { return height * width; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

/// Dense (batch, channel, height, width) array of doubles, row-major.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  Tensor4(std::size_t b, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : Tensor4(Shape4{b, c, h, w}, fill) {}
  Tensor4(Shape4 shape, std::vector<double> data);

  const Shape4& shape() const { return shape_; }
  std::size_t batch() const { return shape_.batch; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
    return ((b * shape_.channels + c) * shape_.height + y) * shape_.width + x;
  }
  double& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
    return data_[index(b, c, y, x)];
  }
  double at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[index(b, c, y, x)];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Pointer to the (b, c) plane.
  double* plane(std::size_t b, std::size_t c) { return data_.data() + index(b, c, 0, 0); }
  const double* plane(std::size_t b, std::size_t c) const {
    return data_.data() + index(b, c, 0, 0);
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  void fill(double v);
  /// Copy of a contiguous range of batch entries.
  Tensor4 slice_batch(std::size_t first, std::size_t count) const;

  bool operator==(const Tensor4&) const = default;

 private:
  Shape4 shape_{};
  std::vector<double> data_;
};

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what);

}  // namespace mmbsn
