#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikeforge/precision.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor of reals.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real fill = real(0));
  Tensor(Shape shape, std::vector<real> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  real* data() noexcept { return data_.data(); }
  const real* data() const noexcept { return data_.data(); }
  std::span<real> values() noexcept { return data_; }
  std::span<const real> values() const noexcept { return data_; }
  const std::vector<real>& storage() const noexcept { return data_; }

  real& operator[](std::size_t i) noexcept { return data_[i]; }
  real operator[](std::size_t i) const noexcept { return data_[i]; }

  template <typename... Index>
  real& at(Index... index) {
    return data_[offset({static_cast<std::size_t>(index)...})];
  }
  template <typename... Index>
  real at(Index... index) const {
    return data_[offset({static_cast<std::size_t>(index)...})];
  }

  /// Row-major offset of a full index; throws ShapeError when out of range.
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  void reshape(Shape shape);
  Tensor reshaped(Shape shape) const;
  void fill(real value);

  /// Contiguous view of the i-th slice along the leading axis.
  std::span<real> slice(std::size_t i);
  std::span<const real> slice(std::size_t i) const;

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<real> data_;
};

/// A trainable value together with its accumulated gradient.
struct GradPair {
  Tensor value;
  Tensor grad;

  GradPair() = default;
  explicit GradPair(Tensor v) : value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(real(0)); }
};

void require_shape(const Tensor& t, const Shape& expected, const char* what);
void require_rank(const Tensor& t, std::size_t rank, const char* what);
bool all_finite(const Tensor& t);

Tensor add(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real factor);
void add_inplace(Tensor& acc, const Tensor& b);
real sum(const Tensor& t);
real max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace spikeforge::inline SPIKEFORGE_ABI
