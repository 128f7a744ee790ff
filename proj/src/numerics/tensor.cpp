#include "spikeforge/numerics/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace spikeforge::inline SPIKEFORGE_ABI {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, real fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<real> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " does not match shape " +
                     shape_string(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw ShapeError("index out of range for shape " + shape_string(shape_));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor copy = *this;
  copy.reshape(std::move(shape));
  return copy;
}

void Tensor::fill(real value) { std::fill(data_.begin(), data_.end(), value); }

std::span<real> Tensor::slice(std::size_t i) {
  const std::size_t n = shape_.empty() ? 0 : data_.size() / shape_[0];
  if (shape_.empty() || i >= shape_[0]) throw ShapeError("slice index out of range");
  return std::span<real>(data_).subspan(i * n, n);
}

std::span<const real> Tensor::slice(std::size_t i) const {
  const std::size_t n = shape_.empty() ? 0 : data_.size() / shape_[0];
  if (shape_.empty() || i >= shape_[0]) throw ShapeError("slice index out of range");
  return std::span<const real>(data_).subspan(i * n, n);
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                     shape_string(t.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_string(t.shape()));
  }
}

bool all_finite(const Tensor& t) {
  for (real v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_shape(b, a.shape(), "add");
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_shape(b, a.shape(), "hadamard");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Tensor scale(const Tensor& a, real factor) {
  Tensor out = a;
  for (real& v : out.values()) v *= factor;
  return out;
}

void add_inplace(Tensor& acc, const Tensor& b) {
  require_shape(b, acc.shape(), "add_inplace");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += b[i];
}

real sum(const Tensor& t) {
  double s = 0;
  for (real v : t.values()) s += v;
  return static_cast<real>(s);
}

real max_abs_diff(const Tensor& a, const Tensor& b) {
  require_shape(b, a.shape(), "max_abs_diff");
  real m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
