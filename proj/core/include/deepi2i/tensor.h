#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "deepi2i/errors.h"

namespace deepi2i {

/// Allocator that default-initializes (i.e. leaves scalars uninitialized)
/// instead of value-initializing; lets hot paths allocate scratch without a
/// memset they immediately overwrite.
template <typename T, typename Base = std::allocator<T>>
struct default_init_allocator : Base {
  template <typename U>
  struct rebind {
    using other = default_init_allocator<U, typename std::allocator_traits<Base>::template rebind_alloc<U>>;
  };
  using Base::Base;
  template <typename U>
  void construct(U* ptr) noexcept(std::is_nothrow_default_constructible_v<U>) {
    ::new (static_cast<void*>(ptr)) U;
  }
  template <typename U, typename... Args>
  void construct(U* ptr, Args&&... args) {
    std::allocator_traits<Base>::construct(static_cast<Base&>(*this), ptr,
                                           std::forward<Args>(args)...);
  }
};

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

/// Dense row-major tensor. Images and activations use NCHW layout.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), T(0)) {}
  Tensor(Shape shape, T value)
      : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), value) {}

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape_); }

  /// Allocation without the zero fill; every element must be written before
  /// it is read.
  static Tensor uninitialized(Shape shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.resize(static_cast<size_t>(shape_numel(t.shape_)));
    return t;
  }

  /// Re-shapes in place, reusing capacity; newly exposed elements are
  /// uninitialized.
  void ensure_shape(const Shape& shape) {
    shape_ = shape;
    data_.resize(static_cast<size_t>(shape_numel(shape_)));
  }

  bool empty() const { return data_.empty(); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  const Shape& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  int64_t dim(size_t i) const {
    if (i >= shape_.size()) throw ShapeError("tensor dim index out of range");
    return shape_[i];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // NCHW accessors
  T& at4(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  const T& at4(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  T& at2(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  const T& at2(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void require_shape(const Shape& s, const char* what) const {
    if (shape_ != s)
      throw ShapeError(std::string(what) + ": expected " + shape_str(s) + ", got " +
                       shape_str(shape_));
  }

  /// Reinterpret as a new shape with the same element count.
  void reshape(Shape s) {
    if (shape_numel(s) != numel())
      throw ShapeError("reshape: numel mismatch " + shape_str(shape_) + " -> " + shape_str(s));
    shape_ = std::move(s);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  void add_(const Tensor& o) {
    if (!same_shape(o)) throw ShapeError("add_: shape mismatch");
    for (int64_t i = 0; i < numel(); ++i) data_[static_cast<size_t>(i)] += o[i];
  }
  void axpy_(T a, const Tensor& o) {
    if (!same_shape(o)) throw ShapeError("axpy_: shape mismatch");
    for (int64_t i = 0; i < numel(); ++i) data_[static_cast<size_t>(i)] += a * o[i];
  }
  void scale_(T a) {
    for (auto& v : data_) v *= a;
  }

  T abs_max() const {
    T m = 0;
    for (const auto& v : data_) {
      T a = v < 0 ? -v : v;
      if (a > m) m = a;
    }
    return m;
  }
  T sum() const {
    T s = 0;
    for (const auto& v : data_) s += v;
    return s;
  }

 private:
  Shape shape_;
  std::vector<T, default_init_allocator<T>> data_;
};

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
  T m = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    T d = a[i] - b[i];
    if (d < 0) d = -d;
    if (d > m) m = d;
  }
  return m;
}

}  // namespace deepi2i
