#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "swum/errors.hpp"

namespace swum {

enum class DType : std::uint8_t { f32 = 0, f64 = 1, u8 = 2 };

std::string_view dtype_name(DType dt);
DType dtype_from_name(std::string_view name);
std::size_t dtype_size(DType dt);
bool is_floating(DType dt);

using Shape = std::vector<std::int64_t>;

std::int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
class Tensor;

namespace detail {

using Storage = std::variant<std::vector<float>, std::vector<double>, std::vector<std::uint8_t>>;

struct TensorImpl {
  Shape shape;
  DType dtype = DType::f32;
  Storage data;
  bool requires_grad = false;  // leaf flag; non-leaves are marked through grad_fn
  std::shared_ptr<TensorImpl> grad;
  std::shared_ptr<Node> grad_fn;
};

template <class T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) return DType::f32;
  else if constexpr (std::is_same_v<T, double>) return DType::f64;
  else {
    static_assert(std::is_same_v<T, std::uint8_t>);
    return DType::u8;
  }
}

}  // namespace detail

/// Dense row-major tensor with shared storage. Copies of a Tensor alias the
/// same buffer; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor empty(Shape shape, DType dtype = DType::f32);
  static Tensor zeros(Shape shape, DType dtype = DType::f32);
  static Tensor full(Shape shape, double value, DType dtype = DType::f32);
  static Tensor ones(Shape shape, DType dtype = DType::f32) { return full(std::move(shape), 1.0, dtype); }
  static Tensor scalar(double value, DType dtype = DType::f32) { return full({1}, value, dtype); }

  template <class T>
  static Tensor from_vector(Shape shape, std::vector<T> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(int axis) const;  // negative axes count from the back
  int ndim() const { return static_cast<int>(shape().size()); }
  std::int64_t numel() const { return numel_of(shape()); }
  DType dtype() const;

  template <class T>
  std::span<T> data();
  template <class T>
  std::span<const T> data() const;

  double item() const;                 // single-element tensors only
  double at(std::int64_t flat) const;  // any dtype, read as double
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  bool is_leaf() const;
  Tensor& set_requires_grad(bool on);
  Tensor grad() const;  // undefined when no gradient has been accumulated
  void zero_grad();

  Tensor clone() const;   // deep copy, detached
  Tensor detach() const;  // copy without history
  Tensor to(DType dtype) const;  // converting copy, detached

  // Overwrites values in place; shapes and dtypes must agree.
  void copy_from(const Tensor& src);

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Bit-exact equality of shape, dtype and payload.
bool identical(const Tensor& a, const Tensor& b);

/// Calls f(T{}) with T = float or double according to dt.
template <class F>
decltype(auto) dispatch_float(DType dt, F&& f) {
  switch (dt) {
    case DType::f32:
      return f(float{});
    case DType::f64:
      return f(double{});
    default:
      throw DimensionError("operation requires a floating-point tensor, got u8");
  }
}

// ---- template definitions ----

template <class T>
Tensor Tensor::from_vector(Shape shape, std::vector<T> values) {
  if (static_cast<std::int64_t>(values.size()) != numel_of(shape))
    throw DimensionError("from_vector: " + std::to_string(values.size()) + " values for shape " +
                         shape_str(shape));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->dtype = detail::dtype_of<T>();
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

template <class T>
std::span<T> Tensor::data() {
  if (!impl_) throw Error("data() on undefined tensor");
  auto* v = std::get_if<std::vector<T>>(&impl_->data);
  if (!v) throw DimensionError("dtype mismatch: tensor is " + std::string(dtype_name(impl_->dtype)));
  return {v->data(), v->size()};
}

template <class T>
std::span<const T> Tensor::data() const {
  if (!impl_) throw Error("data() on undefined tensor");
  const auto* v = std::get_if<std::vector<T>>(&impl_->data);
  if (!v) throw DimensionError("dtype mismatch: tensor is " + std::string(dtype_name(impl_->dtype)));
  return {v->data(), v->size()};
}

}  // namespace swum
