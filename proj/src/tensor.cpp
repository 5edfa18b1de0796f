#include "swum/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "swum/autograd.hpp"

namespace swum {

std::string_view dtype_name(DType dt) {
  switch (dt) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::u8: return "u8";
  }
  return "?";
}

DType dtype_from_name(std::string_view name) {
  if (name == "f32") return DType::f32;
  if (name == "f64") return DType::f64;
  if (name == "u8") return DType::u8;
  throw DataError("unknown dtype '" + std::string(name) + "'");
}

std::size_t dtype_size(DType dt) {
  switch (dt) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::u8: return 1;
  }
  return 0;
}

bool is_floating(DType dt) { return dt == DType::f32 || dt == DType::f64; }

std::int64_t numel_of(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (shape[i] <= 0)
      throw DimensionError("axis " + std::to_string(i) + " has non-positive extent in " + shape_str(shape));
}

detail::Storage make_storage(DType dt, std::size_t n, double fill) {
  switch (dt) {
    case DType::f32: return std::vector<float>(n, static_cast<float>(fill));
    case DType::f64: return std::vector<double>(n, fill);
    case DType::u8: return std::vector<std::uint8_t>(n, static_cast<std::uint8_t>(fill));
  }
  throw Error("bad dtype");
}

}  // namespace

Tensor Tensor::empty(Shape shape, DType dtype) { return zeros(std::move(shape), dtype); }

Tensor Tensor::zeros(Shape shape, DType dtype) { return full(std::move(shape), 0.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  check_shape(shape);
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->data = make_storage(dtype, static_cast<std::size_t>(numel_of(shape)), value);
  impl->shape = std::move(shape);
  impl->dtype = dtype;
  return Tensor(std::move(impl));
}

const Shape& Tensor::shape() const {
  if (!impl_) throw Error("shape() on undefined tensor");
  return impl_->shape;
}

std::int64_t Tensor::dim(int axis) const {
  const auto& s = shape();
  const int n = static_cast<int>(s.size());
  const int a = axis < 0 ? axis + n : axis;
  if (a < 0 || a >= n) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[static_cast<std::size_t>(a)];
}

DType Tensor::dtype() const {
  if (!impl_) throw Error("dtype() on undefined tensor");
  return impl_->dtype;
}

double Tensor::at(std::int64_t flat) const {
  return std::visit([flat](const auto& v) { return static_cast<double>(v.at(static_cast<std::size_t>(flat))); },
                    impl_->data);
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return at(0);
}

std::vector<double> Tensor::to_vector() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, impl_->data);
}

bool Tensor::requires_grad() const { return impl_ && (impl_->requires_grad || impl_->grad_fn); }

bool Tensor::is_leaf() const { return impl_ && !impl_->grad_fn; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (on && !is_floating(dtype())) throw DimensionError("u8 tensors cannot require grad");
  if (!is_leaf()) throw Error("set_requires_grad on a non-leaf tensor");
  impl_->requires_grad = on;
  return *this;
}

Tensor Tensor::grad() const {
  if (!impl_ || !impl_->grad) return {};
  return Tensor(impl_->grad);
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.reset();
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->dtype = impl_->dtype;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

// Storage is owned per impl, so detaching copies.
Tensor Tensor::detach() const { return clone(); }

Tensor Tensor::to(DType dtype) const {
  if (dtype == this->dtype()) return clone();
  Tensor out = Tensor::zeros(shape(), dtype);
  std::visit(
      [&](const auto& src) {
        std::visit(
            [&](auto& dst) {
              using D = typename std::decay_t<decltype(dst)>::value_type;
              for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<D>(src[i]);
            },
            out.impl()->data);
      },
      impl_->data);
  return out;
}

void Tensor::copy_from(const Tensor& src) {
  if (src.shape() != shape())
    throw DimensionError("copy_from: shape " + shape_str(src.shape()) + " into " + shape_str(shape()));
  if (src.dtype() != dtype()) throw DimensionError("copy_from: dtype mismatch");
  impl_->data = src.impl()->data;
}

bool identical(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  return std::visit(
      [&](const auto& va) {
        using V = std::decay_t<decltype(va)>;
        const auto& vb = std::get<V>(b.impl()->data);
        return va.size() == vb.size() &&
               std::memcmp(va.data(), vb.data(), va.size() * sizeof(typename V::value_type)) == 0;
      },
      a.impl()->data);
}

}  // namespace swum
