#pragma once

#include <array>
#include <cstring>
#include <iosfwd>
#include <numeric>
#include <string>
#include <vector>

#include "rootconv/common.hpp"

namespace rootconv {

/// Shape of a dense 4-D tensor, NCHW with W fastest. Lower-rank values use
/// leading/trailing extents of 1; every extent is >= 1.
struct Shape {
  std::array<i64, 4> e{1, 1, 1, 1};

  Shape() = default;
  Shape(i64 n, i64 c, i64 h, i64 w) : e{n, c, h, w} {}

  i64 n() const { return e[0]; }
  i64 c() const { return e[1]; }
  i64 h() const { return e[2]; }
  i64 w() const { return e[3]; }
  i64 numel() const { return e[0] * e[1] * e[2] * e[3]; }

  bool operator==(const Shape& o) const { return e == o.e; }
  bool operator!=(const Shape& o) const { return e != o.e; }
  std::string str() const;
};

/// Dense row-major 4-D array. float is the production scalar type; the
/// double instantiation backs verification paths only.
template <typename T>
class TensorT {
 public:
  TensorT() : shape_(1, 1, 1, 1), data_(1, T(0)) {}
  explicit TensorT(Shape s, T fill = T(0)) : shape_(s), data_(check_numel(s), fill) {}
  TensorT(Shape s, std::vector<T> data) : shape_(s), data_(std::move(data)) {
    if (static_cast<i64>(data_.size()) != shape_.numel()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  i64 numel() const { return shape_.numel(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  T& at(i64 n, i64 c, i64 h, i64 w) {
    return data_[((n * shape_.c() + c) * shape_.h() + h) * shape_.w() + w];
  }
  T at(i64 n, i64 c, i64 h, i64 w) const {
    return data_[((n * shape_.c() + c) * shape_.h() + h) * shape_.w() + w];
  }

  /// Reinterpret with a new shape of identical element count.
  TensorT reshaped(Shape s) const {
    if (s.numel() != numel()) {
      throw ShapeError("reshape " + shape_.str() + " -> " + s.str() + " changes element count");
    }
    TensorT out = *this;
    out.shape_ = s;
    return out;
  }

  bool same_data(const TensorT& o) const { return data_ == o.data_; }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape_);
    for (i64 i = 0; i < numel(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  static i64 check_numel(const Shape& s) {
    for (i64 ext : s.e) {
      if (ext < 1) throw ShapeError("tensor extent must be >= 1, got shape " + s.str());
    }
    return s.numel();
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

/// RTN1 container: magic "RTN1", four little-endian u32 extents, then the
/// raw little-endian f32 payload.
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);
void write_tensor(const Tensor& t, std::ostream& os);
Tensor read_tensor(std::istream& is);

}  // namespace rootconv
