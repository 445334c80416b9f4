#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ademi/errors.hpp"

namespace ademi {

/// Dense row-major tensor. Kept deliberately plain: shape plus flat storage.
template <typename T>
struct TensorT {
  std::vector<std::int64_t> shape;
  std::vector<T> v;

  TensorT() = default;
  explicit TensorT(std::vector<std::int64_t> s) : shape(std::move(s)) {
    v.assign(static_cast<std::size_t>(element_count(shape)), T{});
  }

  static std::int64_t element_count(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (std::int64_t d : s) {
      if (d < 0) throw DomainError("tensor dimension must be non-negative");
      n *= d;
    }
    return n;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
  std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  T& operator[](std::int64_t i) { return v[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return v[static_cast<std::size_t>(i)]; }

  T& at2(std::int64_t i, std::int64_t j) { return v[static_cast<std::size_t>(i * shape[1] + j)]; }
  const T& at2(std::int64_t i, std::int64_t j) const {
    return v[static_cast<std::size_t>(i * shape[1] + j)];
  }
  T& at3(std::int64_t i, std::int64_t j, std::int64_t k) {
    return v[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  const T& at3(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return v[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  T& at4(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
    return v[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }
  const T& at4(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
    return v[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  void fill(T value) { std::fill(v.begin(), v.end(), value); }
};

using Tensor = TensorT<double>;
using CTensor = TensorT<std::complex<double>>;
using ITensor = TensorT<std::int64_t>;

inline std::string shape_string(const std::vector<std::int64_t>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

inline void check_finite(const Tensor& t, const char* context) {
  for (double x : t.v) {
    if (!std::isfinite(x)) throw NumericalError(std::string("non-finite value in ") + context);
  }
}

inline void check_finite(const CTensor& t, const char* context) {
  for (const auto& x : t.v) {
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
      throw NumericalError(std::string("non-finite value in ") + context);
  }
}

}  // namespace ademi
