#pragma once

#include <algorithm>
#include <cmath>
#include <complex>

#include "qtdesign/dual.hpp"

namespace qtdesign {

/// Dense 2x2 matrix, row-major entries.
template <typename T>
struct Mat2 {
  T a11{}, a12{}, a21{}, a22{};

  static Mat2 identity() { return {T(1.0), T(0.0), T(0.0), T(1.0)}; }
  static Mat2 diagonal(T d1, T d2) { return {d1, T(0.0), T(0.0), d2}; }

  T det() const { return a11 * a22 - a12 * a21; }

  /// Adjugate over determinant.
  Mat2 inverse() const {
    const T d = det();
    return {a22 / d, -a12 / d, -a21 / d, a11 / d};
  }

  Mat2& operator*=(const T& s) {
    a11 *= s; a12 *= s; a21 *= s; a22 *= s;
    return *this;
  }
};

template <typename T>
Mat2<T> operator*(const Mat2<T>& x, const Mat2<T>& y) {
  return {x.a11 * y.a11 + x.a12 * y.a21, x.a11 * y.a12 + x.a12 * y.a22,
          x.a21 * y.a11 + x.a22 * y.a21, x.a21 * y.a12 + x.a22 * y.a22};
}

template <typename T>
Mat2<T> operator-(const Mat2<T>& x, const Mat2<T>& y) {
  return {x.a11 - y.a11, x.a12 - y.a12, x.a21 - y.a21, x.a22 - y.a22};
}

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const Dual& x) { return std::abs(x.v); }
inline double magnitude(const std::complex<double>& x) { return std::abs(x); }

template <typename T>
double max_abs(const Mat2<T>& m) {
  return std::max({magnitude(m.a11), magnitude(m.a12), magnitude(m.a21), magnitude(m.a22)});
}

/// Matrix with its magnitude factored out: value = m * exp(log_scale).
/// Keeps evanescent growth factors representable in double precision.
template <typename T>
struct ScaledMat2 {
  Mat2<T> m = Mat2<T>::identity();
  double log_scale = 0.0;

  void normalize() {
    const double s = max_abs(m);
    if (s > 0.0 && std::isfinite(s)) {
      m *= T(1.0 / s);
      log_scale += std::log(s);
    }
  }
};

template <typename T>
ScaledMat2<T> operator*(const ScaledMat2<T>& x, const ScaledMat2<T>& y) {
  ScaledMat2<T> r{x.m * y.m, x.log_scale + y.log_scale};
  r.normalize();
  return r;
}

}  // namespace qtdesign
