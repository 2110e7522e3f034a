#pragma once

// Forward-mode dual numbers with a fixed number of directional derivatives.
// Used to obtain exact element Jacobians from the residual kernels.

#include <array>
#include <cmath>
#include <type_traits>

namespace stflow {

template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit promotion of constants

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int k = 0; k < N; ++k) d[k] += o.d[k];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int k = 0; k < N; ++k) d[k] -= o.d[k];
    return *this;
  }
  Dual& operator*=(double s) {
    v *= s;
    for (int k = 0; k < N; ++k) d[k] *= s;
    return *this;
  }
  // this += s * o
  void axpy(double s, const Dual& o) {
    v += s * o.v;
    for (int k = 0; k < N; ++k) d[k] += s * o.d[k];
  }
};

template <class T>
struct is_dual : std::false_type {};
template <int N>
struct is_dual<Dual<N>> : std::true_type {};
template <class T>
inline constexpr bool is_dual_v = is_dual<T>::value;

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
  return x.v;
}

template <int N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) {
  a += b;
  return a;
}
template <int N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) {
  a -= b;
  return a;
}
template <int N>
Dual<N> operator-(Dual<N> a) {
  a.v = -a.v;
  for (int k = 0; k < N; ++k) a.d[k] = -a.d[k];
  return a;
}
template <int N>
Dual<N> operator+(Dual<N> a, double b) {
  a.v += b;
  return a;
}
template <int N>
Dual<N> operator+(double b, Dual<N> a) {
  a.v += b;
  return a;
}
template <int N>
Dual<N> operator-(Dual<N> a, double b) {
  a.v -= b;
  return a;
}
template <int N>
Dual<N> operator-(double b, const Dual<N>& a) {
  Dual<N> r = -a;
  r.v += b;
  return r;
}
template <int N>
Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r;
  r.v = a.v * b.v;
  for (int k = 0; k < N; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
  return r;
}
template <int N>
Dual<N> operator*(Dual<N> a, double s) {
  a *= s;
  return a;
}
template <int N>
Dual<N> operator*(double s, Dual<N> a) {
  a *= s;
  return a;
}
template <int N>
Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r;
  r.v = a.v / b.v;
  const double ib = 1.0 / b.v;
  for (int k = 0; k < N; ++k) r.d[k] = (a.d[k] - r.v * b.d[k]) * ib;
  return r;
}
template <int N>
Dual<N> operator/(Dual<N> a, double s) {
  a *= 1.0 / s;
  return a;
}
template <int N>
Dual<N> operator/(double s, const Dual<N>& b) {
  Dual<N> r;
  r.v = s / b.v;
  const double f = -r.v / b.v;
  for (int k = 0; k < N; ++k) r.d[k] = f * b.d[k];
  return r;
}

template <int N>
Dual<N> sqrt(const Dual<N>& a) {
  Dual<N> r;
  r.v = std::sqrt(a.v);
  const double f = 0.5 / r.v;
  for (int k = 0; k < N; ++k) r.d[k] = f * a.d[k];
  return r;
}

// a^{-1/2}
template <int N>
Dual<N> rsqrt(const Dual<N>& a) {
  Dual<N> r;
  r.v = 1.0 / std::sqrt(a.v);
  const double f = -0.5 * r.v / a.v;
  for (int k = 0; k < N; ++k) r.d[k] = f * a.d[k];
  return r;
}
inline double rsqrt(double a) { return 1.0 / std::sqrt(a); }

template <int N>
Dual<N> abs(const Dual<N>& a) {
  return a.v < 0 ? -a : a;
}

}  // namespace stflow
