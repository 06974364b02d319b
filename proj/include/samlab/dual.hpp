#pragma once

#include <cmath>

namespace samlab {

// Forward-mode dual number v + d*eps with eps^2 = 0.
//
// Running the reverse sweep of a tape in Dual<double> arithmetic, seeded with
// x + eps*v, yields grad f(x) + eps * H(x) v (forward-over-reverse). Nesting
// the type, Dual<Dual<double>> seeded with x + eps1*u + eps2*u, carries
// grad^3 f(x)(u, u) in the eps1*eps2 slot of the gradient.
template <class T>
struct Dual {
  T v{};
  T d{};

  Dual() = default;
  Dual(double value) : v(value), d(0.0) {}  // NOLINT(google-explicit-constructor)
  Dual(T value, T deriv) : v(value), d(deriv) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = v * o.d + d * o.v;
    v *= o.v;
    return *this;
  }
};

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual<double>>;

inline double primal(double x) { return x; }
template <class T>
double primal(const Dual<T>& x) {
  return primal(x.v);
}

template <class T>
Dual<T> operator-(const Dual<T>& a) {
  return {-a.v, -a.d};
}
template <class T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.v + b.v, a.d + b.d};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.v - b.v, a.d - b.d};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.v * b.v, a.v * b.d + a.d * b.v};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  const T inv = T(1.0) / b.v;
  const T q = a.v * inv;
  return {q, (a.d - q * b.d) * inv};
}

template <class T>
Dual<T> operator+(const Dual<T>& a, double s) {
  return {a.v + s, a.d};
}
template <class T>
Dual<T> operator+(double s, const Dual<T>& a) {
  return {s + a.v, a.d};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, double s) {
  return {a.v - s, a.d};
}
template <class T>
Dual<T> operator-(double s, const Dual<T>& a) {
  return {s - a.v, -a.d};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, double s) {
  return {a.v * s, a.d * s};
}
template <class T>
Dual<T> operator*(double s, const Dual<T>& a) {
  return {s * a.v, s * a.d};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, double s) {
  return {a.v / s, a.d / s};
}

template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  const T e = exp(a.v);
  return {e, e * a.d};
}
template <class T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return {log(a.v), a.d / a.v};
}
template <class T>
Dual<T> tanh(const Dual<T>& a) {
  using std::tanh;
  const T t = tanh(a.v);
  return {t, (1.0 - t * t) * a.d};
}

}  // namespace samlab
