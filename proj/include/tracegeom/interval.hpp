#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <ostream>

namespace tracegeom {

namespace detail {
inline double next_up(double x) {
  return std::nextafter(x, std::numeric_limits<double>::infinity());
}
inline double next_dn(double x) {
  return std::nextafter(x, -std::numeric_limits<double>::infinity());
}
inline double up_ulps(double x, int n) {
  for (int i = 0; i < n; ++i) x = next_up(x);
  return x;
}
inline double dn_ulps(double x, int n) {
  for (int i = 0; i < n; ++i) x = next_dn(x);
  return x;
}
}  // namespace detail

// Closed interval [lo, hi] over finite doubles, outward rounded.
// Rational ops widen one ulp per endpoint (covers the 0.5 ulp of a
// correctly rounded +,-,*,/,sqrt); transcendental endpoints widen by
// four ulps to absorb libm slack. Division requires 0 outside the
// denominator, log requires lo > 0: enforced by assert, the callers
// only ever feed positive quantities there.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  explicit Interval(double x) : lo(x), hi(x) {}
  Interval(double l, double h) : lo(l), hi(h) { assert(l <= h); }

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  bool positive() const { return lo > 0.0; }
};

inline Interval widen1(double l, double h) {
  return Interval(detail::next_dn(l), detail::next_up(h));
}

inline Interval operator+(const Interval& a, const Interval& b) {
  return widen1(a.lo + b.lo, a.hi + b.hi);
}
inline Interval operator-(const Interval& a, const Interval& b) {
  return widen1(a.lo - b.hi, a.hi - b.lo);
}
inline Interval operator-(const Interval& a) { return Interval(-a.hi, -a.lo); }

inline Interval operator*(const Interval& a, const Interval& b) {
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo,
               p4 = a.hi * b.hi;
  return widen1(std::min(std::min(p1, p2), std::min(p3, p4)),
                std::max(std::max(p1, p2), std::max(p3, p4)));
}

inline Interval operator/(const Interval& a, const Interval& b) {
  assert(b.lo > 0.0 || b.hi < 0.0);
  const double p1 = a.lo / b.lo, p2 = a.lo / b.hi, p3 = a.hi / b.lo,
               p4 = a.hi / b.hi;
  return widen1(std::min(std::min(p1, p2), std::min(p3, p4)),
                std::max(std::max(p1, p2), std::max(p3, p4)));
}

inline Interval operator+(const Interval& a, double b) { return a + Interval(b); }
inline Interval operator+(double a, const Interval& b) { return Interval(a) + b; }
inline Interval operator-(const Interval& a, double b) { return a - Interval(b); }
inline Interval operator-(double a, const Interval& b) { return Interval(a) - b; }
inline Interval operator*(const Interval& a, double b) { return a * Interval(b); }
inline Interval operator*(double a, const Interval& b) { return Interval(a) * b; }
inline Interval operator/(const Interval& a, double b) { return a / Interval(b); }
inline Interval operator/(double a, const Interval& b) { return Interval(a) / b; }

inline Interval sqrt(const Interval& a) {
  assert(a.lo >= 0.0);
  return widen1(std::sqrt(a.lo), std::sqrt(a.hi));
}

inline Interval exp(const Interval& a) {
  return Interval(detail::dn_ulps(std::exp(a.lo), 4),
                  detail::up_ulps(std::exp(a.hi), 4));
}

inline Interval log(const Interval& a) {
  assert(a.lo > 0.0);
  return Interval(detail::dn_ulps(std::log(a.lo), 4),
                  detail::up_ulps(std::log(a.hi), 4));
}

// a^n for integer n; n < 0 requires 0 outside a.
inline Interval pow_int(const Interval& a, long n) {
  if (n < 0) return Interval(1.0) / pow_int(a, -n);
  Interval r(1.0), base = a;
  unsigned long e = static_cast<unsigned long>(n);
  while (e) {
    if (e & 1UL) r = r * base;
    base = base * base;
    e >>= 1UL;
  }
  return r;
}

inline Interval hull(const Interval& a, const Interval& b) {
  return Interval(std::min(a.lo, b.lo), std::max(a.hi, b.hi));
}

// pi to the two doubles bracketing it.
inline Interval pi_interval() {
  return Interval(3.14159265358979311599796346854,
                  3.14159265358979355846271534085);
}

// zeta(2) = pi^2/6, from the pi bracket.
inline Interval zeta2_interval() {
  Interval p = pi_interval();
  return p * p / 6.0;
}

// Catalan's constant 0.91596559417721901505..., bracketed a touch wide.
inline Interval catalan_interval() {
  return Interval(0.91596559417721895, 0.91596559417721915);
}

inline std::ostream& operator<<(std::ostream& os, const Interval& a) {
  return os << "[" << a.lo << ", " << a.hi << "]";
}

}  // namespace tracegeom
