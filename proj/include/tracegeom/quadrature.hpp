// Numerical quadrature: fixed Gauss-Legendre panels for smooth cached
// integrands and an adaptive double-exponential (tanh-sinh) rule for
// integrands with endpoint derivative blow-up or flat bump tails.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace tracegeom {

// 16-point Gauss-Legendre rule on [-1,1]; positive half of the nodes,
// mirrored at use sites. Values good to ~1 ulp of double.
inline constexpr std::array<double, 8> kGl16Nodes = {
    0.09501250983763744019,
    0.28160355077925891323,
    0.45801677765722738634,
    0.61787624440264374845,
    0.75540440835500303390,
    0.86563120238783174388,
    0.94457502307323257608,
    0.98940093499164993260,
};
inline constexpr std::array<double, 8> kGl16Weights = {
    0.18945061045506849629,
    0.18260341504492358887,
    0.16915651939500253819,
    0.14959598881657673208,
    0.12462897125553387205,
    0.09515851168249278481,
    0.06225352393864789286,
    0.02715245941175409485,
};

// Append node/weight pairs of the composite 16-point rule over [a,b] with
// `panels` equal subintervals. Useful when the same nodes are reused against
// many integrands (spherical transforms evaluated on a shared tau grid).
inline void gl16_points(double a, double b, std::size_t panels,
                        std::vector<double>& nodes,
                        std::vector<double>& weights) {
  if (!(b > a) || panels == 0) throw std::invalid_argument("gl16_points: bad interval");
  const double h = (b - a) / static_cast<double>(panels);
  nodes.reserve(nodes.size() + 16 * panels);
  weights.reserve(weights.size() + 16 * panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double c = a + (static_cast<double>(p) + 0.5) * h;
    for (int i = 0; i < 8; ++i) {
      const double dx = 0.5 * h * kGl16Nodes[static_cast<std::size_t>(i)];
      const double w = 0.5 * h * kGl16Weights[static_cast<std::size_t>(i)];
      nodes.push_back(c - dx);
      weights.push_back(w);
      nodes.push_back(c + dx);
      weights.push_back(w);
    }
  }
}

template <class F>
double composite_gl16(F&& f, double a, double b, std::size_t panels) {
  if (panels == 0) throw std::invalid_argument("composite_gl16: zero panels");
  const double h = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double c = a + (static_cast<double>(p) + 0.5) * h;
    double acc = 0.0;
    for (int i = 0; i < 8; ++i) {
      const double dx = 0.5 * h * kGl16Nodes[static_cast<std::size_t>(i)];
      acc += kGl16Weights[static_cast<std::size_t>(i)] * (f(c - dx) + f(c + dx));
    }
    total += 0.5 * h * acc;
  }
  return total;
}

// Adaptive tanh-sinh quadrature on a finite interval. Halves the mesh until
// two successive levels agree within tol (absolute). The substitution
// x = mid + rad*tanh((pi/2) sinh t) pushes endpoints to double-exponentially
// small weights, so C-infinity bumps and inverse-sqrt endpoints both converge
// at machine-precision rates.
template <class F>
double tanh_sinh(F&& f, double a, double b, double tol = 1e-12,
                 int max_level = 12) {
  if (!(b > a)) {
    if (a == b) return 0.0;
    throw std::invalid_argument("tanh_sinh: inverted interval");
  }
  const double mid = 0.5 * (a + b);
  const double rad = 0.5 * (b - a);
  const double pi_half = 1.5707963267948966;

  auto term = [&](double t) -> double {
    const double s = pi_half * std::sinh(t);
    const double ch = std::cosh(s);
    const double w = pi_half * std::cosh(t) / (ch * ch);
    if (!(w > 5e-18)) return 0.0;  // beyond double truncation point
    const double x = mid + rad * std::tanh(s);
    if (x <= a || x >= b) return 0.0;  // rounding pushed x onto an endpoint
    return w * f(x);
  };

  // t beyond ~4.3 gives weights below 5e-18 for every level.
  const double t_max = 4.3;
  double h = 1.0;
  double sum = term(0.0);
  for (double t = h; t <= t_max; t += h) sum += term(t) + term(-t);
  double prev = rad * h * sum;

  for (int level = 1; level <= max_level; ++level) {
    h *= 0.5;
    // Add the odd multiples of the new h.
    for (double t = h; t <= t_max; t += 2.0 * h) sum += term(t) + term(-t);
    const double cur = rad * h * sum;
    if (level >= 3 && std::abs(cur - prev) < tol) return cur;
    prev = cur;
  }
  return prev;
}

}  // namespace tracegeom
