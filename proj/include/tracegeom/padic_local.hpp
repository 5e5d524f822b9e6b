// Local non-archimedean data for unramified residue rings: splitting-type
// classification of regular semisimple traces, congruence subgroup indices,
// the level weight functions and their exact local integrals, and the
// periodicity modulus of the combined weight.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "tracegeom/errors.hpp"
#include "tracegeom/modp_poly.hpp"
#include "tracegeom/primes.hpp"

namespace tracegeom {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

enum class SplitType {
  Split,
  EllipticUnramified,
  EllipticRamifiedTame,
  EllipticRamifiedWild,
};

inline const char* split_type_name(SplitType t) {
  switch (t) {
    case SplitType::Split: return "split";
    case SplitType::EllipticUnramified: return "elliptic-unramified";
    case SplitType::EllipticRamifiedTame: return "elliptic-ramified-tame";
    case SplitType::EllipticRamifiedWild: return "elliptic-ramified-wild";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// arithmetic in o/p^m for o unramified of degree f over Z_p (q = p^f)
// ---------------------------------------------------------------------------

struct LocalRing {
  uint64_t p = 2;
  int f = 1;
  int m = 1;          // working precision: elements live in o/p^m
  uint64_t pm = 2;    // p^m
  uint64_t q = 2;     // residue field size p^f
  std::vector<uint64_t> gmod;  // monic irreducible of degree f mod p (f >= 2)

  using Elem = std::array<uint64_t, 4>;

  LocalRing(uint64_t q_, uint64_t p_, int m_) : p(p_), m(m_), q(q_) {
    if (p < 2 || m < 1) throw ConfigError("bad local ring parameters");
    // determine f with q = p^f
    uint64_t t = q_;
    f = 0;
    while (t > 1) {
      if (t % p != 0) throw ConfigError("q is not a power of p");
      t /= p;
      ++f;
    }
    if (f < 1 || f > 4) throw UnsupportedDegree("residue degree must be 1..4");
    pm = 1;
    for (int i = 0; i < m; ++i) {
      if (pm > (uint64_t(1) << 40) / p) throw OverflowGuard("p^m too large");
      pm *= p;
    }
    if (f >= 2) gmod = find_irreducible();
  }

  std::vector<uint64_t> find_irreducible() const {
    // deterministic: first monic irreducible of degree f in lex order
    uint64_t total = 1;
    for (int i = 0; i < f; ++i) total *= p;
    for (uint64_t code = 0; code < total; ++code) {
      modp::Poly g(static_cast<std::size_t>(f) + 1, 0);
      uint64_t c = code;
      for (int i = 0; i < f; ++i) {
        g[static_cast<std::size_t>(i)] = c % p;
        c /= p;
      }
      g[static_cast<std::size_t>(f)] = 1;
      auto fac = modp::factor_mod_p(g, p);
      if (fac.size() == 1 && fac[0].mult == 1 &&
          modp::degree(fac[0].factor) == f)
        return {g.begin(), g.end()};
    }
    throw ComputationError("no irreducible polynomial found");
  }

  Elem zero() const { return {0, 0, 0, 0}; }

  Elem from_int(const cpp_int& x) const {
    cpp_int r = ((x % pm) + pm) % pm;
    Elem e{0, 0, 0, 0};
    e[0] = r.convert_to<uint64_t>();
    return e;
  }

  Elem add(const Elem& a, const Elem& b) const {
    Elem c{0, 0, 0, 0};
    for (int i = 0; i < f; ++i) c[static_cast<std::size_t>(i)] = (a[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(i)]) % pm;
    return c;
  }

  Elem sub(const Elem& a, const Elem& b) const {
    Elem c{0, 0, 0, 0};
    for (int i = 0; i < f; ++i) c[static_cast<std::size_t>(i)] = (a[static_cast<std::size_t>(i)] + pm - b[static_cast<std::size_t>(i)]) % pm;
    return c;
  }

  Elem mul(const Elem& a, const Elem& b) const {
    // schoolbook product, reduce by the monic gmod
    std::array<uint64_t, 7> w{};
    for (int i = 0; i < f; ++i) {
      if (a[static_cast<std::size_t>(i)] == 0) continue;
      for (int j = 0; j < f; ++j) {
        if (b[static_cast<std::size_t>(j)] == 0) continue;
        w[static_cast<std::size_t>(i + j)] =
            (w[static_cast<std::size_t>(i + j)] +
             detail::mulmod_u64(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)], pm)) % pm;
      }
    }
    for (int i = 2 * f - 2; i >= f; --i) {
      uint64_t c = w[static_cast<std::size_t>(i)];
      if (c == 0) continue;
      w[static_cast<std::size_t>(i)] = 0;
      for (int j = 0; j < f; ++j) {
        uint64_t sub_ = detail::mulmod_u64(c, gmod[static_cast<std::size_t>(j)] % pm, pm);
        w[static_cast<std::size_t>(i - f + j)] =
            (w[static_cast<std::size_t>(i - f + j)] + pm - sub_) % pm;
      }
    }
    Elem out{0, 0, 0, 0};
    for (int i = 0; i < f; ++i) out[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)];
    return out;
  }

  // valuation of an element, capped at m (v(0 mod p^m) reported as m)
  int val(const Elem& a) const {
    int best = m;
    for (int i = 0; i < f; ++i) {
      uint64_t c = a[static_cast<std::size_t>(i)];
      if (c == 0) continue;
      int v = 0;
      while (c % p == 0) { c /= p; ++v; }
      if (v < best) best = v;
    }
    return best;
  }

  // exact division by p^v (requires val >= v)
  Elem shift_down(const Elem& a, int v) const {
    uint64_t pv = 1;
    for (int i = 0; i < v; ++i) pv *= p;
    Elem c{0, 0, 0, 0};
    for (int i = 0; i < f; ++i) {
      if (a[static_cast<std::size_t>(i)] % pv != 0) throw ComputationError("shift_down: valuation too small");
      c[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)] / pv;
    }
    return c;
  }

  uint64_t pack(const Elem& a, uint64_t modulus) const {
    uint64_t key = 0, mult = 1;
    for (int i = 0; i < f; ++i) {
      key += (a[static_cast<std::size_t>(i)] % modulus) * mult;
      mult *= modulus;
    }
    return key;
  }
};

namespace padic_detail {

// squares of units in the residue field F_q, as a packed bitset (odd p)
inline std::vector<bool> residue_square_table(const LocalRing& R) {
  LocalRing F(R.q, R.p, 1);
  std::vector<bool> sq(R.q, false);
  uint64_t total = R.q;
  for (uint64_t code = 0; code < total; ++code) {
    LocalRing::Elem y{0, 0, 0, 0};
    uint64_t c = code;
    for (int i = 0; i < F.f; ++i) { y[static_cast<std::size_t>(i)] = c % F.p; c /= F.p; }
    bool zero = true;
    for (int i = 0; i < F.f; ++i)
      if (y[static_cast<std::size_t>(i)] != 0) zero = false;
    if (zero) continue;
    auto y2 = F.mul(y, y);
    sq[F.pack(y2, F.p)] = true;
  }
  return sq;
}

// squares of units in o/8 for p = 2, as a packed bitset over base-8 digits
inline std::vector<bool> dyadic_square_table(const LocalRing& R, int k) {
  // squares of units modulo 2^k (k <= 3 needed)
  LocalRing F(R.q, 2, k);
  uint64_t modulus = uint64_t(1) << k;
  uint64_t total = 1;
  for (int i = 0; i < F.f; ++i) total *= modulus;
  std::vector<bool> sq(total, false);
  for (uint64_t code = 0; code < total; ++code) {
    LocalRing::Elem y{0, 0, 0, 0};
    uint64_t c = code;
    for (int i = 0; i < F.f; ++i) { y[static_cast<std::size_t>(i)] = c % modulus; c /= modulus; }
    // unit iff nonzero mod 2
    bool unit = false;
    for (int i = 0; i < F.f; ++i)
      if (y[static_cast<std::size_t>(i)] % 2 != 0) unit = true;
    if (!unit) continue;
    auto y2 = F.mul(y, y);
    sq[F.pack(y2, modulus)] = true;
  }
  return sq;
}

}  // namespace padic_detail

// Square-class helper bundle, built once per (q, p) and reused across calls.
struct SquareClassifier {
  uint64_t q, p;
  std::vector<bool> residue_sq;  // odd p: squares in F_q^x
  std::vector<bool> dyadic_sq8;  // p=2: squares of units mod 8
  std::vector<bool> dyadic_sq4;  // p=2: squares of units mod 4

  SquareClassifier(uint64_t q_, uint64_t p_) : q(q_), p(p_) {
    LocalRing probe(q, p, 1);
    if (p != 2) {
      residue_sq = padic_detail::residue_square_table(probe);
    } else {
      dyadic_sq8 = padic_detail::dyadic_square_table(probe, 3);
      dyadic_sq4 = padic_detail::dyadic_square_table(probe, 2);
    }
  }

  // unit square in o^x, given the unit with `digits` valid p-adic digits
  bool unit_is_square(const LocalRing& R, const LocalRing::Elem& u,
                      int digits) const {
    if (p != 2) {
      if (digits < 1) throw InsufficientPrecision("square class needs 1 digit");
      return residue_sq[R.pack(u, R.p)];
    }
    if (digits < 3) throw InsufficientPrecision("square class needs 3 digits at p=2");
    return dyadic_sq8[R.pack(u, 8)];
  }

  // does the unit become a square in the unramified quadratic extension /
  // equivalently is k(sqrt(u))/k unramified (p = 2 only)
  bool unit_square_mod4(const LocalRing& R, const LocalRing::Elem& u,
                        int digits) const {
    if (digits < 2) throw InsufficientPrecision("square class needs 2 digits at p=2");
    return dyadic_sq4[R.pack(u, 4)];
  }
};

// ---------------------------------------------------------------------------
// GammaLocal and classification
// ---------------------------------------------------------------------------

struct GammaLocal {
  uint64_t q = 2, p = 2;
  int f = 1;
  SplitType type = SplitType::Split;
  int nu_twice = 0;  // 2*nu, nu = v(x^2-4)/2

  double nu() const { return nu_twice / 2.0; }
  bool ramified() const {
    return type == SplitType::EllipticRamifiedTame ||
           type == SplitType::EllipticRamifiedWild;
  }
};

// classify from a residue x mod p^M (element of o/p^M)
inline GammaLocal classify_splitting(const LocalRing& R,
                                     const LocalRing::Elem& x,
                                     const SquareClassifier& sc) {
  auto D = R.sub(R.mul(x, x), R.from_int(4));
  int v = R.val(D);
  int need = v + 2 * (R.p == 2 ? 2 : 0) + 3;
  if (v >= R.m || R.m < need)
    throw InsufficientPrecision("cannot certify v(x^2-4) and its square class");
  GammaLocal g;
  g.q = R.q;
  g.p = R.p;
  g.f = R.f;
  g.nu_twice = v;
  auto u = R.shift_down(D, v);
  int digits = R.m - v;
  if (R.p != 2) {
    if (v % 2 == 1) {
      g.type = SplitType::EllipticRamifiedTame;
    } else {
      g.type = sc.unit_is_square(R, u, digits) ? SplitType::Split
                                               : SplitType::EllipticUnramified;
    }
  } else {
    if (v % 2 == 1) {
      g.type = SplitType::EllipticRamifiedWild;
    } else if (sc.unit_is_square(R, u, digits)) {
      g.type = SplitType::Split;
    } else if (sc.unit_square_mod4(R, u, digits)) {
      g.type = SplitType::EllipticUnramified;
    } else {
      g.type = SplitType::EllipticRamifiedWild;
    }
  }
  return g;
}

// classify an exact integer trace
inline GammaLocal classify_trace(uint64_t q, uint64_t p, const cpp_int& x) {
  if (x == 2 || x == -2) throw CentralElement("x^2-4 = 0");
  cpp_int D = x * x - 4;
  int v = vp_int(D, cpp_int(p));
  int M = v + 2 * (p == 2 ? 2 : 0) + 3;
  LocalRing R(q, p, M);
  SquareClassifier sc(q, p);
  return classify_splitting(R, R.from_int(x), sc);
}

// ---------------------------------------------------------------------------
// congruence subgroup indices
// ---------------------------------------------------------------------------

inline cpp_int subgroup_index(uint64_t q, int r, int j, const cpp_int& t = 2) {
  if (r < 0) throw ConfigError("negative level exponent");
  if (r == 0) return 1;
  cpp_int Q(q);
  if (j == 0) return pow_cpp(Q, r) + pow_cpp(Q, r - 1);
  cpp_int n = pow_cpp(Q, 3 * r) - pow_cpp(Q, 3 * r - 2);
  if (t <= 0 || n % t != 0)
    throw NonIntegerIndex("2-torsion count does not divide the raw index");
  return n / t;
}

// #2-torsion of (o/p^r)^x; brute-verified for small cases in the tests
inline cpp_int two_torsion_count(uint64_t q, uint64_t p, int r) {
  if (r <= 0) return 1;
  if (p != 2) return 2;
  if (r == 1) return 1;
  if (r == 2) return cpp_int(q);
  return 2 * cpp_int(q);
}

// ---------------------------------------------------------------------------
// level weights w_j and their exact local integrals
// ---------------------------------------------------------------------------

// weight exponent from a residue: the weight is q^e with e = weight_exponent,
// or 0 when the returned exponent is negative. R.m must satisfy
// R.m >= 2r + 2 v_p(4) + 2 to be decidable for every input (the integral
// modulus), smaller m may throw.
inline int weight_exponent(const LocalRing& R, const SquareClassifier& sc,
                           const LocalRing::Elem& x, int r, int j) {
  if (r < 1) throw ConfigError("weight needs r >= 1");
  // v is capped at R.m, so the threshold tests below are only sound when the
  // working precision reaches the threshold
  if (R.m < (j == 1 ? 2 * r : r))
    throw InsufficientPrecision("working precision below the level threshold");
  auto D = R.sub(R.mul(x, x), R.from_int(4));
  int v = R.val(D);
  if (j == 1) return v >= 2 * r ? 2 * r : -1;
  if (v >= r) return r / 2;
  // v < r is exact here
  if (v % 2 == 1) return -1;
  auto u = R.shift_down(D, v);
  return sc.unit_is_square(R, u, R.m - v) ? v / 2 : -1;
}

inline cpp_int weight_w_residue(const LocalRing& R, const SquareClassifier& sc,
                                const LocalRing::Elem& x, int r, int j) {
  int e = weight_exponent(R, sc, x, r, j);
  return e < 0 ? cpp_int(0) : pow_cpp(cpp_int(R.q), static_cast<unsigned>(e));
}

// u64 variant for the enumeration loop; safe there because the state budget
// keeps q^{2r} < 2^24
inline uint64_t weight_w_u64(const LocalRing& R, const SquareClassifier& sc,
                             const LocalRing::Elem& x, int r, int j) {
  int e = weight_exponent(R, sc, x, r, j);
  if (e < 0) return 0;
  uint64_t w = 1;
  for (int i = 0; i < e; ++i) {
    if (w > UINT64_MAX / R.q) throw OverflowGuard("weight does not fit u64");
    w *= R.q;
  }
  return w;
}

inline cpp_int weight_w(uint64_t q, uint64_t p, int r, int j, const cpp_int& x) {
  int vp4 = (p == 2) ? 2 : 0;
  int m = 2 * r + 2 * vp4 + 2;
  LocalRing R(q, p, m);
  SquareClassifier sc(q, p);
  return weight_w_residue(R, sc, R.from_int(x), r, j);
}

// weight of a regular class from its splitting data alone; agrees with
// weight_w on any trace realizing the class
inline cpp_int weight_w_class(uint64_t q, SplitType type, int nu_twice,
                              int r, int j) {
  if (r < 0) throw ConfigError("negative level exponent");
  if (r == 0) return 1;
  cpp_int Q(q);
  int v = nu_twice;
  if (j == 1) return v >= 2 * r ? pow_cpp(Q, static_cast<unsigned>(2 * r))
                                : cpp_int(0);
  if (type == SplitType::Split) {
    // split discriminants are unit squares times p^v with v even, so the
    // capped exponent applies at every level
    return pow_cpp(Q, static_cast<unsigned>(std::min(v / 2, r / 2)));
  }
  return v >= r ? pow_cpp(Q, static_cast<unsigned>(r / 2)) : cpp_int(0);
}

// a priori bound for the local integral, as an exact rational
inline cpp_rational weight_integral_bound(uint64_t q, uint64_t p, int j) {
  cpp_int Q(q);
  cpp_int inv4 = (p == 2) ? Q * Q : cpp_int(1);  // |4|^{-1} = q^{v(4)}
  if (j == 0) return (p == 2) ? cpp_rational(2 * inv4) : cpp_rational(1);
  return (p == 2) ? cpp_rational(4 * inv4) : cpp_rational(2);
}

// exact Haar-probability integral of w_j over o, by complete enumeration of
// residues mod p^m with m = 2r + 2 v_p(4) + 2 (sufficient by periodicity)
inline cpp_rational weight_local_integral(uint64_t q, uint64_t p, int r, int j,
                                          int extra_digits = 0) {
  if (r < 1) throw ConfigError("weight integral needs r >= 1");
  int vp4 = (p == 2) ? 2 : 0;
  int m = 2 * r + 2 * vp4 + 2 + extra_digits;
  // states = q^m, checked exactly
  uint64_t budget = uint64_t(1) << 24;
  uint64_t states_check = 1;
  for (int i = 0; i < m; ++i) {
    if (states_check > budget / q)
      throw EnumerationBudgetExceeded("residue enumeration exceeds 2^24 states");
    states_check *= q;
  }
  LocalRing R(q, p, m);
  SquareClassifier sc(q, p);
  uint64_t states = 1;
  for (int i = 0; i < R.f; ++i) states *= R.pm;
  // weights are <= q^{2r} <= 2^24 and states <= 2^24, so u64 cannot overflow
  uint64_t total = 0;
  LocalRing::Elem x{0, 0, 0, 0};
  for (uint64_t code = 0;; ++code) {
    total += weight_w_u64(R, sc, x, r, j);
    if (code + 1 == states) break;
    // increment base-p^m counter
    for (int i = 0; i < R.f; ++i) {
      if (++x[static_cast<std::size_t>(i)] < R.pm) break;
      x[static_cast<std::size_t>(i)] = 0;
    }
  }
  return cpp_rational(cpp_int(total), cpp_int(states));
}

// ---------------------------------------------------------------------------
// periodicity modulus n' = 4 * prod p^{(1+kappa) r}
// ---------------------------------------------------------------------------

struct LevelEntry {
  cpp_int q;  // ideal norm N(p)
  int r = 1;
  int j = 0;
};

struct PeriodicModulus {
  std::vector<std::pair<cpp_int, int>> factors;  // (N(p), exponent) per level prime
  cpp_int norm = 4;                              // includes N(4) = 4^degree
};

inline PeriodicModulus periodic_modulus(const std::vector<LevelEntry>& level,
                                        int field_degree = 1) {
  PeriodicModulus out;
  out.norm = pow_cpp(cpp_int(4), field_degree);
  for (const auto& e : level) {
    if (e.r < 1) throw ConfigError("level exponent must be >= 1");
    int exp = (1 + e.j) * e.r;
    out.factors.push_back({e.q, exp});
    out.norm *= pow_cpp(e.q, exp);
  }
  return out;
}

}  // namespace tracegeom
