#pragma once

// Global assembly of the geometric bound. This header ties the local
// ingredients together: arithmetic settings (a quaternion algebra over a
// number field with a level structure), spectral windows, covolume formulas,
// the analytic conductor, the savings exponent, trace regions, per-trace
// ledger rows, and the end-to-end multiplicity bound report.
//
// Conventions used throughout:
//  * adelic volumes are normalized so that every finite maximal compact has
//    measure 1; the adelic covolume then equals the covolume of the maximal
//    lattice, and passing to a finite-index level subgroup multiplies the
//    covolume by the index.
//  * window slot j in [0, a) is the j-th real split place (field places are
//    ordered real first, ascending); slot j in [a, a+b) is the complex place
//    r1 + (j - a). Ramified real places carry no window slot.
//  * every row factor is an upper bound. Interval endpoints are outward
//    rounded where the input is exact; quantities obtained by quadrature or
//    grid search (archimedean suprema, pointwise values of the inverse
//    transform) are measured bounds and are marked as such in the report.
//    Boolean flags record where a coarse but sound fallback replaced an
//    exact computation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "arch_spherical.hpp"
#include "errors.hpp"
#include "interval.hpp"
#include "number_field.hpp"
#include "padic_local.hpp"
#include "primes.hpp"

namespace tracegeom {

// ---------------------------------------------------------------------------
// settings and windows
// ---------------------------------------------------------------------------

struct LevelPrime {
  PrimeIdealData ideal;
  int r = 1;      // exponent of the ideal in the level
  int kappa = 0;  // 0 or 1: which of the two local subgroup shapes is taken
};

// A quaternion algebra over the field, presented by its ramification data,
// together with a level. Invariants checked by validate_setting:
//   a + b >= 1, signature matches the field, |ram| + c is even and nonzero,
//   level ideals are pairwise distinct and disjoint from ram.
struct QuaternionSetting {
  NumberFieldSpec field;
  int a = 1;  // split real places
  int b = 0;  // complex places (always split)
  int c = 0;  // ramified real places
  std::vector<PrimeIdealData> ram;  // finite ramification set
  std::vector<LevelPrime> level;    // level structure, coprime to ram
};

// One slot per split archimedean place. An exceptional slot asks for the
// spectral parameters with real part >= sigma at that place; a tempered slot
// asks for parameters within distance 1 of the center T on the tempered axis.
struct WindowPlace {
  bool exceptional = true;
  double sigma = 0.25;  // in [0, 1/2], used when exceptional
  double T = 0.0;       // tempered center, used otherwise
};

struct SpectralWindow {
  std::vector<WindowPlace> places;  // size a + b
};

inline int window_rho(const QuaternionSetting& s, int j) {
  return j < s.a ? 1 : 2;
}

namespace tgdetail {

inline bool same_prime_ideal(const PrimeIdealData& x, const PrimeIdealData& y) {
  if (x.p != y.p || x.e != y.e || x.f != y.f) return false;
  if (x.gen_valid && y.gen_valid) return x.gen == y.gen;
  return true;  // not distinguishable from the data: treated as equal
}

}  // namespace tgdetail

inline void validate_setting(const QuaternionSetting& s) {
  const auto& k = s.field;
  if (s.a < 0 || s.b < 0 || s.c < 0)
    throw InvalidSetting("negative signature entry");
  if (s.a + s.b < 1)
    throw InvalidSetting("need at least one split archimedean place");
  if (!k.compatible_signature(s.a, s.b, s.c))
    throw InvalidSetting("signature does not match the field");
  if ((s.ram.size() + static_cast<std::size_t>(s.c)) % 2 != 0)
    throw InvalidSetting("ramification set has odd total size");
  if (s.ram.empty() && s.c == 0)
    throw InvalidSetting("empty ramification set: the algebra is not division");

  auto check_ideal = [&](const PrimeIdealData& pd) {
    if (pd.p < 2 || pd.e < 1 || pd.f < 1 || pd.e * pd.f > k.d)
      throw InvalidSetting("malformed prime ideal data");
    if (pd.q != pow_cpp(pd.p, static_cast<unsigned>(pd.f)))
      throw InvalidSetting("prime ideal norm disagrees with p^f");
    if (pd.p <= cpp_int(std::numeric_limits<uint64_t>::max()) &&
        !is_prime_u64(pd.p.convert_to<uint64_t>()))
      throw InvalidSetting("prime ideal over a composite integer");
  };
  for (auto& pd : s.ram) check_ideal(pd);
  for (auto& lp : s.level) {
    check_ideal(lp.ideal);
    if (lp.r < 1) throw InvalidSetting("level exponent must be >= 1");
    if (lp.kappa != 0 && lp.kappa != 1)
      throw InvalidSetting("kappa must be 0 or 1");
  }

  // pairwise distinctness; unresolvable pairs count as collisions
  std::vector<const PrimeIdealData*> all;
  for (auto& pd : s.ram) all.push_back(&pd);
  std::size_t nram = all.size();
  for (auto& lp : s.level) all.push_back(&lp.ideal);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j)
      if (tgdetail::same_prime_ideal(*all[i], *all[j])) {
        if (i < nram && j >= nram)
          throw InvalidSetting("level is not coprime to the ramification set");
        throw InvalidSetting("repeated or ambiguous prime ideal");
      }

  // cross-check the claimed splitting data against the field where possible
  std::vector<cpp_int> ps;
  for (auto* pd : all) ps.push_back(pd->p);
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  for (auto& p : ps) {
    std::vector<PrimeIdealData> ideals;
    try {
      ideals = split_prime(k, p);
    } catch (const ComputationError&) {
      continue;  // splitting not computable here; accept the claim
    }
    for (auto* pd : all) {
      if (pd->p != p) continue;
      bool found = false;
      for (auto& id : ideals)
        if (id.e == pd->e && id.f == pd->f &&
            (!pd->gen_valid || !id.gen_valid || id.gen == pd->gen))
          found = true;
      if (!found)
        throw InvalidSetting("prime ideal data does not match the field");
    }
  }
}

inline void validate_window(const QuaternionSetting& s,
                            const SpectralWindow& w) {
  if (static_cast<int>(w.places.size()) != s.a + s.b)
    throw WindowMismatch("window size differs from the split place count");
  for (auto& wp : w.places) {
    if (wp.exceptional) {
      if (!(wp.sigma >= 0.0 && wp.sigma <= 0.5))
        throw WindowMismatch("exceptional exponent outside [0, 1/2]");
    } else if (!std::isfinite(wp.T)) {
      throw WindowMismatch("tempered center is not finite");
    }
  }
}

// ---------------------------------------------------------------------------
// small interval helpers
// ---------------------------------------------------------------------------

namespace tgdetail {

inline Interval iv_int(const cpp_int& n) {
  double m = n.convert_to<double>();
  // conversion rounds to nearest: one ulp outward covers it
  return widen1(m, m);
}

inline Interval iv_rat(const cpp_rational& r) {
  double m = r.convert_to<double>();
  return widen1(m, m);
}

// measured (non-interval) quantity: small symmetric relative inflation
inline Interval iv_meas(double x, double rel = 1e-9) {
  double pad = std::abs(x) * rel + 1e-300;
  return Interval(x - pad, x + pad);
}

}  // namespace tgdetail

// ---------------------------------------------------------------------------
// covolume of the maximal lattice
// ---------------------------------------------------------------------------

// Covolume of the unit lattice of a maximal order, as an enclosure:
//   zeta_k(2) * Delta_k^{3/2} * prod_{ram} (N(p) - 1)
//     / ( 2^{3b+2c} * pi^{a+2b+2c} ).
// The result is checked against the universal floor e^{-7}, which every
// admissible setting clears by discriminant lower bounds; an enclosure that
// cannot certify the floor is a computation error.
inline Interval borel_volume(const QuaternionSetting& s,
                             uint64_t zeta_prime_bound = 100000) {
  validate_setting(s);
  const auto& k = s.field;
  Interval z = k.d == 1 ? zeta2_interval() : dedekind_zeta2(k, zeta_prime_bound);
  Interval d32 = sqrt(tgdetail::iv_int(pow_cpp(k.disc_abs, 3)));
  cpp_int ramprod = 1;
  for (auto& pd : s.ram) ramprod *= (pd.q - 1);
  double two_pow = std::ldexp(1.0, 3 * s.b + 2 * s.c);  // exact
  Interval den =
      Interval(two_pow) * pow_int(pi_interval(), s.a + 2 * s.b + 2 * s.c);
  Interval vol = z * d32 * tgdetail::iv_int(ramprod) / den;
  if (!(vol.lo > std::exp(-7.0)))
    throw ComputationError("covolume enclosure does not clear the e^-7 floor");
  return vol;
}

// ---------------------------------------------------------------------------
// conductor and integrality exponent
// ---------------------------------------------------------------------------

struct ConductorInfo {
  Interval vol_maximal;  // covolume at full level
  cpp_int index = 1;     // index of the level subgroup in the maximal compact
  Interval vol;          // covolume at the given level
  Interval C;            // conductor: vol * prod_{tempered} (1+|T|)^rho
  double two_over_p = 1.0;  // min over exceptional slots of 1-2sigma; 1 if none
  double p_sigma = 2.0;     // the exponent p itself (infinity when 2/p = 0)
  Interval ref_power;       // C^{2/p}
};

// Integrality exponent of a spectral parameter tuple: the largest p over the
// coordinates, where a parameter with |Re s| = sigma < 1/2 contributes
// 2/(1 - 2 sigma) and a parameter on the critical line contributes infinity.
inline double p_of_parameter(const std::vector<std::complex<double>>& s) {
  if (s.empty()) throw WindowMismatch("empty spectral parameter tuple");
  double p = 2.0;
  for (auto& z : s) {
    double sig = std::abs(z.real());
    if (sig > 0.5 + 1e-12)
      throw WindowMismatch("spectral parameter outside the critical strip");
    sig = std::min(sig, 0.5);
    p = std::max(p, sig >= 0.5 ? std::numeric_limits<double>::infinity()
                               : 2.0 / (1.0 - 2.0 * sig));
  }
  return p;
}

inline ConductorInfo conductor_and_exponent(const QuaternionSetting& s,
                                            const SpectralWindow& w,
                                            uint64_t zeta_prime_bound = 100000) {
  validate_window(s, w);
  ConductorInfo out;
  out.vol_maximal = borel_volume(s, zeta_prime_bound);
  out.index = 1;
  for (auto& lp : s.level) {
    if (lp.ideal.q > cpp_int(std::numeric_limits<int64_t>::max()))
      throw OverflowGuard("level prime norm too large for the index formula");
    uint64_t q = lp.ideal.q.convert_to<uint64_t>();
    uint64_t p = lp.ideal.p.convert_to<uint64_t>();
    cpp_int t = lp.kappa == 1 ? two_torsion_count(q, p, lp.r) : cpp_int(2);
    out.index *= subgroup_index(q, lp.r, lp.kappa, t);
  }
  out.vol = out.vol_maximal * tgdetail::iv_int(out.index);
  out.C = out.vol;
  double min_gap = 2.0;
  bool any_exceptional = false;
  for (int j = 0; j < static_cast<int>(w.places.size()); ++j) {
    const auto& wp = w.places[j];
    if (wp.exceptional) {
      any_exceptional = true;
      min_gap = std::min(min_gap, 1.0 - 2.0 * wp.sigma);
    } else {
      double base = 1.0 + std::abs(wp.T);
      out.C = out.C * pow_int(Interval(base), window_rho(s, j));
    }
  }
  out.two_over_p = any_exceptional ? std::max(min_gap, 0.0) : 1.0;
  out.p_sigma = out.two_over_p == 0.0
                    ? std::numeric_limits<double>::infinity()
                    : 2.0 / out.two_over_p;
  out.ref_power = exp(log(out.C) * Interval(out.two_over_p));
  return out;
}

// ---------------------------------------------------------------------------
// savings exponent
// ---------------------------------------------------------------------------

// The whole budget 7 + log C is spent at a single exceptional slot: the one
// with the largest sigma (ties go to the lowest index). All other slots get
// R = 0, so their test functions keep the short support.
struct RAssignment {
  std::vector<double> R;  // per window slot
  int slot = -1;          // receiving slot, -1 when the window has none
  double budget = 0.0;    // 7 + log C (lower edge of the enclosure)
  double sum_rhoR = 0.0;  // sum over slots of rho_j R_j
};

inline RAssignment choose_R(const QuaternionSetting& s, const SpectralWindow& w,
                            const ConductorInfo& ci) {
  validate_window(s, w);
  RAssignment out;
  out.R.assign(w.places.size(), 0.0);
  out.budget = 7.0 + std::log(ci.C.lo);
  if (!(out.budget > 0.0))
    throw ComputationError("savings budget is not positive");
  double best = -1.0;
  for (int j = 0; j < static_cast<int>(w.places.size()); ++j)
    if (w.places[j].exceptional && w.places[j].sigma > best) {
      best = w.places[j].sigma;
      out.slot = j;
    }
  if (out.slot < 0) return out;  // all-tempered window: no savings slot
  double rho = window_rho(s, out.slot);
  out.R[out.slot] = out.budget / rho;
  out.sum_rhoR = rho * out.R[out.slot];
  // the budget constraint, with the interval upper edge absorbing roundoff
  if (out.sum_rhoR > 7.0 + std::log(ci.C.hi) + 1e-9)
    throw ComputationError("savings budget overrun");
  return out;
}

// ---------------------------------------------------------------------------
// trace region
// ---------------------------------------------------------------------------

// Region of o containing every trace the test functions can see. At a place
// of weight rho carrying R, supports reach hyperbolic height 2R + 2, and
// |tr|^2 <= 4 cosh(height) <= e^{2 rho (R+2)} covers both the real and the
// complex normalization (a complex place bounds the square modulus).
// Tempered slots and ramified real places take R = 0.
inline Polycylinder trace_region(const QuaternionSetting& s,
                                 const RAssignment& ra) {
  const auto& k = s.field;
  if (static_cast<int>(ra.R.size()) != s.a + s.b)
    throw WindowMismatch("savings assignment size differs from the window");
  Polycylinder P;
  for (int v = 0; v < k.num_places(); ++v) {
    double rho = k.places[v].rho;
    double Rv = 0.0;
    if (v < s.a)
      Rv = ra.R[v];  // split real place
    else if (v >= k.r1)
      Rv = ra.R[s.a + (v - k.r1)];  // complex place
    P.radius.push_back(std::exp(rho * (Rv + 2.0)));
  }
  return P;
}

// ---------------------------------------------------------------------------
// Dirichlet L-values at s = 1 (rational base field: exact finite forms)
// ---------------------------------------------------------------------------

namespace tgdetail {

// Jacobi symbol (a | n) for odd n > 0
inline int jacobi_u64(uint64_t a, uint64_t n) {
  int t = 1;
  a %= n;
  while (a != 0) {
    int z = __builtin_ctzll(a);
    a >>= z;
    if (z & 1) {
      uint64_t r = n & 7;
      if (r == 3 || r == 5) t = -t;
    }
    if ((a & 3) == 3 && (n & 3) == 3) t = -t;
    std::swap(a, n);
    a %= n;
  }
  return n == 1 ? t : 0;
}

// quadratic character attached to a fundamental discriminant, at a prime
inline int chi_fund_prime(const cpp_int& D, uint64_t p) {
  if (p == 2) {
    if (D % 2 == 0) return 0;
    uint64_t m = (((D % 8) + 8) % 8).convert_to<uint64_t>();
    return (m == 1 || m == 7) ? 1 : -1;
  }
  cpp_int r = ((D % p) + p) % p;
  if (r == 0) return 0;
  return jacobi_u64(r.convert_to<uint64_t>(), p);
}

}  // namespace tgdetail

// L(1, chi_D) for a fundamental discriminant D != 1, as an enclosure.
// |D| <= exact_limit: finite closed forms (an exact integer character sum
// against pi for D < 0, a log-sin sum with tracked roundoff for D > 0).
// Larger |D|: the crude but rigorous window [0, log|D| + 3] from partial
// summation with the trivial character-sum bound.
inline Interval dirichlet_L1_fundamental(const cpp_int& D,
                                         uint64_t exact_limit = 100000) {
  if (D == 1) throw ConfigError("trivial character has no finite L(1)");
  cpp_int m4 = ((D % 4) + 4) % 4;
  if (m4 != 0 && m4 != 1) throw ConfigError("not a discriminant");
  cpp_int q = D < 0 ? cpp_int(-D) : D;
  constexpr uint64_t kSieveCap = 1u << 17;
  if (q > exact_limit || q > kSieveCap) {
    double lq = std::log(q.convert_to<double>());
    return Interval(0.0, lq + 3.0);
  }
  uint64_t uq = q.convert_to<uint64_t>();
  static thread_local SpfSieve sieve(kSieveCap);
  // chi is totally multiplicative: fill along smallest prime factors
  std::vector<int8_t> chi(uq, 0);
  if (uq > 1) chi[1] = 1;
  for (uint64_t n = 2; n < uq; ++n) {
    uint32_t p = sieve.spf[static_cast<uint32_t>(n)];
    chi[n] = (n == p) ? static_cast<int8_t>(tgdetail::chi_fund_prime(D, p))
                      : static_cast<int8_t>(chi[n / p] * chi[p]);
  }
  if (D < 0) {
    cpp_int S = 0;
    for (uint64_t n = 1; n < uq; ++n)
      if (chi[n] != 0) S += cpp_int(chi[n]) * n;
    // L(1) = pi * (-S) / q^{3/2}, an exact integer against pi
    return pi_interval() * tgdetail::iv_int(-S) /
           sqrt(tgdetail::iv_int(q * q * q));
  }
  double sum = 0.0, abs_sum = 0.0;
  for (uint64_t n = 1; n < uq; ++n) {
    if (chi[n] == 0) continue;
    double term = std::log(std::sin(M_PI * static_cast<double>(n) / uq));
    sum += chi[n] * term;
    abs_sum += std::abs(term);
  }
  // outward error: accumulated roundoff plus libm slack per term
  double err = abs_sum * 1e-13 + static_cast<double>(uq) * 1e-14 + 1e-12;
  Interval S(sum - err, sum + err);
  Interval L = -S / sqrt(tgdetail::iv_int(q));
  return Interval(std::max(L.lo, 0.0), std::max(L.hi, 1e-300));
}

// ---------------------------------------------------------------------------
// centralizer volume bounds
// ---------------------------------------------------------------------------

namespace tgdetail {

// coordinates of x^2 - 4 in the integral basis
inline std::vector<cpp_int> delta_coords(const NumberFieldSpec& k,
                                         const std::vector<cpp_int>& x) {
  auto D = k.mul(x, x);
  D[0] -= 4;
  return D;
}

inline bool is_zero(const std::vector<cpp_int>& v) {
  for (auto& c : v)
    if (c != 0) return false;
  return true;
}

// Newton lift of a simple root of an integer polynomial from mod p to mod pM
inline cpp_int lift_poly_root(const std::vector<cpp_int>& poly, const cpp_int& p,
                              const cpp_int& t0, const cpp_int& pM) {
  cpp_int cur = ((t0 % p) + p) % p;
  cpp_int mod = p;
  std::vector<cpp_int> dpoly;
  for (std::size_t i = 1; i < poly.size(); ++i)
    dpoly.push_back(poly[i] * static_cast<int>(i));
  auto eval_mod = [](const std::vector<cpp_int>& f, const cpp_int& x,
                     const cpp_int& m) {
    cpp_int acc = 0;
    for (std::size_t i = f.size(); i-- > 0;)
      acc = ((acc * x + f[i]) % m + m) % m;
    return acc;
  };
  while (mod < pM) {
    mod = mod * mod;
    if (mod > pM) mod = pM;
    cpp_int fv = eval_mod(poly, cur, mod);
    cpp_int fd = eval_mod(dpoly, cur, mod);
    cpp_int fdinv = inv_mod(fd, mod);
    cur = ((cur - fv * fdinv) % mod + mod) % mod;
  }
  return cur % pM;
}

// evaluations of the integral basis elements at a lifted root, mod pM;
// denominators divide the order index and must be coprime to p
inline std::vector<cpp_int> basis_values_mod(const NumberFieldSpec& k,
                                             const cpp_int& root,
                                             const cpp_int& pM) {
  std::vector<cpp_int> out;
  for (int i = 0; i < k.d; ++i) {
    cpp_int acc = 0;
    for (std::size_t j = k.basis[i].size(); j-- > 0;) {
      acc = (acc * root) % pM;
      const cpp_rational& cr = k.basis[i][j];
      cpp_int num = ((numerator(cr) % pM) + pM) % pM;
      cpp_int den = denominator(cr);
      if (den != 1) {
        cpp_int deninv = inv_mod(((den % pM) + pM) % pM, pM);
        num = (num * deninv) % pM;
      }
      acc = (acc + num) % pM;
    }
    out.push_back(acc);
  }
  return out;
}

// image of an integral element in o/p^M = Z/p^M at a degree-one prime;
// needs valid generator data (gen = X + g0, so the root is -g0 mod p)
inline cpp_int split_residue(const NumberFieldSpec& k, const PrimeIdealData& pd,
                             const std::vector<cpp_int>& coords,
                             const cpp_int& pM) {
  if (!pd.gen_valid || pd.gen.size() != 2)
    throw IndexDivisorUnsupported("residue at a split prime needs generator data");
  cpp_int t0 = ((-pd.gen[0]) % pd.p + pd.p) % pd.p;
  cpp_int root = lift_poly_root(k.poly, pd.p, t0, pM);
  auto bv = basis_values_mod(k, root, pM);
  cpp_int acc = 0;
  for (int i = 0; i < k.d; ++i)
    acc = (acc + ((coords[i] % pM + pM) % pM) * bv[i]) % pM;
  return acc;
}

// square test in the finite ring o/mod of a quadratic field, brute forced
// against the ring's own multiplication table, hence independent of the
// choice of integral basis (mod is 4 or 8 here)
inline bool quad_square_mod(const NumberFieldSpec& k,
                            const std::vector<cpp_int>& u, int mod) {
  cpp_int M(mod);
  cpp_int u0 = ((u[0] % M) + M) % M, u1 = ((u[1] % M) + M) % M;
  for (int y0 = 0; y0 < mod; ++y0)
    for (int y1 = 0; y1 < mod; ++y1) {
      std::vector<cpp_int> y{cpp_int(y0), cpp_int(y1)};
      auto y2 = k.mul(y, y);
      if (((y2[0] % M) + M) % M == u0 && ((y2[1] % M) + M) % M == u1)
        return true;
    }
  return false;
}

// power of a residue in o/p by square-and-multiply over the basis
// multiplication table; basis element 0 must be the unit
inline std::vector<cpp_int> powmod_element(const NumberFieldSpec& k,
                                           std::vector<cpp_int> base,
                                           cpp_int e, const cpp_int& p) {
  auto reduce = [&](std::vector<cpp_int> v) {
    for (auto& c : v) c = ((c % p) + p) % p;
    return v;
  };
  base = reduce(base);
  std::vector<cpp_int> acc(k.d, 0);
  acc[0] = 1;
  while (e > 0) {
    if (e % 2 == 1) acc = reduce(k.mul(acc, base));
    base = reduce(k.mul(base, base));
    e /= 2;
  }
  return acc;
}

}  // namespace tgdetail

// Per-trace centralizer data:
//   bound = 2 * L(1, chi) * sqrt(Delta_k * B),   B = |N(rel disc)|.
// The relative discriminant is exact over the rationals and, over quadratic
// fields, exact at all odd primes and at inert dyadic primes; the remaining
// dyadic cases take a sound upper bound and clear the exact flag. The
// L-value is rigorous over the rationals (finite character sums, or a crude
// window for huge conductors) and a monitored truncated Euler product over
// quadratic fields, flagged non-rigorous.
struct CentralizerBound {
  cpp_int norm_delta;     // |N(x^2 - 4)|
  int omega = 0;          // prime ideals dividing x^2 - 4
  bool omega_is_bound = false;
  cpp_int rel_disc_norm;  // B
  bool disc_exact = true;
  Interval lvalue;
  bool lvalue_rigorous = true;
  Interval bound;
};

// Centralizer machinery with caches shared across traces of one field:
// factorization sieve, prime splittings, root tables and L-values.
class CentralizerCalc {
 public:
  explicit CentralizerCalc(const NumberFieldSpec& k) : k_(k), sieve_(1000000) {
    if (k.d > 2)
      throw UnsupportedDegree("centralizer bounds implemented for degree <= 2");
    // basis element 0 must be the unit for the residue arithmetic below
    std::vector<cpp_rational> one(static_cast<std::size_t>(k.d), 0);
    one[0] = 1;
    if (k.basis[0] != one)
      throw ConfigError("integral basis must start with 1");
  }

  // throws CentralTrace for x = +-2 and for traces splitting over the field
  CentralizerBound eval(const std::vector<cpp_int>& x) {
    if (static_cast<int>(x.size()) != k_.d)
      throw ConfigError("coordinate count differs from the degree");
    auto D = tgdetail::delta_coords(k_, x);
    if (tgdetail::is_zero(D)) throw CentralTrace("central trace");
    if (is_square_in_field(k_, D))
      throw CentralTrace("trace splits over the base field");
    CentralizerBound out;
    cpp_rational ndr = k_.norm(D);
    cpp_int nd = numerator(ndr) < 0 ? cpp_int(-numerator(ndr)) : numerator(ndr);
    out.norm_delta = nd;
    PartialFactorization fac = factor_delta(x, nd);
    if (!fac.complete() && fac.cofactor_prime) {
      // a prime cofactor completes the factorization
      fac.factors[fac.cofactor] += 1;
      fac.cofactor = 1;
      fac.cofactor_prime = false;
    }
    fill_omega(fac, D, out);
    cpp_int fund = rel_disc(fac, D, nd, out);
    fill_lvalue(fund, D, out);
    out.bound = Interval(2.0) * out.lvalue *
                sqrt(tgdetail::iv_int(k_.disc_abs * out.rel_disc_norm));
    return out;
  }

 private:
  PartialFactorization factor_delta(const std::vector<cpp_int>& x,
                                    const cpp_int& nd) {
    PartialFactorization fac;
    if (k_.d == 1) {
      // x^2 - 4 = (x-2)(x+2): factor the halves through the sieve when small
      cpp_int h1 = x[0] - 2, h2 = x[0] + 2;
      if (h1 < 0) h1 = -h1;
      if (h2 < 0) h2 = -h2;
      if (h1 <= sieve_.limit() && h2 <= sieve_.limit()) {
        for (cpp_int h : {h1, h2})
          if (h > 1)
            for (auto& [p, e] : sieve_.factor(h.convert_to<uint64_t>()))
              fac.factors[cpp_int(p)] += e;
        return fac;
      }
    }
    return factor_partial(nd, sieve_);
  }

  void fill_omega(const PartialFactorization& fac,
                  const std::vector<cpp_int>& D, CentralizerBound& out) {
    if (!fac.complete()) {
      // unfinished cofactor: every hidden prime spawns at most d ideals
      out.omega = fac.omega_upper(sieve_.limit()) * k_.d;
      out.omega_is_bound = true;
      return;
    }
    if (k_.d == 1) {
      out.omega = static_cast<int>(fac.factors.size());
      return;
    }
    out.omega = 0;
    for (auto& [p, e] : fac.factors) {
      const auto& ideals = split_ideals(p);
      bool resolved = true;
      int cnt = 0;
      for (auto& id : ideals) {
        try {
          if (val_at_prime(k_, id, D) >= 1) ++cnt;
        } catch (const ComputationError&) {
          resolved = false;
        }
      }
      if (resolved) {
        out.omega += cnt;
      } else {
        out.omega += static_cast<int>(ideals.size());
        out.omega_is_bound = true;
      }
    }
  }

  // returns the fundamental discriminant when the field is rational (else 1)
  cpp_int rel_disc(const PartialFactorization& fac,
                   const std::vector<cpp_int>& D, const cpp_int& nd,
                   CentralizerBound& out) {
    if (!fac.complete()) {
      // divisibility fallback: the relative discriminant divides (4 delta)
      out.rel_disc_norm = k_.d == 1 ? nd : nd * 16;
      out.disc_exact = false;
      return 1;
    }
    if (k_.d == 1) {
      cpp_int m = D[0] < 0 ? cpp_int(-1) : cpp_int(1);
      for (auto& [p, e] : fac.factors)
        if (e % 2 == 1) m *= p;
      cpp_int D0 = (((m % 4) + 4) % 4 == 1) ? m : 4 * m;
      out.rel_disc_norm = D0 < 0 ? cpp_int(-D0) : D0;
      out.disc_exact = true;
      return D0;
    }
    // quadratic base field: local exponents prime by prime
    cpp_int B = 1;
    bool exact = true;
    bool dyadic_seen = false;
    auto handle = [&](const cpp_int& p) -> bool {
      for (auto& id : split_ideals(p)) {
        int v;
        try {
          v = val_at_prime(k_, id, D);
        } catch (const ComputationError&) {
          return false;
        }
        int d = local_disc_exponent(id, D, v, &exact);
        B *= pow_cpp(id.q, static_cast<unsigned>(d));
      }
      return true;
    };
    for (auto& [p, e] : fac.factors) {
      if (p == 2) dyadic_seen = true;
      if (!handle(p)) {
        out.rel_disc_norm = nd * 16;
        out.disc_exact = false;
        return 1;
      }
    }
    if (!dyadic_seen && !handle(cpp_int(2))) {
      // dyadic primes can ramify even when 2 does not divide the norm
      out.rel_disc_norm = nd * 16;
      out.disc_exact = false;
      return 1;
    }
    out.rel_disc_norm = B;
    out.disc_exact = exact;
    return 1;
  }

  // exponent of the relative discriminant of k(gamma)/k at one prime
  int local_disc_exponent(const PrimeIdealData& id,
                          const std::vector<cpp_int>& D, int v, bool* exact) {
    if (id.p != 2) return v % 2;  // odd residue characteristic: tame
    if (id.e == 1 && id.f == 2) {
      // inert dyadic prime: unit part is an elementwise quotient
      if (v % 2 == 1) return 3;
      std::vector<cpp_int> u(k_.d);
      cpp_int pv = pow_cpp(id.p, static_cast<unsigned>(v));
      for (int t = 0; t < k_.d; ++t) u[t] = D[t] / pv;
      return tgdetail::quad_square_mod(k_, u, 4) ? 0 : 2;
    }
    if (id.e == 1) {
      // split dyadic prime
      if (v % 2 == 1) return 3;
      if (v > 0) {
        *exact = false;  // unit part not separable here: sound cap
        return 2;
      }
      cpp_int res = tgdetail::split_residue(k_, id, D, cpp_int(4));
      return res % 4 == 1 ? 0 : 2;
    }
    // ramified dyadic prime (e = 2): wild range, exponent at most 2e + 1
    if (v % 2 == 1) return 5;
    *exact = false;
    return 4;
  }

  void fill_lvalue(const cpp_int& fund, const std::vector<cpp_int>& D,
                   CentralizerBound& out) {
    if (k_.d == 1) {
      if (!out.disc_exact) {
        // conductor below the coarse B: crude rigorous window
        double lq = std::log(out.rel_disc_norm.convert_to<double>() + 4.0);
        out.lvalue = Interval(0.0, lq + 3.0);
        out.lvalue_rigorous = true;
        return;
      }
      auto it = lcache_.find(fund);
      if (it == lcache_.end())
        it = lcache_.emplace(fund, dirichlet_L1_fundamental(fund)).first;
      out.lvalue = it->second;
      out.lvalue_rigorous = true;
      return;
    }
    out.lvalue = euler_lvalue(D);
    out.lvalue_rigorous = false;
  }

  // Truncated Euler product for L(1, chi) of the quadratic extension cut out
  // by sqrt(D) over a quadratic field. Primes where the local factor is not
  // computed (dyadic, ramified in the field, index divisors, divisors of D
  // with even positive valuation) contribute multiplicative slack; the tail
  // is estimated by doubling. Monitored, not rigorous.
  Interval euler_lvalue(const std::vector<cpp_int>& D) {
    constexpr uint32_t kEulerBound = 1500;
    double prod = 1.0, prod_half = 1.0;
    double slack_lo = 1.0, slack_hi = 1.0;
    auto slack = [&](double np) {
      slack_lo *= np / (np + 1.0);
      slack_hi *= np / (np - 1.0);
    };
    auto primes = sieve_.primes_upto(kEulerBound);
    for (uint32_t p : primes) {
      if (p == 2 || k_.index % p == 0) {
        slack(static_cast<double>(p));
        slack(static_cast<double>(p));  // at worst two places of norm p
        continue;
      }
      int chi_k = kronecker(k_.disc_signed, cpp_int(p));
      if (chi_k == 1) {
        for (uint64_t t : poly_roots_mod(p)) {
          cpp_int res = residue_at_root(D, t, p);
          if (res == 0) {
            slack(static_cast<double>(p));
          } else {
            int chi = tgdetail::jacobi_u64(res.convert_to<uint64_t>(), p);
            prod *= 1.0 / (1.0 - static_cast<double>(chi) / p);
          }
        }
      } else if (chi_k == -1) {
        double nq = static_cast<double>(p) * p;
        bool divis = true;
        for (auto& c : D)
          if (c % p != 0) divis = false;
        if (divis) {
          slack(nq);
        } else {
          cpp_int q = cpp_int(p) * p;
          auto pw = tgdetail::powmod_element(k_, D, (q - 1) / 2, cpp_int(p));
          int chi = (pw[0] == 1 && pw[1] == 0) ? 1 : -1;
          prod *= 1.0 / (1.0 - static_cast<double>(chi) / nq);
        }
      } else {
        slack(static_cast<double>(p));  // ramified in the base field
      }
      if (p <= kEulerBound / 2) prod_half = prod;
    }
    double tail_rel = 3.0 * std::abs(prod / prod_half - 1.0) + 0.02;
    double lo = prod * slack_lo / (1.0 + tail_rel);
    double hi = prod * slack_hi * (1.0 + tail_rel);
    return Interval(std::max(lo, 0.0), std::max(hi, lo + 1e-300));
  }

  // residue of an integral element under the embedding sending the power
  // generator to t mod p; denominators are units mod p here
  cpp_int residue_at_root(const std::vector<cpp_int>& coords, uint64_t t,
                          uint32_t p) {
    cpp_int P(p);
    auto pw = k_.to_power(coords);
    cpp_int acc = 0;
    cpp_int tp = ((cpp_int(t) % P) + P) % P;
    cpp_int tpow = 1;
    for (int i = 0; i < k_.d; ++i) {
      cpp_int num = ((numerator(pw[i]) % P) + P) % P;
      cpp_int den = ((denominator(pw[i]) % P) + P) % P;
      if (den != 1) num = (num * inv_mod(den, P)) % P;
      acc = (acc + num * tpow) % P;
      tpow = (tpow * tp) % P;
    }
    return acc;
  }

  // roots of the defining polynomial mod p, cached
  const std::vector<uint64_t>& poly_roots_mod(uint32_t p) {
    auto it = root_cache_.find(p);
    if (it != root_cache_.end()) return it->second;
    std::vector<uint64_t> roots;
    for (uint64_t t = 0; t < p; ++t) {
      cpp_int acc = 0;
      for (std::size_t i = k_.poly.size(); i-- > 0;)
        acc = ((acc * t + k_.poly[i]) % p + p) % p;
      if (acc == 0) roots.push_back(t);
    }
    return root_cache_.emplace(p, std::move(roots)).first->second;
  }

  const std::vector<PrimeIdealData>& split_ideals(const cpp_int& p) {
    auto it = split_cache_.find(p);
    if (it == split_cache_.end())
      it = split_cache_.emplace(p, split_prime(k_, p)).first;
    return it->second;
  }

  NumberFieldSpec k_;
  SpfSieve sieve_;
  std::map<cpp_int, std::vector<PrimeIdealData>> split_cache_;
  std::map<cpp_int, Interval> lcache_;
  std::map<uint32_t, std::vector<uint64_t>> root_cache_;
};

// One-shot centralizer volume bound.
inline CentralizerBound centralizer_volume_upper(const NumberFieldSpec& k,
                                                 const std::vector<cpp_int>& x) {
  CentralizerCalc calc(k);
  return calc.eval(x);
}

// ---------------------------------------------------------------------------
// ledger rows
// ---------------------------------------------------------------------------

struct LedgerRow {
  std::vector<cpp_int> x;  // trace, integral basis coordinates
  cpp_int norm_delta;      // |N(x^2 - 4)|
  int omega = 0;           // prime ideals dividing x^2 - 4
  bool omega_is_bound = false;
  int count_log2 = 0;      // class count exponent: a + |ram| + omega
  cpp_int rel_disc_norm;   // B (see CentralizerBound)
  bool disc_exact = true;
  Interval lvalue;
  bool lvalue_rigorous = true;
  Interval centralizer;    // 2 L sqrt(Delta_k B)
  cpp_int weight;          // level weight w(x), or an upper bound
  bool weight_is_bound = false;
  Interval orbital;        // arch product * C_abs^{d+omega} * w / sqrt(B)
  Interval total;          // 2^{count_log2} * centralizer * orbital,
                           // computed in the B-cancelled form
  // display factorization of e^{sum rho R}: the four brackets
  //   [e^{sum rho R}/sqrt(Delta_k)] [sqrt(Delta_k B)] [1/sqrt|N(delta)|]
  //   [sqrt(|N(delta)|/B)]
  // multiply back to e^{sum rho R}; the rational identity underneath is
  // checked exactly
  Interval tele[4];
  bool telescope_exact = false;
};

// Builds per-trace ledger rows for one setting, holding the centralizer
// caches and the local rings for the level weights across rows. Rows are
// independent of each other; the builder only mutates its caches and the
// sticky fallback flags.
class LedgerBuilder {
 public:
  LedgerBuilder(const QuaternionSetting& s, double c_abs, Interval arch_factor,
                double sum_rhoR)
      : s_(s), c_abs_(c_abs), arch_(arch_factor), sum_rhoR_(sum_rhoR), cc_(s.field) {
    if (!(c_abs >= 4.0))
      throw ConfigError("the absolute orbital constant must be >= 4");
    validate_setting(s_);
    for (auto& lp : s_.level) prepare_level(lp);
  }

  const QuaternionSetting& setting() const { return s_; }

  // level weight of an arbitrary trace (defined for central traces too)
  cpp_int weight_of(const std::vector<cpp_int>& x, bool* is_bound = nullptr) {
    cpp_int w = 1;
    bool bnd = false;
    auto D = tgdetail::delta_coords(s_.field, x);
    for (std::size_t i = 0; i < level_.size(); ++i) {
      bool b = false;
      w *= level_weight(i, x, D, &b);
      bnd = bnd || b;
      if (w == 0) break;
    }
    if (is_bound) *is_bound = bnd;
    return w;
  }

  // Full row for a regular trace. Throws CentralTrace for x = +-2 and for
  // traces that split over the base field (no class in a division algebra).
  LedgerRow row(const std::vector<cpp_int>& x) {
    const auto& k = s_.field;
    LedgerRow out;
    out.x = x;
    CentralizerBound cb = cc_.eval(x);
    out.norm_delta = cb.norm_delta;
    out.omega = cb.omega;
    out.omega_is_bound = cb.omega_is_bound;
    out.rel_disc_norm = cb.rel_disc_norm;
    out.disc_exact = cb.disc_exact;
    out.lvalue = cb.lvalue;
    out.lvalue_rigorous = cb.lvalue_rigorous;
    out.centralizer = cb.bound;
    out.count_log2 = s_.a + static_cast<int>(s_.ram.size()) + out.omega;

    bool wb = false;
    out.weight = weight_of(x, &wb);
    out.weight_is_bound = wb;

    Interval nonarch = pow_int(Interval(c_abs_), k.d + out.omega) *
                       tgdetail::iv_int(out.weight) /
                       sqrt(tgdetail::iv_int(out.rel_disc_norm));
    out.orbital = arch_ * nonarch;

    // B cancels between the centralizer and the orbital bracket: the total
    // is computed in the cancelled form, so coarse B fallbacks cannot move it
    out.total = pow_int(Interval(2.0), out.count_log2) * Interval(2.0) *
                out.lvalue * sqrt(tgdetail::iv_int(k.disc_abs)) * arch_ *
                pow_int(Interval(c_abs_), k.d + out.omega) *
                tgdetail::iv_int(out.weight);
    if (out.total.lo < 0.0) out.total = Interval(0.0, out.total.hi);

    // telescoping display brackets and the exact identity behind them
    Interval er = exp(Interval(sum_rhoR_));
    out.tele[0] = er / sqrt(tgdetail::iv_int(k.disc_abs));
    out.tele[1] = sqrt(tgdetail::iv_int(k.disc_abs * out.rel_disc_norm));
    out.tele[2] = Interval(1.0) / sqrt(tgdetail::iv_int(out.norm_delta));
    out.tele[3] =
        sqrt(tgdetail::iv_int(out.norm_delta) / tgdetail::iv_int(out.rel_disc_norm));
    cpp_rational ident = cpp_rational(1, k.disc_abs) *
                         cpp_rational(k.disc_abs * out.rel_disc_norm) *
                         cpp_rational(1, out.norm_delta) *
                         cpp_rational(out.norm_delta, out.rel_disc_norm);
    out.telescope_exact = (ident == 1);

    any_coarse_disc_ = any_coarse_disc_ || !out.disc_exact;
    any_lvalue_nonrigorous_ = any_lvalue_nonrigorous_ || !out.lvalue_rigorous;
    any_omega_bound_ = any_omega_bound_ || out.omega_is_bound;
    any_weight_bound_ = any_weight_bound_ || out.weight_is_bound;
    return out;
  }

  bool any_coarse_disc() const { return any_coarse_disc_; }
  bool any_lvalue_nonrigorous() const { return any_lvalue_nonrigorous_; }
  bool any_omega_bound() const { return any_omega_bound_; }
  bool any_weight_bound() const { return any_weight_bound_; }

 private:
  struct LevelRec {
    LevelPrime lp;
    enum class Kind { Rational, SplitQuad, InertQuad, RamifiedQuad } kind;
    std::optional<LocalRing> ring;       // Rational and SplitQuad
    std::optional<SquareClassifier> sc;  // Rational and SplitQuad
    cpp_int pM;                          // modulus of the residue map
    std::vector<cpp_int> basis_vals;     // SplitQuad: basis images mod pM
  };

  void prepare_level(const LevelPrime& lp) {
    const auto& k = s_.field;
    LevelRec rec;
    rec.lp = lp;
    uint64_t p = lp.ideal.p.convert_to<uint64_t>();
    int vp4 = p == 2 ? 2 : 0;
    int m = 2 * lp.r + 2 * vp4 + 2;
    if (k.d == 1 || (lp.ideal.e == 1 && lp.ideal.f == 1)) {
      rec.kind = k.d == 1 ? LevelRec::Kind::Rational : LevelRec::Kind::SplitQuad;
      uint64_t q = lp.ideal.q.convert_to<uint64_t>();
      rec.ring.emplace(q, p, m);
      rec.sc.emplace(q, p);
      rec.pM = pow_cpp(lp.ideal.p, static_cast<unsigned>(m));
      if (rec.kind == LevelRec::Kind::SplitQuad) {
        if (!lp.ideal.gen_valid || lp.ideal.gen.size() != 2)
          throw IndexDivisorUnsupported(
              "level weight at a split prime needs generator data");
        cpp_int t0 = ((-lp.ideal.gen[0]) % lp.ideal.p + lp.ideal.p) % lp.ideal.p;
        cpp_int root = tgdetail::lift_poly_root(k.poly, lp.ideal.p, t0, rec.pM);
        rec.basis_vals = tgdetail::basis_values_mod(k, root, rec.pM);
      }
    } else if (lp.ideal.e == 1) {
      rec.kind = LevelRec::Kind::InertQuad;
    } else {
      rec.kind = LevelRec::Kind::RamifiedQuad;
    }
    level_.push_back(std::move(rec));
  }

  // local weight at level entry i; sets *is_bound when only an upper bound
  // is available (undecidable square class at a ramified dyadic prime)
  cpp_int level_weight(std::size_t i, const std::vector<cpp_int>& x,
                       const std::vector<cpp_int>& D, bool* is_bound) {
    const auto& k = s_.field;
    auto& rec = level_[i];
    const auto& pd = rec.lp.ideal;
    int r = rec.lp.r, j = rec.lp.kappa;
    *is_bound = false;
    switch (rec.kind) {
      case LevelRec::Kind::Rational:
        return weight_w_residue(*rec.ring, *rec.sc, rec.ring->from_int(x[0]), r,
                                j);
      case LevelRec::Kind::SplitQuad: {
        cpp_int res = 0;
        for (int t = 0; t < k.d; ++t)
          res = (res + ((x[t] % rec.pM + rec.pM) % rec.pM) * rec.basis_vals[t]) %
                rec.pM;
        return weight_w_residue(*rec.ring, *rec.sc, rec.ring->from_int(res), r,
                                j);
      }
      case LevelRec::Kind::InertQuad: {
        int v = tgdetail::is_zero(D) ? INT32_MAX : val_at_prime(k, pd, D);
        if (j == 1)
          return v >= 2 * r ? pow_cpp(pd.q, static_cast<unsigned>(2 * r))
                            : cpp_int(0);
        if (v >= r) return pow_cpp(pd.q, static_cast<unsigned>(r / 2));
        if (v % 2 == 1) return 0;
        std::vector<cpp_int> u(k.d);
        cpp_int pv = pow_cpp(pd.p, static_cast<unsigned>(v));
        for (int t = 0; t < k.d; ++t) u[t] = D[t] / pv;
        bool sq;
        if (pd.p == 2) {
          sq = tgdetail::quad_square_mod(k, u, 8);  // dyadic unit squares
        } else {
          auto pw = tgdetail::powmod_element(k, u, (pd.q - 1) / 2, pd.p);
          sq = pw[0] == 1 && pw[1] == 0;
        }
        return sq ? pow_cpp(pd.q, static_cast<unsigned>(v / 2)) : cpp_int(0);
      }
      case LevelRec::Kind::RamifiedQuad: {
        int v = tgdetail::is_zero(D) ? INT32_MAX : val_at_prime(k, pd, D);
        if (j == 1)
          return v >= 2 * r ? pow_cpp(pd.q, static_cast<unsigned>(2 * r))
                            : cpp_int(0);
        if (v >= r) return pow_cpp(pd.q, static_cast<unsigned>(r / 2));
        if (v % 2 == 1) return 0;
        // square class undecided here: sound upper bound, flagged
        *is_bound = true;
        return pow_cpp(pd.q, static_cast<unsigned>(v / 2));
      }
    }
    throw ComputationError("unreachable level kind");
  }

  QuaternionSetting s_;
  double c_abs_;
  Interval arch_;
  double sum_rhoR_;
  CentralizerCalc cc_;
  std::vector<LevelRec> level_;
  bool any_coarse_disc_ = false;
  bool any_lvalue_nonrigorous_ = false;
  bool any_omega_bound_ = false;
  bool any_weight_bound_ = false;
};

// ---------------------------------------------------------------------------
// test functions attached to a window
// ---------------------------------------------------------------------------

// Exceptional slots get the long-support transform with parameter R_j (zero
// for slots other than the savings slot); tempered slots get the centered
// tempered transform at T_j.
inline std::vector<TestFn> window_test_functions(const QuaternionSetting& s,
                                                 const SpectralWindow& w,
                                                 const RAssignment& ra) {
  validate_window(s, w);
  if (ra.R.size() != w.places.size())
    throw WindowMismatch("savings assignment size differs from the window");
  std::vector<TestFn> out;
  for (int j = 0; j < static_cast<int>(w.places.size()); ++j) {
    ArchPlace place = j < s.a ? real_place() : complex_place();
    const auto& wp = w.places[j];
    out.push_back(wp.exceptional
                      ? build_testfn(place, TestVariant::Nontempered, ra.R[j])
                      : build_testfn(place, TestVariant::Tempered, wp.T));
  }
  return out;
}

// Product over split places of the measured archimedean row factors: at each
// place the smaller of pi * sup|H| and (rho/2) * integral |transform| bounds
// the normalized orbital term of every regular class (split classes through
// the height profile directly, elliptic ones through the angular average).
// Ramified real places contribute a factor 2 each.
struct ArchRowFactor {
  std::vector<double> per_place;
  Interval total;
};

inline ArchRowFactor arch_row_factor(const QuaternionSetting& s,
                                     const std::vector<TestFn>& tfs) {
  if (static_cast<int>(tfs.size()) != s.a + s.b)
    throw WindowMismatch("one test function per split place is required");
  ArchRowFactor out;
  out.total = Interval(std::ldexp(1.0, s.c));
  for (int j = 0; j < static_cast<int>(tfs.size()); ++j) {
    const auto& tf = tfs[j];
    bool want_real = j < s.a;
    if ((tf.place().kind == ArchKind::Real) != want_real)
      throw ConfigError("test function kind does not match its slot");
    double rho = want_real ? 1.0 : 2.0;
    double f = std::min(pi_interval().hi * tf.sup_hc(),
                        0.5 * rho * tf.integral_abs_transform());
    out.per_place.push_back(f);
    out.total = out.total * tgdetail::iv_meas(f);
  }
  return out;
}

// One-shot row bound for a single trace.
inline LedgerRow per_class_bound(const QuaternionSetting& s,
                                 const std::vector<cpp_int>& x, double c_abs,
                                 const std::vector<TestFn>& tfs,
                                 double sum_rhoR = 0.0) {
  auto arch = arch_row_factor(s, tfs);
  LedgerBuilder b(s, c_abs, arch.total, sum_rhoR);
  return b.row(x);
}

// ---------------------------------------------------------------------------
// spectral floor of a window
// ---------------------------------------------------------------------------

// Minimum of the transform product over the window box, by grid evaluation
// with endpoints included. Exceptional slots scan sigma in [sigma_j, 1/2] on
// the real axis; tempered slots scan tau in [T_j - 1, T_j + 1]. The result
// must come out positive: the transforms are nonnegative on the tempered
// axis and increasing along the real axis by construction.
inline double window_spectral_floor(const QuaternionSetting& s,
                                    const SpectralWindow& w,
                                    const std::vector<TestFn>& tfs) {
  validate_window(s, w);
  if (tfs.size() != w.places.size())
    throw WindowMismatch("one test function per window slot is required");
  double prod = 1.0;
  for (std::size_t j = 0; j < tfs.size(); ++j) {
    const auto& wp = w.places[j];
    const auto& tf = tfs[j];
    double mn = std::numeric_limits<double>::infinity();
    const int n = 64;
    for (int i = 0; i <= n; ++i) {
      double v;
      if (wp.exceptional) {
        double sig = wp.sigma + (0.5 - wp.sigma) * i / n;
        v = tf.transform(std::complex<double>(sig, 0.0)).real();
      } else {
        double tau = (wp.T - 1.0) + 2.0 * i / n;
        v = tf.transform_imag(tau);
      }
      mn = std::min(mn, v);
    }
    if (!(mn > 0.0))
      throw ComputationError("window floor of the transform is not positive");
    prod *= mn;
  }
  return prod;
}

// ---------------------------------------------------------------------------
// the end-to-end report
// ---------------------------------------------------------------------------

struct GeometricBoundReport {
  ConductorInfo cond;
  RAssignment R;
  Polycylinder region;
  std::vector<LedgerRow> rows;
  Interval central;   // identity and minus-identity term
  Interval regular;   // sum of the row totals
  Interval total;     // central + regular
  double spectral_floor = 0.0;  // min of the transform product on the window
  Interval exp_factor;          // e^{- sum_j 2 rho_j R_j sigma_j}
  Interval floor_normalized;    // spectral_floor * exp_factor
  Interval final_bound;         // total / spectral_floor
  Interval savings_form;        // exp_factor * total
  double final_over_ref = 0.0;  // final_bound.hi / C^{2/p}.lo
  double c_abs = 4.0;
  bool weyl_regime = false;     // no exceptional slot in the window
  bool any_coarse_disc = false;
  bool any_lvalue_nonrigorous = false;
  bool any_omega_bound = false;
  bool any_weight_bound = false;
  long skipped_central = 0;  // enumerated traces excluded as central
  long skipped_split = 0;    // enumerated traces excluded as split over k
};

inline GeometricBoundReport geometric_and_multiplicity_bound(
    const QuaternionSetting& s, const SpectralWindow& w, double c_abs = 4.0,
    uint64_t zeta_prime_bound = 100000, long enumeration_budget = 1 << 22) {
  GeometricBoundReport rep;
  rep.c_abs = c_abs;
  rep.cond = conductor_and_exponent(s, w, zeta_prime_bound);
  rep.R = choose_R(s, w, rep.cond);
  rep.region = trace_region(s, rep.R);
  rep.weyl_regime = rep.R.slot < 0;

  auto tfs = window_test_functions(s, w, rep.R);
  auto arch = arch_row_factor(s, tfs);

  // central term: both central elements sit at height zero of every place
  Interval fid(1.0);
  for (auto& tf : tfs) fid = fid * tgdetail::iv_meas(tf.pointwise(0.0));
  rep.central = rep.cond.vol * Interval(2.0) * fid;

  LedgerBuilder builder(s, c_abs, arch.total, rep.R.sum_rhoR);
  auto traces = enumerate_polycylinder(s.field, rep.region, nullptr, nullptr,
                                       enumeration_budget);
  rep.regular = Interval(0.0);
  for (auto& x : traces) {
    auto D = tgdetail::delta_coords(s.field, x);
    if (tgdetail::is_zero(D)) {
      ++rep.skipped_central;
      continue;
    }
    if (is_square_in_field(s.field, D)) {
      ++rep.skipped_split;
      continue;
    }
    rep.rows.push_back(builder.row(x));
    rep.regular = rep.regular + rep.rows.back().total;
  }
  if (rep.regular.lo < 0.0) rep.regular = Interval(0.0, rep.regular.hi);
  rep.total = rep.central + rep.regular;

  rep.spectral_floor = window_spectral_floor(s, w, tfs);
  double ssum = 0.0;
  for (int j = 0; j < static_cast<int>(w.places.size()); ++j)
    if (w.places[j].exceptional)
      ssum += 2.0 * window_rho(s, j) * rep.R.R[j] * w.places[j].sigma;
  rep.exp_factor = exp(Interval(-ssum));
  rep.floor_normalized = tgdetail::iv_meas(rep.spectral_floor) * rep.exp_factor;
  rep.final_bound = rep.total / tgdetail::iv_meas(rep.spectral_floor);
  rep.savings_form = rep.exp_factor * rep.total;
  rep.final_over_ref = rep.final_bound.hi / rep.cond.ref_power.lo;

  rep.any_coarse_disc = builder.any_coarse_disc();
  rep.any_lvalue_nonrigorous = builder.any_lvalue_nonrigorous();
  rep.any_omega_bound = builder.any_omega_bound();
  rep.any_weight_bound = builder.any_weight_bound();
  return rep;
}

// ---------------------------------------------------------------------------
// weight sums over a region and cylinder counting
// ---------------------------------------------------------------------------

struct WeightSumReport {
  cpp_int sum_w;   // exact sum of the level weights over o in the region
  long count = 0;  // lattice points visited
  cpp_rational integral;      // product of the exact local weight integrals
  cpp_rational integral_cap;  // 2^{#level primes} * 8^{degree}
  Interval rhs;               // C * integral / sqrt(Delta_k)
  double ratio = 0.0;         // sum_w / rhs.lo (measured)
};

inline WeightSumReport weight_sum_over_region(const QuaternionSetting& s,
                                              const Polycylinder& region,
                                              const Interval& C,
                                              long enumeration_budget = 1
                                                                        << 22) {
  validate_setting(s);
  WeightSumReport out;
  LedgerBuilder builder(s, 4.0, Interval(1.0), 0.0);
  auto traces = enumerate_polycylinder(s.field, region, nullptr, nullptr,
                                       enumeration_budget);
  out.sum_w = 0;
  for (auto& x : traces) {
    out.sum_w += builder.weight_of(x);
    ++out.count;
  }
  out.integral = 1;
  for (auto& lp : s.level) {
    uint64_t q = lp.ideal.q.convert_to<uint64_t>();
    uint64_t p = lp.ideal.p.convert_to<uint64_t>();
    out.integral *= weight_local_integral(q, p, lp.r, lp.kappa);
  }
  out.integral_cap =
      cpp_rational(pow_cpp(cpp_int(2), static_cast<unsigned>(s.level.size())) *
                   pow_cpp(cpp_int(8), static_cast<unsigned>(s.field.d)));
  out.rhs = C * tgdetail::iv_rat(out.integral) /
            sqrt(tgdetail::iv_int(s.field.disc_abs));
  out.ratio = out.sum_w.convert_to<double>() / out.rhs.lo;
  return out;
}

// Reference scale for the lattice point count of a coset of a sublattice of
// norm N(m) inside a polycylinder: sqrt(Delta_k) + vol / (sqrt(Delta_k) N(m)).
// The true count is at most an absolute constant times this.
inline Interval cylinder_count_bound(const NumberFieldSpec& k,
                                     const cpp_int& norm_m,
                                     const Polycylinder& P) {
  if (norm_m < 1) throw ConfigError("modulus norm must be positive");
  Interval sd = sqrt(tgdetail::iv_int(k.disc_abs));
  return sd + P.volume(k) / (sd * tgdetail::iv_int(norm_m));
}

}  // namespace tracegeom
