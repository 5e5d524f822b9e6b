// Exact arithmetic for number fields of degree <= 4: parsing and validation,
// discriminants, prime splitting, Dedekind zeta enclosures at s=2, Minkowski
// embeddings, and exact lattice-point enumeration in polycylinders.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "tracegeom/errors.hpp"
#include "tracegeom/interval.hpp"
#include "tracegeom/modp_poly.hpp"
#include "tracegeom/primes.hpp"

namespace tracegeom {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;
using MpFloat = boost::multiprecision::cpp_bin_float_100;

// ---------------------------------------------------------------------------
// small exact linear algebra
// ---------------------------------------------------------------------------
namespace nfdetail {

inline cpp_int det_bareiss(std::vector<std::vector<cpp_int>> m) {
  const std::size_t n = m.size();
  if (n == 0) return 1;
  cpp_int prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (m[k][k] == 0) {
      std::size_t piv = k + 1;
      while (piv < n && m[piv][k] == 0) ++piv;
      if (piv == n) return 0;
      std::swap(m[k], m[piv]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j) {
        cpp_int num = m[i][j] * m[k][k] - m[i][k] * m[k][j];
        m[i][j] = num / prev;  // exact by Bareiss
      }
    prev = m[k][k];
  }
  return sign > 0 ? m[n - 1][n - 1] : -m[n - 1][n - 1];
}

using RatMat = std::vector<std::vector<cpp_rational>>;

inline std::optional<RatMat> rat_inverse(RatMat a) {
  const std::size_t n = a.size();
  RatMat inv(n, std::vector<cpp_rational>(n, 0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && a[piv][col] == 0) ++piv;
    if (piv == n) return std::nullopt;
    std::swap(a[col], a[piv]);
    std::swap(inv[col], inv[piv]);
    cpp_rational d = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == col || a[i][col] == 0) continue;
      cpp_rational f = a[i][col];
      for (std::size_t j = 0; j < n; ++j) {
        a[i][j] -= f * a[col][j];
        inv[i][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

inline cpp_rational rat_det(RatMat a) {
  const std::size_t n = a.size();
  cpp_rational det = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && a[piv][col] == 0) ++piv;
    if (piv == n) return 0;
    if (piv != col) {
      std::swap(a[col], a[piv]);
      det = -det;
    }
    det *= a[col][col];
    cpp_rational d = a[col][col];
    for (std::size_t i = col + 1; i < n; ++i) {
      if (a[i][col] == 0) continue;
      cpp_rational f = a[i][col] / d;
      for (std::size_t j = col; j < n; ++j) a[i][j] -= f * a[col][j];
    }
  }
  return det;
}

// discriminant of a monic integer polynomial via the Sylvester resultant
inline cpp_int poly_discriminant(const std::vector<cpp_int>& f) {
  const int n = static_cast<int>(f.size()) - 1;
  if (n <= 1) return 1;
  std::vector<cpp_int> fp(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) fp[static_cast<std::size_t>(i - 1)] = f[static_cast<std::size_t>(i)] * i;
  const int m = n - 1;
  const int size = n + m;
  std::vector<std::vector<cpp_int>> syl(static_cast<std::size_t>(size),
                                        std::vector<cpp_int>(static_cast<std::size_t>(size), 0));
  // m rows of f, n rows of f', coefficients high-to-low
  for (int r = 0; r < m; ++r)
    for (int i = 0; i <= n; ++i)
      syl[static_cast<std::size_t>(r)][static_cast<std::size_t>(r + i)] = f[static_cast<std::size_t>(n - i)];
  for (int r = 0; r < n; ++r)
    for (int i = 0; i <= m; ++i)
      syl[static_cast<std::size_t>(m + r)][static_cast<std::size_t>(r + i)] = fp[static_cast<std::size_t>(m - i)];
  cpp_int res = det_bareiss(std::move(syl));
  int quarter = (n * (n - 1)) / 2;
  return (quarter % 2 == 0) ? res : -res;
}

inline std::vector<cpp_int> divisors_bounded(const cpp_int& n_abs) {
  std::vector<cpp_int> ds;
  if (n_abs == 0) return ds;
  cpp_int i = 1;
  std::size_t guard = 0;
  while (i * i <= n_abs) {
    if (n_abs % i == 0) {
      ds.push_back(i);
      if (i * i != n_abs) ds.push_back(n_abs / i);
    }
    ++i;
    if (++guard > 20'000'000)
      throw OverflowGuard("divisor enumeration exceeded budget");
  }
  std::sort(ds.begin(), ds.end());
  return ds;
}

inline cpp_int eval_int_poly(const std::vector<cpp_int>& f, const cpp_int& x) {
  cpp_int acc = 0;
  for (std::size_t i = f.size(); i-- > 0;) acc = acc * x + f[i];
  return acc;
}

// irreducibility over Q for monic integer polynomials of degree 1..4
inline bool is_irreducible(const std::vector<cpp_int>& f) {
  const int n = static_cast<int>(f.size()) - 1;
  if (n == 1) return true;
  if (f[0] == 0) return false;  // x divides
  cpp_int c0 = abs(f[0]);
  for (const cpp_int& d : divisors_bounded(c0)) {
    if (eval_int_poly(f, d) == 0 || eval_int_poly(f, -d) == 0) return false;
  }
  if (n <= 3) return true;
  // quartic: test integer factorizations (x^2+ax+b)(x^2+cx+dd)
  const cpp_int c3 = f[3], c2 = f[2], c1 = f[1];
  for (const cpp_int& babs : divisors_bounded(c0)) {
    for (int sb = -1; sb <= 1; sb += 2) {
      cpp_int b = sb * babs;
      if (b == 0 || f[0] % b != 0) continue;
      cpp_int dd = f[0] / b;
      // a + c = c3, a*c = c2 - b - dd, then check c1 = a*dd + b*c
      cpp_int s = c3, prod = c2 - b - dd;
      cpp_int disc = s * s - 4 * prod;
      if (disc < 0) continue;
      cpp_int r = sqrt(disc);
      if (r * r != disc) continue;
      for (int sr = -1; sr <= 1; sr += 2) {
        cpp_int twice_a = s + sr * r;
        if (twice_a % 2 != 0) continue;
        cpp_int a = twice_a / 2, c = s - a;
        if (a * dd + b * c == c1) return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// high-precision complex arithmetic and root finding
// ---------------------------------------------------------------------------
struct MpComplex {
  MpFloat re, im;
  MpComplex(MpFloat r = 0, MpFloat i = 0) : re(std::move(r)), im(std::move(i)) {}
  MpComplex operator+(const MpComplex& o) const { return {re + o.re, im + o.im}; }
  MpComplex operator-(const MpComplex& o) const { return {re - o.re, im - o.im}; }
  MpComplex operator*(const MpComplex& o) const {
    return {re * o.re - im * o.im, re * o.im + im * o.re};
  }
  MpComplex operator/(const MpComplex& o) const {
    MpFloat den = o.re * o.re + o.im * o.im;
    return {(re * o.re + im * o.im) / den, (im * o.re - re * o.im) / den};
  }
  MpFloat abs2() const { return re * re + im * im; }
};

inline std::vector<MpComplex> roots_durand_kerner(const std::vector<cpp_int>& f) {
  const int n = static_cast<int>(f.size()) - 1;
  std::vector<MpFloat> c(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) c[i] = MpFloat(f[i]);
  auto eval = [&](const MpComplex& z) {
    MpComplex acc(0, 0);
    for (std::size_t i = f.size(); i-- > 0;) acc = acc * z + MpComplex(c[i], 0);
    return acc;
  };
  std::vector<MpComplex> z(static_cast<std::size_t>(n));
  MpComplex seed(MpFloat("0.4"), MpFloat("0.9"));
  MpComplex cur = seed;
  for (int i = 0; i < n; ++i) {
    z[static_cast<std::size_t>(i)] = cur;
    cur = cur * seed;
  }
  const MpFloat eps("1e-90");
  for (int iter = 0; iter < 600; ++iter) {
    MpFloat worst = 0;
    for (int i = 0; i < n; ++i) {
      MpComplex num = eval(z[static_cast<std::size_t>(i)]);
      MpComplex den(1, 0);
      for (int j = 0; j < n; ++j)
        if (j != i) den = den * (z[static_cast<std::size_t>(i)] - z[static_cast<std::size_t>(j)]);
      MpComplex delta = num / den;
      z[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)] - delta;
      MpFloat d2 = delta.abs2();
      if (d2 > worst) worst = d2;
    }
    if (worst < eps * eps) break;
  }
  return z;
}

}  // namespace nfdetail

// ---------------------------------------------------------------------------
// public types
// ---------------------------------------------------------------------------

struct PrimeIdealData {
  cpp_int p;
  int e = 1;
  int f = 1;
  cpp_int q;                   // N(p-ideal) = p^f
  std::vector<cpp_int> gen;    // monic factor of the defining poly mod p
                               // (coefficients lifted to 0..p-1); empty for
                               // the full ring or when p divides the index
  bool gen_valid = true;
};

struct ArchPlaceInfo {
  bool is_real = true;
  int rho = 1;  // 1 real, 2 complex
  MpFloat root_re, root_im;             // im > 0 for the complex representative
  std::vector<Interval> emb_re;         // per basis element
  std::vector<Interval> emb_im;
  std::vector<MpFloat> emb_re_hi;       // 100-digit copies for tight boxes
  std::vector<MpFloat> emb_im_hi;
};

struct NumberFieldSpec {
  int d = 1;
  std::vector<cpp_int> poly;                       // monic, degree d
  std::vector<std::vector<cpp_rational>> basis;    // rows: basis in power coords
  std::vector<std::vector<cpp_rational>> pow2basis;  // inverse transform
  std::vector<std::vector<std::vector<cpp_int>>> mult;  // mult[i][j] = coords of b_i*b_j
  cpp_int disc_signed = 1;   // field discriminant with sign
  cpp_int disc_abs = 1;      // stored positive
  cpp_int poly_disc = 1;     // signed discriminant of the defining polynomial
  cpp_int index = 1;         // [O : Z[alpha]] for the supplied basis
  int r1 = 1, r2 = 0;
  std::vector<ArchPlaceInfo> places;

  int num_places() const { return r1 + r2; }

  bool compatible_signature(int a, int b, int c) const {
    return a >= 0 && b >= 0 && c >= 0 && a + c == r1 && b == r2 &&
           d == a + 2 * b + c;
  }

  // coords -> power-basis coordinates (exact)
  std::vector<cpp_rational> to_power(const std::vector<cpp_int>& coords) const {
    std::vector<cpp_rational> p(static_cast<std::size_t>(d), 0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        p[static_cast<std::size_t>(j)] +=
            cpp_rational(coords[static_cast<std::size_t>(i)]) *
            basis[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return p;
  }

  std::vector<cpp_rational> from_power(const std::vector<cpp_rational>& pw) const {
    std::vector<cpp_rational> c(static_cast<std::size_t>(d), 0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        c[static_cast<std::size_t>(i)] +=
            pow2basis[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
            pw[static_cast<std::size_t>(j)];
    return c;
  }

  std::vector<cpp_int> mul(const std::vector<cpp_int>& a,
                           const std::vector<cpp_int>& b) const {
    std::vector<cpp_int> out(static_cast<std::size_t>(d), 0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (a[static_cast<std::size_t>(i)] == 0 || b[static_cast<std::size_t>(j)] == 0) continue;
        const auto& t = mult[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        cpp_int f = a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
        for (int k = 0; k < d; ++k) out[static_cast<std::size_t>(k)] += f * t[static_cast<std::size_t>(k)];
      }
    return out;
  }

  cpp_rational norm(const std::vector<cpp_int>& coords) const {
    // determinant of multiplication-by-x on the basis
    nfdetail::RatMat m(static_cast<std::size_t>(d),
                       std::vector<cpp_rational>(static_cast<std::size_t>(d), 0));
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        if (coords[static_cast<std::size_t>(i)] == 0) continue;
        const auto& t = mult[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        for (int k = 0; k < d; ++k)
          m[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] +=
              cpp_rational(coords[static_cast<std::size_t>(i)]) * t[static_cast<std::size_t>(k)];
      }
    return nfdetail::rat_det(std::move(m));
  }

  cpp_rational trace(const std::vector<cpp_int>& coords) const {
    cpp_rational tr = 0;
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        if (coords[static_cast<std::size_t>(i)] == 0) continue;
        tr += cpp_rational(coords[static_cast<std::size_t>(i)]) *
              mult[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][static_cast<std::size_t>(j)];
      }
    return tr;
  }

  // Minkowski covolume of O (sqrt(2)-scaled complex rows); approx sqrt(disc)
  double covolume() const {
    const MpFloat sqrt2 = sqrt(MpFloat(2));
    std::vector<std::vector<MpFloat>> m;
    for (const auto& pl : places) {
      if (pl.is_real) {
        std::vector<MpFloat> row;
        for (int i = 0; i < d; ++i) row.push_back(pl.emb_re_hi[static_cast<std::size_t>(i)]);
        m.push_back(std::move(row));
      } else {
        std::vector<MpFloat> row1, row2;
        for (int i = 0; i < d; ++i) {
          row1.push_back(sqrt2 * pl.emb_re_hi[static_cast<std::size_t>(i)]);
          row2.push_back(sqrt2 * pl.emb_im_hi[static_cast<std::size_t>(i)]);
        }
        m.push_back(std::move(row1));
        m.push_back(std::move(row2));
      }
    }
    // Gaussian elimination determinant in MpFloat
    MpFloat det = 1;
    const std::size_t n = m.size();
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      for (std::size_t i = col + 1; i < n; ++i)
        if (abs(m[i][col]) > abs(m[piv][col])) piv = i;
      if (piv != col) { std::swap(m[col], m[piv]); det = -det; }
      det *= m[col][col];
      for (std::size_t i = col + 1; i < n; ++i) {
        MpFloat f = m[i][col] / m[col][col];
        for (std::size_t j = col; j < n; ++j) m[i][j] -= f * m[col][j];
      }
    }
    return abs(det).convert_to<double>();
  }
};

// Per-place radii in the module normalization: a real place bounds |x|, a
// complex place bounds |x|^2.
struct Polycylinder {
  std::vector<double> radius;

  Interval volume(const NumberFieldSpec& k) const {
    if (static_cast<int>(radius.size()) != k.num_places())
      throw InvalidSetting("polycylinder place count mismatch");
    Interval v(1.0, 1.0);
    for (int i = 0; i < k.num_places(); ++i) {
      double P = radius[static_cast<std::size_t>(i)];
      if (!(P > 0)) throw InvalidSetting("polycylinder radius must be positive");
      if (k.places[static_cast<std::size_t>(i)].is_real)
        v = v * (Interval(2.0, 2.0) * Interval(P, P));
      else
        v = v * (pi_interval() * Interval(P, P));
    }
    return v;
  }
};

// Finite-index sublattice of O, d <= 2, in Hermite form: columns
// (a, 0) and (c, dd) in basis coordinates; for d = 1 only `a` is used.
struct SubLattice {
  cpp_int a = 1, c = 0, dd = 1;

  cpp_int index_in_ring(int d) const { return d == 1 ? a : a * dd; }

  bool contains(const std::vector<cpp_int>& coords) const {
    if (coords.size() == 1) return coords[0] % a == 0;
    if (coords[1] % dd != 0) return false;
    cpp_int n2 = coords[1] / dd;
    return (coords[0] - n2 * c) % a == 0;
  }
};

// ---------------------------------------------------------------------------
// parse_field
// ---------------------------------------------------------------------------

namespace nfdetail {

// fundamental discriminant status for quadratic fields
inline bool is_fundamental_disc(const cpp_int& D, SpfSieve& sieve) {
  if (D == 1 || D == 0) return false;
  cpp_int m = D;
  if (((m % 4) + 4) % 4 == 1) {
    // need squarefree
    auto pf = factor_partial(abs(m), sieve);
    if (!pf.complete()) throw OverflowGuard("discriminant too large to certify squarefree");
    for (auto& [p, e] : pf.factors)
      if (e > 1) return false;
    return true;
  }
  if (m % 4 != 0) return false;
  cpp_int k = m / 4;
  cpp_int km = ((k % 4) + 4) % 4;
  if (km != 2 && km != 3) return false;
  auto pf = factor_partial(abs(k), sieve);
  if (!pf.complete()) throw OverflowGuard("discriminant too large to certify squarefree");
  for (auto& [p, e] : pf.factors)
    if (e > 1) return false;
  return true;
}

inline bool is_squarefree_or_unknown(const cpp_int& n, SpfSieve& sieve, bool& known) {
  auto pf = factor_partial(abs(n), sieve);
  known = pf.complete();
  for (auto& [p, e] : pf.factors)
    if (e > 1) return false;
  return known;  // only claim squarefree when fully factored
}

}  // namespace nfdetail

inline NumberFieldSpec parse_field(
    const std::vector<cpp_int>& poly,
    const std::optional<std::vector<std::vector<cpp_rational>>>& basis_opt = std::nullopt,
    const std::optional<cpp_int>& claimed_disc = std::nullopt) {
  NumberFieldSpec k;
  if (poly.size() < 2 || poly.size() > 5)
    throw UnsupportedDegree("defining polynomial must have degree 1..4");
  if (poly.back() != 1) throw ConfigError("defining polynomial must be monic");
  k.d = static_cast<int>(poly.size()) - 1;
  k.poly = poly;
  if (!nfdetail::is_irreducible(poly))
    throw ReduciblePolynomial("defining polynomial factors over the rationals");
  k.poly_disc = nfdetail::poly_discriminant(poly);
  if (k.poly_disc == 0) throw ReduciblePolynomial("zero discriminant");

  const std::size_t du = static_cast<std::size_t>(k.d);
  if (basis_opt) {
    k.basis = *basis_opt;
    if (k.basis.size() != du)
      throw ConfigError("basis must have d rows");
    for (auto& row : k.basis)
      if (row.size() != du) throw ConfigError("basis rows must have d entries");
  } else {
    k.basis.assign(du, std::vector<cpp_rational>(du, 0));
    for (std::size_t i = 0; i < du; ++i) k.basis[i][i] = 1;
  }

  auto inv = nfdetail::rat_inverse(k.basis);
  if (!inv) throw ConfigError("basis matrix is singular");
  // pow2basis maps power coords -> basis coords: transpose-free convention
  // coords = pow2basis * pw where pw_j = sum_i coords_i basis[i][j];
  // so pow2basis = (basis^T)^{-1}; compute via transpose.
  {
    nfdetail::RatMat bt(du, std::vector<cpp_rational>(du));
    for (std::size_t i = 0; i < du; ++i)
      for (std::size_t j = 0; j < du; ++j) bt[i][j] = k.basis[j][i];
    auto bti = nfdetail::rat_inverse(bt);
    if (!bti) throw ConfigError("basis matrix is singular");
    k.pow2basis = *bti;
  }

  // field discriminant = det(basis)^2 * poly_disc
  cpp_rational detb = nfdetail::rat_det(k.basis);
  cpp_rational fd = detb * detb * cpp_rational(k.poly_disc);
  if (denominator(fd) != 1)
    throw BasisNotARing("basis discriminant is not an integer");
  k.disc_signed = numerator(fd);
  k.disc_abs = abs(k.disc_signed);
  // index of Z[alpha] in the basis lattice: 1/|det(basis)| must be integral
  cpp_rational idx = 1 / abs(detb);
  if (denominator(idx) != 1)
    throw BasisNotARing("basis does not contain the power basis with integer index");
  k.index = numerator(idx);

  if (claimed_disc && *claimed_disc != k.disc_abs && *claimed_disc != k.disc_signed)
    throw DiscriminantMismatch("claimed discriminant does not match the basis discriminant");

  // maximality policy when no basis is supplied
  if (!basis_opt && k.d >= 2) {
    static thread_local SpfSieve sieve(1'000'000);
    bool certified = false;
    if (k.d == 2) {
      certified = nfdetail::is_fundamental_disc(k.disc_signed, sieve);
    } else {
      bool known = false;
      certified = nfdetail::is_squarefree_or_unknown(k.disc_signed, sieve, known);
    }
    if (!certified && !claimed_disc)
      throw DiscriminantMismatch(
          "cannot certify the power basis maximal; supply disc or basis");
  }

  // multiplication table and ring-closure validation
  {
    // power-basis products alpha^i * alpha^j reduced mod poly
    // precompute alpha^m for m = 0..2d-2 in power coords
    std::vector<std::vector<cpp_rational>> alpha_pow(2 * du - 1,
                                                     std::vector<cpp_rational>(du, 0));
    alpha_pow[0][0] = 1;
    for (std::size_t m = 1; m < 2 * du - 1; ++m) {
      // multiply previous by alpha
      std::vector<cpp_rational> prev = alpha_pow[m - 1];
      std::vector<cpp_rational> cur(du, 0);
      cpp_rational carry = prev[du - 1];
      for (std::size_t j = du; j-- > 1;) cur[j] = prev[j - 1];
      cur[0] = 0;
      if (carry != 0)
        for (std::size_t j = 0; j < du; ++j)
          cur[j] -= carry * cpp_rational(poly[j]);
      alpha_pow[m] = std::move(cur);
    }
    k.mult.assign(du, std::vector<std::vector<cpp_int>>(du));
    for (std::size_t i = 0; i < du; ++i)
      for (std::size_t j = 0; j < du; ++j) {
        // product of basis rows i and j in power coords
        std::vector<cpp_rational> prod(du, 0);
        for (std::size_t s = 0; s < du; ++s)
          for (std::size_t t = 0; t < du; ++t) {
            cpp_rational c = k.basis[i][s] * k.basis[j][t];
            if (c == 0) continue;
            const auto& ap = alpha_pow[s + t];
            for (std::size_t u = 0; u < du; ++u) prod[u] += c * ap[u];
          }
        auto coords = k.from_power(prod);
        std::vector<cpp_int> ic(du);
        for (std::size_t u = 0; u < du; ++u) {
          if (denominator(coords[u]) != 1)
            throw BasisNotARing("basis lattice is not closed under multiplication");
          ic[u] = numerator(coords[u]);
        }
        k.mult[i][j] = std::move(ic);
      }
    // lattice must contain 1
    std::vector<cpp_rational> one(du, 0);
    one[0] = 1;
    auto c1 = k.from_power(one);
    for (std::size_t u = 0; u < du; ++u)
      if (denominator(c1[u]) != 1)
        throw BasisNotARing("basis lattice does not contain 1");
  }

  // archimedean places via root finding
  if (k.d == 1) {
    ArchPlaceInfo pl;
    pl.is_real = true;
    pl.rho = 1;
    pl.root_re = -MpFloat(poly[0]);
    pl.root_im = 0;
    pl.emb_re = {Interval(1.0, 1.0)};
    pl.emb_im = {Interval(0.0, 0.0)};
    pl.emb_re_hi = {MpFloat(1)};
    pl.emb_im_hi = {MpFloat(0)};
    k.places = {pl};
    k.r1 = 1;
    k.r2 = 0;
  } else {
    auto roots = nfdetail::roots_durand_kerner(poly);
    const MpFloat real_cut("1e-45");
    std::vector<nfdetail::MpComplex> real_roots, cplx_roots;
    for (auto& z : roots) {
      if (abs(z.im) < real_cut)
        real_roots.push_back({z.re, MpFloat(0)});
      else if (z.im > 0)
        cplx_roots.push_back(z);
    }
    if (static_cast<int>(real_roots.size() + 2 * cplx_roots.size()) != k.d)
      throw ComputationError("root classification failed (conjugate pairing)");
    std::sort(real_roots.begin(), real_roots.end(),
              [](const auto& x, const auto& y) { return x.re < y.re; });
    std::sort(cplx_roots.begin(), cplx_roots.end(), [](const auto& x, const auto& y) {
      if (x.re != y.re) return x.re < y.re;
      return x.im < y.im;
    });
    k.r1 = static_cast<int>(real_roots.size());
    k.r2 = static_cast<int>(cplx_roots.size());

    auto add_place = [&](const nfdetail::MpComplex& root, bool is_real) {
      ArchPlaceInfo pl;
      pl.is_real = is_real;
      pl.rho = is_real ? 1 : 2;
      pl.root_re = root.re;
      pl.root_im = root.im;
      for (std::size_t i = 0; i < du; ++i) {
        // evaluate basis element i at the root
        nfdetail::MpComplex acc(0, 0);
        for (std::size_t j = du; j-- > 0;) {
          acc = acc * root;
          cpp_rational cr = k.basis[i][j];
          acc.re += MpFloat(numerator(cr)) / MpFloat(denominator(cr));
        }
        auto encl = [](const MpFloat& v) {
          double m = v.convert_to<double>();
          double lo = std::nextafter(std::nextafter(m, -1e308), -1e308);
          double hi = std::nextafter(std::nextafter(m, 1e308), 1e308);
          return Interval(lo, hi);
        };
        pl.emb_re.push_back(encl(acc.re));
        pl.emb_im.push_back(encl(acc.im));
        pl.emb_re_hi.push_back(acc.re);
        pl.emb_im_hi.push_back(acc.im);
      }
      k.places.push_back(std::move(pl));
    };
    for (auto& r : real_roots) add_place(r, true);
    for (auto& r : cplx_roots) add_place(r, false);
  }
  return k;
}

// ---------------------------------------------------------------------------
// split_prime
// ---------------------------------------------------------------------------

inline std::vector<PrimeIdealData> split_prime(const NumberFieldSpec& k,
                                               const cpp_int& p) {
  std::vector<PrimeIdealData> out;
  if (k.d == 1) {
    PrimeIdealData pd;
    pd.p = p;
    pd.q = p;
    out.push_back(std::move(pd));
    return out;
  }
  const bool index_divisor = (k.index % p == 0);
  if (k.d == 2) {
    // splitting from the fundamental discriminant, valid for any basis
    int chi = kronecker(k.disc_signed, p);
    auto factored = [&]() -> std::vector<std::pair<std::vector<cpp_int>, int>> {
      // roots of poly mod p, lifted generators; only valid when p∤index
      if (index_divisor || p > 1'000'000'000) return {};
      uint64_t pu = p.convert_to<uint64_t>();
      modp::Poly fp;
      for (const auto& c : k.poly) {
        cpp_int cm = ((c % p) + p) % p;
        fp.push_back(cm.convert_to<uint64_t>());
      }
      auto fac = modp::factor_mod_p(fp, pu);
      std::vector<std::pair<std::vector<cpp_int>, int>> res;
      for (auto& fe : fac) {
        std::vector<cpp_int> g;
        for (uint64_t cc : fe.factor) g.push_back(cpp_int(cc));
        res.push_back({std::move(g), fe.mult});
      }
      return res;
    }();
    auto push = [&](int e, int f, std::vector<cpp_int> gen, bool valid) {
      PrimeIdealData pd;
      pd.p = p;
      pd.e = e;
      pd.f = f;
      pd.q = pow_cpp(p, f);
      pd.gen = std::move(gen);
      pd.gen_valid = valid;
      out.push_back(std::move(pd));
    };
    if (chi == 0) {
      std::vector<cpp_int> gen;
      bool valid = false;
      for (auto& [g, e] : factored)
        if (g.size() == 2 && e == 2) { gen = g; valid = true; }
      push(2, 1, std::move(gen), valid);
    } else if (chi == 1) {
      std::vector<std::vector<cpp_int>> gens;
      for (auto& [g, e] : factored)
        if (g.size() == 2 && e == 1) gens.push_back(g);
      if (gens.size() == 2) {
        push(1, 1, gens[0], true);
        push(1, 1, gens[1], true);
      } else {
        push(1, 1, {}, false);
        push(1, 1, {}, false);
      }
    } else {
      push(1, 2, {}, !index_divisor);
    }
    return out;
  }
  // d in {3,4}: Dedekind requires p coprime to the index
  if (index_divisor)
    throw IndexDivisorUnsupported("prime divides the order index; splitting unsupported");
  if (p > 1'000'000'000)
    throw OverflowGuard("prime too large for factorization mod p");
  uint64_t pu = p.convert_to<uint64_t>();
  modp::Poly fp;
  for (const auto& c : k.poly) {
    cpp_int cm = ((c % p) + p) % p;
    fp.push_back(cm.convert_to<uint64_t>());
  }
  auto fac = modp::factor_mod_p(fp, pu);
  int efsum = 0;
  for (auto& fe : fac) {
    PrimeIdealData pd;
    pd.p = p;
    pd.e = fe.mult;
    pd.f = modp::degree(fe.factor);
    pd.q = pow_cpp(p, pd.f);
    for (uint64_t cc : fe.factor) pd.gen.push_back(cpp_int(cc));
    efsum += pd.e * pd.f;
    out.push_back(std::move(pd));
  }
  if (efsum != k.d) throw ComputationError("Dedekind factorization inconsistent");
  return out;
}

// ---------------------------------------------------------------------------
// dedekind zeta at 2: rigorous interval enclosure
// ---------------------------------------------------------------------------

inline Interval dedekind_zeta2(const NumberFieldSpec& k, uint64_t prime_bound) {
  if (prime_bound < 2) throw ConfigError("zeta prime bound must be >= 2");
  if (prime_bound > 200'000'000) throw OverflowGuard("zeta prime bound too large");
  // Accumulate in 100-digit floats so the only meaningful rounding is the
  // final outward conversion to double; this keeps enclosures nested as the
  // bound grows (relative drift ~1e-96 over the whole product).
  MpFloat prod = 1;       // truncated Euler product over ideals above p <= B
  MpFloat tailprod = 1;   // prod over p <= B of (1 - p^-2)
  SpfSieve sieve(static_cast<uint32_t>(prime_bound));
  auto primes = sieve.primes_upto(static_cast<uint32_t>(prime_bound));
  for (uint32_t p : primes) {
    std::vector<int> fs;  // residue degrees of the ideals above p
    if (k.d == 1) {
      fs = {1};
    } else if (k.d == 2) {
      int chi = kronecker(k.disc_signed, cpp_int(p));
      if (chi == 0) fs = {1};
      else if (chi == 1) fs = {1, 1};
      else fs = {2};
    } else {
      auto ideals = split_prime(k, cpp_int(p));
      for (auto& pd : ideals) fs.push_back(pd.f);
    }
    for (int f : fs) {
      MpFloat q2(pow_cpp(cpp_int(p), 2 * f));  // exact
      prod *= q2 / (q2 - 1);
    }
    MpFloat p2(cpp_int(p) * p);
    tailprod *= (p2 - 1) / p2;
  }
  // tail majorant: prod_{p>B} (1-p^-2)^{-d} with the exact identity
  // prod_{p>B} (1-p^-2)^{-1} = zeta(2) * prod_{p<=B} (1-p^-2)
  static const MpFloat zeta2_hi(
      "1.6449340668482264364724151666460251892189499012068");
  MpFloat T = zeta2_hi * tailprod;
  if (T < 1) T = 1;
  MpFloat hi_m = prod;
  for (int i = 0; i < k.d; ++i) hi_m *= T;
  double lo = detail::dn_ulps(prod.convert_to<double>(), 2);
  double hi = detail::up_ulps(hi_m.convert_to<double>(), 2);
  return Interval(lo, hi);
}

// ---------------------------------------------------------------------------
// exact membership predicates and enumeration
// ---------------------------------------------------------------------------

namespace nfdetail {

// sign of A + B*sqrt(D) with D > 0 a nonsquare integer, A,B rational
inline int sign_plus_sqrt(const cpp_rational& A, const cpp_rational& B,
                          const cpp_int& D) {
  int sa = A.sign(), sb = B.sign();
  if (sb == 0) return sa;
  if (sa == 0) return sb;
  if (sa == sb) return sa;
  // opposite signs: compare A^2 vs B^2 D (equality impossible, D nonsquare)
  cpp_rational a2 = A * A, b2d = B * B * cpp_rational(D);
  if (a2 > b2d) return sa;
  return sb;
}

}  // namespace nfdetail

// Exact decision of |x|_v <= P at archimedean place v for an integral element
// given in basis coordinates. P is interpreted exactly (binary double).
// d <= 2 fully exact; for d >= 3 only rational elements decide exactly and
// irrational boundary ties throw.
inline bool place_filter_exact(const NumberFieldSpec& k,
                               const std::vector<cpp_int>& coords, int place,
                               double P) {
  const cpp_rational Pr(P);
  auto pw = k.to_power(coords);
  if (k.d == 1) {
    cpp_rational v = pw[0];
    return abs(v) <= Pr;
  }
  if (k.d == 2) {
    // sigma(x) = A +- B*sqrt(D0), D0 = poly disc (c1^2 - 4 c0)
    const cpp_int D0 = k.poly_disc;
    const cpp_rational c1(k.poly[1]);
    cpp_rational A = pw[0] - pw[1] * c1 / 2;
    cpp_rational B = pw[1] / 2;
    if (D0 > 0) {
      // place 0 = minus branch, place 1 = plus branch (roots ascending)
      cpp_rational Bs = (place == 0) ? -B : B;
      // need -P <= A + Bs sqrt(D0) <= P
      if (nfdetail::sign_plus_sqrt(A - Pr, Bs, D0) > 0) return false;
      if (nfdetail::sign_plus_sqrt(A + Pr, Bs, D0) < 0) return false;
      return true;
    }
    // imaginary quadratic: module value |sigma|^2 = A^2 + B^2 |D0| <= P
    cpp_rational mod2 = A * A + B * B * cpp_rational(-D0);
    return mod2 <= Pr;
  }
  // degree >= 3
  bool rational = true;
  for (std::size_t i = 1; i < pw.size(); ++i)
    if (pw[i] != 0) rational = false;
  if (rational) {
    if (k.places[static_cast<std::size_t>(place)].is_real) return abs(pw[0]) <= Pr;
    return pw[0] * pw[0] <= Pr;  // module value
  }
  // interval with 100-digit fallback
  const auto& pl = k.places[static_cast<std::size_t>(place)];
  MpFloat re = 0, im = 0;
  for (int i = 0; i < k.d; ++i) {
    MpFloat c = MpFloat(coords[static_cast<std::size_t>(i)]);
    re += c * pl.emb_re_hi[static_cast<std::size_t>(i)];
    im += c * pl.emb_im_hi[static_cast<std::size_t>(i)];
  }
  MpFloat val = pl.is_real ? abs(re) : (re * re + im * im);
  MpFloat diff = val - MpFloat(numerator(Pr)) / MpFloat(denominator(Pr));
  if (abs(diff) < MpFloat("1e-60"))
    throw OverflowGuard("boundary tie beyond exact support at degree >= 3");
  return diff < 0;
}

// Exact finite set (y + m) ∩ P, coordinates emitted in lexicographic order.
inline std::vector<std::vector<cpp_int>> enumerate_polycylinder(
    const NumberFieldSpec& k, const Polycylinder& P,
    const std::vector<cpp_int>* coset_y = nullptr,
    const SubLattice* coset_m = nullptr, uint64_t budget = (uint64_t(1) << 22)) {
  if (static_cast<int>(P.radius.size()) != k.num_places())
    throw InvalidSetting("polycylinder place count mismatch");
  const int d = k.d;
  SubLattice whole;
  const SubLattice& m = coset_m ? *coset_m : whole;
  std::vector<cpp_int> y(static_cast<std::size_t>(d), 0);
  if (coset_y) y = *coset_y;
  if ((coset_m || coset_y) && d > 2)
    throw UnsupportedDegree("cosets implemented for degree <= 2");

  // lattice generator vectors in basis coordinates
  std::vector<std::vector<cpp_int>> gens;
  if (d == 1) {
    gens = {{m.a}};
  } else if (d == 2) {
    gens = {{m.a, 0}, {m.c, m.dd}};
  } else {
    for (int i = 0; i < d; ++i) {
      std::vector<cpp_int> e(static_cast<std::size_t>(d), 0);
      e[static_cast<std::size_t>(i)] = 1;
      gens.push_back(std::move(e));
    }
  }

  // real coordinate rows: per place, 1 row (real) or 2 rows (complex);
  // row bounds: P_v for real, sqrt(P_v) for complex components
  std::vector<std::vector<double>> E;  // rows x gens
  std::vector<double> rowbound;
  std::vector<double> ycoord;  // embedding of y per row
  for (int v = 0; v < k.num_places(); ++v) {
    const auto& pl = k.places[static_cast<std::size_t>(v)];
    auto emb_of = [&](const std::vector<cpp_int>& g, bool imag) {
      double acc = 0;
      for (int i = 0; i < d; ++i) {
        const Interval& e = imag ? pl.emb_im[static_cast<std::size_t>(i)]
                                 : pl.emb_re[static_cast<std::size_t>(i)];
        acc += g[static_cast<std::size_t>(i)].convert_to<double>() * e.mid();
      }
      return acc;
    };
    double Pv = P.radius[static_cast<std::size_t>(v)];
    if (pl.is_real) {
      std::vector<double> row;
      for (auto& g : gens) row.push_back(emb_of(g, false));
      E.push_back(std::move(row));
      rowbound.push_back(Pv);
      ycoord.push_back(emb_of(y, false));
    } else {
      std::vector<double> row1, row2;
      for (auto& g : gens) {
        row1.push_back(emb_of(g, false));
        row2.push_back(emb_of(g, true));
      }
      E.push_back(std::move(row1));
      E.push_back(std::move(row2));
      double rad = std::sqrt(Pv);
      rowbound.push_back(rad);
      rowbound.push_back(rad);
      ycoord.push_back(emb_of(y, false));
      ycoord.push_back(emb_of(y, true));
    }
  }

  // invert E (d x d) with long double Gaussian elimination
  const int n = d;
  std::vector<std::vector<long double>> a(static_cast<std::size_t>(n),
                                          std::vector<long double>(static_cast<std::size_t>(2 * n), 0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = E[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    a[static_cast<std::size_t>(i)][static_cast<std::size_t>(n + i)] = 1;
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int i = col + 1; i < n; ++i)
      if (std::abs(a[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)]) >
          std::abs(a[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)]))
        piv = i;
    std::swap(a[static_cast<std::size_t>(col)], a[static_cast<std::size_t>(piv)]);
    long double dg = a[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
    if (dg == 0) throw ComputationError("embedding matrix singular");
    for (int j = 0; j < 2 * n; ++j) a[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)] /= dg;
    for (int i = 0; i < n; ++i) {
      if (i == col) continue;
      long double f = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)];
      if (f == 0) continue;
      for (int j = 0; j < 2 * n; ++j)
        a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -=
            f * a[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)];
    }
  }

  // coordinate box: n_i in [center_i - B_i, center_i + B_i]
  std::vector<long long> lo(static_cast<std::size_t>(n)), hi(static_cast<std::size_t>(n));
  uint64_t boxsize = 1;
  for (int i = 0; i < n; ++i) {
    long double center = 0, radius = 0;
    for (int j = 0; j < n; ++j) {
      long double inv = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(n + j)];
      center += inv * (-ycoord[static_cast<std::size_t>(j)]);
      radius += std::abs(inv) * rowbound[static_cast<std::size_t>(j)];
    }
    radius += radius * 1e-12L + 1e-9L;
    lo[static_cast<std::size_t>(i)] = static_cast<long long>(std::ceil(center - radius - 1e-9L));
    hi[static_cast<std::size_t>(i)] = static_cast<long long>(std::floor(center + radius + 1e-9L));
    if (hi[static_cast<std::size_t>(i)] < lo[static_cast<std::size_t>(i)])
      return {};
    uint64_t span = static_cast<uint64_t>(hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)] + 1);
    if (boxsize > budget / span + 1) throw OverflowGuard("enumeration box exceeds budget");
    boxsize *= span;
    if (boxsize > budget) throw OverflowGuard("enumeration box exceeds budget");
  }

  std::vector<std::vector<cpp_int>> result;
  std::vector<long long> idx(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) idx[i] = lo[i];
  while (true) {
    // candidate coordinates
    std::vector<cpp_int> coords(static_cast<std::size_t>(d), 0);
    for (int i = 0; i < d; ++i)
      coords[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)];
    for (int g = 0; g < n; ++g)
      for (int i = 0; i < d; ++i)
        coords[static_cast<std::size_t>(i)] += cpp_int(idx[static_cast<std::size_t>(g)]) * gens[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)];

    bool inside = true;
    for (int v = 0; v < k.num_places() && inside; ++v) {
      const auto& pl = k.places[static_cast<std::size_t>(v)];
      double Pv = P.radius[static_cast<std::size_t>(v)];
      // interval fast path
      Interval re(0.0, 0.0), im(0.0, 0.0);
      for (int i = 0; i < d; ++i) {
        double ci = coords[static_cast<std::size_t>(i)].convert_to<double>();
        Interval cIv(ci, ci);
        re = re + cIv * pl.emb_re[static_cast<std::size_t>(i)];
        if (!pl.is_real) im = im + cIv * pl.emb_im[static_cast<std::size_t>(i)];
      }
      Interval val = pl.is_real ? (re * re) : (re * re + im * im);
      double bound2 = pl.is_real ? Pv * Pv : Pv;  // compare squared for real
      if (pl.is_real) {
        // |sigma| <= P  <=>  sigma^2 <= P^2 (P exact double, square as interval)
        Interval b2 = Interval(Pv, Pv) * Interval(Pv, Pv);
        if (val.hi <= b2.lo) continue;
        if (val.lo > b2.hi) { inside = false; break; }
      } else {
        if (val.hi <= bound2) continue;
        if (val.lo > bound2) { inside = false; break; }
      }
      inside = place_filter_exact(k, coords, v, Pv);
    }
    if (inside) result.push_back(std::move(coords));

    int g = n - 1;
    while (g >= 0 && idx[static_cast<std::size_t>(g)] == hi[static_cast<std::size_t>(g)]) {
      idx[static_cast<std::size_t>(g)] = lo[static_cast<std::size_t>(g)];
      --g;
    }
    if (g < 0) break;
    ++idx[static_cast<std::size_t>(g)];
  }
  std::sort(result.begin(), result.end());
  return result;
}

// HNF of a list of integer vectors in dimension <= 2, as a SubLattice.
inline SubLattice hnf_sublattice(int d, std::vector<std::vector<cpp_int>> vecs) {
  SubLattice L;
  if (d == 1) {
    cpp_int g = 0;
    for (auto& v : vecs) g = gcd_cpp(g, v[0]);
    if (g == 0) throw ConfigError("zero lattice");
    L.a = g;
    return L;
  }
  // reduce to form {(a,0),(c,dd)}
  cpp_int g2 = 0;
  for (auto& v : vecs) g2 = gcd_cpp(g2, v[1]);
  if (g2 == 0) {
    // all vectors rational multiples of (.,0)
    cpp_int g1 = 0;
    for (auto& v : vecs) g1 = gcd_cpp(g1, v[0]);
    if (g1 == 0) throw ConfigError("zero lattice");
    throw ConfigError("rank-deficient sublattice is not finite index");
  }
  // find combo with second coord g2 via extended gcd chain
  std::vector<cpp_int> w(2, 0);
  {
    cpp_int cur = 0;
    std::vector<cpp_int> acc(2, 0);
    for (auto& v : vecs) {
      if (v[1] == 0) continue;
      if (cur == 0) {
        cur = v[1];
        acc = v;
        continue;
      }
      // ext gcd(cur, v[1])
      cpp_int a0 = cur, b0 = v[1];
      cpp_int x0 = 1, y0 = 0, x1 = 0, y1 = 1;
      while (b0 != 0) {
        cpp_int qq = a0 / b0;
        cpp_int r = a0 - qq * b0;
        a0 = b0; b0 = r;
        cpp_int nx = x0 - qq * x1, ny = y0 - qq * y1;
        x0 = x1; y0 = y1; x1 = nx; y1 = ny;
      }
      std::vector<cpp_int> comb(2);
      comb[0] = x0 * acc[0] + y0 * v[0];
      comb[1] = x0 * acc[1] + y0 * v[1];
      cur = comb[1];
      acc = comb;
    }
    w = acc;
    if (w[1] < 0) { w[0] = -w[0]; w[1] = -w[1]; }
  }
  // first-coordinate lattice of vectors with zero second coord after reduction
  cpp_int a1 = 0;
  for (auto& v : vecs) {
    cpp_int t = v[1] / w[1];
    cpp_int first = v[0] - t * w[0];
    // v - t*w has second coord v[1] - t*w[1] = v[1] mod w[1] = 0 exactly
    if (v[1] % w[1] != 0) throw ComputationError("hnf: non-integral reduction");
    a1 = gcd_cpp(a1, first);
  }
  if (a1 == 0) throw ConfigError("rank-deficient sublattice is not finite index");
  if (a1 < 0) a1 = -a1;
  L.a = a1;
  L.dd = w[1];
  L.c = ((w[0] % a1) + a1) % a1;
  return L;
}

// principal ideal (g) as a sublattice (d <= 2)
inline SubLattice principal_ideal(const NumberFieldSpec& k,
                                  const std::vector<cpp_int>& g) {
  std::vector<std::vector<cpp_int>> vecs;
  for (int i = 0; i < k.d; ++i) {
    std::vector<cpp_int> e(static_cast<std::size_t>(k.d), 0);
    e[static_cast<std::size_t>(i)] = 1;
    vecs.push_back(k.mul(g, e));
  }
  return hnf_sublattice(k.d, std::move(vecs));
}

// prime ideal (p, gen(alpha)) as a sublattice (d = 2, gen_valid required)
inline SubLattice prime_ideal_lattice(const NumberFieldSpec& k,
                                      const PrimeIdealData& pd) {
  if (k.d == 1) {
    SubLattice L;
    L.a = pd.p;
    return L;
  }
  if (k.d != 2) throw UnsupportedDegree("prime ideal lattices implemented for d <= 2");
  if (pd.f == 2) {
    SubLattice L;
    L.a = pd.p;
    L.dd = pd.p;
    return L;
  }
  if (!pd.gen_valid || pd.gen.size() != 2)
    throw IndexDivisorUnsupported("prime ideal generator data unavailable");
  // gen = x + t  (monic linear), element is alpha + t
  std::vector<cpp_rational> pw(2);
  pw[0] = cpp_rational(pd.gen[0]);
  pw[1] = 1;
  auto gc = k.from_power(pw);
  std::vector<cpp_int> gel(2);
  for (int i = 0; i < 2; ++i) {
    if (denominator(gc[static_cast<std::size_t>(i)]) != 1)
      throw ComputationError("prime generator not integral in basis");
    gel[static_cast<std::size_t>(i)] = numerator(gc[static_cast<std::size_t>(i)]);
  }
  std::vector<std::vector<cpp_int>> vecs;
  std::vector<cpp_int> e0{1, 0}, e1{0, 1};
  vecs.push_back({pd.p, 0});
  vecs.push_back({0, pd.p});
  vecs.push_back(k.mul(gel, e0));
  vecs.push_back(k.mul(gel, e1));
  auto L = hnf_sublattice(2, std::move(vecs));
  if (L.index_in_ring(2) != pd.q)
    throw ComputationError("prime ideal lattice has wrong norm");
  return L;
}

// Rational square test; also detects squares of the form D * square for
// quadratic fields via is_square_in_field.
inline bool rational_is_square(const cpp_rational& r) {
  if (r < 0) return false;
  if (r == 0) return true;
  cpp_int n = numerator(r), dn = denominator(r);
  cpp_int sn = sqrt(n), sd = sqrt(dn);
  return sn * sn == n && sd * sd == dn;
}

// Is x^2 (an element given in basis coords) a square in k? Exact for d <= 2;
// for d >= 3 returns false (callers use this only to drop terms, so a false
// negative keeps every bound valid).
inline bool is_square_in_field(const NumberFieldSpec& k,
                               const std::vector<cpp_int>& coords) {
  auto pw = k.to_power(coords);
  if (k.d == 1) return rational_is_square(pw[0]);
  if (k.d == 2) {
    const cpp_int D0 = k.poly_disc;
    const cpp_rational c1(k.poly[1]);
    cpp_rational A = pw[0] - pw[1] * c1 / 2;
    cpp_rational B = pw[1] / 2;
    if (B == 0) {
      if (rational_is_square(A)) return true;
      // A = D0 * square?
      if (A == 0) return true;
      cpp_rational ratio = A / cpp_rational(D0);
      return rational_is_square(ratio);
    }
    // solve (u + v sqrt(D0))^2 = A + B sqrt(D0)
    cpp_rational nrm = A * A - B * B * cpp_rational(D0);
    if (!rational_is_square(nrm)) return false;
    cpp_int sn = sqrt(numerator(nrm)), sd = sqrt(denominator(nrm));
    cpp_rational s(sn, sd);
    for (int sign = -1; sign <= 1; sign += 2) {
      cpp_rational u2 = (A + sign * s) / 2;
      if (rational_is_square(u2)) {
        if (u2 != 0) return true;
        // u = 0: x = v^2 D0 requires B = 0, contradiction
      }
    }
    return false;
  }
  return false;
}

// valuation of an integral element at a prime ideal (d <= 2)
inline int val_at_prime(const NumberFieldSpec& k, const PrimeIdealData& pd,
                        const std::vector<cpp_int>& coords) {
  bool zero = true;
  for (auto& c : coords)
    if (c != 0) zero = false;
  if (zero) throw ComputationError("valuation of zero");
  if (k.d == 1) return vp_int(coords[0], pd.p);
  if (k.d != 2) throw UnsupportedDegree("valuations implemented for d <= 2");
  if (pd.f == 2) {
    // inert: v = min coordinate valuation
    int v0 = coords[0] == 0 ? INT32_MAX : vp_int(coords[0], pd.p);
    int v1 = coords[1] == 0 ? INT32_MAX : vp_int(coords[1], pd.p);
    return std::min(v0, v1);
  }
  if (pd.e == 2) {
    cpp_rational n = k.norm(coords);
    return vp_int(numerator(n), pd.p);  // denominator is 1 for integral coords
  }
  // split: valuation along the embedding k -> Q_p determined by the lifted
  // root of the generator. gen = x + t, so alpha = -t mod p.
  if (!pd.gen_valid || pd.gen.size() != 2)
    throw IndexDivisorUnsupported("split valuation needs generator data");
  cpp_rational nrm = k.norm(coords);
  int vtotal = vp_int(numerator(nrm), pd.p);
  if (vtotal == 0) return 0;
  // Hensel-lift root to precision beyond vtotal
  int M = vtotal + 2;
  cpp_int pM = pow_cpp(pd.p, M);
  cpp_int t = (pd.p - pd.gen[0] % pd.p) % pd.p;  // alpha = t mod p
  // Newton: t <- t - f(t)/f'(t) mod p^M
  cpp_int cur = t;
  cpp_int mod = pd.p;
  while (mod < pM) {
    mod = mod * mod;
    if (mod > pM) mod = pM;
    cpp_int fv = 0, fd = 0, x = cur;
    // evaluate poly and derivative mod `mod`
    fv = ((nfdetail::eval_int_poly(k.poly, x)) % mod + mod) % mod;
    std::vector<cpp_int> dcoef;
    for (std::size_t i = 1; i < k.poly.size(); ++i)
      dcoef.push_back(k.poly[i] * static_cast<int>(i));
    fd = ((nfdetail::eval_int_poly(dcoef, x)) % mod + mod) % mod;
    cpp_int fdinv = inv_mod(fd, mod);
    cur = ((cur - fv * fdinv) % mod + mod) % mod;
  }
  auto pw = k.to_power(coords);
  // integral coords => denominators divide the index, which is coprime to p
  cpp_int num = numerator(pw[0]) * denominator(pw[1]) +
                numerator(pw[1]) * denominator(pw[0]) * cur;
  cpp_int den = denominator(pw[0]) * denominator(pw[1]);
  (void)den;  // coprime to p by the index policy
  cpp_int r = ((num % pM) + pM) % pM;
  if (r == 0) return vtotal;  // all mass at this place (precision exhausted)
  int v = 0;
  while (r % pd.p == 0) {
    r /= pd.p;
    ++v;
  }
  return std::min(v, vtotal);
}

}  // namespace tracegeom
