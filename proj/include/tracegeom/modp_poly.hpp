// Factorization of small monic polynomials over F_p (degree <= 4), used for
// prime splitting via the Dedekind criterion. Deterministic: equal-degree
// splitting walks a fixed trial sequence instead of sampling.
#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tracegeom/primes.hpp"

namespace tracegeom::modp {

inline uint64_t mulmod(uint64_t a, uint64_t b, uint64_t m) { return ::tracegeom::detail::mulmod_u64(a, b, m); }
inline uint64_t powmod(uint64_t a, uint64_t e, uint64_t m) { return ::tracegeom::detail::powmod_u64(a, e, m); }

using Poly = std::vector<uint64_t>;  // coefficients low-to-high, no trailing zeros

inline Poly trim(Poly a) {
  while (!a.empty() && a.back() == 0) a.pop_back();
  return a;
}

inline int degree(const Poly& a) { return static_cast<int>(a.size()) - 1; }

inline Poly pmul(const Poly& a, const Poly& b, uint64_t p) {
  if (a.empty() || b.empty()) return {};
  Poly c(a.size() + b.size() - 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      c[i + j] = (c[i + j] + mulmod(a[i], b[j], p)) % p;
  return trim(std::move(c));
}

// Remainder of a by monic b.
inline Poly pmod(Poly a, const Poly& b, uint64_t p) {
  a = trim(std::move(a));
  if (b.empty() || b.back() != 1)
    throw std::logic_error("pmod: divisor must be monic");
  const int db = degree(b);
  while (degree(a) >= db) {
    const uint64_t lead = a.back();
    const std::size_t shift = a.size() - b.size();
    for (std::size_t i = 0; i < b.size(); ++i) {
      uint64_t sub = mulmod(lead, b[i], p);
      a[shift + i] = (a[shift + i] + p - sub) % p;
    }
    a = trim(std::move(a));
  }
  return a;
}

inline Poly pquot(Poly a, const Poly& b, uint64_t p) {
  a = trim(std::move(a));
  const int db = degree(b);
  if (degree(a) < db) return {};
  Poly q(a.size() - b.size() + 1, 0);
  while (degree(a) >= db) {
    const uint64_t lead = a.back();
    const std::size_t shift = a.size() - b.size();
    q[shift] = lead;
    for (std::size_t i = 0; i < b.size(); ++i) {
      uint64_t sub = mulmod(lead, b[i], p);
      a[shift + i] = (a[shift + i] + p - sub) % p;
    }
    a = trim(std::move(a));
  }
  return trim(std::move(q));
}

inline Poly make_monic(Poly a, uint64_t p) {
  a = trim(std::move(a));
  if (a.empty() || a.back() == 1) return a;
  uint64_t inv = powmod(a.back(), p - 2, p);
  for (auto& c : a) c = mulmod(c, inv, p);
  return a;
}

inline Poly pgcd(Poly a, Poly b, uint64_t p) {
  a = trim(std::move(a));
  b = trim(std::move(b));
  while (!b.empty()) {
    Poly r = pmod(a, make_monic(b, p), p);
    a = std::move(b);
    b = std::move(r);
  }
  return make_monic(std::move(a), p);
}

inline Poly pderiv(const Poly& a, uint64_t p) {
  Poly d;
  for (std::size_t i = 1; i < a.size(); ++i)
    d.push_back(mulmod(a[i], i % p, p));
  return trim(std::move(d));
}

// base^e mod (f, p) where base is a polynomial.
inline Poly ppowmod(Poly base, uint64_t e, const Poly& f, uint64_t p) {
  Poly result{1};
  base = pmod(std::move(base), f, p);
  while (e) {
    if (e & 1) result = pmod(pmul(result, base, p), f, p);
    base = pmod(pmul(base, base, p), f, p);
    e >>= 1;
  }
  return result;
}

// Square root mod odd prime p (Tonelli-Shanks), or p=2. Returns p if a is a
// nonresidue.
inline uint64_t sqrt_mod(uint64_t a, uint64_t p) {
  a %= p;
  if (p == 2 || a == 0) return a;
  if (powmod(a, (p - 1) / 2, p) != 1) return p;
  if (p % 4 == 3) return powmod(a, (p + 1) / 4, p);
  // Tonelli-Shanks with deterministic nonresidue search.
  uint64_t q = p - 1, s = 0;
  while ((q & 1) == 0) { q >>= 1; ++s; }
  uint64_t z = 2;
  while (powmod(z, (p - 1) / 2, p) != p - 1) ++z;
  uint64_t m = s, c = powmod(z, q, p), t = powmod(a, q, p),
           r = powmod(a, (q + 1) / 2, p);
  while (t != 1) {
    uint64_t t2 = t, i = 0;
    while (t2 != 1) { t2 = mulmod(t2, t2, p); ++i; }
    uint64_t b = powmod(c, uint64_t(1) << (m - i - 1), p);
    m = i;
    c = mulmod(b, b, p);
    t = mulmod(t, c, p);
    r = mulmod(r, b, p);
  }
  return r;
}

// All roots in F_p of a monic squarefree polynomial of degree <= 4 that is a
// product of linear factors. Found by Cantor-Zassenhaus with a deterministic
// shift sequence; degree <= 2 handled closed-form.
inline void linear_roots(const Poly& f, uint64_t p, std::vector<uint64_t>& out) {
  const int d = degree(f);
  if (d <= 0) return;
  if (d == 1) {
    out.push_back((p - f[0] % p) % p);
    return;
  }
  if (d == 2) {
    if (p == 2) {
      for (uint64_t x = 0; x < 2; ++x) {
        uint64_t v = (mulmod(x, x, p) + mulmod(f[1], x, p) + f[0]) % p;
        if (v == 0) out.push_back(x);
      }
      return;
    }
    // x^2 + bx + c: roots (-b +- sqrt(b^2-4c)) / 2
    uint64_t b = f[1], c = f[0];
    uint64_t disc = (mulmod(b, b, p) + p - mulmod(4 % p, c, p) % p) % p;
    uint64_t r = sqrt_mod(disc, p);
    if (r == p) return;  // no roots (caller guarantees full split, d==2 means 2 roots)
    uint64_t inv2 = powmod(2, p - 2, p);
    out.push_back(mulmod((p - b + r) % p, inv2, p));
    out.push_back(mulmod((p - b + p - r) % p, inv2, p));
    return;
  }
  if (p == 2) {  // tiny scan
    for (uint64_t x = 0; x < 2; ++x) {
      uint64_t v = 0, pw = 1;
      for (uint64_t coef : f) { v = (v + coef * pw) % 2; pw = (pw * x) % 2; }
      if (v == 0) out.push_back(x);
    }
    return;
  }
  // Split with gcd(f, (x+c)^((p-1)/2) - 1).
  for (uint64_t shift = 0; shift < p; ++shift) {
    Poly g = ppowmod(Poly{shift, 1}, (p - 1) / 2, f, p);
    if (g.empty()) { out.push_back((p - shift) % p); // x = -shift is a root
      Poly lin{shift, 1};
      linear_roots(pquot(f, lin, p), p, out);
      return;
    }
    g[0] = (g[0] + p - 1) % p;
    Poly h = pgcd(f, trim(std::move(g)), p);
    int dh = degree(h);
    if (dh > 0 && dh < d) {
      linear_roots(h, p, out);
      linear_roots(pquot(f, h, p), p, out);
      return;
    }
  }
  throw std::logic_error("linear_roots: split failed");
}

struct FactorPower {
  Poly factor;  // monic irreducible
  int mult;
};

// Full factorization of a monic polynomial of degree 1..4 over F_p.
inline std::vector<FactorPower> factor_mod_p(const Poly& f_in, uint64_t p) {
  Poly f = make_monic(trim(f_in), p);
  const int d = degree(f);
  if (d < 1 || d > 4) throw std::logic_error("factor_mod_p: degree out of range");

  // Squarefree part. Over F_p with d <= 4 < p or small p, gcd(f, f') catches
  // repeated factors except when f' == 0 (only possible for p <= 3 here, e.g.
  // x^2+c at p=2, x^3+c at p=3: then f = g(x^p) = g(x)^p).
  std::vector<FactorPower> result;
  Poly fd = pderiv(f, p);
  if (fd.empty()) {
    // f(x) = g(x^p); f = g(x)^p with g of degree d/p.
    Poly g;
    for (std::size_t i = 0; i * p < f.size() || i == 0; ++i) {
      std::size_t idx = i * static_cast<std::size_t>(p);
      if (idx < f.size()) g.push_back(f[idx]);
    }
    g = trim(std::move(g));
    auto sub = factor_mod_p(g, p);
    for (auto& fp : sub) fp.mult *= static_cast<int>(p);
    return sub;
  }
  Poly sq = pquot(f, pgcd(f, fd, p), p);  // squarefree part

  // Distinct-degree decomposition of sq.
  // Degree-1 part: gcd(x^p - x, sq).
  std::vector<Poly> irreducibles;
  {
    Poly xp = ppowmod(Poly{0, 1}, p, sq, p);
    // xp - x
    Poly diff = xp;
    if (diff.size() < 2) diff.resize(2, 0);
    diff[1] = (diff[1] + p - 1) % p;
    Poly g1 = pgcd(sq, trim(std::move(diff)), p);
    std::vector<uint64_t> roots;
    if (degree(g1) >= 1) linear_roots(g1, p, roots);
    std::sort(roots.begin(), roots.end());
    for (uint64_t r : roots) irreducibles.push_back(Poly{(p - r) % p, 1});
    Poly rest = pquot(sq, g1, p);
    const int dr = degree(rest);
    if (dr == 2 || dr == 3) {
      irreducibles.push_back(rest);  // no degree-1 factors left => irreducible
    } else if (dr == 4) {
      // Either irreducible or a product of two distinct quadratics.
      Poly xpr = pmod(xp, rest, p);          // x^p mod rest
      Poly xp2 = ppowmod(xpr, p, rest, p);   // x^(p^2) mod rest
      Poly diff2 = xp2;
      if (diff2.size() < 2) diff2.resize(2, 0);
      diff2[1] = (diff2[1] + p - 1) % p;
      Poly g2 = pgcd(rest, trim(std::move(diff2)), p);
      if (degree(g2) == 4) {
        // two quadratic factors; split deterministically
        bool split = false;
        for (uint64_t shift = 0; shift < p && !split; ++shift) {
          // (x + shift)^((p^2-1)/2) mod rest, exponent fits u64 for p < 2^31
          uint64_t e = (p * p - 1) / 2;
          Poly t = ppowmod(Poly{shift, 1}, e, rest, p);
          if (t.empty()) continue;
          t[0] = (t[0] + p - 1) % p;
          Poly h = pgcd(rest, trim(std::move(t)), p);
          if (degree(h) == 2) {
            irreducibles.push_back(h);
            irreducibles.push_back(pquot(rest, h, p));
            split = true;
          }
        }
        if (!split) throw std::logic_error("factor_mod_p: quartic split failed");
      } else {
        irreducibles.push_back(rest);  // irreducible quartic
      }
    }
  }

  // Multiplicities against the original f.
  for (const Poly& g : irreducibles) {
    int m = 0;
    Poly rem = f;
    while (degree(rem) >= degree(g) && pmod(rem, g, p).empty()) {
      rem = pquot(rem, g, p);
      ++m;
    }
    result.push_back({g, m});
  }
  std::sort(result.begin(), result.end(), [](const FactorPower& a, const FactorPower& b) {
    if (a.factor.size() != b.factor.size()) return a.factor.size() < b.factor.size();
    return a.factor < b.factor;
  });
  return result;
}

}  // namespace tracegeom::modp
