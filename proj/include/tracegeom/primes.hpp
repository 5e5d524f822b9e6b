#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace tracegeom {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

// Smallest-prime-factor sieve up to n inclusive.
struct SpfSieve {
  std::vector<uint32_t> spf;

  explicit SpfSieve(uint32_t n) : spf(static_cast<size_t>(n) + 1, 0) {
    for (uint64_t i = 2; i <= n; ++i) {
      if (spf[i] == 0) {
        for (uint64_t j = i; j <= n; j += i)
          if (spf[j] == 0) spf[j] = static_cast<uint32_t>(i);
      }
    }
  }

  uint32_t limit() const { return static_cast<uint32_t>(spf.size() - 1); }

  // Distinct prime factors with exponents; n must be within the sieve.
  std::map<uint64_t, int> factor(uint64_t n) const {
    if (n > limit()) throw std::out_of_range("SpfSieve::factor beyond limit");
    std::map<uint64_t, int> f;
    while (n > 1) {
      uint64_t p = spf[n];
      int e = 0;
      while (n % p == 0) { n /= p; ++e; }
      f[p] = e;
    }
    return f;
  }

  std::vector<uint32_t> primes_upto(uint32_t n) const {
    std::vector<uint32_t> ps;
    for (uint32_t i = 2; i <= n && i <= limit(); ++i)
      if (spf[i] == i) ps.push_back(i);
    return ps;
  }
};

namespace detail {
inline uint64_t mulmod_u64(uint64_t a, uint64_t b, uint64_t m) {
  return static_cast<uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}
inline uint64_t powmod_u64(uint64_t a, uint64_t e, uint64_t m) {
  uint64_t r = 1 % m;
  a %= m;
  while (e) {
    if (e & 1) r = mulmod_u64(r, a, m);
    a = mulmod_u64(a, a, m);
    e >>= 1;
  }
  return r;
}
}  // namespace detail

// Deterministic Miller-Rabin for 64-bit inputs.
inline bool is_prime_u64(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL,
                     23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) { d >>= 1; ++s; }
  for (uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL,
                     23ULL, 29ULL, 31ULL, 37ULL}) {
    uint64_t x = detail::powmod_u64(a % n, d, n);
    if (x == 1 || x == n - 1) continue;
    bool witness = true;
    for (int i = 1; i < s; ++i) {
      x = detail::mulmod_u64(x, x, n);
      if (x == n - 1) { witness = false; break; }
    }
    if (witness) return false;
  }
  return true;
}

// Factor |n| by trial division over the sieve primes, then classify the
// cofactor. Returns (prime -> exponent, unfactored cofactor, cofactor_prime).
// When the cofactor is composite and too large, callers must treat the
// distinct-prime count as a lower bound and use omega_upper instead.
struct PartialFactorization {
  std::map<cpp_int, int> factors;
  cpp_int cofactor = 1;       // 1 when fully factored
  bool cofactor_prime = false;

  bool complete() const { return cofactor == 1; }

  // Number of distinct primes, exact when complete or cofactor_prime.
  int omega_exact_or_throw() const {
    if (complete()) return static_cast<int>(factors.size());
    if (cofactor_prime) return static_cast<int>(factors.size()) + 1;
    throw std::runtime_error("omega not exact: composite cofactor");
  }

  // Rigorous upper bound: any hidden prime exceeds trial_limit, so the
  // cofactor holds at most log(cofactor)/log(trial_limit) of them.
  int omega_upper(uint64_t trial_limit) const {
    int base = static_cast<int>(factors.size());
    if (complete()) return base;
    if (cofactor_prime) return base + 1;
    double log_cof = (static_cast<double>(boost::multiprecision::msb(cofactor)) + 1.0) *
                     0.6931471805599453;
    return base + static_cast<int>(log_cof / std::log(static_cast<double>(trial_limit))) + 1;
  }
};

inline PartialFactorization factor_partial(cpp_int n, const SpfSieve& sieve) {
  PartialFactorization out;
  if (n < 0) n = -n;
  if (n <= 1) return out;
  if (n <= sieve.limit()) {
    for (auto& [p, e] : sieve.factor(n.convert_to<uint64_t>()))
      out.factors[cpp_int(p)] = e;
    return out;
  }
  for (uint32_t p = 2; p <= sieve.limit(); p = (p == 2 ? 3 : p + 2)) {
    if (sieve.spf[p] != p) continue;
    if (cpp_int(p) * p > n) break;
    if (n % p == 0) {
      int e = 0;
      while (n % p == 0) { n /= p; ++e; }
      out.factors[cpp_int(p)] = e;
    }
  }
  if (n > 1) {
    if (n <= sieve.limit() ||
        (n < (cpp_int(sieve.limit()) * sieve.limit()) )) {
      // cofactor below limit^2 with no prime factor <= limit: prime
      out.factors[n] = 1;
    } else if (n <= cpp_int(std::numeric_limits<uint64_t>::max()) &&
               is_prime_u64(n.convert_to<uint64_t>())) {
      out.factors[n] = 1;
    } else {
      out.cofactor = n;
      out.cofactor_prime =
          n <= cpp_int(std::numeric_limits<uint64_t>::max()) &&
          is_prime_u64(n.convert_to<uint64_t>());
      if (out.cofactor_prime) {
        out.factors[n] = 1;
        out.cofactor = 1;
      }
    }
  }
  return out;
}

// Kronecker symbol (a|n), full generality including n <= 0.
inline int kronecker(cpp_int a, cpp_int n) {
  if (n == 0) return (a == 1 || a == -1) ? 1 : 0;
  int result = 1;
  if (n < 0) {
    n = -n;
    if (a < 0) result = -result;
  }
  int v = 0;
  while ((n & 1) == 0) { n >>= 1; ++v; }
  if (v % 2 == 1) {
    cpp_int am8 = a % 8;
    if (am8 < 0) am8 += 8;
    if (am8 == 3 || am8 == 5) result = -result;
    if (am8 == 0 || am8 == 2 || am8 == 4 || am8 == 6) return 0;
  }
  a %= n;
  if (a < 0) a += n;
  while (a != 0) {
    while ((a & 1) == 0) {
      a >>= 1;
      cpp_int nm8 = n % 8;
      if (nm8 == 3 || nm8 == 5) result = -result;
    }
    std::swap(a, n);
    if ((a % 4) == 3 && (n % 4) == 3) result = -result;
    a %= n;
  }
  return n == 1 ? result : 0;
}

inline cpp_int pow_cpp(cpp_int base, unsigned e) {
  cpp_int r = 1;
  while (e) {
    if (e & 1U) r *= base;
    base *= base;
    e >>= 1U;
  }
  return r;
}

inline cpp_int gcd_cpp(cpp_int a, cpp_int b) {
  return boost::multiprecision::gcd(a, b);
}

// Modular inverse of a mod m (gcd(a, m) = 1).
inline cpp_int inv_mod(cpp_int a, const cpp_int& m) {
  cpp_int old_r = a % m, r = m, old_s = 1, s = 0;
  if (old_r < 0) old_r += m;
  while (r != 0) {
    cpp_int q = old_r / r;
    cpp_int t = old_r - q * r; old_r = r; r = t;
    t = old_s - q * s; old_s = s; s = t;
  }
  if (old_r != 1) throw std::domain_error("inv_mod: not invertible");
  old_s %= m;
  if (old_s < 0) old_s += m;
  return old_s;
}

inline int vp_int(cpp_int x, const cpp_int& p) {
  if (x == 0) throw std::domain_error("vp_int of zero");
  if (x < 0) x = -x;
  int v = 0;
  while (x % p == 0) { x /= p; ++v; }
  return v;
}

}  // namespace tracegeom
