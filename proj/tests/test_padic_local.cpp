#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <vector>

#include "tracegeom/padic_local.hpp"

using tracegeom::cpp_int;
using tracegeom::cpp_rational;
using tracegeom::GammaLocal;
using tracegeom::LocalRing;
using tracegeom::SplitType;
using tracegeom::SquareClassifier;

namespace {

template <class F>
void for_each_elem(const LocalRing& R, F&& fn) {
  LocalRing::Elem x{0, 0, 0, 0};
  uint64_t states = 1;
  for (int i = 0; i < R.f; ++i) states *= R.pm;
  for (uint64_t c = 0;; ++c) {
    fn(x);
    if (c + 1 == states) break;
    for (int i = 0; i < R.f; ++i) {
      if (++x[static_cast<std::size_t>(i)] < R.pm) break;
      x[static_cast<std::size_t>(i)] = 0;
    }
  }
}

cpp_int pow_u(cpp_int b, int e) {
  cpp_int r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

// independent square detection: exhaustive root search at one modulus.
// A p-adic integer a with v(a) = v is a square iff y^2 = a has a solution
// modulo p^{v+3} (odd p; p = 2 needs the same with any exponent >= v+3).
bool has_sqrt_mod(cpp_int a, const cpp_int& mod) {
  a = ((a % mod) + mod) % mod;
  for (cpp_int y = 0; y < mod; ++y)
    if ((y * y) % mod == a) return true;
  return false;
}

SplitType brute_classify_int(uint64_t p, long long x) {
  cpp_int D = cpp_int(x) * x - 4;
  REQUIRE(D != 0);
  cpp_int t = D;
  int v = 0;
  while (t % p == 0) {
    t /= p;
    ++v;
  }
  cpp_int mod = pow_u(cpp_int(p), v + (p == 2 ? 7 : 3));
  if (has_sqrt_mod(D, mod)) return SplitType::Split;
  if (p == 2) {
    // 5 spans the nontrivial square class with unramified square root
    return has_sqrt_mod(5 * D, mod) ? SplitType::EllipticUnramified
                                    : SplitType::EllipticRamifiedWild;
  }
  return (v % 2 == 1) ? SplitType::EllipticRamifiedTame
                      : SplitType::EllipticUnramified;
}

uint64_t count_sqrt4(uint64_t q, uint64_t p, int k) {
  LocalRing R(q, p, k);
  auto four = R.from_int(4);
  uint64_t n = 0;
  for_each_elem(R, [&](const LocalRing::Elem& x) {
    if (R.mul(x, x) == four) ++n;
  });
  return n;
}

}  // namespace

TEST_CASE("local ring arithmetic in unramified residue rings") {
  LocalRing R2(2, 2, 8);
  REQUIRE(R2.pm == 256);
  REQUIRE(R2.from_int(-1)[0] == 255);
  REQUIRE(R2.val(R2.from_int(12)) == 2);
  REQUIRE(R2.val(R2.zero()) == 8);  // capped at m
  REQUIRE(R2.shift_down(R2.from_int(12), 2) == R2.from_int(3));
  REQUIRE(R2.add(R2.from_int(200), R2.from_int(100)) == R2.from_int(44));
  REQUIRE(R2.sub(R2.from_int(3), R2.from_int(5)) == R2.from_int(-2));

  // quadratic ring over Z_2 with generator t, t^2 + t + 1 = 0
  LocalRing R4(4, 2, 3);
  REQUIRE(R4.f == 2);
  REQUIRE(R4.pm == 8);
  LocalRing::Elem t{0, 1, 0, 0};
  LocalRing::Elem t2 = R4.mul(t, t);
  REQUIRE(t2 == LocalRing::Elem{7, 7, 0, 0});  // t^2 = -1 - t
  // (1 + 2t)^2 = 1 + 4t + 4t^2 = -3
  LocalRing::Elem a{1, 2, 0, 0};
  REQUIRE(R4.mul(a, a) == R4.from_int(-3));
  REQUIRE(R4.val(LocalRing::Elem{4, 2, 0, 0}) == 1);
}

TEST_CASE("deterministic residue generator selection") {
  REQUIRE(LocalRing(4, 2, 1).gmod == std::vector<uint64_t>{1, 1, 1});
  REQUIRE(LocalRing(8, 2, 1).gmod == std::vector<uint64_t>{1, 1, 0, 1});
  REQUIRE(LocalRing(16, 2, 1).gmod == std::vector<uint64_t>{1, 1, 0, 0, 1});
  REQUIRE(LocalRing(9, 3, 1).gmod == std::vector<uint64_t>{1, 0, 1});
  REQUIRE(LocalRing(25, 5, 1).gmod == std::vector<uint64_t>{2, 0, 1});
  REQUIRE(LocalRing(2, 2, 1).gmod.empty());
}

TEST_CASE("local ring parameter guards") {
  REQUIRE_THROWS_AS(LocalRing(6, 2, 1), tracegeom::ConfigError);
  REQUIRE_THROWS_AS(LocalRing(32, 2, 1), tracegeom::UnsupportedDegree);
  REQUIRE_THROWS_AS(LocalRing(2, 2, 41), tracegeom::OverflowGuard);
  REQUIRE_NOTHROW(LocalRing(2, 2, 40));
  REQUIRE_THROWS_AS(LocalRing(2, 2, 0), tracegeom::ConfigError);
}

TEST_CASE("square class tables") {
  // odd residue characteristic: squares in the residue field
  LocalRing R5(5, 5, 4);
  SquareClassifier sc5(5, 5);
  REQUIRE(sc5.unit_is_square(R5, R5.from_int(1), 4));
  REQUIRE(sc5.unit_is_square(R5, R5.from_int(4), 4));
  REQUIRE_FALSE(sc5.unit_is_square(R5, R5.from_int(2), 4));
  REQUIRE_FALSE(sc5.unit_is_square(R5, R5.from_int(3), 4));

  // every unit of the prime field becomes a square in the quadratic extension
  LocalRing R9(9, 3, 4);
  SquareClassifier sc9(9, 3);
  REQUIRE(sc9.unit_is_square(R9, R9.from_int(2), 4));
  REQUIRE(sc9.unit_is_square(R9, R9.from_int(1), 4));

  // dyadic: unit squares are exactly 1 mod 8, and 1 mod 4 detects the
  // at-worst-unramified classes
  LocalRing Rd(2, 2, 5);
  SquareClassifier scd(2, 2);
  REQUIRE(scd.unit_is_square(Rd, Rd.from_int(17), 5));
  REQUIRE_FALSE(scd.unit_is_square(Rd, Rd.from_int(3), 5));
  REQUIRE_FALSE(scd.unit_is_square(Rd, Rd.from_int(5), 5));
  REQUIRE_FALSE(scd.unit_is_square(Rd, Rd.from_int(7), 5));
  REQUIRE(scd.unit_square_mod4(Rd, Rd.from_int(5), 5));
  REQUIRE_FALSE(scd.unit_square_mod4(Rd, Rd.from_int(3), 5));

  // dyadic quadratic ring: -3 = (1+2t)^2 is a square, -1 and 3 are not even
  // squares modulo 4
  LocalRing R4(4, 2, 5);
  SquareClassifier sc4(4, 2);
  REQUIRE(sc4.unit_is_square(R4, R4.from_int(-3), 5));
  REQUIRE_FALSE(sc4.unit_is_square(R4, R4.from_int(3), 5));
  REQUIRE_FALSE(sc4.unit_square_mod4(R4, R4.from_int(-1), 5));
  REQUIRE(sc4.unit_square_mod4(R4, R4.from_int(-3), 5));

  REQUIRE_THROWS_AS(scd.unit_is_square(Rd, Rd.from_int(1), 2),
                    tracegeom::InsufficientPrecision);
  REQUIRE_THROWS_AS(sc5.unit_is_square(R5, R5.from_int(1), 0),
                    tracegeom::InsufficientPrecision);
}

TEST_CASE("splitting classification matches independent root search") {
  for (uint64_t p : {2ull, 3ull, 5ull}) {
    for (long long x = -25; x <= 25; ++x) {
      if (x == 2 || x == -2) continue;
      auto g = tracegeom::classify_trace(p, p, cpp_int(x));
      INFO("p=" << p << " x=" << x);
      REQUIRE(g.type == brute_classify_int(p, x));
      cpp_int D = cpp_int(x) * x - 4;
      REQUIRE(g.nu_twice == tracegeom::vp_int(D, cpp_int(p)));
    }
  }
}

TEST_CASE("splitting classification pins") {
  using tracegeom::classify_trace;
  auto is = [](const GammaLocal& g, SplitType t, int twice) {
    return g.type == t && g.nu_twice == twice;
  };

  REQUIRE(is(classify_trace(5, 5, 3), SplitType::EllipticRamifiedTame, 1));
  REQUIRE(is(classify_trace(3, 3, 1), SplitType::EllipticRamifiedTame, 1));
  REQUIRE(is(classify_trace(5, 5, 4), SplitType::EllipticUnramified, 0));

  // dyadic traces
  REQUIRE(is(classify_trace(2, 2, 0), SplitType::EllipticRamifiedWild, 2));
  REQUIRE(is(classify_trace(2, 2, 1), SplitType::EllipticUnramified, 0));
  REQUIRE(is(classify_trace(2, 2, 4), SplitType::EllipticRamifiedWild, 2));
  REQUIRE(is(classify_trace(2, 2, 6), SplitType::EllipticRamifiedWild, 5));
  REQUIRE(is(classify_trace(2, 2, 18), SplitType::EllipticUnramified, 6));
  REQUIRE(is(classify_trace(2, 2, 46), SplitType::Split, 6));

  // base change to the unramified quadratic extension splits the unramified
  // tori and preserves ramification
  REQUIRE(is(classify_trace(4, 2, 1), SplitType::Split, 0));
  REQUIRE(is(classify_trace(4, 2, 18), SplitType::Split, 6));
  REQUIRE(is(classify_trace(4, 2, 0), SplitType::EllipticRamifiedWild, 2));
  REQUIRE(is(classify_trace(4, 2, 4), SplitType::EllipticRamifiedWild, 2));
  REQUIRE(is(classify_trace(9, 3, 7), SplitType::Split, 2));
  REQUIRE(is(classify_trace(3, 3, 7), SplitType::EllipticUnramified, 2));
  REQUIRE(is(classify_trace(25, 5, 1), SplitType::Split, 0));
  REQUIRE(is(classify_trace(5, 5, 1), SplitType::EllipticUnramified, 0));

  // regular integer traces used by the lattice point counts downstream
  REQUIRE(is(classify_trace(3, 3, 11), SplitType::Split, 2));
  REQUIRE(is(classify_trace(3, 3, 83), SplitType::Split, 4));
  REQUIRE(is(classify_trace(3, 3, 0), SplitType::EllipticUnramified, 0));
  REQUIRE(is(classify_trace(3, 3, 7), SplitType::EllipticUnramified, 2));
  REQUIRE(is(classify_trace(3, 3, 164), SplitType::EllipticUnramified, 4));
  REQUIRE(is(classify_trace(3, 3, 29), SplitType::EllipticRamifiedTame, 3));
  REQUIRE(is(classify_trace(5, 5, 5), SplitType::Split, 0));
  REQUIRE(is(classify_trace(5, 5, 27), SplitType::Split, 2));
  REQUIRE(is(classify_trace(5, 5, 627), SplitType::Split, 4));
  REQUIRE(is(classify_trace(5, 5, 77), SplitType::EllipticUnramified, 2));
  REQUIRE(is(classify_trace(5, 5, 1877), SplitType::EllipticUnramified, 4));
  REQUIRE(is(classify_trace(5, 5, 127), SplitType::EllipticRamifiedTame, 3));

  REQUIRE(classify_trace(3, 3, 29).ramified());
  REQUIRE_FALSE(classify_trace(3, 3, 11).ramified());
  REQUIRE(classify_trace(3, 3, 29).nu() == 1.5);

  REQUIRE_THROWS_AS(classify_trace(3, 3, 2), tracegeom::CentralElement);
  REQUIRE_THROWS_AS(classify_trace(3, 3, -2), tracegeom::CentralElement);

  // insufficient working precision is reported, not guessed
  {
    LocalRing R(3, 3, 2);
    SquareClassifier sc(3, 3);
    REQUIRE_THROWS_AS(tracegeom::classify_splitting(R, R.from_int(1), sc),
                      tracegeom::InsufficientPrecision);
  }
  {
    LocalRing R(3, 3, 3);
    SquareClassifier sc(3, 3);
    // 25^2 - 4 = 621 = 27 * 23 has valuation 3 = m, so v is not certified
    REQUIRE_THROWS_AS(tracegeom::classify_splitting(R, R.from_int(25), sc),
                      tracegeom::InsufficientPrecision);
  }
  REQUIRE(is(classify_trace(3, 3, 25), SplitType::EllipticRamifiedTame, 3));
}

TEST_CASE("classification is invariant under negation") {
  for (uint64_t p : {2ull, 3ull, 5ull}) {
    for (long long x = 0; x <= 25; ++x) {
      if (x == 2) continue;
      auto g1 = tracegeom::classify_trace(p, p, cpp_int(x));
      auto g2 = tracegeom::classify_trace(p, p, cpp_int(-x));
      INFO("p=" << p << " x=" << x);
      REQUIRE(g1.type == g2.type);
      REQUIRE(g1.nu_twice == g2.nu_twice);
    }
  }
}

TEST_CASE("congruence subgroup indices") {
  using tracegeom::subgroup_index;
  REQUIRE(subgroup_index(5, 0, 0) == 1);
  REQUIRE(subgroup_index(5, 0, 1) == 1);
  REQUIRE(subgroup_index(5, 1, 0) == 6);
  REQUIRE(subgroup_index(3, 1, 0) == 4);
  REQUIRE(subgroup_index(3, 2, 0) == 12);
  REQUIRE(subgroup_index(2, 1, 0) == 3);
  REQUIRE(subgroup_index(3, 1, 1, 2) == 12);
  REQUIRE(subgroup_index(2, 2, 1, 2) == 24);
  REQUIRE(subgroup_index(2, 1, 1, 1) == 6);
  REQUIRE(subgroup_index(2, 3, 1, 4) == 96);
  REQUIRE(subgroup_index(4, 1, 1, 1) == 60);
  REQUIRE(subgroup_index(4, 2, 1, 4) == 960);
  REQUIRE(subgroup_index(8, 1, 1, 1) == 504);
  REQUIRE(subgroup_index(9, 1, 1, 2) == 360);
  REQUIRE(subgroup_index(5, 1, 1, 2) == 60);
  REQUIRE(subgroup_index(7, 1, 1, 2) == 168);
  REQUIRE(subgroup_index(3, 2, 1, 2) == 324);

  // one extra level digit multiplies the index by q (j=0) or q^3 (j=1)
  for (uint64_t q : {2ull, 3ull, 4ull, 5ull, 9ull}) {
    for (int r = 2; r <= 4; ++r) {
      REQUIRE(subgroup_index(q, r, 0) == cpp_int(q) * subgroup_index(q, r - 1, 0));
      REQUIRE(subgroup_index(q, r, 1, 1) ==
              pow_u(cpp_int(q), 3) * subgroup_index(q, r - 1, 1, 1));
    }
  }

  REQUIRE_THROWS_AS(subgroup_index(3, 1, 1, 5), tracegeom::NonIntegerIndex);
  REQUIRE_THROWS_AS(subgroup_index(2, 1, 1, 4), tracegeom::NonIntegerIndex);
  REQUIRE_THROWS_AS(subgroup_index(3, 1, 1, 0), tracegeom::NonIntegerIndex);
  REQUIRE_THROWS_AS(subgroup_index(3, -1, 0), tracegeom::ConfigError);

  // the 2-torsion count always divides the raw orientation-free index
  const std::pair<uint64_t, uint64_t> fields[] = {{2, 2}, {4, 2}, {8, 2},
                                                  {3, 3}, {9, 3}, {5, 5},
                                                  {7, 7}};
  for (auto [q, p] : fields)
    for (int r = 1; r <= 4; ++r)
      REQUIRE_NOTHROW(
          subgroup_index(q, r, 1, tracegeom::two_torsion_count(q, p, r)));
}

TEST_CASE("unit group 2-torsion matches exhaustive count") {
  const std::pair<uint64_t, uint64_t> fields[] = {{2, 2}, {4, 2}, {8, 2},
                                                  {3, 3}, {9, 3}, {5, 5}};
  for (auto [q, p] : fields) {
    for (int r = 1; r <= 4; ++r) {
      if (q == 9 && r == 4) continue;  // keep the enumeration small
      LocalRing R(q, p, r);
      auto one = R.from_int(1);
      cpp_int count = 0;
      for_each_elem(R, [&](const LocalRing::Elem& x) {
        if (R.val(x) == 0 && R.mul(x, x) == one) ++count;
      });
      INFO("q=" << q << " r=" << r);
      REQUIRE(count == tracegeom::two_torsion_count(q, p, r));
    }
  }
  REQUIRE(tracegeom::two_torsion_count(2, 2, 1) == 1);
  REQUIRE(tracegeom::two_torsion_count(2, 2, 2) == 2);
  REQUIRE(tracegeom::two_torsion_count(2, 2, 3) == 4);
  REQUIRE(tracegeom::two_torsion_count(4, 2, 2) == 4);
  REQUIRE(tracegeom::two_torsion_count(4, 2, 3) == 8);
  REQUIRE(tracegeom::two_torsion_count(7, 7, 3) == 2);
}

TEST_CASE("level weight values") {
  using tracegeom::weight_w;
  // central traces carry the full weight
  REQUIRE(weight_w(3, 3, 1, 1, 2) == 9);
  REQUIRE(weight_w(3, 3, 1, 0, 2) == 1);
  REQUIRE(weight_w(3, 3, 2, 0, -2) == 3);
  REQUIRE(weight_w(5, 5, 2, 1, 2) == 625);
  REQUIRE(weight_w(2, 2, 3, 0, 2) == 2);
  REQUIRE(weight_w(2, 2, 3, 1, -2) == 64);

  REQUIRE(weight_w(3, 3, 2, 0, 1) == 0);
  REQUIRE(weight_w(5, 5, 3, 0, 627) == 5);
  REQUIRE(weight_w(2, 2, 1, 0, 0) == 1);
  REQUIRE(weight_w(2, 2, 1, 0, 1) == 0);
  REQUIRE(weight_w(2, 2, 1, 1, 46) == 4);
  REQUIRE(weight_w(3, 3, 2, 0, 11) == 3);
  REQUIRE(weight_w(3, 3, 4, 0, 11) == 3);
  // the square class is judged in the actual residue field
  REQUIRE(weight_w(3, 3, 4, 0, 7) == 0);
  REQUIRE(weight_w(9, 3, 4, 0, 7) == 9);

  // large residue fields go through exact big-integer powers
  REQUIRE(weight_w(101, 101, 1, 1, 2) == cpp_int(101) * 101);
  {
    LocalRing R(28561, 13, 10);  // 13^4
    SquareClassifier sc(28561, 13);
    REQUIRE(tracegeom::weight_w_residue(R, sc, R.from_int(2), 4, 1) ==
            pow_u(cpp_int(28561), 8));
    REQUIRE_THROWS_AS(tracegeom::weight_w_u64(R, sc, R.from_int(2), 4, 1),
                      tracegeom::OverflowGuard);
  }
}

TEST_CASE("weight precision guards") {
  LocalRing R3(3, 3, 1);
  SquareClassifier sc3(3, 3);
  REQUIRE_THROWS_AS(tracegeom::weight_exponent(R3, sc3, R3.from_int(0), 2, 0),
                    tracegeom::InsufficientPrecision);
  LocalRing R2(2, 2, 3);
  SquareClassifier sc2(2, 2);
  REQUIRE_THROWS_AS(tracegeom::weight_exponent(R2, sc2, R2.from_int(0), 2, 1),
                    tracegeom::InsufficientPrecision);
  REQUIRE_THROWS_AS(tracegeom::weight_exponent(R3, sc3, R3.from_int(0), 0, 0),
                    tracegeom::ConfigError);
}

TEST_CASE("local weight integrals: frozen exact values") {
  using tracegeom::weight_local_integral;
  REQUIRE(weight_local_integral(3, 3, 1, 1) == cpp_rational(2));
  REQUIRE(weight_local_integral(5, 5, 1, 1) == cpp_rational(2));
  REQUIRE(weight_local_integral(2, 2, 1, 1) == cpp_rational(2));
  REQUIRE(weight_local_integral(2, 2, 2, 1) == cpp_rational(4));
  REQUIRE(weight_local_integral(2, 2, 3, 1) == cpp_rational(8));
  // x = 2y gives x^2 - 4 = 4(y^2 - 1), so the whole maximal ideal qualifies
  REQUIRE(weight_local_integral(4, 2, 1, 1) == cpp_rational(4));
  REQUIRE(weight_local_integral(2, 2, 1, 0) == cpp_rational(1, 2));
  REQUIRE(weight_local_integral(3, 3, 1, 0) == cpp_rational(2, 3));
  REQUIRE(weight_local_integral(3, 3, 2, 0) == cpp_rational(2, 3));
  REQUIRE(weight_local_integral(4, 2, 1, 0) == cpp_rational(1, 2));
  REQUIRE(weight_local_integral(5, 5, 1, 0) == cpp_rational(3, 5));
}

TEST_CASE("ball weight integral equals the square root count of 4") {
  // the ball weight is q^{2r} on traces with x^2 = 4 mod p^{2r} and 0
  // elsewhere, so its mean equals the number of such roots
  const std::tuple<uint64_t, uint64_t, int> cells[] = {
      {2, 2, 1}, {2, 2, 2}, {2, 2, 3}, {3, 3, 1}, {3, 3, 2},
      {4, 2, 1}, {5, 5, 1}, {5, 5, 2}, {9, 3, 1}, {7, 7, 1}};
  for (auto [q, p, r] : cells) {
    INFO("q=" << q << " r=" << r);
    REQUIRE(tracegeom::weight_local_integral(q, p, r, 1) ==
            cpp_rational(count_sqrt4(q, p, 2 * r)));
  }
  // odd residue characteristic: exactly the two central square roots
  for (auto [q, p] : std::initializer_list<std::pair<uint64_t, uint64_t>>{
           {3, 3}, {5, 5}, {7, 7}, {9, 3}})
    for (int r = 1; r <= 2; ++r)
      REQUIRE(tracegeom::weight_local_integral(q, p, r, 1) == cpp_rational(2));
}

TEST_CASE("local weight integrals respect the a priori bound") {
  const std::tuple<uint64_t, uint64_t, int> cells[] = {
      {2, 2, 4}, {3, 3, 4}, {4, 2, 2}, {5, 5, 3}, {7, 7, 2}, {9, 3, 2}};
  for (auto [q, p, rmax] : cells) {
    for (int r = 1; r <= rmax; ++r) {
      for (int j = 0; j <= 1; ++j) {
        auto I = tracegeom::weight_local_integral(q, p, r, j);
        auto B = tracegeom::weight_integral_bound(q, p, j);
        INFO("q=" << q << " r=" << r << " j=" << j);
        REQUIRE(I > 0);
        REQUIRE(I <= B);
      }
    }
  }
}

TEST_CASE("integral is stable under extra working precision") {
  const std::tuple<uint64_t, uint64_t, int, int> cells[] = {
      {2, 2, 1, 0}, {2, 2, 1, 1}, {2, 2, 2, 1}, {3, 3, 1, 0},
      {3, 3, 1, 1}, {3, 3, 2, 0}, {5, 5, 1, 0}, {4, 2, 1, 0}};
  for (auto [q, p, r, j] : cells) {
    INFO("q=" << q << " r=" << r << " j=" << j);
    REQUIRE(tracegeom::weight_local_integral(q, p, r, j) ==
            tracegeom::weight_local_integral(q, p, r, j, 2));
  }
}

TEST_CASE("weights are periodic at the coarse modulus") {
  // w_0 has period 4 p^r, w_1 has period p^{2r}; checked over every residue
  // at the working modulus, shifting along each power basis direction
  const std::tuple<uint64_t, uint64_t, int, int> cells[] = {
      {2, 2, 1, 0}, {2, 2, 1, 1}, {2, 2, 2, 0}, {3, 3, 1, 0},
      {3, 3, 1, 1}, {3, 3, 2, 1}, {4, 2, 1, 0}, {4, 2, 1, 1},
      {5, 5, 1, 0}, {9, 3, 1, 1}};
  for (auto [q, p, r, j] : cells) {
    int vp4 = (p == 2) ? 2 : 0;
    int m = 2 * r + 2 * vp4 + 2;
    LocalRing R(q, p, m);
    SquareClassifier sc(q, p);
    int e = (j == 0) ? vp4 + r : 2 * r;
    REQUIRE(e <= m);
    uint64_t pe = 1;
    for (int i = 0; i < e; ++i) pe *= p;
    uint64_t mismatches = 0;
    for_each_elem(R, [&](const LocalRing::Elem& x) {
      int w = tracegeom::weight_exponent(R, sc, x, r, j);
      for (int i = 0; i < R.f; ++i) {
        LocalRing::Elem y = x;
        y[static_cast<std::size_t>(i)] =
            (y[static_cast<std::size_t>(i)] + pe) % R.pm;
        if (tracegeom::weight_exponent(R, sc, y, r, j) != w) ++mismatches;
      }
    });
    INFO("q=" << q << " r=" << r << " j=" << j);
    REQUIRE(mismatches == 0);
  }
}

TEST_CASE("enumeration budget guard") {
  REQUIRE_THROWS_AS(tracegeom::weight_local_integral(4, 2, 4, 0),
                    tracegeom::EnumerationBudgetExceeded);
  REQUIRE_THROWS_AS(tracegeom::weight_local_integral(7, 7, 4, 0),
                    tracegeom::EnumerationBudgetExceeded);
  REQUIRE_THROWS_AS(tracegeom::weight_local_integral(8, 2, 2, 0),
                    tracegeom::EnumerationBudgetExceeded);
}

TEST_CASE("combined periodicity modulus") {
  using tracegeom::LevelEntry;
  {
    auto pm = tracegeom::periodic_modulus({LevelEntry{cpp_int(3), 2, 0}});
    REQUIRE(pm.norm == 36);
    REQUIRE(pm.factors.size() == 1);
    REQUIRE(pm.factors[0] == std::pair<cpp_int, int>{cpp_int(3), 2});
  }
  {
    auto pm = tracegeom::periodic_modulus({LevelEntry{cpp_int(3), 1, 1}});
    REQUIRE(pm.norm == 36);
  }
  {
    auto pm = tracegeom::periodic_modulus(
        {LevelEntry{cpp_int(2), 1, 0}, LevelEntry{cpp_int(5), 1, 1}});
    REQUIRE(pm.norm == 200);
  }
  REQUIRE(tracegeom::periodic_modulus({}).norm == 4);
  REQUIRE(tracegeom::periodic_modulus({}, 2).norm == 16);
  REQUIRE_THROWS_AS(tracegeom::periodic_modulus({LevelEntry{cpp_int(3), 0, 0}}),
                    tracegeom::ConfigError);
}
