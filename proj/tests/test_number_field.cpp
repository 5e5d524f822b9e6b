#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "tracegeom/number_field.hpp"

using namespace tracegeom;

namespace {

std::vector<cpp_int> ipoly(std::initializer_list<long long> cs) {
  std::vector<cpp_int> v;
  for (long long c : cs) v.push_back(c);
  return v;
}

NumberFieldSpec rationals() { return parse_field(ipoly({0, 1})); }
NumberFieldSpec gaussian() { return parse_field(ipoly({1, 0, 1})); }
NumberFieldSpec golden() { return parse_field(ipoly({-1, -1, 1})); }

}  // namespace

TEST_CASE("parse_field basic examples") {
  auto q = rationals();
  CHECK(q.d == 1);
  CHECK(q.disc_abs == 1);
  CHECK(q.r1 == 1);
  CHECK(q.r2 == 0);

  auto qi = gaussian();
  CHECK(qi.d == 2);
  CHECK(qi.disc_abs == 4);
  CHECK(qi.disc_signed == -4);
  CHECK(qi.r1 == 0);
  CHECK(qi.r2 == 1);

  auto q5 = golden();
  CHECK(q5.disc_abs == 5);
  CHECK(q5.r1 == 2);
  CHECK(q5.r2 == 0);

  // cyclotomic field of conductor 5
  auto z5 = parse_field(ipoly({1, 1, 1, 1, 1}), std::nullopt, cpp_int(125));
  CHECK(z5.d == 4);
  CHECK(z5.disc_abs == 125);
  CHECK(z5.r1 == 0);
  CHECK(z5.r2 == 2);

  auto cubic = parse_field(ipoly({-1, -1, 0, 1}));
  CHECK(cubic.disc_signed == -23);
  CHECK(cubic.r1 == 1);
  CHECK(cubic.r2 == 1);
}

TEST_CASE("parse_field rejects bad inputs") {
  CHECK_THROWS_AS(parse_field(ipoly({-1, 0, 1})), ReduciblePolynomial);
  CHECK_THROWS_AS(parse_field(ipoly({-4, 0, 1})), ReduciblePolynomial);
  // (x^2+1)(x^2+2) = x^4 + 3x^2 + 2
  CHECK_THROWS_AS(parse_field(ipoly({2, 0, 3, 0, 1})), ReduciblePolynomial);
  CHECK_THROWS_AS(parse_field(ipoly({1, 0, 0, 0, 0, 1})), UnsupportedDegree);
  // non-fundamental power basis without a certificate
  CHECK_THROWS_AS(parse_field(ipoly({-5, 0, 1})), DiscriminantMismatch);
  CHECK_THROWS_AS(parse_field(ipoly({-1, -1, 1}), std::nullopt, cpp_int(7)),
                  DiscriminantMismatch);
  // basis {1, sqrt(5)/2} is not closed under multiplication
  std::vector<std::vector<cpp_rational>> nb = {{1, 0}, {0, cpp_rational(1, 2)}};
  CHECK_THROWS_AS(parse_field(ipoly({-5, 0, 1}), nb), BasisNotARing);
}

TEST_CASE("parse_field with maximal basis for sqrt(5)") {
  std::vector<std::vector<cpp_rational>> b = {
      {1, 0}, {cpp_rational(1, 2), cpp_rational(1, 2)}};
  auto k = parse_field(ipoly({-5, 0, 1}), b);
  CHECK(k.disc_abs == 5);
  CHECK(k.index == 2);
  // trace/norm of the second basis element (1+sqrt5)/2: x^2 - x - 1
  std::vector<cpp_int> beta{0, 1};
  CHECK(k.trace(beta) == 1);
  CHECK(k.norm(beta) == -1);
}

TEST_CASE("dedekind maximal order with index divisor") {
  // classic cubic with essential discriminant divisor 2
  std::vector<std::vector<cpp_rational>> b = {
      {1, 0, 0}, {0, 1, 0}, {0, cpp_rational(1, 2), cpp_rational(1, 2)}};
  auto k = parse_field(ipoly({8, -2, 1, 1}), b);
  CHECK(k.disc_signed == -503);
  CHECK(k.index == 2);
  CHECK_THROWS_AS(split_prime(k, cpp_int(2)), IndexDivisorUnsupported);
  auto s3 = split_prime(k, cpp_int(3));
  int efsum = 0;
  for (auto& pd : s3) efsum += pd.e * pd.f;
  CHECK(efsum == 3);
}

TEST_CASE("split_prime over the rationals and quadratic fields") {
  auto q = rationals();
  auto s7 = split_prime(q, cpp_int(7));
  REQUIRE(s7.size() == 1);
  CHECK(s7[0].q == 7);

  auto qi = gaussian();
  auto s5 = split_prime(qi, cpp_int(5));
  REQUIRE(s5.size() == 2);
  CHECK(s5[0].f == 1);
  CHECK(s5[1].f == 1);
  CHECK(s5[0].gen_valid);
  auto s2 = split_prime(qi, cpp_int(2));
  REQUIRE(s2.size() == 1);
  CHECK(s2[0].e == 2);
  CHECK(s2[0].q == 2);
  auto s3 = split_prime(qi, cpp_int(3));
  REQUIRE(s3.size() == 1);
  CHECK(s3[0].f == 2);
  CHECK(s3[0].q == 9);
}

TEST_CASE("split_prime in the conductor-5 cyclotomic field") {
  auto z5 = parse_field(ipoly({1, 1, 1, 1, 1}), std::nullopt, cpp_int(125));
  auto s5 = split_prime(z5, cpp_int(5));
  REQUIRE(s5.size() == 1);
  CHECK(s5[0].e == 4);
  CHECK(s5[0].f == 1);

  auto s11 = split_prime(z5, cpp_int(11));
  REQUIRE(s11.size() == 4);
  std::set<cpp_int> roots;
  for (auto& pd : s11) {
    REQUIRE(pd.gen.size() == 2);
    roots.insert((cpp_int(11) - pd.gen[0]) % 11);
  }
  CHECK(roots == std::set<cpp_int>{3, 4, 5, 9});

  auto s2 = split_prime(z5, cpp_int(2));
  REQUIRE(s2.size() == 1);
  CHECK(s2[0].f == 4);
  CHECK(s2[0].q == 16);

  auto s19 = split_prime(z5, cpp_int(19));
  REQUIRE(s19.size() == 2);
  CHECK(s19[0].f == 2);
  CHECK(s19[1].f == 2);
}

TEST_CASE("dedekind zeta enclosures at 2") {
  auto q = rationals();
  const double zeta2 = 1.6449340668482264;  // pi^2/6
  auto i1 = dedekind_zeta2(q, 1000);
  auto i2 = dedekind_zeta2(q, 10000);
  auto i3 = dedekind_zeta2(q, 100000);
  CHECK(i1.lo <= zeta2);
  CHECK(zeta2 <= i1.hi);
  CHECK(i3.lo <= zeta2);
  CHECK(zeta2 <= i3.hi);
  // nested as the bound grows
  CHECK(i1.lo <= i2.lo);
  CHECK(i2.hi <= i1.hi);
  CHECK(i2.lo <= i3.lo);
  CHECK(i3.hi <= i2.hi);
  // true tail at 1e5 is ~8.2e-7 relative, so ~1.35e-6 absolute
  CHECK(i3.hi - i3.lo < 1.5e-6);

  // zeta_{Q(i)}(2) = zeta(2) * Catalan
  auto qi = gaussian();
  Interval target = zeta2_interval() * catalan_interval();
  auto g1 = dedekind_zeta2(qi, 20000);
  CHECK(g1.lo <= target.hi);
  CHECK(target.lo <= g1.hi);
  CHECK(g1.hi - g1.lo < 1e-4);

  auto q5a = dedekind_zeta2(golden(), 500);
  auto q5b = dedekind_zeta2(golden(), 5000);
  CHECK(q5a.lo <= q5b.lo);
  CHECK(q5b.hi <= q5a.hi);
}

TEST_CASE("covolume matches sqrt of the discriminant") {
  auto check_cov = [](const NumberFieldSpec& k) {
    double expect = std::sqrt(static_cast<double>(k.disc_abs.convert_to<double>()));
    CHECK(std::abs(k.covolume() - expect) <= 1e-9 * expect);
  };
  check_cov(gaussian());
  check_cov(golden());
  check_cov(parse_field(ipoly({1, 1, 1, 1, 1}), std::nullopt, cpp_int(125)));
  check_cov(parse_field(ipoly({-1, -1, 0, 1})));
}

TEST_CASE("polycylinder volumes") {
  auto qi = gaussian();
  Polycylinder p1{{2.0}};
  auto v1 = p1.volume(qi);
  CHECK(v1.lo <= 2 * 3.14159265358979312);
  CHECK(2 * 3.14159265358979312 <= v1.hi * (1 + 1e-15));

  auto q5 = golden();
  Polycylinder p2{{3.0, 3.0}};
  auto v2 = p2.volume(q5);
  CHECK(v2.lo <= 36.0);
  CHECK(36.0 <= v2.hi);

  auto cubic = parse_field(ipoly({-1, -1, 0, 1}));
  Polycylinder p3{{2.0, 1.5}};
  auto v3 = p3.volume(cubic);
  double expect = 2 * 2.0 * 3.141592653589793 * 1.5;
  CHECK(v3.lo <= expect);
  CHECK(expect <= v3.hi);

  Polycylinder bad{{2.0}};
  CHECK_THROWS_AS(bad.volume(q5), InvalidSetting);
}

TEST_CASE("enumeration over the rationals") {
  auto q = rationals();
  Polycylinder p{{3.0}};
  auto pts = enumerate_polycylinder(q, p);
  REQUIRE(pts.size() == 7);  // -3..3, boundary included
  CHECK(pts.front()[0] == -3);
  CHECK(pts.back()[0] == 3);
}

TEST_CASE("enumeration in the gaussian integers") {
  auto qi = gaussian();
  Polycylinder p{{2.0}};  // module bound |x|^2 <= 2
  auto pts = enumerate_polycylinder(qi, p);
  CHECK(pts.size() == 9);  // a^2+b^2 <= 2

  // against a brute double loop with the exact predicate
  std::size_t brute = 0;
  for (long a = -4; a <= 4; ++a)
    for (long b = -4; b <= 4; ++b) {
      std::vector<cpp_int> c{a, b};
      if (place_filter_exact(qi, c, 0, 2.0)) ++brute;
    }
  CHECK(brute == pts.size());
}

TEST_CASE("enumeration in the golden field against brute force") {
  auto q5 = golden();
  Polycylinder p{{3.0, 3.0}};
  auto pts = enumerate_polycylinder(q5, p);
  std::set<std::pair<long, long>> got;
  for (auto& c : pts)
    got.insert({c[0].convert_to<long>(), c[1].convert_to<long>()});
  std::set<std::pair<long, long>> brute;
  for (long a = -12; a <= 12; ++a)
    for (long b = -12; b <= 12; ++b) {
      std::vector<cpp_int> c{a, b};
      if (place_filter_exact(q5, c, 0, 3.0) && place_filter_exact(q5, c, 1, 3.0))
        brute.insert({a, b});
    }
  CHECK(got == brute);
  CHECK(got.count({0, 0}) == 1);
  CHECK(got.count({2, 0}) == 1);
  // elements are sorted lexicographically
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i - 1] < pts[i]);
}

TEST_CASE("enumeration with cosets and ideals") {
  auto qi = gaussian();
  // the ideal (1+i) has index 2
  auto L = principal_ideal(qi, {1, 1});
  CHECK(L.index_in_ring(2) == 2);
  Polycylinder p{{2.0}};
  std::vector<cpp_int> y{1, 0};
  auto pts = enumerate_polycylinder(qi, p, &y, &L);
  CHECK(pts.size() == 4);  // odd-sum pairs with a^2+b^2 <= 2
  for (auto& c : pts) CHECK((c[0] + c[1]) % 2 != 0);

  auto empty = enumerate_polycylinder(qi, Polycylinder{{0.5}}, &y, &L);
  CHECK(empty.empty());
}

TEST_CASE("prime ideal lattices and valuations in Q(i)") {
  auto qi = gaussian();
  auto s5 = split_prime(qi, cpp_int(5));
  auto L0 = prime_ideal_lattice(qi, s5[0]);
  CHECK(L0.index_in_ring(2) == 5);

  // 2+i has norm 5: valuation 1 at exactly one of the two primes
  std::vector<cpp_int> el{2, 1};
  int v0 = val_at_prime(qi, s5[0], el);
  int v1 = val_at_prime(qi, s5[1], el);
  CHECK(v0 + v1 == 1);
  CHECK((v0 == 0 || v1 == 0));

  auto s3 = split_prime(qi, cpp_int(3));
  CHECK(val_at_prime(qi, s3[0], {3, 3}) == 1);
  CHECK(val_at_prime(qi, s3[0], {2, 1}) == 0);
  CHECK(val_at_prime(qi, s3[0], {9, 0}) == 2);

  auto s2 = split_prime(qi, cpp_int(2));
  CHECK(val_at_prime(qi, s2[0], {1, 1}) == 1);
  CHECK(val_at_prime(qi, s2[0], {2, 0}) == 2);
  CHECK(val_at_prime(qi, s2[0], {1, 0}) == 0);
}

TEST_CASE("square detection in the field") {
  auto q = rationals();
  CHECK(is_square_in_field(q, {49}));
  CHECK_FALSE(is_square_in_field(q, {50}));

  auto q5 = golden();
  CHECK(is_square_in_field(q5, {5, 0}));   // (2*phi-1)^2 = 5
  CHECK(is_square_in_field(q5, {4, 0}));
  CHECK_FALSE(is_square_in_field(q5, {3, 0}));
  CHECK_FALSE(is_square_in_field(q5, {0, 1}));  // phi has norm -1
  // phi^2 = phi + 1 is a square
  CHECK(is_square_in_field(q5, {1, 1}));

  auto qi = gaussian();
  CHECK(is_square_in_field(qi, {0, 2}));  // (1+i)^2 = 2i
  CHECK_FALSE(is_square_in_field(qi, {0, 1}));
}

TEST_CASE("signature compatibility") {
  auto q5 = golden();
  CHECK(q5.compatible_signature(2, 0, 0));
  CHECK(q5.compatible_signature(1, 0, 1));
  CHECK(q5.compatible_signature(0, 0, 2));
  CHECK_FALSE(q5.compatible_signature(0, 1, 0));
  auto qi = gaussian();
  CHECK(qi.compatible_signature(0, 1, 0));
  CHECK_FALSE(qi.compatible_signature(1, 0, 1));
}

TEST_CASE("enumeration budget guard") {
  auto q = rationals();
  Polycylinder p{{1e9}};
  CHECK_THROWS_AS(enumerate_polycylinder(q, p, nullptr, nullptr, 1000),
                  OverflowGuard);
}
