#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include <tracegeom/trace_geometry.hpp>

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

// rationals, algebra ramified at 2 and 3, no level
QuaternionSetting setting_q23() {
  QuaternionSetting s;
  s.field = rationals();
  s.a = 1;
  s.b = 0;
  s.c = 0;
  s.ram.push_back(split_prime(s.field, 2)[0]);
  s.ram.push_back(split_prime(s.field, 3)[0]);
  return s;
}

// Gaussian rationals, algebra ramified at the two primes over 13
QuaternionSetting setting_qi13() {
  QuaternionSetting s;
  s.field = gaussian();
  s.a = 0;
  s.b = 1;
  s.c = 0;
  auto ids = split_prime(s.field, 13);
  REQUIRE(ids.size() == 2);
  s.ram = ids;
  return s;
}

// real quadratic field of discriminant 5, ramified at the primes over 2, 3
QuaternionSetting setting_g23() {
  QuaternionSetting s;
  s.field = golden();
  s.a = 2;
  s.b = 0;
  s.c = 0;
  s.ram.push_back(split_prime(s.field, 2)[0]);
  s.ram.push_back(split_prime(s.field, 3)[0]);
  return s;
}

SpectralWindow one_exceptional(double sigma) {
  SpectralWindow w;
  w.places.push_back({true, sigma, 0.0});
  return w;
}

SpectralWindow one_tempered(double T) {
  SpectralWindow w;
  w.places.push_back({false, 0.0, T});
  return w;
}

}  // namespace

TEST_CASE("setting validation accepts the catalog settings") {
  CHECK_NOTHROW(validate_setting(setting_q23()));
  CHECK_NOTHROW(validate_setting(setting_qi13()));
  CHECK_NOTHROW(validate_setting(setting_g23()));
}

TEST_CASE("setting validation rejects malformed input") {
  auto s = setting_q23();

  SECTION("signature must match the field") {
    s.a = 0;
    s.c = 1;
    CHECK_THROWS_AS(validate_setting(s), InvalidSetting);
    s.a = 2;
    s.c = 0;
    CHECK_THROWS_AS(validate_setting(s), InvalidSetting);
  }
  SECTION("odd ramification set") {
    s.ram.pop_back();
    CHECK_THROWS_AS(validate_setting(s), InvalidSetting);
  }
  SECTION("empty ramification set") {
    s.ram.clear();
    CHECK_THROWS_AS(validate_setting(s), InvalidSetting);
  }
  SECTION("level not coprime to ramification") {
    LevelPrime lp;
    lp.ideal = split_prime(s.field, 2)[0];
    lp.r = 1;
    s.level.push_back(lp);
    CHECK_THROWS_WITH(validate_setting(s),
                      Catch::Matchers::ContainsSubstring("not coprime"));
  }
  SECTION("repeated ramified prime") {
    s.ram.push_back(split_prime(s.field, 3)[0]);
    s.ram.push_back(split_prime(s.field, 5)[0]);
    CHECK_THROWS_AS(validate_setting(s), InvalidSetting);
  }
  SECTION("composite prime") {
    PrimeIdealData pd;
    pd.p = 15;
    pd.q = 15;
    s.ram[0] = pd;
    CHECK_THROWS_AS(validate_setting(s), InvalidSetting);
  }
  SECTION("norm disagrees with p^f") {
    s.ram[0].q = 4;
    CHECK_THROWS_AS(validate_setting(s), InvalidSetting);
  }
  SECTION("bad level exponent and kappa") {
    LevelPrime lp;
    lp.ideal = split_prime(s.field, 5)[0];
    lp.r = 0;
    s.level.push_back(lp);
    CHECK_THROWS_AS(validate_setting(s), InvalidSetting);
    s.level[0].r = 1;
    s.level[0].kappa = 2;
    CHECK_THROWS_AS(validate_setting(s), InvalidSetting);
  }
  SECTION("splitting data contradicting the field") {
    auto g = setting_g23();
    // the prime over 2 is inert of norm 4 there, not of norm 2
    g.ram[0].f = 1;
    g.ram[0].q = 2;
    CHECK_THROWS_AS(validate_setting(g), InvalidSetting);
  }
}

TEST_CASE("window validation") {
  auto s = setting_q23();
  CHECK_NOTHROW(validate_window(s, one_exceptional(0.25)));
  CHECK_NOTHROW(validate_window(s, one_tempered(14.0)));
  SpectralWindow w;
  CHECK_THROWS_AS(validate_window(s, w), WindowMismatch);
  w = one_exceptional(0.6);
  CHECK_THROWS_AS(validate_window(s, w), WindowMismatch);
  w = one_exceptional(-0.1);
  CHECK_THROWS_AS(validate_window(s, w), WindowMismatch);
}

TEST_CASE("covolume of the maximal lattice: rational pin") {
  auto vol = borel_volume(setting_q23());
  Interval target = pi_interval() / Interval(3.0);
  CHECK(vol.width() < 1e-6);
  CHECK(vol.lo <= target.hi);
  CHECK(vol.hi >= target.lo);
  CHECK(vol.lo > std::exp(-7.0));
}

TEST_CASE("covolume of the maximal lattice: imaginary quadratic pin") {
  auto vol = borel_volume(setting_qi13());
  Interval target = Interval(24.0) * catalan_interval();
  CHECK(vol.width() < 1e-3);
  CHECK(vol.lo <= target.hi);
  CHECK(vol.hi >= target.lo);
}

TEST_CASE("covolume of the maximal lattice: real quadratic smoke") {
  auto vol = borel_volume(setting_g23());
  CHECK(vol.lo > std::exp(-7.0));
  CHECK(vol.hi < 40.0);
  CHECK(vol.width() / vol.lo < 1e-3);
}

TEST_CASE("integrality exponent of a parameter tuple") {
  using C = std::complex<double>;
  CHECK(p_of_parameter({C(0.0, 14.0)}) == 2.0);
  CHECK(p_of_parameter({C(0.25, 0.0)}) == Catch::Approx(4.0));
  CHECK(p_of_parameter({C(0.1, 0.0), C(0.25, 0.0)}) == Catch::Approx(4.0));
  CHECK(std::isinf(p_of_parameter({C(0.5, 0.0)})));
  CHECK(p_of_parameter({C(-0.25, 3.0)}) == Catch::Approx(4.0));
  CHECK_THROWS_AS(p_of_parameter({}), WindowMismatch);
  CHECK_THROWS_AS(p_of_parameter({C(0.7, 0.0)}), WindowMismatch);
}

TEST_CASE("conductor at full level has no tempered inflation") {
  auto s = setting_q23();
  auto ci = conductor_and_exponent(s, one_exceptional(0.25));
  CHECK(ci.index == 1);
  Interval target = pi_interval() / Interval(3.0);
  CHECK(ci.C.lo <= target.hi);
  CHECK(ci.C.hi >= target.lo);
  CHECK(ci.two_over_p == Catch::Approx(0.5));
  CHECK(ci.p_sigma == Catch::Approx(4.0));
  // C^{1/2}
  CHECK(ci.ref_power.contains(std::sqrt(M_PI / 3.0)));
}

TEST_CASE("conductor with a tempered slot scales by (1+T)^rho") {
  auto s = setting_q23();
  auto ci = conductor_and_exponent(s, one_tempered(3.0));
  CHECK(ci.C.contains(4.0 * M_PI / 3.0));
  CHECK(ci.two_over_p == 1.0);
  CHECK(ci.p_sigma == 2.0);

  auto sqi = setting_qi13();
  auto ci2 = conductor_and_exponent(sqi, one_tempered(3.0));
  // complex place: rho = 2
  double vol = 24.0 * 0.9159655941772190;
  CHECK(ci2.C.lo < vol * 16.0);
  CHECK(ci2.C.hi > vol * 15.99);
}

TEST_CASE("conductor on the critical line gives trivial reference power") {
  auto s = setting_q23();
  auto ci = conductor_and_exponent(s, one_exceptional(0.5));
  CHECK(ci.two_over_p == 0.0);
  CHECK(std::isinf(ci.p_sigma));
  CHECK(ci.ref_power.contains(1.0));
}

TEST_CASE("level index multiplies the covolume into the conductor") {
  auto s = setting_q23();
  LevelPrime lp;
  lp.ideal = split_prime(s.field, 5)[0];
  lp.r = 1;
  lp.kappa = 0;
  s.level.push_back(lp);
  auto ci = conductor_and_exponent(s, one_exceptional(0.25));
  CHECK(ci.index == 6);  // [K : K_0(p)] = q + 1
  CHECK(ci.C.contains(2.0 * M_PI));
  CHECK(ci.vol.contains(2.0 * M_PI));
  CHECK(ci.vol_maximal.contains(M_PI / 3.0));
}

TEST_CASE("savings exponent spends the whole budget at the worst slot") {
  auto s = setting_q23();
  auto ci = conductor_and_exponent(s, one_exceptional(0.25));
  auto ra = choose_R(s, one_exceptional(0.25), ci);
  CHECK(ra.slot == 0);
  CHECK(ra.budget == Catch::Approx(7.0 + std::log(M_PI / 3.0)).epsilon(1e-9));
  CHECK(ra.R[0] == Catch::Approx(ra.budget));
  CHECK(ra.sum_rhoR == Catch::Approx(ra.budget));

  // complex place: rho = 2 halves the radius
  auto sqi = setting_qi13();
  auto wqi = one_exceptional(0.3);
  auto ciqi = conductor_and_exponent(sqi, wqi);
  auto raqi = choose_R(sqi, wqi, ciqi);
  CHECK(raqi.slot == 0);
  CHECK(raqi.R[0] == Catch::Approx(raqi.budget / 2.0));
  CHECK(raqi.sum_rhoR == Catch::Approx(raqi.budget));
}

TEST_CASE("savings exponent slot selection over two places") {
  auto s = setting_g23();
  SpectralWindow w;
  w.places.push_back({true, 0.3, 0.0});
  w.places.push_back({true, 0.4, 0.0});
  auto ci = conductor_and_exponent(s, w);
  auto ra = choose_R(s, w, ci);
  CHECK(ra.slot == 1);
  CHECK(ra.R[0] == 0.0);
  CHECK(ra.R[1] == Catch::Approx(ra.budget));

  // ties go to the lowest index
  w.places[1].sigma = 0.3;
  ra = choose_R(s, w, ci);
  CHECK(ra.slot == 0);

  // a tempered slot never receives the budget
  w.places[0] = {false, 0.0, 5.0};
  auto ci2 = conductor_and_exponent(s, w);
  ra = choose_R(s, w, ci2);
  CHECK(ra.slot == 1);
  CHECK(ra.R[0] == 0.0);
}

TEST_CASE("all-tempered window takes no savings") {
  auto s = setting_q23();
  auto ci = conductor_and_exponent(s, one_tempered(8.0));
  auto ra = choose_R(s, one_tempered(8.0), ci);
  CHECK(ra.slot == -1);
  CHECK(ra.R[0] == 0.0);
  CHECK(ra.sum_rhoR == 0.0);
}

TEST_CASE("trace region radii follow e^{rho (R+2)}") {
  auto s = setting_q23();
  auto ci = conductor_and_exponent(s, one_exceptional(0.25));
  auto ra = choose_R(s, one_exceptional(0.25), ci);
  auto P = trace_region(s, ra);
  REQUIRE(P.radius.size() == 1);
  CHECK(P.radius[0] == Catch::Approx(std::exp(ra.R[0] + 2.0)));

  auto sqi = setting_qi13();
  auto ciqi = conductor_and_exponent(sqi, one_exceptional(0.3));
  auto raqi = choose_R(sqi, one_exceptional(0.3), ciqi);
  auto Pqi = trace_region(sqi, raqi);
  REQUIRE(Pqi.radius.size() == 1);
  // complex place: the radius bounds the square modulus
  CHECK(Pqi.radius[0] == Catch::Approx(std::exp(2.0 * (raqi.R[0] + 2.0))));

  auto sg = setting_g23();
  SpectralWindow w;
  w.places.push_back({true, 0.4, 0.0});
  w.places.push_back({true, 0.1, 0.0});
  auto cig = conductor_and_exponent(sg, w);
  auto rag = choose_R(sg, w, cig);
  auto Pg = trace_region(sg, rag);
  REQUIRE(Pg.radius.size() == 2);
  CHECK(Pg.radius[0] == Catch::Approx(std::exp(rag.R[0] + 2.0)));
  CHECK(Pg.radius[1] == Catch::Approx(std::exp(2.0)));
}

TEST_CASE("trace region soundness against the support of the test functions") {
  // an element with |tr| = 2 cosh(h/2) at hyperbolic height h is seen only
  // when h <= 2R + 2; the region radius e^{R+2} must cover every such trace
  for (double R : {0.0, 1.0, 3.5, 7.05, 12.0}) {
    double hmax = 2.0 * R + 2.0;
    double tr = 2.0 * std::cosh(hmax / 2.0);
    CHECK(tr <= std::exp(R + 2.0));
    // complex place, radius on the square modulus: |tr|^2 <= 4 cosh(h)
    double tr2 = 4.0 * std::cosh(hmax);
    CHECK(tr2 <= std::exp(2.0 * (R + 2.0)));
  }
}

TEST_CASE("quadratic Dirichlet values at 1: classical pins") {
  // chi_{-4}: L(1) = pi/4
  auto L = dirichlet_L1_fundamental(cpp_int(-4));
  CHECK(L.contains(M_PI / 4.0));
  CHECK(L.width() < 1e-9);
  // chi_{-3}: L(1) = pi / sqrt(27)
  L = dirichlet_L1_fundamental(cpp_int(-3));
  CHECK(L.contains(M_PI / std::sqrt(27.0)));
  // chi_5: L(1) = (2/sqrt 5) log phi
  L = dirichlet_L1_fundamental(cpp_int(5));
  CHECK(L.contains(2.0 / std::sqrt(5.0) * std::log(0.5 * (1 + std::sqrt(5.0)))));
  CHECK(L.width() < 1e-7);
  // chi_8: L(1) = log(1 + sqrt 2) / sqrt 2
  L = dirichlet_L1_fundamental(cpp_int(8));
  CHECK(L.contains(std::log(1.0 + std::sqrt(2.0)) / std::sqrt(2.0)));
  // chi_12: L(1) = log(2 + sqrt 3) / sqrt 3
  L = dirichlet_L1_fundamental(cpp_int(12));
  CHECK(L.contains(std::log(2.0 + std::sqrt(3.0)) / std::sqrt(3.0)));
  // chi_{-8}: L(1) = pi / sqrt 8  (class number 1, two units)
  L = dirichlet_L1_fundamental(cpp_int(-8));
  CHECK(L.contains(M_PI / std::sqrt(8.0)));
  // huge conductor falls back to the crude window
  L = dirichlet_L1_fundamental(cpp_int(5) * 100003 * 4);
  CHECK(L.lo == 0.0);
  CHECK(L.hi > 1.0);
  CHECK_THROWS_AS(dirichlet_L1_fundamental(cpp_int(1)), ConfigError);
  CHECK_THROWS_AS(dirichlet_L1_fundamental(cpp_int(6)), ConfigError);
}

TEST_CASE("centralizer volume bound: rational pins") {
  auto k = rationals();
  // tr 0: discriminant -4, L(1) = pi/4, bound 2 L sqrt(4) = pi
  auto cb = centralizer_volume_upper(k, {cpp_int(0)});
  CHECK(cb.norm_delta == 4);
  CHECK(cb.rel_disc_norm == 4);
  CHECK(cb.disc_exact);
  CHECK(cb.lvalue_rigorous);
  CHECK(cb.omega == 1);
  CHECK(cb.bound.contains(M_PI));
  CHECK(cb.bound.width() < 1e-8);
  // tr 3: discriminant 5, bound 2 L(1, chi_5) sqrt(5) = 4 log phi
  cb = centralizer_volume_upper(k, {cpp_int(3)});
  CHECK(cb.rel_disc_norm == 5);
  CHECK(cb.bound.contains(4.0 * std::log(0.5 * (1.0 + std::sqrt(5.0)))));
  // tr 1: discriminant -3
  cb = centralizer_volume_upper(k, {cpp_int(1)});
  CHECK(cb.rel_disc_norm == 3);
  CHECK(cb.bound.contains(2.0 * M_PI / std::sqrt(27.0) * std::sqrt(3.0)));
  // tr 6: x^2 - 4 = 32 = 2^5: fundamental discriminant 8
  cb = centralizer_volume_upper(k, {cpp_int(6)});
  CHECK(cb.norm_delta == 32);
  CHECK(cb.omega == 1);
  CHECK(cb.rel_disc_norm == 8);
  // central traces carry no class
  CHECK_THROWS_AS(centralizer_volume_upper(k, {cpp_int(2)}), CentralTrace);
  CHECK_THROWS_AS(centralizer_volume_upper(k, {cpp_int(-2)}), CentralTrace);
}

TEST_CASE("centralizer volume bound over quadratic fields") {
  auto kg = golden();
  // tr 3: x^2 - 4 = 5 is a square there (5 = (2 phi - 1)^2): no class
  CHECK_THROWS_AS(centralizer_volume_upper(kg, {cpp_int(3), cpp_int(0)}),
                  CentralTrace);
  // tr 2 phi: delta = 4 phi, inert dyadic exponent decided exactly
  auto cb = centralizer_volume_upper(kg, {cpp_int(0), cpp_int(2)});
  CHECK(cb.norm_delta == 16);
  CHECK(cb.omega == 1);
  CHECK(cb.disc_exact);
  CHECK(cb.rel_disc_norm == 16);
  CHECK(!cb.lvalue_rigorous);
  CHECK(cb.bound.lo > 0.0);

  auto ki = gaussian();
  // tr 0 splits over the Gaussian rationals (x^2 - 4 = (2i)^2)
  CHECK_THROWS_AS(centralizer_volume_upper(ki, {cpp_int(0), cpp_int(0)}),
                  CentralTrace);
  // tr i: delta = -5, two split odd primes, ramified dyadic prime capped
  cb = centralizer_volume_upper(ki, {cpp_int(0), cpp_int(1)});
  CHECK(cb.norm_delta == 25);
  CHECK(cb.omega == 2);
  CHECK(!cb.disc_exact);
  CHECK(cb.rel_disc_norm == 400);  // 5 * 5 * (ramified dyadic cap 2^4)
  CHECK(cb.bound.lo > 0.0);
}

TEST_CASE("inert square test agrees with the norm character") {
  // u is a square in the residue field of an inert prime iff N(u) is a
  // square mod p
  auto k = golden();
  auto ids = split_prime(k, 3);
  REQUIRE(ids.size() == 1);
  REQUIRE(ids[0].f == 2);
  int checked = 0;
  for (int a0 = -4; a0 <= 4; ++a0)
    for (int a1 = -4; a1 <= 4; ++a1) {
      std::vector<cpp_int> u{cpp_int(a0), cpp_int(a1)};
      cpp_rational nr = k.norm(u);
      cpp_int n = numerator(nr);
      if (((n % 3) + 3) % 3 == 0) continue;  // not a unit at the prime
      auto pw = tgdetail::powmod_element(k, u, (ids[0].q - 1) / 2, ids[0].p);
      bool sq = pw[0] == 1 && pw[1] == 0;
      cpp_int nm = ((n % 3) + 3) % 3;
      bool nsq = (nm == 1);
      CHECK(sq == nsq);
      ++checked;
    }
  CHECK(checked > 50);
}

TEST_CASE("residues at split primes reduce the element correctly") {
  auto k = gaussian();
  auto ids = split_prime(k, 5);
  REQUIRE(ids.size() == 2);
  cpp_int pM = pow_cpp(cpp_int(5), 4);
  for (auto& id : ids) {
    REQUIRE(id.gen_valid);
    for (auto& x : std::vector<std::vector<cpp_int>>{
             {cpp_int(3), cpp_int(1)}, {cpp_int(-7), cpp_int(2)},
             {cpp_int(0), cpp_int(1)}}) {
      cpp_int res = tgdetail::split_residue(k, id, x, pM);
      // x - res must vanish to order >= 4 at the prime
      std::vector<cpp_int> diff{x[0] - res, x[1]};
      CHECK(val_at_prime(k, id, diff) >= 4);
    }
  }
}

TEST_CASE("ledger row: class count exponent and telescoping") {
  auto s = setting_q23();
  LedgerBuilder b(s, 4.0, Interval(1.0), 7.0461);
  auto row = b.row({cpp_int(4)});
  // delta = 12 = 2^2 * 3: two prime divisors; exponent 1 + 2 + 2
  CHECK(row.omega == 2);
  CHECK(row.count_log2 == 5);
  CHECK(row.norm_delta == 12);
  CHECK(row.rel_disc_norm == 12);
  CHECK(row.disc_exact);
  CHECK(row.telescope_exact);
  // the four display brackets multiply back to e^{sum rho R}
  Interval prod = row.tele[0] * row.tele[1] * row.tele[2] * row.tele[3];
  CHECK(prod.contains(std::exp(7.0461)));
  CHECK(row.weight == 1);
  CHECK(!row.weight_is_bound);
  CHECK(row.total.lo >= 0.0);
  CHECK(row.total.hi < 1e9);

  // without level the weight is 1 for every trace
  bool wb = true;
  CHECK(b.weight_of({cpp_int(17)}, &wb) == 1);
  CHECK(!wb);
}

TEST_CASE("ledger row totals are computed in the cancelled form") {
  // the row total must equal 2^count * centralizer * orbital up to interval
  // slack, with the relative discriminant cancelled between the factors
  auto s = setting_q23();
  LedgerBuilder b(s, 4.0, Interval(2.0), 0.0);
  for (long long t : {0LL, 1LL, 4LL, 7LL, 12LL, 101LL}) {
    auto row = b.row({cpp_int(t)});
    Interval direct = pow_int(Interval(2.0), row.count_log2) *
                      row.centralizer * row.orbital;
    CHECK(row.total.lo <= direct.hi * (1.0 + 1e-12));
    CHECK(row.total.hi >= direct.lo * (1.0 - 1e-12));
  }
}

TEST_CASE("level weights through the builder match the local tables") {
  auto s = setting_q23();
  LevelPrime lp5;
  lp5.ideal = split_prime(s.field, 5)[0];
  lp5.r = 2;
  lp5.kappa = 0;
  LevelPrime lp2;
  lp2.ideal = split_prime(s.field, 7)[0];
  lp2.r = 1;
  lp2.kappa = 1;
  s.level = {lp5, lp2};
  LedgerBuilder b(s, 4.0, Interval(1.0), 0.0);
  for (long long t = -30; t <= 30; ++t) {
    cpp_int expect = weight_w(5, 5, 2, 0, cpp_int(t)) *
                     weight_w(7, 7, 1, 1, cpp_int(t));
    CHECK(b.weight_of({cpp_int(t)}) == expect);
  }
}

TEST_CASE("level weights over quadratic fields") {
  SECTION("split prime: weight factors through the residue") {
    QuaternionSetting s = setting_qi13();
    LevelPrime lp;
    auto ids = split_prime(s.field, 5);
    REQUIRE(ids.size() == 2);
    lp.ideal = ids[0];
    lp.r = 1;
    lp.kappa = 0;
    s.level = {lp};
    LedgerBuilder b(s, 4.0, Interval(1.0), 0.0);
    cpp_int pM = pow_cpp(cpp_int(5), 4);
    for (int a0 = -6; a0 <= 6; ++a0)
      for (int a1 = -6; a1 <= 6; ++a1) {
        std::vector<cpp_int> x{cpp_int(a0), cpp_int(a1)};
        cpp_int res = tgdetail::split_residue(s.field, ids[0], x, pM);
        CHECK(b.weight_of(x) == weight_w(5, 5, 1, 0, res));
      }
  }
  SECTION("inert prime: weight decided by valuation and square class") {
    QuaternionSetting s = setting_g23();
    // move the ramification off the level prime
    s.ram.clear();
    s.ram.push_back(split_prime(s.field, 2)[0]);
    s.ram.push_back(split_prime(s.field, 7)[0]);
    LevelPrime lp;
    lp.ideal = split_prime(s.field, 3)[0];
    REQUIRE(lp.ideal.f == 2);
    lp.r = 1;
    lp.kappa = 0;
    s.level = {lp};
    LedgerBuilder b(s, 4.0, Interval(1.0), 0.0);
    long nonzero = 0, zero = 0;
    for (int a0 = -7; a0 <= 7; ++a0)
      for (int a1 = -7; a1 <= 7; ++a1) {
        std::vector<cpp_int> x{cpp_int(a0), cpp_int(a1)};
        cpp_int w = b.weight_of(x);
        auto D = tgdetail::delta_coords(s.field, x);
        if (tgdetail::is_zero(D)) continue;
        int v = val_at_prime(s.field, lp.ideal, D);
        if (v >= 1) {
          CHECK(w == 1);  // q^{floor(r/2)} = 1 at r = 1
        } else {
          // square class of the unit decides membership
          CHECK((w == 0 || w == 1));
        }
        (w == 0 ? zero : nonzero)++;
      }
    CHECK(nonzero > 20);
    CHECK(zero > 20);
  }
}

TEST_CASE("window test functions and archimedean row factor") {
  auto s = setting_q23();
  auto w = one_exceptional(0.25);
  auto ci = conductor_and_exponent(s, w);
  auto ra = choose_R(s, w, ci);
  auto tfs = window_test_functions(s, w, ra);
  REQUIRE(tfs.size() == 1);
  CHECK(tfs[0].place().kind == ArchKind::Real);

  auto arch = arch_row_factor(s, tfs);
  REQUIRE(arch.per_place.size() == 1);
  CHECK(arch.per_place[0] > 0.0);
  CHECK(arch.per_place[0] <= M_PI * tfs[0].sup_hc() * (1.0 + 1e-12));
  CHECK(arch.per_place[0] <=
        0.5 * tfs[0].integral_abs_transform() * (1.0 + 1e-12));
  CHECK(arch.total.contains(arch.per_place[0]));

  // mismatched kind is rejected
  auto sqi = setting_qi13();
  CHECK_THROWS_AS(arch_row_factor(sqi, tfs), ConfigError);
}

TEST_CASE("spectral floor of a window is positive and attained at the edge") {
  auto s = setting_q23();
  auto w = one_exceptional(0.25);
  auto ci = conductor_and_exponent(s, w);
  auto ra = choose_R(s, w, ci);
  auto tfs = window_test_functions(s, w, ra);
  double floor = window_spectral_floor(s, w, tfs);
  CHECK(floor > 0.0);
  // the transform grows along the real axis: the minimum sits at sigma
  CHECK(floor <= tfs[0].transform(std::complex<double>(0.25, 0.0)).real() *
                     (1.0 + 1e-12));
  CHECK(floor <= tfs[0].transform(std::complex<double>(0.5, 0.0)).real());

  auto wt = one_tempered(8.0);
  auto cit = conductor_and_exponent(s, wt);
  auto rat = choose_R(s, wt, cit);
  auto tft = window_test_functions(s, wt, rat);
  CHECK(window_spectral_floor(s, wt, tft) > 0.0);
}

TEST_CASE("one-shot per-class bound") {
  auto s = setting_q23();
  auto w = one_exceptional(0.25);
  auto ci = conductor_and_exponent(s, w);
  auto ra = choose_R(s, w, ci);
  auto tfs = window_test_functions(s, w, ra);
  auto row = per_class_bound(s, {cpp_int(4)}, 4.0, tfs, ra.sum_rhoR);
  CHECK(row.count_log2 == 5);
  CHECK(row.total.lo >= 0.0);
  CHECK(row.telescope_exact);
  // the one-shot bound must be monotone in the absolute constant
  auto row8 = per_class_bound(s, {cpp_int(4)}, 8.0, tfs, ra.sum_rhoR);
  CHECK(row8.total.hi > row.total.hi);
}

TEST_CASE("weight sums over a region against the local integrals") {
  auto s = setting_q23();
  LevelPrime lp;
  lp.ideal = split_prime(s.field, 5)[0];
  lp.r = 1;
  lp.kappa = 0;
  s.level = {lp};
  Polycylinder P;
  P.radius = {50.0};
  auto rep = weight_sum_over_region(s, P, Interval(100.0));
  CHECK(rep.count == 101);
  cpp_int direct = 0;
  for (long long t = -50; t <= 50; ++t)
    direct += weight_w(5, 5, 1, 0, cpp_int(t));
  CHECK(rep.sum_w == direct);
  CHECK(rep.integral <= rep.integral_cap);
  CHECK(rep.rhs.lo > 0.0);
  CHECK(rep.ratio > 0.0);
}

TEST_CASE("lattice point count bound for cylinders") {
  auto k = rationals();
  Polycylinder P;
  P.radius = {80.0};
  // counts of an arithmetic progression inside the region
  // the true count is at most an absolute constant times the reference
  constexpr double kCountConst = 4.0;
  for (long long M : {1LL, 3LL, 7LL, 41LL}) {
    SubLattice m;
    m.a = M;
    std::vector<cpp_int> y{cpp_int(1)};
    auto pts = enumerate_polycylinder(k, P, &y, &m);
    auto bound = cylinder_count_bound(k, cpp_int(M), P);
    CHECK(static_cast<double>(pts.size()) <= kCountConst * bound.hi);
  }
  auto ki = gaussian();
  Polycylinder Pi;
  Pi.radius = {70.0};
  auto pts = enumerate_polycylinder(ki, Pi, nullptr, nullptr);
  auto bound = cylinder_count_bound(ki, cpp_int(1), Pi);
  CHECK(static_cast<double>(pts.size()) <= kCountConst * bound.hi);
}

TEST_CASE("end-to-end geometric bound over the rationals") {
  auto s = setting_q23();
  auto w = one_exceptional(0.25);
  auto rep = geometric_and_multiplicity_bound(s, w);

  CHECK(rep.R.slot == 0);
  CHECK(rep.R.budget == Catch::Approx(7.0 + std::log(M_PI / 3.0)).margin(1e-4));
  CHECK(rep.region.radius[0] == Catch::Approx(std::exp(rep.R.R[0] + 2.0)));
  CHECK(rep.skipped_central == 2);
  CHECK(rep.skipped_split == 0);
  CHECK(rep.rows.size() > 16000);

  CHECK(rep.central.lo > 0.0);
  CHECK(rep.regular.lo >= 0.0);
  CHECK(rep.total.hi < std::numeric_limits<double>::infinity());
  CHECK(rep.spectral_floor > 0.0);
  CHECK(rep.final_bound.lo > 0.0);
  CHECK(rep.final_over_ref > 0.0);

  // e^{-2 rho R sigma} at one real slot
  CHECK(rep.exp_factor.contains(std::exp(-2.0 * rep.R.R[0] * 0.25)));
  // savings form = exp factor * total
  Interval sf = rep.exp_factor * rep.total;
  CHECK(rep.savings_form.lo == Catch::Approx(sf.lo));

  // no fallback paths on rational rows in this region
  CHECK(!rep.any_coarse_disc);
  CHECK(!rep.any_lvalue_nonrigorous);
  CHECK(!rep.any_omega_bound);
  CHECK(!rep.any_weight_bound);

  for (auto& row : rep.rows) {
    CHECK(row.telescope_exact);
    CHECK(row.total.lo >= 0.0);
  }
}

TEST_CASE("all-tempered window produces a finite report") {
  auto s = setting_q23();
  auto w = one_tempered(6.0);
  auto rep = geometric_and_multiplicity_bound(s, w);
  CHECK(rep.weyl_regime);
  CHECK(rep.R.slot == -1);
  // short support: the region stays small
  CHECK(rep.region.radius[0] == Catch::Approx(std::exp(2.0)));
  CHECK(rep.rows.size() < 30);
  CHECK(rep.final_bound.lo > 0.0);
  CHECK(rep.exp_factor.contains(1.0));
}
