#pragma once

// Counting on the (q+1)-regular tree of lattice classes: fixed-point sets of
// regular semisimple classes, their level-r configuration counts for both
// vertex and edge stabilizer variants, and the resulting local integrals with
// a priori bounds.
//
// Two independent routes are provided.  count_fixed_closed evaluates the
// counts on an abstract model of the fixed set (an apartment tube or a ball
// around a vertex or an edge).  count_fixed_bruteforce enumerates lattice
// classes in canonical form and tests gamma-invariance directly, one matrix
// product per vertex.  The two must agree wherever both are exact.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "tracegeom/errors.hpp"
#include "tracegeom/padic_local.hpp"
#include "tracegeom/primes.hpp"

namespace tracegeom {

// ---------------------------------------------------------------------------
// exact values of the form c * q^(-half/2)
// ---------------------------------------------------------------------------

struct QPowHalf {
  cpp_rational c;
  int half = 0;  // kept in {0, 1}; any even part is folded into c

  static QPowHalf make(cpp_rational c_, int half_, uint64_t q) {
    QPowHalf x{std::move(c_), half_};
    while (x.half >= 2) { x.c /= q; x.half -= 2; }
    while (x.half < 0) { x.c *= q; x.half += 2; }
    return x;
  }

  bool is_zero() const { return c == 0; }

  // comparison with an exact rational, valid for nonnegative values
  bool leq(const cpp_rational& x, uint64_t q) const {
    if (c < 0) throw ConfigError("leq expects a nonnegative value");
    if (half == 0) return c <= x;
    if (x < 0) return false;
    return c * c <= x * x * q;
  }

  double approx(uint64_t q) const {
    double v = c.convert_to<double>();
    if (half == 1) v /= std::sqrt(static_cast<double>(q));
    return v;
  }
};

// ratio a / b of two such values (b nonzero)
inline QPowHalf qph_div(const QPowHalf& a, const QPowHalf& b, uint64_t q) {
  if (b.is_zero()) throw ConfigError("division by a zero bound");
  return QPowHalf::make(a.c / b.c, a.half - b.half, q);
}

// ---------------------------------------------------------------------------
// shape of the fixed-point set of a regular class on the tree
// ---------------------------------------------------------------------------

struct FixedSetDescriptor {
  enum class Kind { TubeApartment, BallVertex, BallEdge };
  Kind kind = Kind::BallVertex;
  int nu_twice = 0;      // valuation of the discriminant of the class
  int anchor_parity = 0; // BallVertex: parity of the center vertex
  int edge_radius = 0;   // BallEdge: radius around the fixed edge
  bool exact = true;     // false when the shape is only an upper envelope
};

// The split fixed set is the radius-nu tube around the apartment of the two
// eigenlines.  Unramified elliptic classes fix the ball of radius nu around
// one vertex whose parity equals nu mod 2 (the class is integral, so the
// standard vertex is fixed and the center sits at even distance nu from it
// exactly when nu is even).  Ramified classes fix a neighborhood of an edge;
// for tame classes the radius (v(disc) - 1)/2 is attained, for wild ones it
// is only an upper envelope.
inline FixedSetDescriptor fixed_set(const GammaLocal& g) {
  FixedSetDescriptor d;
  d.nu_twice = g.nu_twice;
  switch (g.type) {
    case SplitType::Split:
      d.kind = FixedSetDescriptor::Kind::TubeApartment;
      break;
    case SplitType::EllipticUnramified:
      d.kind = FixedSetDescriptor::Kind::BallVertex;
      d.anchor_parity = (g.nu_twice / 2) % 2;
      break;
    case SplitType::EllipticRamifiedTame:
      d.kind = FixedSetDescriptor::Kind::BallEdge;
      d.edge_radius = (g.nu_twice - 1) / 2;
      break;
    case SplitType::EllipticRamifiedWild:
      d.kind = FixedSetDescriptor::Kind::BallEdge;
      d.edge_radius = (g.nu_twice - 1) / 2;
      d.exact = false;
      break;
  }
  return d;
}

// ---------------------------------------------------------------------------
// configuration counts and the local integral values they produce
// ---------------------------------------------------------------------------

struct OrbitalCount {
  cpp_int count;      // configurations at distance / containment radius r
  bool exact = true;  // false when the count is only an upper bound
  cpp_rational O;     // vol-normalized value of the integral
  QPowHalf Oprime;    // O scaled by q^(-v(disc)/2)
};

namespace btdetail {

inline OrbitalCount make_orbital(uint64_t q, cpp_int count, bool exact, int r,
                                 int j, int nu_twice) {
  OrbitalCount oc;
  oc.count = std::move(count);
  oc.exact = exact;
  // pairs at distance r are counted per coset of the level subgroup; the
  // containment count is already a plain vertex count
  if (j == 0)
    oc.O = cpp_rational(oc.count, subgroup_index(q, r, 0));
  else
    oc.O = cpp_rational(oc.count);
  cpp_rational c = oc.O / pow_cpp(cpp_int(q), static_cast<unsigned>(nu_twice / 2));
  oc.Oprime = QPowHalf::make(c, nu_twice % 2, q);
  return oc;
}

// ---------------------------------------------------------------------------
// abstract shape graphs: a window of the tube, or a ball
// ---------------------------------------------------------------------------

struct ShapeNode {
  int parity = 0;  // 0 marks the even class of vertices
  int depth = 0;   // distance to the apartment / anchor vertex / anchor edge
  int proj = 0;    // tube only: apartment position under the retraction
};

struct Shape {
  std::vector<ShapeNode> nodes;
  std::vector<std::vector<int>> adj;
  bool is_tube = false;
  int radius = 0;  // containment radius: nu, or the edge-ball radius

  int add_node(int parity, int depth, int proj) {
    nodes.push_back({parity, depth, proj});
    adj.emplace_back();
    if (nodes.size() > 300000) throw EnumerationBudgetExceeded("shape graph too large");
    return static_cast<int>(nodes.size()) - 1;
  }

  void add_edge(int i, int j) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
};

inline void grow_bush(Shape& s, uint64_t q, int parent, int depth, int max_depth,
                      int parity, int proj) {
  if (depth > max_depth) return;
  uint64_t width = (depth == 1) ? q - 1 : q;
  for (uint64_t i = 0; i < width; ++i) {
    int n = s.add_node((parity + depth) % 2, depth, proj);
    s.add_edge(parent, n);
    grow_bush(s, q, n, depth + 1, max_depth, parity, proj);
  }
}

// window [-W, W] of the radius-nu tube around an apartment
inline Shape build_tube(uint64_t q, int nu, int W) {
  Shape s;
  s.is_tube = true;
  s.radius = nu;
  std::vector<int> apt;
  for (int i = -W; i <= W; ++i)
    apt.push_back(s.add_node(((i % 2) + 2) % 2, 0, i));
  for (std::size_t k = 0; k + 1 < apt.size(); ++k) s.add_edge(apt[k], apt[k + 1]);
  for (int i = -W; i <= W; ++i)
    grow_bush(s, q, apt[static_cast<std::size_t>(i + W)], 1, nu, ((i % 2) + 2) % 2, i);
  return s;
}

inline void grow_ball(Shape& s, uint64_t q, int parent, int depth, int max_depth,
                      int parity) {
  if (depth > max_depth) return;
  for (uint64_t i = 0; i < q; ++i) {
    int n = s.add_node((parity + depth) % 2, depth, 0);
    s.add_edge(parent, n);
    grow_ball(s, q, n, depth + 1, max_depth, parity);
  }
}

inline Shape build_vertex_ball(uint64_t q, int nu, int eps) {
  Shape s;
  s.radius = nu;
  int root = s.add_node(eps % 2, 0, 0);
  if (nu >= 1) {
    // the root has q+1 neighbors; one extra branch on top of the q-ary growth
    int extra = s.add_node((eps + 1) % 2, 1, 0);
    s.add_edge(root, extra);
    grow_ball(s, q, extra, 2, nu, eps);
    grow_ball(s, q, root, 1, nu, eps);
  }
  return s;
}

inline Shape build_edge_ball(uint64_t q, int ell) {
  Shape s;
  s.radius = ell;
  int a = s.add_node(0, 0, 0);
  int b = s.add_node(1, 0, 0);
  s.add_edge(a, b);
  grow_ball(s, q, a, 1, ell, 0);
  grow_ball(s, q, b, 1, ell, 1);
  return s;
}

inline std::vector<int> bfs_dist(const Shape& s, int src) {
  std::vector<int> dist(s.nodes.size(), -1);
  std::deque<int> qu{src};
  dist[static_cast<std::size_t>(src)] = 0;
  while (!qu.empty()) {
    int v = qu.front();
    qu.pop_front();
    for (int u : s.adj[static_cast<std::size_t>(v)])
      if (dist[static_cast<std::size_t>(u)] < 0) {
        dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(v)] + 1;
        qu.push_back(u);
      }
  }
  return dist;
}

}  // namespace btdetail

// Structural evaluation of the configuration count.  For j = 0 it counts
// ordered pairs (x, y) of fixed vertices at distance r with y in the even
// class, x ranging over a fundamental domain (tube: apartment positions
// {0, 1}; balls carry no translation symmetry).  For j = 1 it counts even
// fixed vertices whose radius-r ball consists of fixed vertices.
inline OrbitalCount count_fixed_closed(uint64_t q, const FixedSetDescriptor& d,
                                       int r, int j) {
  if (q < 2) throw ConfigError("residue field too small");
  if (r < 0 || r > 8) throw UnsupportedRadius("level exponent outside the supported range");
  if (j != 0 && j != 1) throw ConfigError("variant index must be 0 or 1");
  if (d.nu_twice < 0 || d.nu_twice > 9)
    throw UnsupportedRadius("discriminant valuation outside the supported range");

  using K = FixedSetDescriptor::Kind;
  btdetail::Shape s;
  switch (d.kind) {
    case K::TubeApartment: {
      int nu = d.nu_twice / 2;
      s = btdetail::build_tube(q, nu, r + 2 * nu + 4);
      break;
    }
    case K::BallVertex:
      s = btdetail::build_vertex_ball(q, d.nu_twice / 2, d.anchor_parity);
      break;
    case K::BallEdge:
      s = btdetail::build_edge_ball(q, d.edge_radius);
      break;
  }

  cpp_int count = 0;
  auto x_allowed = [&](int i) {
    return !s.is_tube || s.nodes[static_cast<std::size_t>(i)].proj == 0 ||
           s.nodes[static_cast<std::size_t>(i)].proj == 1;
  };
  int n = static_cast<int>(s.nodes.size());
  if (j == 0) {
    for (int x = 0; x < n; ++x) {
      if (!x_allowed(x)) continue;
      auto dist = btdetail::bfs_dist(s, x);
      for (int y = 0; y < n; ++y)
        if (dist[static_cast<std::size_t>(y)] == r &&
            s.nodes[static_cast<std::size_t>(y)].parity == 0)
          ++count;
    }
  } else {
    for (int x = 0; x < n; ++x) {
      const auto& nd = s.nodes[static_cast<std::size_t>(x)];
      if (nd.parity == 0 && nd.depth + r <= s.radius && x_allowed(x)) ++count;
    }
  }
  return btdetail::make_orbital(q, count, d.exact, r, j, d.nu_twice);
}

// ---------------------------------------------------------------------------
// exact arithmetic in o/p^m with unbounded m (coordinates are big integers)
// ---------------------------------------------------------------------------

struct TreeRing {
  uint64_t q = 2, p = 2;
  int f = 1;
  int m = 1;
  cpp_int pm;
  std::vector<uint64_t> gmod;  // monic minimal polynomial of the generator

  using Elem = std::array<cpp_int, 4>;

  TreeRing(uint64_t q_, uint64_t p_, int m_) : q(q_), p(p_) {
    LocalRing probe(q_, p_, 1);  // validates q = p^f and pins the generator
    f = probe.f;
    gmod = probe.gmod;
    if (m_ < 1) throw ConfigError("ring precision must be positive");
    m = m_;
    pm = pow_cpp(cpp_int(p), static_cast<unsigned>(m));
  }

  Elem zero() const { return Elem{0, 0, 0, 0}; }

  cpp_int red(cpp_int x) const {
    x %= pm;
    if (x < 0) x += pm;
    return x;
  }

  Elem from_int(const cpp_int& x) const {
    Elem e{0, 0, 0, 0};
    e[0] = red(x);
    return e;
  }

  bool is_zero(const Elem& a) const {
    for (int i = 0; i < f; ++i)
      if (a[static_cast<std::size_t>(i)] != 0) return false;
    return true;
  }

  Elem add(const Elem& a, const Elem& b) const {
    Elem c{0, 0, 0, 0};
    for (int i = 0; i < f; ++i)
      c[static_cast<std::size_t>(i)] =
          red(a[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(i)]);
    return c;
  }

  Elem sub(const Elem& a, const Elem& b) const {
    Elem c{0, 0, 0, 0};
    for (int i = 0; i < f; ++i)
      c[static_cast<std::size_t>(i)] =
          red(a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]);
    return c;
  }

  Elem mul(const Elem& a, const Elem& b) const {
    std::array<cpp_int, 7> w{};
    for (int i = 0; i < f; ++i) {
      if (a[static_cast<std::size_t>(i)] == 0) continue;
      for (int j = 0; j < f; ++j)
        w[static_cast<std::size_t>(i + j)] +=
            a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
    }
    for (int i = 2 * f - 2; i >= f; --i) {
      cpp_int c = red(w[static_cast<std::size_t>(i)]);
      if (c == 0) continue;
      w[static_cast<std::size_t>(i)] = 0;
      for (int jj = 0; jj < f; ++jj)
        w[static_cast<std::size_t>(i - f + jj)] -= c * gmod[static_cast<std::size_t>(jj)];
    }
    Elem out{0, 0, 0, 0};
    for (int i = 0; i < f; ++i) out[static_cast<std::size_t>(i)] = red(w[static_cast<std::size_t>(i)]);
    return out;
  }

  // valuation, capped at m
  int val(const Elem& a) const {
    int best = m;
    for (int i = 0; i < f; ++i) {
      cpp_int c = a[static_cast<std::size_t>(i)];
      if (c == 0) continue;
      int v = 0;
      while (v < best && c % p == 0) { c /= p; ++v; }
      if (v < best) best = v;
    }
    return best;
  }

  Elem shift_down(const Elem& a, int v) const {
    cpp_int pv = pow_cpp(cpp_int(p), static_cast<unsigned>(v));
    Elem c{0, 0, 0, 0};
    for (int i = 0; i < f; ++i) {
      if (a[static_cast<std::size_t>(i)] % pv != 0)
        throw ComputationError("shift_down: valuation too small");
      c[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)] / pv;
    }
    return c;
  }

  Elem reduce_mod(const Elem& a, int k) const {
    cpp_int pk = pow_cpp(cpp_int(p), static_cast<unsigned>(std::min(k, m)));
    Elem c{0, 0, 0, 0};
    for (int i = 0; i < f; ++i) c[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)] % pk;
    return c;
  }

  // inverse of a unit: residue-field inverse, then quadratic lifting
  Elem inv(const Elem& u) const {
    if (val(u) != 0) throw ComputationError("inv of a non-unit");
    Elem z;
    if (f == 1) {
      z = from_int(inv_mod(u[0] % p, cpp_int(p)));
    } else {
      // u^(q-2) in the residue field
      Elem base = reduce_mod(u, 1), acc = from_int(1);
      uint64_t e = q - 2;
      while (e) {
        if (e & 1U) acc = reduce_mod(mul(acc, base), 1);
        base = reduce_mod(mul(base, base), 1);
        e >>= 1U;
      }
      z = acc;
    }
    Elem two = from_int(2);
    for (int digits = 1; digits < m; digits *= 2)
      z = mul(z, sub(two, mul(u, z)));
    if (!is_zero(sub(mul(u, z), from_int(1))))
      throw ComputationError("unit inverse failed to converge");
    return z;
  }
};

// ---------------------------------------------------------------------------
// canonical lattice classes and the action of 2x2 matrices
// ---------------------------------------------------------------------------

using TreeMat = std::array<std::array<TreeRing::Elem, 2>, 2>;  // [row][col]

inline TreeMat mat_mul(const TreeRing& R, const TreeMat& A, const TreeMat& B) {
  TreeMat C;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      C[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          R.add(R.mul(A[static_cast<std::size_t>(i)][0], B[0][static_cast<std::size_t>(j)]),
                R.mul(A[static_cast<std::size_t>(i)][1], B[1][static_cast<std::size_t>(j)]));
  return C;
}

// adjugate; realizes the inverse action on lattice classes for invertible M
inline TreeMat mat_adj(const TreeRing& R, const TreeMat& M) {
  TreeMat A;
  A[0][0] = M[1][1];
  A[0][1] = R.sub(R.zero(), M[0][1]);
  A[1][0] = R.sub(R.zero(), M[1][0]);
  A[1][1] = M[0][0];
  return A;
}

inline TreeRing::Elem mat_det(const TreeRing& R, const TreeMat& M) {
  return R.sub(R.mul(M[0][0], M[1][1]), R.mul(M[0][1], M[1][0]));
}

inline TreeRing::Elem mat_trace(const TreeRing& R, const TreeMat& M) {
  return R.add(M[0][0], M[1][1]);
}

inline TreeMat companion_matrix(const TreeRing& R, const cpp_int& x) {
  TreeMat M;
  M[0][0] = R.zero();
  M[0][1] = R.from_int(-1);
  M[1][0] = R.from_int(1);
  M[1][1] = R.from_int(x);
  return M;
}

// A lattice class in canonical form: basis columns (p^a, 0) and (c, p^b)
// with c reduced mod p^a and min(a, b, v(c)) = 0.  The class of the standard
// lattice is (0, 0, 0); distance to it is a + b and parity is a + b mod 2.
struct TreeVertex {
  int a = 0, b = 0;
  TreeRing::Elem c{0, 0, 0, 0};

  bool operator==(const TreeVertex& o) const { return a == o.a && b == o.b && c == o.c; }
  bool operator!=(const TreeVertex& o) const { return !(*this == o); }
  bool operator<(const TreeVertex& o) const {
    if (a != o.a) return a < o.a;
    if (b != o.b) return b < o.b;
    return c < o.c;
  }

  int dist_to_base() const { return a + b; }
  int parity() const { return (a + b) % 2; }
};

inline TreeMat vertex_basis(const TreeRing& R, const TreeVertex& v) {
  TreeMat M;
  M[0][0] = R.from_int(pow_cpp(cpp_int(R.p), static_cast<unsigned>(v.a)));
  M[1][0] = R.zero();
  M[0][1] = v.c;
  M[1][1] = R.from_int(pow_cpp(cpp_int(R.p), static_cast<unsigned>(v.b)));
  return M;
}

// Column reduction to the canonical form.  One elimination step divides by
// the smaller bottom-row valuation, so the result is trusted only while the
// pivot valuations stay well below the working precision; beyond that the
// reduction refuses loudly rather than return corrupt classes.
inline TreeVertex canonicalize(const TreeRing& R, TreeMat M) {
  int v20 = R.val(M[1][0]), v21 = R.val(M[1][1]);
  if (v20 < v21) {
    std::swap(M[0][0], M[0][1]);
    std::swap(M[1][0], M[1][1]);
    std::swap(v20, v21);
  }
  if (v21 >= R.m) throw PrecisionExhausted("bottom row vanishes at working precision");
  if (v20 < R.m) {
    auto t = R.mul(R.shift_down(M[1][0], v21), R.inv(R.shift_down(M[1][1], v21)));
    M[0][0] = R.sub(M[0][0], R.mul(t, M[0][1]));
  }
  int prec = R.m - v21;  // digits of M[0][0] still trustworthy
  int alpha = R.val(M[0][0]);
  int beta = v21;
  if (alpha >= prec - 1 || beta >= prec - 1)
    throw PrecisionExhausted("pivot valuation too close to working precision");
  auto c = R.mul(M[0][1], R.inv(R.shift_down(M[1][1], beta)));
  c = R.reduce_mod(c, alpha);
  int vc = std::min(R.val(c), alpha);
  int s = std::min(std::min(alpha, beta), vc);
  TreeVertex v;
  v.a = alpha - s;
  v.b = beta - s;
  v.c = R.reduce_mod(R.shift_down(c, s), v.a);
  return v;
}

inline TreeVertex apply_mat(const TreeRing& R, const TreeMat& g, const TreeVertex& v) {
  return canonicalize(R, mat_mul(R, g, vertex_basis(R, v)));
}

// the q+1 neighbors: the q index-p sublattices missing the first basis line,
// then the one containing it
inline std::vector<TreeVertex> tree_neighbors(const TreeRing& R, const TreeVertex& v) {
  std::vector<TreeVertex> out;
  cpp_int pa = pow_cpp(cpp_int(R.p), static_cast<unsigned>(v.a));
  cpp_int pb = pow_cpp(cpp_int(R.p), static_cast<unsigned>(v.b));
  for (uint64_t code = 0; code < R.q; ++code) {
    TreeRing::Elem t{0, 0, 0, 0};
    uint64_t cc = code;
    for (int i = 0; i < R.f; ++i) {
      t[static_cast<std::size_t>(i)] = cc % R.p;
      cc /= R.p;
    }
    TreeMat M;
    M[0][0] = R.from_int(pa * R.p);
    M[1][0] = R.zero();
    M[0][1] = R.add(v.c, R.mul(t, R.from_int(pa)));
    M[1][1] = R.from_int(pb);
    out.push_back(canonicalize(R, M));
  }
  TreeMat M;
  M[0][0] = R.from_int(pa);
  M[1][0] = R.zero();
  M[0][1] = R.mul(v.c, R.from_int(R.p));
  M[1][1] = R.from_int(pb * R.p);
  out.push_back(canonicalize(R, M));
  return out;
}

// ---------------------------------------------------------------------------
// brute-force enumeration of the fixed set
// ---------------------------------------------------------------------------

namespace btdetail {

struct FixedTester {
  const TreeRing& R;
  const TreeMat& gamma;
  std::map<TreeVertex, bool> cache;

  bool operator()(const TreeVertex& v) {
    auto it = cache.find(v);
    if (it != cache.end()) return it->second;
    bool fx = apply_mat(R, gamma, v) == v;
    cache.emplace(v, fx);
    return fx;
  }
};

// translation along the split apartment: gamma plus the scalar -T0, where T0
// approximates an eigenvalue just closely enough that the two eigenvalues of
// the sum differ in valuation by exactly 2
inline TreeMat split_shift(const TreeRing& R, const TreeMat& gamma,
                           const GammaLocal& g) {
  int nu = g.nu_twice / 2;
  int mm = 2 * nu + 4;
  LocalRing S(g.q, g.p, mm);
  LocalRing::Elem x{0, 0, 0, 0};
  {
    auto tr = mat_trace(R, gamma);
    for (int i = 0; i < R.f; ++i)
      x[static_cast<std::size_t>(i)] =
          (tr[static_cast<std::size_t>(i)] % S.pm).convert_to<uint64_t>();
  }
  uint64_t scan = 1;
  for (int i = 0; i < S.f * (nu + 2); ++i) scan *= S.p;
  uint64_t step = 1;
  for (int i = 0; i < nu + 2; ++i) step *= S.p;
  for (uint64_t code = 0; code < scan; ++code) {
    LocalRing::Elem t0{0, 0, 0, 0};
    uint64_t cc = code;
    for (int i = 0; i < S.f; ++i) {
      uint64_t digit = 0, pw = 1;
      for (int k = 0; k < nu + 2; ++k) {
        digit += (cc % S.p) * pw;
        pw *= S.p;
        cc /= S.p;
      }
      t0[static_cast<std::size_t>(i)] = digit;
    }
    auto fv = S.add(S.sub(S.mul(t0, t0), S.mul(x, t0)), S.from_int(1));
    int v = S.val(fv);
    if (v < 2 * nu + 2) continue;
    if (v > 2 * nu + 2) {
      // nudging by p^(nu+2) restores the exact valuation 2nu+2
      t0[0] += step;
      fv = S.add(S.sub(S.mul(t0, t0), S.mul(x, t0)), S.from_int(1));
      if (S.val(fv) != 2 * nu + 2)
        throw ComputationError("eigenvalue approximation failed");
    }
    TreeMat shift;
    TreeRing::Elem a{0, 0, 0, 0};
    for (int i = 0; i < S.f; ++i)
      a[static_cast<std::size_t>(i)] = cpp_int(t0[static_cast<std::size_t>(i)]);
    a = R.sub(R.zero(), a);
    shift[0][0] = R.add(a, gamma[0][0]);
    shift[0][1] = gamma[0][1];
    shift[1][0] = gamma[1][0];
    shift[1][1] = R.add(a, gamma[1][1]);
    return shift;
  }
  throw ComputationError("no eigenvalue approximation found");
}

}  // namespace btdetail

namespace btdetail {

// enumeration and counting; the caller has already validated the input and
// guaranteed enough precision headroom for every column reduction below
inline OrbitalCount brute_core(const TreeRing& R, const TreeMat& gamma,
                               const GammaLocal& g, int r, int j,
                               int truncation_radius) {
  bool split = g.type == SplitType::Split;
  btdetail::FixedTester fixed{R, gamma, {}};

  TreeVertex v0;
  if (!fixed(v0))
    throw ComputationError("standard lattice class not fixed by an integral matrix");

  // fixed sets are convex and distance to the base vertex is monotone along
  // geodesics from it, so a fixed-only search finds everything in the window
  std::vector<TreeVertex> F{v0};
  std::map<TreeVertex, int> idx{{v0, 0}};
  std::deque<int> qu{0};
  bool boundary = false;
  while (!qu.empty()) {
    TreeVertex v = F[static_cast<std::size_t>(qu.front())];
    qu.pop_front();
    for (const auto& u : tree_neighbors(R, v)) {
      if (u.dist_to_base() > truncation_radius) continue;
      if (idx.count(u) || !fixed(u)) continue;
      if (u.dist_to_base() == truncation_radius) boundary = true;
      idx.emplace(u, static_cast<int>(F.size()));
      F.push_back(u);
      qu.push_back(static_cast<int>(F.size()) - 1);
    }
  }
  if (!split && boundary)
    throw TruncationTooSmall("fixed set reaches the truncation boundary");

  int n = static_cast<int>(F.size());

  // translation action restricted to the window, as index maps (-1 = out),
  // plus ranks in vertex order so orbit keys are integer pairs
  std::vector<int> sh(static_cast<std::size_t>(n), -1);
  std::vector<int> shb(static_cast<std::size_t>(n), -1);
  std::vector<int> rank_(static_cast<std::size_t>(n), 0);
  if (split) {
    TreeMat shift = btdetail::split_shift(R, gamma, g);
    TreeMat shift_back = mat_adj(R, shift);
    for (int i = 0; i < n; ++i) {
      auto fwd = idx.find(apply_mat(R, shift, F[static_cast<std::size_t>(i)]));
      if (fwd != idx.end()) sh[static_cast<std::size_t>(i)] = fwd->second;
      auto bwd = idx.find(apply_mat(R, shift_back, F[static_cast<std::size_t>(i)]));
      if (bwd != idx.end()) shb[static_cast<std::size_t>(i)] = bwd->second;
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      return F[static_cast<std::size_t>(x)] < F[static_cast<std::size_t>(y)];
    });
    for (int i = 0; i < n; ++i) rank_[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;
  }
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (const auto& u : tree_neighbors(R, F[static_cast<std::size_t>(i)])) {
      auto it = idx.find(u);
      if (it != idx.end()) adj[static_cast<std::size_t>(i)].push_back(it->second);
    }

  auto bfs = [&](int src) {
    std::vector<int> dist(static_cast<std::size_t>(n), -1);
    std::deque<int> qq{src};
    dist[static_cast<std::size_t>(src)] = 0;
    while (!qq.empty()) {
      int v = qq.front();
      qq.pop_front();
      for (int u : adj[static_cast<std::size_t>(v)])
        if (dist[static_cast<std::size_t>(u)] < 0) {
          dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(v)] + 1;
          qq.push_back(u);
        }
    }
    return dist;
  };

  // minimal rank pair over the translation orbit, walked while it stays
  // inside the enumerated window (the in-window stretch is an interval)
  auto orbit_key_pair = [&](int x, int y) {
    auto best = std::make_pair(rank_[static_cast<std::size_t>(x)],
                               rank_[static_cast<std::size_t>(y)]);
    for (int dir = 0; dir < 2; ++dir) {
      const auto& step = dir ? shb : sh;
      int cx = x, cy = y;
      while (true) {
        cx = step[static_cast<std::size_t>(cx)];
        if (cx < 0) break;
        cy = step[static_cast<std::size_t>(cy)];
        if (cy < 0) break;
        auto cand = std::make_pair(rank_[static_cast<std::size_t>(cx)],
                                   rank_[static_cast<std::size_t>(cy)]);
        if (cand < best) best = cand;
      }
    }
    return best;
  };

  cpp_int count = 0;
  if (j == 0) {
    std::set<std::pair<int, int>> seen;
    for (int x = 0; x < n; ++x) {
      auto dist = bfs(x);
      for (int y = 0; y < n; ++y) {
        if (dist[static_cast<std::size_t>(y)] != r) continue;
        if (F[static_cast<std::size_t>(y)].parity() != 0) continue;
        if (split)
          seen.insert(orbit_key_pair(x, y));
        else
          ++count;
      }
    }
    if (split) count = static_cast<long>(seen.size());
  } else {
    // containment check runs on the full tree and tests fixedness directly,
    // so it is immune to the window truncation
    auto ball_fixed = [&](const TreeVertex& x) {
      std::map<TreeVertex, int> depth{{x, 0}};
      std::deque<TreeVertex> qq{x};
      while (!qq.empty()) {
        TreeVertex v = qq.front();
        qq.pop_front();
        int dv = depth[v];
        if (!fixed(v)) return false;
        if (dv == r) continue;
        for (const auto& u : tree_neighbors(R, v))
          if (!depth.count(u)) {
            depth.emplace(u, dv + 1);
            qq.push_back(u);
          }
      }
      return true;
    };
    std::set<int> seen;
    for (int x = 0; x < n; ++x) {
      const TreeVertex& v = F[static_cast<std::size_t>(x)];
      if (v.parity() != 0) continue;
      if (!ball_fixed(v)) continue;
      if (split) {
        int best = rank_[static_cast<std::size_t>(x)];
        for (int dir = 0; dir < 2; ++dir) {
          const auto& step = dir ? shb : sh;
          int c = x;
          while (true) {
            c = step[static_cast<std::size_t>(c)];
            if (c < 0) break;
            best = std::min(best, rank_[static_cast<std::size_t>(c)]);
          }
        }
        seen.insert(best);
      } else {
        ++count;
      }
    }
    if (split) count = static_cast<long>(seen.size());
  }

  return make_orbital(R.q, count, true, r, j, g.nu_twice);
}

}  // namespace btdetail

// Enumerates the fixed vertices within truncation_radius of the standard
// lattice class and counts configurations directly.  The matrix must be
// integral with determinant 1 and trace realizing the class g; its entries
// are read at the ring's working precision, which must cover twice the
// truncation radius plus the discriminant valuation.
inline OrbitalCount count_fixed_bruteforce(const TreeRing& R, const TreeMat& gamma,
                                           const GammaLocal& g, int r, int j,
                                           int truncation_radius) {
  if (R.q != g.q || R.p != g.p) throw ConfigError("ring and class disagree");
  if (r < 0 || r > 8) throw UnsupportedRadius("level exponent outside the supported range");
  if (j != 0 && j != 1) throw ConfigError("variant index must be 0 or 1");
  if (truncation_radius < 2 * (g.nu_twice / 2) + r + 2)
    throw ConfigError("truncation radius below the fixed-set diameter");
  if (R.m < 2 * (truncation_radius + g.nu_twice))
    throw InsufficientPrecision("working precision below twice the truncation radius");
  if (!R.is_zero(R.sub(mat_det(R, gamma), R.from_int(1))))
    throw ConfigError("matrix determinant is not 1");
  {
    auto tr = mat_trace(R, gamma);
    auto disc = R.sub(R.mul(tr, tr), R.from_int(4));
    if (R.val(disc) != g.nu_twice)
      throw ConfigError("matrix discriminant does not realize the class");
    // same valuation but a different splitting type is still a mismatch
    int M = g.nu_twice + 2 * (g.p == 2 ? 2 : 0) + 3;
    LocalRing S(g.q, g.p, M);
    SquareClassifier sc(g.q, g.p);
    LocalRing::Elem tr_res{0, 0, 0, 0};
    for (int i = 0; i < R.f; ++i)
      tr_res[static_cast<std::size_t>(i)] =
          (tr[static_cast<std::size_t>(i)] % S.pm).convert_to<uint64_t>();
    GammaLocal h = classify_splitting(S, tr_res, sc);
    if (h.type != g.type)
      throw ConfigError("matrix splitting type does not realize the class");
  }

  // The column reduction wants headroom beyond the caller-facing minimum.
  // Entry lifts beyond the contracted precision cannot change any counted
  // comparison, so the core may run on canonical lifts in a wider ring.
  int headroom = 2 * truncation_radius + 2 * g.nu_twice + 12;
  if (R.m < headroom) {
    TreeRing wide(R.q, R.p, headroom);
    return btdetail::brute_core(wide, gamma, g, r, j, truncation_radius);
  }
  return btdetail::brute_core(R, gamma, g, r, j, truncation_radius);
}

// ---------------------------------------------------------------------------
// the local integral with its a priori bound
// ---------------------------------------------------------------------------

struct NonarchRecord {
  OrbitalCount oc;
  int lambda = 0;            // 1 exactly for ramified classes
  cpp_rational vol;          // volume of the level subgroup
  cpp_int weight;            // level weight of the class
  QPowHalf bound;            // q^(-lambda/2) * vol * weight
  QPowHalf ratio;            // Oprime / bound, zero when the bound vanishes
  bool bound_zero = false;
  bool eq_clause_applicable = false;  // unramified unit discriminant
  bool eq_clause_holds = false;       // O <= vol in that case
};

inline NonarchRecord orbital_integral_nonarch(uint64_t q, const GammaLocal& g,
                                              int r, int j) {
  if (q != g.q) throw ConfigError("residue field size disagrees with the class");
  NonarchRecord rec;
  rec.oc = count_fixed_closed(q, fixed_set(g), r, j);
  rec.lambda = g.ramified() ? 1 : 0;
  cpp_int t = two_torsion_count(q, g.p, r);
  cpp_int den = subgroup_index(q, r, j, t);
  rec.vol = cpp_rational(1, den);
  rec.weight = weight_w_class(q, g.type, g.nu_twice, r, j);
  rec.bound = QPowHalf::make(rec.vol * rec.weight, rec.lambda, q);
  rec.bound_zero = rec.bound.is_zero();
  if (rec.bound_zero)
    rec.ratio = QPowHalf{cpp_rational(0), 0};
  else
    rec.ratio = qph_div(rec.oc.Oprime, rec.bound, q);
  rec.eq_clause_applicable = (g.nu_twice == 0 && !g.ramified());
  if (rec.eq_clause_applicable) rec.eq_clause_holds = rec.oc.O <= rec.vol;
  return rec;
}

// smallest nonnegative integer trace realizing the class, if any exists
// below the bound
inline std::optional<cpp_int> find_companion_trace(uint64_t q, uint64_t p,
                                                   SplitType type, int nu_twice,
                                                   long long bound = 200000) {
  for (long long x = 0; x <= bound; ++x) {
    if (x == 2) continue;
    GammaLocal g = classify_trace(q, p, cpp_int(x));
    if (g.type == type && g.nu_twice == nu_twice) return cpp_int(x);
  }
  return std::nullopt;
}

}  // namespace tracegeom
