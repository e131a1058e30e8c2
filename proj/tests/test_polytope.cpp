#include <doctest.h>

#include "stmpc/errors.hpp"
#include "stmpc/polytope.hpp"

using namespace stmpc;

TEST_CASE("lp maximize over a box") {
  Vector lo(2), hi(2);
  lo << -1.0, -2.0;
  hi << 3.0, 4.0;
  const Polytope box = Polytope::box(lo, hi);

  Vector c(2);
  c << 1.0, 0.0;
  auto res = lp_maximize(box.H, box.h, c);
  CHECK(res.optimal);
  CHECK(res.value == doctest::Approx(3.0));

  c << -1.0, 1.0;
  res = lp_maximize(box.H, box.h, c);
  CHECK(res.value == doctest::Approx(1.0 + 4.0));
  CHECK(res.point(0) == doctest::Approx(-1.0));
  CHECK(res.point(1) == doctest::Approx(4.0));
}

TEST_CASE("lp maximize over a rotated polytope") {
  // Triangle x >= -1, y >= -1, x + y <= 1.
  Matrix H(3, 2);
  H << -1, 0, 0, -1, 1, 1;
  Vector h(3);
  h << 1, 1, 1;
  Vector c(2);
  c << 1.0, 2.0;
  const auto res = lp_maximize(H, h, c);
  // Optimum at (-1, 2).
  CHECK(res.value == doctest::Approx(3.0));
}

TEST_CASE("unbounded direction throws") {
  Matrix H(1, 2);
  H << 1, 0;
  Vector h(1);
  h << 1;
  Vector c(2);
  c << 0, 1;
  CHECK_THROWS_AS(lp_maximize(H, h, c), LpError);
}

TEST_CASE("boundedness and origin checks") {
  Vector lo(3), hi(3);
  lo << -1, -1, -1;
  hi << 1, 2, 3;
  Polytope box = Polytope::box(lo, hi);
  CHECK(box.is_bounded());
  CHECK(box.strictly_contains_origin());

  Matrix H(1, 2);
  H << 1, 0;
  Polytope half{H, Vector::Ones(1)};
  CHECK_FALSE(half.is_bounded());

  Vector lo2(2), hi2(2);
  lo2 << 0.0, -1.0;  // origin on the boundary
  hi2 << 1.0, 1.0;
  CHECK_FALSE(Polytope::box(lo2, hi2).strictly_contains_origin());
}

TEST_CASE("redundant rows are removed") {
  Vector lo(2), hi(2);
  lo << -1, -1;
  hi << 1, 1;
  Polytope box = Polytope::box(lo, hi);
  const int original = box.rows();

  // Add dominated and duplicate rows.
  box.H.conservativeResize(box.rows() + 2, Eigen::NoChange);
  box.h.conservativeResize(box.h.size() + 2);
  box.H.row(original) << 1.0, 0.0;
  box.h(original) = 5.0;  // dominated by x <= 1
  box.H.row(original + 1) << 0.0, 1.0;
  box.h(original + 1) = 1.0;  // duplicate of y <= 1
  box.normalize_rows();
  box.remove_redundant();
  CHECK(box.rows() == original);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Vector z = box.sample_interior(rng);
    CHECK(std::abs(z(0)) <= 1.0 + 1e-9);
    CHECK(std::abs(z(1)) <= 1.0 + 1e-9);
  }
}

TEST_CASE("interior sampling stays inside and covers the set") {
  Matrix H(3, 2);
  H << -1, 0, 0, -1, 1, 1;
  Vector h(3);
  h << 1, 1, 1;
  Polytope tri{H, h};
  std::mt19937_64 rng(42);
  double max_radius = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const Vector z = tri.sample_interior(rng);
    CHECK(tri.contains(z, 1e-9));
    max_radius = std::max(max_radius, z.norm());
  }
  CHECK(max_radius > 1.0);  // samples reach well beyond the inscribed ball
}

TEST_CASE("vertex enumeration in 2-D") {
  Vector lo(2), hi(2);
  lo << -1, -2;
  hi << 3, 4;
  const auto verts = Polytope::box(lo, hi).vertices_2d();
  CHECK(verts.size() == 4);
}

TEST_CASE("convex hull and halfspace conversion round trip") {
  std::vector<Vector> pts;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int i = 0; i < 60; ++i) {
    Vector v(2);
    v << unif(rng), unif(rng);
    pts.push_back(v);
  }
  const auto hull = convex_hull_2d(pts);
  const Polytope P = hull_to_halfspaces_2d(hull);
  for (const auto& v : pts) CHECK(P.contains(v, 1e-9));
}

TEST_CASE("affine preimage") {
  Vector lo(2), hi(2);
  lo << -1, -1;
  hi << 1, 1;
  const Polytope box = Polytope::box(lo, hi);
  Matrix M(2, 1);
  M << 1.0, 2.0;
  Vector v(2);
  v << 0.0, 0.5;
  const Polytope pre = box.affine_preimage(M, v);
  // w must satisfy |w| <= 1 and |2w + 0.5| <= 1 -> w in [-0.75, 0.25].
  Vector w(1);
  w << 0.25;
  CHECK(pre.contains(w, 1e-12));
  w << 0.26;
  CHECK_FALSE(pre.contains(w, 1e-12));
}
