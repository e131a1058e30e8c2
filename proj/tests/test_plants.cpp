#include <doctest.h>

#include "stmpc/model.hpp"
#include "stmpc/plants.hpp"

using namespace stmpc;

TEST_CASE("ball-on-plate equilibrium and gravity terms") {
  const BallPlatePlant plant;
  CHECK(plant.accel_factor() == doctest::Approx(2.0 / 3.0));

  CHECK(plant.derivative(Vector::Zero(8), Vector::Zero(2)).norm() ==
        doctest::Approx(0.0));

  Vector x = Vector::Zero(8);
  x(2) = M_PI / 6.0;
  const Vector dx = plant.derivative(x, Vector::Zero(2));
  CHECK(dx(4) == doctest::Approx((2.0 / 3.0) * 9.81 * 0.5).epsilon(1e-12));

  // Pure rotation: centrifugal term only.
  x.setZero();
  x(0) = 1.0;  // p1
  x(6) = 1.0;  // dth1
  const Vector dc = plant.derivative(x, Vector::Zero(2));
  CHECK(dc(4) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(dc(5) == doctest::Approx(0.0));
}

TEST_CASE("ball-on-plate linearization reproduces the gravity coupling") {
  const BallPlatePlant plant;
  const VectorField f = [&](const Vector& x, const Vector& u) {
    return plant.derivative(x, u);
  };
  const OutputMap h = [&](const Vector& x, const Vector&) {
    return plant.output(x);
  };
  const auto ct = linearize(f, h, Vector::Zero(8), Vector::Zero(2));
  CHECK(ct.A(4, 2) == doctest::Approx(plant.accel_factor() * plant.gravity)
                          .epsilon(1e-6));
  CHECK(ct.A(4, 2) == doctest::Approx(6.54).epsilon(1e-3));
  CHECK(ct.B(6, 0) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("quadrotor hover is an equilibrium; free fall without thrust") {
  const QuadrotorPlant quad;
  Vector x = Vector::Zero(12);
  const Vector hover = Vector::Constant(4, quad.hover_thrust());
  CHECK(quad.derivative(x, hover).norm() <= 1e-12);

  const Vector dx = quad.derivative(x, Vector::Zero(4));
  CHECK(dx(8) == doctest::Approx(-quad.gravity));
  CHECK(dx.head(8).norm() == doctest::Approx(0.0));
}

TEST_CASE("differential thrust pair produces a pure moment") {
  const QuadrotorPlant quad;
  Vector x = Vector::Zero(12);
  Vector u = Vector::Constant(4, quad.hover_thrust());
  const double delta = 0.5;
  u(1) += delta;
  u(3) -= delta;
  const Vector dx = quad.derivative(x, u);
  CHECK(dx.segment(6, 3).norm() == doctest::Approx(0.0));  // no translation
  CHECK(dx(9) == doctest::Approx(quad.arm * 2.0 * delta / quad.ixx));
  CHECK(dx(10) == doctest::Approx(0.0));
  CHECK(dx(11) == doctest::Approx(0.0));
}

TEST_CASE("quadrotor linearization at hover is controllable") {
  const QuadrotorPlant quad;
  const VectorField f = [&](const Vector& x, const Vector& u) {
    return quad.derivative(x, u);
  };
  const OutputMap h = [&](const Vector& x, const Vector&) {
    return quad.output(x);
  };
  const Vector u_eq = Vector::Constant(4, quad.hover_thrust());
  const auto ct = linearize(f, h, Vector::Zero(12), u_eq);
  const LinearModel model = euler_discretize(ct, 0.01);
  CHECK(numeric_rank(controllability_matrix(model.A, model.B)) == 12);
  CHECK(numeric_rank(observability_matrix(model.A, model.C)) == 12);
  CHECK(check_rank_condition(model).holds);
}

TEST_CASE("rk4 matches the matrix exponential to fifth order") {
  Matrix A(2, 2);
  A << 0.0, 1.0, -4.0, -0.5;
  struct LinearPlant {
    Matrix A;
    Vector derivative(const Vector& x, const Vector&) const {
      return Vector(A * x);
    }
  } plant{A};

  Vector x0(2);
  x0 << 1.0, -0.5;
  auto exact = [&](double T) {
    Matrix F = Matrix::Identity(2, 2);
    Matrix Ak = Matrix::Identity(2, 2);
    double fact = 1.0;
    for (int k = 1; k <= 12; ++k) {
      Ak = Ak * (A * T);
      fact *= k;
      F += Ak / fact;
    }
    return Vector(F * x0);
  };
  const double T = 0.05;
  const double err_T =
      (rk4_step(plant, x0, Vector::Zero(0), T) - exact(T)).norm();
  const double err_half =
      (rk4_step(plant, x0, Vector::Zero(0), T / 2) - exact(T / 2)).norm();
  CHECK(err_T <= 1e-6);
  // Local error scales as T^5: halving the step divides it by ~32.
  CHECK(err_T / err_half >= 20.0);
  CHECK(err_T / err_half <= 45.0);

  // Zero field keeps the state.
  struct ZeroPlant {
    Vector derivative(const Vector& x, const Vector&) const {
      return Vector(Vector::Zero(x.size()));
    }
  } zero;
  CHECK((rk4_step(zero, x0, Vector::Zero(0), T) - x0).norm() == 0.0);
}

TEST_CASE("rk4 energy drift on the undamped oscillator stays bounded") {
  Matrix A(2, 2);
  A << 0.0, 1.0, -1.0, 0.0;
  struct LinearPlant {
    Matrix A;
    Vector derivative(const Vector& x, const Vector&) const {
      return Vector(A * x);
    }
  } plant{A};
  Vector x(2);
  x << 1.0, 0.0;
  const double T = 0.01;
  for (int k = 0; k < 10000; ++k) x = rk4_step(plant, x, Vector::Zero(0), T);
  const double energy = x.squaredNorm();
  CHECK(std::abs(energy - 1.0) <= 1e-6);
}

TEST_CASE("sensor scan emits spheres at clamped closest points") {
  WorldMap map;
  map.bounds_lo = Vector::Constant(3, -24.0);
  map.bounds_hi = Vector::Constant(3, 24.0);
  Box3 box;
  box.lo = Vector(3);
  box.hi = Vector(3);
  box.lo << 2.0, -0.5, -0.5;
  box.hi << 3.0, 0.5, 0.5;
  map.obstacles.push_back(box);
  map.check();
  const RangeSensor sensor;

  // Unit box centered 2.5 m away along x: closest face point (2, 0, 0).
  const auto regions = sensor_scan(map, Vector::Zero(3), sensor);
  REQUIRE(regions.size() == 1);
  const auto& sphere = std::get<SphereRegion>(regions[0].shape);
  CHECK(sphere.center(0) == doctest::Approx(2.0));
  CHECK(sphere.center(1) == doctest::Approx(0.0));
  CHECK(sphere.radius == doctest::Approx(2.0));

  // Beyond range: empty.
  Vector far(3);
  far << -3.0, 0.0, 0.0;  // 5 m from the near face
  CHECK(sensor_scan(map, far, sensor).empty());

  // Two obstacles in range produce two spheres.
  Box3 box2 = box;
  box2.lo(1) += 3.0;
  box2.hi(1) += 3.0;
  map.obstacles.push_back(box2);
  Vector near(3);
  near << 1.0, 1.5, 0.0;
  CHECK(sensor_scan(map, near, sensor).size() == 2);
}

TEST_CASE("sensor scan is deterministic along a replayed trajectory") {
  WorldMap map;
  map.bounds_lo = Vector::Constant(3, -24.0);
  map.bounds_hi = Vector::Constant(3, 24.0);
  for (int i = 0; i < 4; ++i) {
    Box3 box;
    box.lo = Vector(3);
    box.hi = Vector(3);
    box.lo << -10.0 + 5 * i, -1.0, -1.0;
    box.hi << -8.0 + 5 * i, 1.0, 1.0;
    map.obstacles.push_back(box);
  }
  const RangeSensor sensor;
  std::vector<int> counts1, counts2;
  for (int pass = 0; pass < 2; ++pass) {
    auto& counts = pass == 0 ? counts1 : counts2;
    for (int k = 0; k <= 100; ++k) {
      Vector pos(3);
      pos << -12.0 + 0.2 * k, 1.8, 0.0;
      counts.push_back(
          static_cast<int>(sensor_scan(map, pos, sensor).size()));
    }
  }
  CHECK(counts1 == counts2);
  CHECK(*std::max_element(counts1.begin(), counts1.end()) >= 2);
}

TEST_CASE("ball-on-plate discrete model: rank condition and steady states") {
  const BallPlatePlant plant;
  const VectorField f = [&](const Vector& x, const Vector& u) {
    return plant.derivative(x, u);
  };
  const OutputMap h = [&](const Vector& x, const Vector&) {
    return plant.output(x);
  };
  const LinearModel model =
      euler_discretize(linearize(f, h, Vector::Zero(8), Vector::Zero(2)),
                       0.25);
  const auto rank = check_rank_condition(model);
  CHECK(rank.holds);
  CHECK(rank.shape == SystemShape::square);

  // Steady state for a position target: plate level, everything at rest.
  Vector lo(10), hi(10);
  lo << -2, -2, -0.4, -0.4, -2, -2, -1, -1, -0.2, -0.2;
  hi = -lo;
  const SteadyStateMap map(model, Polytope::box(lo, hi), 0.99);
  Vector y_t(2);
  y_t << -0.85, 0.60;
  const auto ss = map.steady_state_for_output(y_t);
  CHECK(ss.x_s(0) == doctest::Approx(-0.85).epsilon(1e-9));
  CHECK(ss.x_s(1) == doctest::Approx(0.60).epsilon(1e-9));
  CHECK(ss.x_s.tail(6).cwiseAbs().maxCoeff() <= 1e-9);  // angles, rates
  CHECK(ss.u_s.cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(ss.in_lambda_zs);
}
