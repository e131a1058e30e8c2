#include "stmpc/plants.hpp"

#include <cmath>

#include "stmpc/errors.hpp"

namespace stmpc {

Vector BallPlatePlant::derivative(const Vector& x, const Vector& u) const {
  const double p1 = x(0), p2 = x(1), th1 = x(2), th2 = x(3);
  const double dp1 = x(4), dp2 = x(5), dth1 = x(6), dth2 = x(7);
  const double k = accel_factor();
  Vector dx(8);
  dx(0) = dp1;
  dx(1) = dp2;
  dx(2) = dth1;
  dx(3) = dth2;
  dx(4) = k * (p1 * dth1 * dth1 + p2 * dth1 * dth2 + gravity * std::sin(th1));
  dx(5) = k * (p2 * dth2 * dth2 + p1 * dth1 * dth2 + gravity * std::sin(th2));
  dx(6) = u(0);
  dx(7) = u(1);
  return dx;
}

Vector BallPlatePlant::output(const Vector& x) const { return x.head(2); }

Vector QuadrotorPlant::derivative(const Vector& x, const Vector& u) const {
  const double phi = x(3), theta = x(4), psi = x(5);
  const Eigen::Vector3d xi_dot = x.segment(6, 3);
  const Eigen::Vector3d eta_dot = x.segment(9, 3);

  const double f_total = u.sum();
  const double tau_x = arm * (u(1) - u(3));
  const double tau_y = arm * (u(2) - u(0));
  const double tau_z = yaw_coeff * (u(0) - u(1) + u(2) - u(3));

  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double cth = std::cos(theta), sth = std::sin(theta);
  const double cpsi = std::cos(psi), spsi = std::sin(psi);

  // Third column of R = Rz(psi) Ry(theta) Rx(phi).
  Eigen::Vector3d re3(cphi * sth * cpsi + sphi * spsi,
                      cphi * sth * spsi - sphi * cpsi, cphi * cth);
  Eigen::Vector3d xi_ddot = (f_total / mass) * re3;
  xi_ddot(2) -= gravity;

  // Body rates from Euler rates, then rigid-body dynamics back to Euler
  // accelerations.
  Eigen::Matrix3d W;
  W << 1.0, 0.0, -sth,
       0.0, cphi, sphi * cth,
       0.0, -sphi, cphi * cth;
  const Eigen::Vector3d omega = W * eta_dot;
  const Eigen::Vector3d I_diag(ixx, iyy, izz);
  const Eigen::Vector3d tau(tau_x, tau_y, tau_z);
  const Eigen::Vector3d omega_dot =
      (tau - omega.cross(I_diag.asDiagonal() * omega)).cwiseQuotient(I_diag);

  // dW/dt applied to eta_dot.
  const double dphi = eta_dot(0), dtheta = eta_dot(1);
  Eigen::Matrix3d Wdot;
  Wdot << 0.0, 0.0, -cth * dtheta,
      0.0, -sphi * dphi, cphi * cth * dphi - sphi * sth * dtheta,
      0.0, -cphi * dphi, -sphi * cth * dphi - cphi * sth * dtheta;
  Eigen::Matrix3d Winv = W.inverse();
  const Eigen::Vector3d eta_ddot = Winv * (omega_dot - Wdot * eta_dot);

  Vector dx(12);
  dx.segment(0, 3) = xi_dot;
  dx.segment(3, 3) = eta_dot;
  dx.segment(6, 3) = xi_ddot;
  dx.segment(9, 3) = eta_ddot;
  return dx;
}

Vector QuadrotorPlant::output(const Vector& x) const {
  Vector y(4);
  y << x(0), x(1), x(2), x(5);
  return y;
}

void WorldMap::check() const {
  if (bounds_lo.size() != 3 || bounds_hi.size() != 3)
    throw DimensionError("world map bounds must be 3-D");
  for (const auto& box : obstacles) {
    for (int i = 0; i < 3; ++i) {
      if (!(box.lo(i) <= box.hi(i)))
        throw Error("world map: obstacle box inverted");
      if (box.lo(i) < bounds_lo(i) - 1e-9 || box.hi(i) > bounds_hi(i) + 1e-9)
        throw Error("world map: obstacle outside bounds");
    }
  }
}

void RangeSensor::check() const {
  if (!(emitted_radius < range))
    throw Error("range sensor: emitted radius must be below the range");
}

std::vector<AvoidRegion> sensor_scan(const WorldMap& map,
                                     const Vector& position,
                                     const RangeSensor& sensor) {
  std::vector<AvoidRegion> regions;
  for (const auto& box : map.obstacles) {
    Vector closest(3);
    for (int i = 0; i < 3; ++i)
      closest(i) = std::min(std::max(position(i), box.lo(i)), box.hi(i));
    if ((position - closest).norm() <= sensor.range) {
      AvoidRegion region;
      region.shape = SphereRegion{closest, sensor.emitted_radius};
      region.sigma = 1.0;
      regions.push_back(std::move(region));
    }
  }
  return regions;
}

}  // namespace stmpc
