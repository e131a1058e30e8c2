#pragma once

#include <vector>

#include "stmpc/avoidance.hpp"
#include "stmpc/model.hpp"

namespace stmpc {

/// Ball rolling on a tiltable plate, actuated by plate angular
/// accelerations. State (p1, p2, th1, th2, dp1, dp2, dth1, dth2),
/// input (a1, a2), output (p1, p2).
struct BallPlatePlant {
  double mass = 0.05;        // kg
  double radius = 0.01;      // m
  double inertia = 2.5e-6;   // kg m^2
  double gravity = 9.81;     // m/s^2

  double accel_factor() const {
    return mass / (mass + inertia / (radius * radius));
  }
  Vector derivative(const Vector& x, const Vector& u) const;
  Vector output(const Vector& x) const;
};

/// Rigid-body quadrotor with Euler-angle coordinates. State
/// (xi, eta, xi_dot, eta_dot) in R^12, inputs are the four rotor thrusts,
/// output (x, y, z, psi). Rotor layout: 1 on +x, 2 on +y, 3 on -x,
/// 4 on -y; 1 and 3 spin opposite to 2 and 4.
struct QuadrotorPlant {
  double mass = 1.2;     // kg
  double ixx = 0.015;    // kg m^2
  double iyy = 0.015;
  double izz = 0.026;
  double arm = 0.25;     // m
  double yaw_coeff = 0.016;  // yaw torque per unit thrust
  double gravity = 9.81;
  double max_thrust = 12.0;  // per rotor, N

  double hover_thrust() const { return mass * gravity / 4.0; }
  Vector derivative(const Vector& x, const Vector& u) const;
  Vector output(const Vector& x) const;
};

/// Classical fixed-step RK4 over one sample period.
template <typename Plant>
Vector rk4_step(const Plant& plant, const Vector& x, const Vector& u,
                double T_s) {
  const Vector k1 = plant.derivative(x, u);
  const Vector k2 = plant.derivative(x + 0.5 * T_s * k1, u);
  const Vector k3 = plant.derivative(x + 0.5 * T_s * k2, u);
  const Vector k4 = plant.derivative(x + T_s * k3, u);
  return x + (T_s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct Box3 {
  Vector lo;  // 3
  Vector hi;  // 3
};

/// Axis-aligned obstacle map inside a bounded workspace.
struct WorldMap {
  Vector bounds_lo;  // 3
  Vector bounds_hi;  // 3
  std::vector<Box3> obstacles;

  void check() const;
};

struct RangeSensor {
  double range = 4.0;          // m
  double emitted_radius = 2.0; // m

  void check() const;
};

/// Lidar-like scan: for each obstacle whose closest boundary point lies
/// within range, emit a sphere region of the configured radius centered at
/// that point. Closest point by per-axis clamping.
std::vector<AvoidRegion> sensor_scan(const WorldMap& map,
                                     const Vector& position,
                                     const RangeSensor& sensor);

}  // namespace stmpc
