#pragma once
#include <utility>

namespace qf {

/// One classical RK4 step for dy/dt = f(t, y).  State must support scalar
/// multiplication and addition (double, Eigen matrices, ...).
template <typename State, typename Rhs>
State rk4_step(const State& y, double t, double dt, Rhs&& f) {
  State k1 = f(t, y);
  State k2 = f(t + 0.5 * dt, State(y + (0.5 * dt) * k1));
  State k3 = f(t + 0.5 * dt, State(y + (0.5 * dt) * k2));
  State k4 = f(t + dt, State(y + dt * k3));
  return State(y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace qf
