#pragma once
#include <stdexcept>

namespace qf {

/// Uniform time grid: n_steps Euler steps from t0 to t1.
struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  int n_steps = 1000;

  TimeGrid() = default;
  TimeGrid(double a, double b, int n) : t0(a), t1(b), n_steps(n) {
    if (!(b > a)) throw std::invalid_argument("TimeGrid: t1 must exceed t0");
    if (n < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
  }
  double dt() const { return (t1 - t0) / n_steps; }
  double time(int k) const { return t0 + k * dt(); }
};

}  // namespace qf
