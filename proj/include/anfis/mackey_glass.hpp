#pragma once

// Mackey-Glass delay differential equation
//   dx/dt = a x(t - tau) / (1 + x(t - tau)^10) - b x(t)
// integrated with fixed-step RK4; x(t) = 0 for t < 0.

#include <cmath>
#include <cstddef>
#include <vector>

#include "anfis/error.hpp"

namespace anfis {

struct MackeyGlassParams {
  double tau = 17.0;
  double a = 0.2;
  double b = 0.1;
  double x0 = 1.2;
  double dt = 0.1;  // tau / dt must be an integer
};

/// x(0), x(1), ..., x(samples - 1) at unit time spacing.
inline std::vector<double> mackey_glass(std::size_t samples, const MackeyGlassParams& p = {}) {
  const double lag_steps = p.tau / p.dt;
  const auto lag = static_cast<std::size_t>(std::llround(lag_steps));
  const auto per_unit = static_cast<std::size_t>(std::llround(1.0 / p.dt));
  if (std::abs(lag_steps - static_cast<double>(lag)) > 1e-9 || per_unit == 0)
    fail(ErrorCode::InvalidArgument, "tau and 1 must be integer multiples of dt");

  const std::size_t steps = samples * per_unit;
  std::vector<double> x(steps + 1, 0.0);
  x[0] = p.x0;
  auto delayed = [&](std::size_t n) { return n >= lag ? x[n - lag] : 0.0; };
  auto rhs = [&](double xt, double xd) { return p.a * xd / (1.0 + std::pow(xd, 10.0)) - p.b * xt; };
  for (std::size_t n = 0; n < steps; ++n) {
    const double d0 = delayed(n), d1 = delayed(n + 1);
    const double dm = 0.5 * (d0 + d1);  // delayed value at the half step
    const double k1 = rhs(x[n], d0);
    const double k2 = rhs(x[n] + 0.5 * p.dt * k1, dm);
    const double k3 = rhs(x[n] + 0.5 * p.dt * k2, dm);
    const double k4 = rhs(x[n] + p.dt * k3, d1);
    x[n + 1] = x[n] + p.dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  std::vector<double> out(samples);
  for (std::size_t t = 0; t < samples; ++t) out[t] = x[t * per_unit];
  return out;
}

}  // namespace anfis
