#include "tdc/spectrum.hpp"

#include <cmath>

namespace tdc {

std::vector<double> frequency_grid(double omega_max, int n_points) {
  if (!(omega_max > 0.0)) throw InvalidParameter("omega_max must be positive");
  if (n_points < 2) throw InvalidParameter("frequency grid needs at least two points");

  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n_points));
  grid.push_back(0.0);

  constexpr double log_lo = 1e-3, log_hi = 1.0;
  if (omega_max <= log_hi || n_points < 8) {
    for (int i = 1; i < n_points; ++i) grid.push_back(omega_max * i / (n_points - 1));
    return grid;
  }

  const int n_log = n_points / 4;
  const int n_lin = n_points - 1 - n_log;
  const double ratio = std::log(log_hi / log_lo);
  for (int i = 0; i < n_log; ++i)
    grid.push_back(log_lo * std::exp(ratio * i / n_log));
  for (int i = 0; i < n_lin; ++i)
    grid.push_back(log_hi + (omega_max - log_hi) * i / (n_lin - 1));
  return grid;
}

} // namespace tdc
