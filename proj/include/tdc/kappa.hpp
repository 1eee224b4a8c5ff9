#ifndef TDC_KAPPA_HPP
#define TDC_KAPPA_HPP

// Physical estimate of the effective nonlinearity from material and
// resonator geometry. SI units throughout.

#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "tdc/types.hpp"

namespace tdc {

inline constexpr double kHbar = 1.054571817e-34;       // J s
inline constexpr double kVacuumPermittivity = 8.8541878128e-12; // F/m

struct MaterialGeometry {
  double chi3 = 1.5e-20;           // m^2/V^2
  double omega_a = 0.0;            // rad/s; omega_b = 3 omega_a
  double eps_a = 4.0, eps_b = 4.0; // relative permittivities
  double length = 0.0;             // m
  double sigma = 0.0;              // transverse overlap, 1/m^2
  int m_a = 1, m_b = 3;            // field oscillations per round trip

  void validate() const;
  bool operator==(const MaterialGeometry&) const = default;
};

/// Transverse mode profiles sampled on a uniform nx-by-ny grid; element
/// (i, j) is the sample at x = i dx, y = j dy.
struct ModeProfileGrid {
  Eigen::MatrixXcd u_a, u_b;
  double dx = 0.0, dy = 0.0;
};

/// sigma = int u_a^3 conj(u_b) / ((int |u_a|^2)^(3/2) (int |u_b|^2)^(1/2)),
/// by 2D trapezoidal quadrature.
double modal_overlap(const ModeProfileGrid& grid);

/// kappa = 3 hbar eps0 chi3 sqrt(omega_a^3 omega_b) sigma / (4 sqrt(eps_a^3 eps_b) L),
/// zero unless m_b = 3 m_a.
double estimate_kappa(const MaterialGeometry& mg);

/// Profile file: header "nx ny dx dy", then nx*ny rows (x index slowest) of
/// either "u_a u_b" (real) or "re(u_a) im(u_a) re(u_b) im(u_b)".
ModeProfileGrid read_mode_profiles(std::istream& in);
ModeProfileGrid read_mode_profiles(const std::string& path);

} // namespace tdc

#endif // TDC_KAPPA_HPP
