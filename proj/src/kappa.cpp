#include "tdc/kappa.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace tdc {

void MaterialGeometry::validate() const {
  const bool ok = chi3 > 0.0 && omega_a > 0.0 && eps_a > 0.0 && eps_b > 0.0 && length > 0.0 &&
                  sigma > 0.0 && m_a > 0 && m_b > 0;
  if (!ok) throw InvalidParameter("material/geometry parameters must all be positive");
}

namespace {

// Trapezoidal weights on a uniform grid: 1/2 on edges, 1/4 on corners.
template <typename Derived> Complex trapz2(const Eigen::MatrixBase<Derived>& f, double dx, double dy) {
  const Eigen::Index nx = f.rows(), ny = f.cols();
  Complex s{};
  for (Eigen::Index j = 0; j < ny; ++j) {
    const double wy = (ny > 1 && (j == 0 || j == ny - 1)) ? 0.5 : 1.0;
    for (Eigen::Index i = 0; i < nx; ++i) {
      const double wx = (nx > 1 && (i == 0 || i == nx - 1)) ? 0.5 : 1.0;
      s += wx * wy * Complex(f(i, j));
    }
  }
  return s * dx * dy;
}

} // namespace

double modal_overlap(const ModeProfileGrid& g) {
  if (g.u_a.rows() != g.u_b.rows() || g.u_a.cols() != g.u_b.cols())
    throw InvalidParameter("mode profile grids are not congruent");
  if (g.u_a.size() == 0 || !(g.dx > 0.0) || !(g.dy > 0.0))
    throw InvalidParameter("mode profile grid is degenerate");

  const double norm_a = trapz2(g.u_a.cwiseAbs2(), g.dx, g.dy).real();
  const double norm_b = trapz2(g.u_b.cwiseAbs2(), g.dx, g.dy).real();
  if (!(norm_a > 0.0) || !(norm_b > 0.0)) throw InvalidParameter("zero-norm mode profile");

  const Eigen::MatrixXcd integrand =
      g.u_a.array().cube() * g.u_b.array().conjugate();
  const Complex num = trapz2(integrand, g.dx, g.dy);
  const Complex sigma = num / (std::pow(norm_a, 1.5) * std::sqrt(norm_b));

  const bool real_profiles = g.u_a.imag().isZero(0.0) && g.u_b.imag().isZero(0.0);
  if (real_profiles && std::abs(sigma.imag()) > 1e-8 * std::abs(sigma))
    throw NumericalError("modal overlap has an imaginary residue for real profiles");
  return sigma.real();
}

double estimate_kappa(const MaterialGeometry& mg) {
  mg.validate();
  if (mg.m_b != 3 * mg.m_a) return 0.0;
  const double omega_b = 3.0 * mg.omega_a;
  const double ea = mg.eps_a * kVacuumPermittivity;
  const double eb = mg.eps_b * kVacuumPermittivity;
  return 3.0 * kHbar * kVacuumPermittivity * mg.chi3 *
         std::sqrt(mg.omega_a * mg.omega_a * mg.omega_a * omega_b) * mg.sigma /
         (4.0 * std::sqrt(ea * ea * ea * eb) * mg.length);
}

ModeProfileGrid read_mode_profiles(std::istream& in) {
  long nx = 0, ny = 0;
  ModeProfileGrid g;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream hs(line);
    if (!(hs >> nx >> ny >> g.dx >> g.dy)) throw ConfigError("mode profile header must be 'nx ny dx dy'");
    break;
  }
  if (nx < 1 || ny < 1) throw ConfigError("mode profile header missing or has empty grid");
  g.u_a.resize(nx, ny);
  g.u_b.resize(nx, ny);
  long k = 0;
  while (k < nx * ny && std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> v;
    for (double x; ls >> x;) v.push_back(x);
    Complex ua, ub;
    if (v.size() == 2) {
      ua = v[0];
      ub = v[1];
    } else if (v.size() == 4) {
      ua = {v[0], v[1]};
      ub = {v[2], v[3]};
    } else {
      throw ConfigError("mode profile row " + std::to_string(k + 1) + " must have 2 or 4 columns");
    }
    g.u_a(k / ny, k % ny) = ua;
    g.u_b(k / ny, k % ny) = ub;
    ++k;
  }
  if (k != nx * ny)
    throw ConfigError("mode profile file has " + std::to_string(k) + " rows, expected " +
                      std::to_string(nx * ny));
  return g;
}

ModeProfileGrid read_mode_profiles(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open mode profile file " + path);
  return read_mode_profiles(f);
}

} // namespace tdc
