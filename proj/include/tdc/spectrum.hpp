#ifndef TDC_SPECTRUM_HPP
#define TDC_SPECTRUM_HPP

// Linearized steady-state fluctuation analysis.
//
// The fluctuation vector is ordered (d alpha, d alpha+, d beta, d beta+) and
// obeys d(dx) = -A dx dt + B dW with B B^T = D. Everything here is templated
// on the real scalar so the 4x4 algebra can be rerun in extended precision.

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "tdc/params.hpp"
#include "tdc/types.hpp"

namespace tdc {

inline constexpr double kStabilityTolerance = 1e-9;

template <typename T>
Mat4<T> drift_matrix(std::complex<T> alpha_s, std::complex<T> beta_s,
                     const SystemParams& p) {
  using C = std::complex<T>;
  const T k = static_cast<T>(p.kappa);
  const T ga = static_cast<T>(p.gamma_a);
  const T gb = static_cast<T>(p.gamma_b);
  const C ac = std::conj(alpha_s);
  const C bc = std::conj(beta_s);
  const C zero{};

  Mat4<T> A;
  A << C(ga), -T(2) * k * ac * beta_s, -k * ac * ac, zero,
      -T(2) * k * alpha_s * bc, C(ga), zero, -k * alpha_s * alpha_s,
      k * alpha_s * alpha_s, zero, C(gb), zero,
      zero, k * ac * ac, zero, C(gb);
  return A;
}

template <typename T>
Mat4<T> diffusion_matrix(std::complex<T> alpha_s, std::complex<T> beta_s,
                         const SystemParams& p) {
  const T k = static_cast<T>(p.kappa);
  Mat4<T> D = Mat4<T>::Zero();
  D(0, 0) = T(2) * k * std::conj(alpha_s) * beta_s;
  D(1, 1) = T(2) * k * alpha_s * std::conj(beta_s);
  return D;
}

inline Mat4c drift_matrix(const SteadyStateSolution& s, const SystemParams& p) {
  return drift_matrix<double>(s.alpha_s, s.beta_s, p);
}

inline Mat4c diffusion_matrix(const SteadyStateSolution& s, const SystemParams& p) {
  return diffusion_matrix<double>(s.alpha_s, s.beta_s, p);
}

/// Smallest real part over the eigenvalues of A.
template <typename Derived>
typename Eigen::NumTraits<typename Derived::Scalar>::Real
min_real_eigenvalue(const Eigen::MatrixBase<Derived>& A) {
  using Plain = typename Derived::PlainObject;
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  Eigen::ComplexEigenSolver<Plain> es(A.eval(), /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigenvalue solver failed on drift matrix");
  Real m = es.eigenvalues()(0).real();
  for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i)
    m = std::min(m, es.eigenvalues()(i).real());
  return m;
}

/// True iff every eigenvalue of A has real part above the stability tolerance
/// (fluctuations d(dx) = -A dx dt then relax).
template <typename Derived>
bool stability_check(const Eigen::MatrixBase<Derived>& A,
                     double tolerance = kStabilityTolerance) {
  return static_cast<double>(min_real_eigenvalue(A)) > tolerance;
}

/// S(w) = (A + i w I)^-1 D (A^dag - i w I)^-1.
///
/// With M = A + i w I the right factor is (M^dag)^-1, so
/// S = (M^-1 (M^-1 D)^dag)^dag and one LU factorization serves both solves.
template <typename DerivedA, typename DerivedD>
typename DerivedA::PlainObject
spectrum_matrix(const Eigen::MatrixBase<DerivedA>& A,
                const Eigen::MatrixBase<DerivedD>& D,
                typename Eigen::NumTraits<typename DerivedA::Scalar>::Real omega) {
  using Plain = typename DerivedA::PlainObject;
  using Scalar = typename DerivedA::Scalar;
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  if (A.rows() != A.cols() || D.rows() != A.rows() || D.cols() != A.cols())
    throw InvalidParameter("spectrum_matrix: A and D must be square and congruent");

  Plain M = A;
  M.diagonal().array() += Scalar(Real(0), omega);
  Eigen::PartialPivLU<Plain> lu(M);
  if (!(lu.rcond() > Real(1e-14)))
    throw NumericalError("spectrum_matrix: A + i w I is numerically singular");
  const Plain X = lu.solve(D);
  const Plain Y = lu.solve(X.adjoint());
  return Y.adjoint();
}

/// The constant quadrature transform: rows give X_a, Y_a, X_b, Y_b in terms
/// of (alpha, alpha+, beta, beta+) with X = a + a^dag, Y = i(a^dag - a).
template <typename T> Mat4<T> quadrature_transform() {
  using C = std::complex<T>;
  const C o(1), z(0), i(0, 1);
  Mat4<T> Q;
  Q << o, o, z, z,
      -i, i, z, z,
      z, z, o, o,
      z, z, -i, i;
  return Q;
}

template <typename T> Mat4<T> quadrature_spectrum(const Mat4<T>& S) {
  const Mat4<T> Q = quadrature_transform<T>();
  return Q * S * Q.transpose();
}

struct SpectrumRow {
  double omega = 0.0;
  double V_Xa = 1.0, V_Ya = 1.0, V_Xb = 1.0, V_Yb = 1.0;
  double C_XaXb = 0.0, C_YaYb = 0.0;
  double DS_plus = 4.0, DS_minus = 4.0;
};

/// DS+- = V(X_a +- X_b) + V(Y_a -+ Y_b), expanded in variances and covariances.
inline std::pair<double, double> duan_simon(const SpectrumRow& r) {
  const double sum = r.V_Xa + r.V_Xb + r.V_Ya + r.V_Yb;
  return {sum + 2.0 * r.C_XaXb - 2.0 * r.C_YaYb,
          sum - 2.0 * r.C_XaXb + 2.0 * r.C_YaYb};
}

/// Output-field variances and covariances from the quadrature spectrum via
/// the input-output relations. Vacuum gives exactly 1 for every variance.
template <typename T>
SpectrumRow output_covariances(const Mat4<T>& Sq, const SystemParams& p, double omega) {
  const double gamma[2] = {p.gamma_a, p.gamma_b};
  auto entry = [&](int i, int j, int offset) {
    // offset 0 selects X rows (1, 3 in one-based indexing), 1 selects Y rows
    const int r = 2 * i + offset, c = 2 * j + offset;
    const std::complex<T> s = Sq(r, c) + Sq(c, r);
    const std::complex<double> v(static_cast<double>(s.real()),
                                 static_cast<double>(s.imag()));
    const std::complex<double> out =
        (i == j ? 1.0 : 0.0) + std::sqrt(gamma[i] * gamma[j]) * v;
    if (std::abs(out.imag()) > 1e-8 * std::max(1.0, std::abs(out.real())))
      throw NumericalError("output covariance has a non-negligible imaginary part");
    return out.real();
  };
  SpectrumRow row;
  row.omega = omega;
  row.V_Xa = entry(0, 0, 0);
  row.V_Ya = entry(0, 0, 1);
  row.V_Xb = entry(1, 1, 0);
  row.V_Yb = entry(1, 1, 1);
  row.C_XaXb = entry(0, 1, 0);
  row.C_YaYb = entry(0, 1, 1);
  std::tie(row.DS_plus, row.DS_minus) = duan_simon(row);
  return row;
}

struct SpectrumResult {
  std::vector<double> omegas;
  std::vector<SpectrumRow> rows;
  bool valid = true;
};

/// Default hybrid grid on [0, omega_max]: omega = 0, then a logarithmic run
/// over [1e-3, 1) holding a quarter of the points, then linear on [1, omega_max].
std::vector<double> frequency_grid(double omega_max = 20.0, int n_points = 400);

/// Full output spectrum for one steady state. `valid` is the caller's verdict
/// from the fluctuation check; it is copied into the result.
template <typename T>
SpectrumResult spectrum_scan(std::complex<T> alpha_s, std::complex<T> beta_s,
                             const SystemParams& p, const std::vector<double>& omegas,
                             bool valid = true) {
  const Mat4<T> A = drift_matrix<T>(alpha_s, beta_s, p);
  if (!stability_check(A))
    throw NumericalError("spectrum_scan: steady state is not stable; spectrum undefined");
  const Mat4<T> D = diffusion_matrix<T>(alpha_s, beta_s, p);

  SpectrumResult res;
  res.valid = valid;
  res.omegas = omegas;
  res.rows.reserve(omegas.size());
  for (double w : omegas) {
    const Mat4<T> S = spectrum_matrix(A, D, static_cast<T>(w));
    res.rows.push_back(output_covariances<T>(quadrature_spectrum<T>(S), p, w));
  }
  return res;
}

inline SpectrumResult spectrum_scan(const SteadyStateSolution& s, const SystemParams& p,
                                    const std::vector<double>& omegas, bool valid = true) {
  return spectrum_scan<double>(s.alpha_s, s.beta_s, p, omegas, valid);
}

/// Stationary covariance G solving A G + G A^dag = D, by direct solution of
/// the vectorized (Kronecker) system. Independent of the frequency route.
template <typename T>
Mat4<T> stationary_covariance(const Mat4<T>& A, const Mat4<T>& D) {
  using C = std::complex<T>;
  using Big = Eigen::Matrix<C, 16, 16>;
  Big K = Big::Zero();
  // column-major vec: vec(A G) = (I (x) A) vec G, vec(G A^dag) = (conj(A) (x) I) vec G
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      const int row = 4 * j + i;
      for (int k = 0; k < 4; ++k) {
        K(row, 4 * j + k) += A(i, k);
        K(row, 4 * k + i) += std::conj(A(j, k));
      }
    }
  Eigen::Matrix<C, 16, 1> d;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) d(4 * j + i) = D(i, j);
  const Eigen::Matrix<C, 16, 1> g = K.fullPivLu().solve(d);
  Mat4<T> G;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) G(i, j) = g(4 * j + i);
  return G;
}

/// (1/2pi) times the integral of S(omega) over the real line: trapezoidal rule
/// on n uniform points in [-W, W] plus the analytic tail D/(pi W) from the
/// asymptote S ~ D/omega^2. Should reproduce stationary_covariance(A, D).
template <typename T>
Mat4<T> integrated_spectrum(const Mat4<T>& A, const Mat4<T>& D, double half_width, int n_points) {
  if (!(half_width > 0.0) || n_points < 3)
    throw InvalidParameter("integrated_spectrum needs half_width > 0 and at least 3 points");
  const double h = 2.0 * half_width / (n_points - 1);
  Mat4<T> acc = Mat4<T>::Zero();
  for (int i = 0; i < n_points; ++i) {
    const double w = -half_width + h * i;
    const T weight = static_cast<T>((i == 0 || i == n_points - 1) ? 0.5 * h : h);
    acc += weight * spectrum_matrix(A, D, static_cast<T>(w));
  }
  const T two_pi = static_cast<T>(2.0 * kPi);
  return acc / two_pi + D / static_cast<T>(kPi * half_width);
}

} // namespace tdc

#endif // TDC_SPECTRUM_HPP
