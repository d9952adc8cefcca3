#ifndef BROWNFLOW_DIFFUSION_HPP
#define BROWNFLOW_DIFFUSION_HPP

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>

#include "brownflow/mollifier.hpp"

namespace brownflow {

/// n-point diffusion matrix A(x) = (g_eps(x_i - x_j))_{ij}. The diagonal is
/// set to 1 exactly; off-diagonal entries vanish identically whenever the
/// pair gap is at least 2*eps*r, so A is exactly the identity on the set
/// where all gaps exceed that threshold.
inline Eigen::MatrixXd diffusion_matrix(const CovarianceKernel& ck,
                                        std::span<const double> x) {
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n < 1) throw std::invalid_argument("diffusion_matrix: need at least one point");
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double g = ck(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
      a(i, j) = g;
      a(j, i) = g;
    }
  return a;
}

class NotPositiveSemidefiniteError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Symmetric PSD square root via eigendecomposition with eigenvalue clamping
/// at zero. A is singular exactly when particles (nearly) coincide, so a
/// Cholesky factor is not an option; clamping absorbs quadrature noise of
/// order -1e-9. Eigenvalues below -1e-9 * n are rejected as genuinely
/// non-PSD input.
///
/// The 2x2 case is evaluated in closed form: a correlation matrix
/// [[1,g],[g,1]] has eigenpairs (1±g, (1,±1)/sqrt(2)), giving the symmetric
/// root [[a,b],[b,a]] with a,b = (sqrt(1+g) ± sqrt(1-g))/2. This is the same
/// clamped eigendecomposition, just without the iterative solver; the flow
/// stepper calls it every step.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  if (n == 1) {
    const double v = a(0, 0);
    if (v < -1e-9) throw NotPositiveSemidefiniteError("psd_sqrt: negative 1x1 entry");
    return Eigen::MatrixXd::Constant(1, 1, std::sqrt(std::max(v, 0.0)));
  }
  if (n == 2 && a(0, 0) == 1.0 && a(1, 1) == 1.0) {
    const double g = a(0, 1);
    if (std::abs(g) > 1.0 + 2e-9)
      throw NotPositiveSemidefiniteError(
          "psd_sqrt: matrix is not PSD beyond quadrature noise");
    const double lp = std::max(1.0 + g, 0.0);
    const double lm = std::max(1.0 - g, 0.0);
    const double sa = 0.5 * (std::sqrt(lp) + std::sqrt(lm));
    const double sb = 0.5 * (std::sqrt(lp) - std::sqrt(lm));
    Eigen::MatrixXd l(2, 2);
    l << sa, sb, sb, sa;
    return l;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("psd_sqrt: eigendecomposition failed");
  Eigen::VectorXd lambda = solver.eigenvalues();
  const double floor = -1e-9 * static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda[i] < floor)
      throw NotPositiveSemidefiniteError(
          "psd_sqrt: matrix is not PSD beyond quadrature noise");
    lambda[i] = std::sqrt(std::max(lambda[i], 0.0));
  }
  return solver.eigenvectors() * lambda.asDiagonal() *
         solver.eigenvectors().transpose();
}

}  // namespace brownflow

#endif  // BROWNFLOW_DIFFUSION_HPP
