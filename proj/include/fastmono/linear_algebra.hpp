#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "fastmono/types.hpp"

namespace fastmono {

using ComplexMatrix = Eigen::MatrixXcd;
using EigenVector = Eigen::VectorXcd;

inline EigenVector to_eigen(const ComplexVector& v) {
  return Eigen::Map<const EigenVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline ComplexVector from_eigen(const EigenVector& v) {
  return ComplexVector(v.data(), v.data() + v.size());
}

struct GmresResult {
  EigenVector x;
  double relative_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Restarted GMRES with right Jacobi preconditioning, so the monitored
/// residual is the true residual ||b - A x|| / ||b||.
inline GmresResult gmres(const ComplexMatrix& A, const EigenVector& b, double rtol, int restart,
                         int max_iterations) {
  const Eigen::Index n = b.size();
  GmresResult out;
  out.x = EigenVector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  EigenVector inv_diag(n);
  for (Eigen::Index i = 0; i < n; ++i)
    inv_diag(i) = A(i, i) != Complex(0.0) ? Complex(1.0) / A(i, i) : Complex(1.0);

  const int m = std::max(1, restart);
  EigenVector r = b;
  double rnorm = bnorm;
  while (out.iterations < max_iterations) {
    ComplexMatrix V(n, m + 1);
    ComplexMatrix H = ComplexMatrix::Zero(m + 1, m);
    std::vector<Complex> cs(m), sn(m);
    EigenVector g = EigenVector::Zero(m + 1);
    g(0) = rnorm;
    V.col(0) = r / rnorm;
    int j = 0;
    for (; j < m && out.iterations < max_iterations; ++j, ++out.iterations) {
      EigenVector w = A * inv_diag.cwiseProduct(V.col(j));
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      if (std::abs(H(j + 1, j)) > 0.0) V.col(j + 1) = w / H(j + 1, j);
      for (int i = 0; i < j; ++i) {  // apply previous rotations
        const Complex t = std::conj(cs[i]) * H(i, j) + std::conj(sn[i]) * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(std::abs(H(j, j)), std::abs(H(j + 1, j)));
      cs[j] = denom > 0.0 ? H(j, j) / denom : Complex(1.0);
      sn[j] = denom > 0.0 ? H(j + 1, j) / denom : Complex(0.0);
      H(j, j) = std::conj(cs[j]) * H(j, j) + std::conj(sn[j]) * H(j + 1, j);
      H(j + 1, j) = 0.0;
      g(j + 1) = -sn[j] * g(j);
      g(j) = std::conj(cs[j]) * g(j);
      if (std::abs(g(j + 1)) <= rtol * bnorm) {
        ++j;
        ++out.iterations;
        break;
      }
    }
    // Back substitution on the j x j triangle.
    EigenVector y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    out.x += inv_diag.cwiseProduct(V.leftCols(j) * y);
    r = b - A * out.x;
    rnorm = r.norm();
    out.relative_residual = rnorm / bnorm;
    if (out.relative_residual <= rtol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace fastmono
