#pragma once

// Dense symmetric linear algebra and subspace geometry.
//
// Everything here is templated on the scalar type and accepts arbitrary
// Eigen expressions. Matrices are desk-scale (p up to ~100); the symmetric
// eigensolver is a cyclic Jacobi sweep with a fixed (row-major) pivot order so
// results are bit-stable on a given platform.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sdr/error.hpp"

namespace sdr {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Eigen::Index;

/// Eigendecomposition of a symmetric matrix. Eigenvalues are sorted in
/// descending order and column j of `eigenvectors` pairs with eigenvalue j.
/// Under eigenvalue multiplicity only the span of the tied columns is
/// meaningful; ties are ordered by original diagonal position.
template <typename Scalar>
struct SymEig {
  VectorX<Scalar> eigenvalues;
  MatrixX<Scalar> eigenvectors;
};

namespace detail {

template <typename Derived>
typename Derived::Scalar max_abs(const Eigen::MatrixBase<Derived>& A) {
  return A.size() == 0 ? typename Derived::Scalar(0) : A.cwiseAbs().maxCoeff();
}

inline std::string format_value(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace detail

/// Throws NotSymmetricError unless A is square and symmetric to `rel_tol`
/// relative to its largest entry.
template <typename Derived>
void check_symmetric(const Eigen::MatrixBase<Derived>& A, const char* what = "matrix",
                     double rel_tol = 1e-10) {
  if (A.rows() != A.cols()) {
    throw NotSymmetricError(std::string(what) + " is not square (" + std::to_string(A.rows()) +
                            "x" + std::to_string(A.cols()) + ")");
  }
  const auto scale = detail::max_abs(A);
  const auto asym = detail::max_abs((A - A.transpose()).eval());
  if (!(asym <= rel_tol * scale) && asym != 0) {
    throw NotSymmetricError(std::string(what) + " is not symmetric (max asymmetry " +
                            detail::format_value(static_cast<double>(asym)) + ")");
  }
}

template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& A) {
  return (0.5 * (A + A.transpose())).eval();
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
/// Sign convention: the largest-magnitude entry of each eigenvector is positive.
template <typename Derived>
SymEig<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& A_in) {
  using Scalar = typename Derived::Scalar;
  check_symmetric(A_in, "matrix passed to sym_eig");
  const Index p = A_in.rows();
  MatrixX<Scalar> A = symmetrize(A_in);
  MatrixX<Scalar> V = MatrixX<Scalar>::Identity(p, p);

  const Scalar eps = Eigen::NumTraits<Scalar>::epsilon();
  const Scalar norm = A.norm();
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const Scalar off = (A - MatrixX<Scalar>(A.diagonal().asDiagonal())).norm();
    if (off <= eps * norm) break;
    for (Index i = 0; i < p - 1; ++i) {
      for (Index j = i + 1; j < p; ++j) {
        if (A(i, j) == Scalar(0)) continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(A, i, j);
        A.applyOnTheLeft(i, j, rot.adjoint());
        A.applyOnTheRight(i, j, rot);
        V.applyOnTheRight(i, j, rot);
        A(i, j) = A(j, i) = Scalar(0);
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return A(a, a) > A(b, b); });

  SymEig<Scalar> out;
  out.eigenvalues.resize(p);
  out.eigenvectors.resize(p, p);
  for (Index k = 0; k < p; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = A(src, src);
    auto v = V.col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    out.eigenvectors.col(k) = v(arg) < Scalar(0) ? (-v).eval() : v.eval();
  }
  return out;
}

/// Throws RankDeficientError unless the eigenvalues describe a positive
/// definite matrix: lambda_min > p * 1e-12 * lambda_max.
template <typename Scalar>
void require_positive_definite(const VectorX<Scalar>& eigenvalues, const char* what) {
  const Index p = eigenvalues.size();
  const Scalar lmax = eigenvalues.maxCoeff();
  const Scalar lmin = eigenvalues.minCoeff();
  if (!(lmax > Scalar(0)) || !(lmin > Scalar(p) * Scalar(1e-12) * lmax)) {
    throw RankDeficientError(std::string(what) + " is not positive definite (smallest eigenvalue " +
                                 detail::format_value(static_cast<double>(lmin)) + ")",
                             static_cast<double>(lmin));
  }
}

/// A^exponent for symmetric positive definite A, exponent in {-1, -1/2, 1/2}.
template <typename Derived>
MatrixX<typename Derived::Scalar> spd_power(const Eigen::MatrixBase<Derived>& A,
                                            double exponent) {
  using Scalar = typename Derived::Scalar;
  if (exponent != -1.0 && exponent != -0.5 && exponent != 0.5) {
    throw InputError("spd_power supports exponents -1, -1/2 and 1/2 only");
  }
  const auto eig = sym_eig(A);
  require_positive_definite(eig.eigenvalues, "matrix passed to spd_power");
  const VectorX<Scalar> powered = eig.eigenvalues.array().pow(Scalar(exponent)).matrix();
  return symmetrize(eig.eigenvectors * powered.asDiagonal() * eig.eigenvectors.transpose());
}

/// log|A| for symmetric positive definite A, as the sum of log eigenvalues.
template <typename Derived>
typename Derived::Scalar logdet(const Eigen::MatrixBase<Derived>& A) {
  const auto eig = sym_eig(A);
  require_positive_definite(eig.eigenvalues, "matrix passed to logdet");
  return eig.eigenvalues.array().log().sum();
}

/// A d-dimensional subspace of R^p held through an orthonormal basis. Two
/// subspaces are equal when their spans coincide; the basis itself is only a
/// representative.
template <typename Scalar>
class BasicSubspace {
 public:
  BasicSubspace() = default;

  /// Takes ownership of a basis that must already be orthonormal.
  explicit BasicSubspace(MatrixX<Scalar> basis) : basis_(std::move(basis)) {
    if (basis_.cols() < 1 || basis_.cols() > basis_.rows()) {
      throw DimensionError("subspace dimension must satisfy 1 <= d <= p (got d=" +
                           std::to_string(basis_.cols()) + ", p=" + std::to_string(basis_.rows()) +
                           ")");
    }
    const Scalar err =
        (basis_.transpose() * basis_ - MatrixX<Scalar>::Identity(d(), d())).cwiseAbs().maxCoeff();
    if (!(err <= Scalar(1e-10))) {
      throw InputError("subspace basis is not orthonormal (error " +
                       detail::format_value(static_cast<double>(err)) + ")");
    }
  }

  /// Orthonormal basis for span(M) by Householder QR; column order is kept, so
  /// the first basis vector is proportional to the first column of M.
  template <typename Derived>
  static BasicSubspace from_span(const Eigen::MatrixBase<Derived>& M) {
    const Index p = M.rows();
    const Index d = M.cols();
    if (d < 1 || d > p) throw DimensionError("span needs 1 <= columns <= rows");
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(M.template cast<Scalar>());
    const MatrixX<Scalar> R = qr.matrixQR().topRows(d).template triangularView<Eigen::Upper>();
    const Scalar scale = std::max(detail::max_abs(R), std::numeric_limits<Scalar>::min());
    MatrixX<Scalar> Q = qr.householderQ() * MatrixX<Scalar>::Identity(p, d);
    for (Index k = 0; k < d; ++k) {
      if (!(std::abs(R(k, k)) > Scalar(1e-12) * scale)) {
        throw RankDeficientError("columns do not span a " + std::to_string(d) +
                                     "-dimensional subspace",
                                 static_cast<double>(R(k, k)));
      }
      if (R(k, k) < Scalar(0)) Q.col(k) = -Q.col(k);
    }
    return BasicSubspace(std::move(Q));
  }

  const MatrixX<Scalar>& basis() const { return basis_; }
  Index p() const { return basis_.rows(); }
  Index d() const { return basis_.cols(); }
  MatrixX<Scalar> projector() const { return basis_ * basis_.transpose(); }

 private:
  MatrixX<Scalar> basis_;
};

using Subspace = BasicSubspace<double>;

/// Largest principal angle between two equal-dimension subspaces, radians.
/// Computed as atan2(sin, cos) so it stays accurate for tiny angles.
template <typename Scalar>
Scalar subspace_angle_rad(const BasicSubspace<Scalar>& a, const BasicSubspace<Scalar>& b) {
  if (a.p() != b.p() || a.d() != b.d()) {
    throw DimensionError("subspace_angle needs equal ambient and subspace dimensions");
  }
  const MatrixX<Scalar> cross = a.basis().transpose() * b.basis();
  const MatrixX<Scalar> residual = b.basis() - a.basis() * cross;
  Eigen::JacobiSVD<MatrixX<Scalar>> cos_svd(cross);
  Eigen::JacobiSVD<MatrixX<Scalar>> sin_svd(residual);
  const Scalar cos_min = cos_svd.singularValues().minCoeff();
  const Scalar sin_max = sin_svd.singularValues().maxCoeff();
  return std::atan2(sin_max, cos_min);
}

/// Largest principal angle in degrees, in [0, 90].
template <typename Scalar>
Scalar subspace_angle(const BasicSubspace<Scalar>& a, const BasicSubspace<Scalar>& b) {
  return subspace_angle_rad(a, b) * Scalar(180) / Scalar(M_PI);
}

/// Orthonormal basis of the orthogonal complement: trailing p-d columns of the
/// Q factor of [S | I_p] (Householder QR, no pivoting).
template <typename Scalar>
BasicSubspace<Scalar> orthonormal_completion(const BasicSubspace<Scalar>& s) {
  const Index p = s.p();
  const Index d = s.d();
  if (d >= p) throw DimensionError("a full-dimensional subspace has an empty completion");
  MatrixX<Scalar> stacked(p, d + p);
  stacked << s.basis(), MatrixX<Scalar>::Identity(p, p);
  Eigen::HouseholderQR<MatrixX<Scalar>> qr(stacked);
  const MatrixX<Scalar> Q = qr.householderQ();
  return BasicSubspace<Scalar>(Q.rightCols(p - d));
}

}  // namespace sdr
