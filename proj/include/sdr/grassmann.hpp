#pragma once

// Ascent of span-invariant objectives over the Grassmann manifold G(p, d).
//
// Iterates live on orthonormal p x d bases. Each step projects the Euclidean
// gradient onto the horizontal space, (I - B B^T) grad, takes a backtracking
// (halving) Armijo step from the configured initial length, and retracts back
// to the manifold with a thin QR factorization.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sdr/linalg.hpp"

namespace sdr {

template <typename Scalar>
struct GrassmannProblem {
  /// Objective evaluated on a p x d basis. It is maximized, and must depend on
  /// the basis only through its span (checked on the first evaluation).
  std::function<Scalar(const MatrixX<Scalar>&)> objective;
  /// Optional Euclidean gradient at a basis; numeric central differences are
  /// used when empty.
  std::function<MatrixX<Scalar>(const MatrixX<Scalar>&)> gradient;
  Index p = 0;
  Index d = 0;
};

struct OptimOptions {
  int max_iters = 500;
  double grad_tol = 1e-8;
  double initial_step = 1.0;
  int max_halvings = 60;
  double armijo = 1e-4;
  double fd_step = 1e-6;
};

template <typename Scalar>
struct OptimResult {
  BasicSubspace<Scalar> subspace;
  Scalar value{};
  int iterations = 0;
  bool converged = false;
  Scalar grad_norm{};
  /// Objective at the start and after every accepted step.
  std::vector<Scalar> history;
};

/// Central-difference Euclidean gradient, entry by entry.
template <typename Scalar>
MatrixX<Scalar> numeric_gradient(const GrassmannProblem<Scalar>& problem, const MatrixX<Scalar>& B,
                                 double step = 1e-6) {
  MatrixX<Scalar> grad(B.rows(), B.cols());
  MatrixX<Scalar> probe = B;
  for (Index j = 0; j < B.cols(); ++j) {
    for (Index i = 0; i < B.rows(); ++i) {
      const Scalar h = Scalar(step);
      probe(i, j) = B(i, j) + h;
      const Scalar up = problem.objective(probe);
      probe(i, j) = B(i, j) - h;
      const Scalar down = problem.objective(probe);
      probe(i, j) = B(i, j);
      grad(i, j) = (up - down) / (Scalar(2) * h);
    }
  }
  return grad;
}

namespace detail {

template <typename Scalar>
MatrixX<Scalar> qr_retract(const MatrixX<Scalar>& M) {
  return BasicSubspace<Scalar>::from_span(M).basis();
}

/// Fixed orthogonal d x d matrix used for the span-invariance spot check.
template <typename Scalar>
MatrixX<Scalar> invariance_probe(Index d) {
  MatrixX<Scalar> O = MatrixX<Scalar>::Identity(d, d);
  O(0, 0) = Scalar(-1);
  if (d >= 2) {
    const Scalar c = std::cos(Scalar(0.7));
    const Scalar s = std::sin(Scalar(0.7));
    MatrixX<Scalar> G = MatrixX<Scalar>::Identity(d, d);
    G(0, 0) = c;
    G(0, 1) = -s;
    G(1, 0) = s;
    G(1, 1) = c;
    O = O * G;
  }
  return O;
}

}  // namespace detail

template <typename Scalar>
OptimResult<Scalar> optimize(const GrassmannProblem<Scalar>& problem,
                             const BasicSubspace<Scalar>& start, const OptimOptions& opts = {}) {
  if (start.p() != problem.p || start.d() != problem.d) {
    throw DimensionError("starting subspace does not match the problem dimensions");
  }
  auto grad_at = [&](const MatrixX<Scalar>& B) {
    return problem.gradient ? problem.gradient(B) : numeric_gradient(problem, B, opts.fd_step);
  };

  MatrixX<Scalar> B = start.basis();
  Scalar f = problem.objective(B);
  if (!std::isfinite(static_cast<double>(f))) {
    throw InputError("objective is not finite at the starting subspace");
  }
  const Scalar f_rot = problem.objective((B * detail::invariance_probe<Scalar>(problem.d)).eval());
  if (!(std::abs(f_rot - f) <= Scalar(1e-8) * (Scalar(1) + std::abs(f)))) {
    throw InputError("objective is not invariant to a change of basis of the subspace");
  }

  OptimResult<Scalar> result;
  result.history.push_back(f);
  bool aborted = false;
  int iter = 0;
  Scalar gnorm = 0;
  for (; iter < opts.max_iters; ++iter) {
    const MatrixX<Scalar> G = grad_at(B);
    const MatrixX<Scalar> tangent = G - B * (B.transpose() * G);
    gnorm = tangent.norm();
    if (gnorm < Scalar(opts.grad_tol)) {
      result.converged = true;
      break;
    }
    const MatrixX<Scalar> B0 = B;
    Scalar step = Scalar(opts.initial_step);
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h, step /= Scalar(2)) {
      const MatrixX<Scalar> candidate = detail::qr_retract<Scalar>(B0 + step * tangent);
      const Scalar f_new = problem.objective(candidate);
      if (!std::isfinite(static_cast<double>(f_new))) {
        aborted = true;
        break;
      }
      if (f_new >= f + Scalar(opts.armijo) * step * gnorm * gnorm) {
        B = candidate;
        f = f_new;
        accepted = true;
        break;
      }
    }
    // Keep halving while the objective still improves; a fixed initial step
    // otherwise zig-zags across narrow ridges.
    if (accepted) {
      for (int h = 0; h < opts.max_halvings; ++h) {
        step /= Scalar(2);
        const MatrixX<Scalar> candidate = detail::qr_retract<Scalar>(B0 + step * tangent);
        const Scalar f_new = problem.objective(candidate);
        if (!std::isfinite(static_cast<double>(f_new)) || !(f_new > f)) break;
        B = candidate;
        f = f_new;
      }
    }
    if (aborted) break;
    if (!accepted) {
      // No representable ascent: stationary to working precision when the
      // predicted gain is below the rounding level of the objective.
      const Scalar eps = Eigen::NumTraits<Scalar>::epsilon();
      result.converged = gnorm * gnorm <= Scalar(64) * eps * (Scalar(1) + std::abs(f));
      break;
    }
    result.history.push_back(f);
  }
  result.subspace = BasicSubspace<Scalar>(B);
  result.value = f;
  result.iterations = iter;
  result.grad_norm = gnorm;
  return result;
}

}  // namespace sdr
