#pragma once

// Generalized principal components for conditionally independent
// one-parameter exponential-family predictors with natural parameters
//   eta_yj = mu_j + gamma_j^T nu_y.
// The fit is written against a family interface; Bernoulli is provided.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdr/basis.hpp"
#include "sdr/estimators.hpp"
#include "sdr/linalg.hpp"

namespace sdr {

/// Log-likelihood contribution x eta - A(eta) with mean A'(eta) and
/// variance A''(eta); the base measure b(x) is dropped.
struct ExpFamily {
  std::string name;
  std::function<double(double)> log_partition;
  std::function<double(double)> mean;
  std::function<double(double)> variance;
  std::function<bool(double)> in_support;
};

const ExpFamily& bernoulli_family();

struct BernoulliPCModel {
  Vector mu;     ///< p offsets
  Matrix Gamma;  ///< p x d, orthonormal columns
  Matrix nu;     ///< n x d coordinates, columns summing to zero

  /// n x p natural parameters mu_j + gamma_j^T nu_y.
  Matrix eta() const;
};

/// Sum over cells of x eta - log(1 + e^eta). Throws InputError on entries
/// outside {0, 1} or shape mismatch.
double bernoulli_loglik(const Matrix& X, const BernoulliPCModel& model);
double bernoulli_loglik(const Matrix& X, const Matrix& eta);

/// Maximized log-likelihood with eta_yj = mu_j (no structure).
double bernoulli_null_loglik(const Matrix& X);

struct BernoulliOptions {
  int max_outer = 200;
  double tol = 1e-8;             ///< stop when the outer loglik gain is below tol
  double ridge = 1e-6;           ///< added to every Newton Hessian
  double eta_cap = 30;           ///< |eta| bound enforced on every update
  int max_newton = 25;
  /// Constrain nu_y = beta f_y with this basis of the response instead of
  /// per-observation coordinates.
  std::optional<BasisMatrix> basis;
  /// Starting loadings (p x d); the default starts from the leading right
  /// singular vectors of the centered X.
  std::optional<Matrix> initial_gamma;
};

struct BernoulliFit {
  BernoulliPCModel model;
  FittedReduction fit;
  std::optional<Matrix> beta;  ///< d x r, basis-constrained variant only
  std::vector<double> loglik_history;  ///< one value per completed outer iteration
  bool converged = false;
  bool capped = false;  ///< some |eta| reached eta_cap (separation)
};

/// Alternating maximization: (a) Newton on each nu_y (or on beta) given
/// (mu, Gamma); (b) per-predictor Newton on (mu_j, gamma_j) given nu,
/// followed by re-orthonormalizing Gamma and absorbing the triangular factor
/// into nu. Both steps are monotone in the log-likelihood.
BernoulliFit fit_bernoulli_pc(const Matrix& X, Index d, const BernoulliOptions& opts = {});

}  // namespace sdr
