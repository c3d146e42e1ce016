#pragma once

// Likelihood ratio inference on the dimension d of the reductive subspace.
// The reduced model is extended PFC at dimension d; the full model is the
// multivariate linear model X_y = mu + beta f_y + error with unstructured
// error covariance, which is extended PFC at d = p.

#include <vector>

#include "sdr/basis.hpp"
#include "sdr/estimators.hpp"
#include "sdr/moments.hpp"

namespace sdr {

/// Upper-tail chi-squared probability P(X > x) for `df` degrees of freedom,
/// through the regularized incomplete gamma function.
double chisq_sf(double x, double df);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

/// Maximized full-model log-likelihood -(n/2) log|Sigma_res|, with the same
/// dropped constants as the extended PFC log-likelihood.
double loglik_full(const MomentSet& m);
double loglik_full(const Dataset& data, const BasisMatrix& F);

/// Parameter count used for AIC/BIC: p means, d r coefficients, and
/// p (p + 1) / 2 for (Gamma, Omega, Omega0), since d (p - d) Grassmann
/// coordinates plus d (d + 1) / 2 and (p - d)(p - d + 1) / 2 covariance terms
/// add up to p (p + 1) / 2. Differences across d equal the LRT degrees of
/// freedom r (p - d).
Index model_parameter_count(Index d, Index r, Index p);

struct DimensionTest {
  Index d = 0;
  double lambda = 0;  ///< -2 log likelihood ratio against the full model
  Index df = 0;       ///< r (p - d)
  double p_value = 1;
  double loglik = 0;
  double aic = 0;
  double bic = 0;
  CandidateSource source = CandidateSource::GrassmannLocal;
};

struct LrtOptions {
  ExtendedStrategy strategy = ExtendedStrategy::Grassmann;
  OptimOptions optim;
};

DimensionTest lrt_dimension(const Dataset& data, const BasisMatrix& F, Index d,
                            const LrtOptions& opts = {});
DimensionTest lrt_dimension(const MomentSet& m, Index d, const LrtOptions& opts = {});

struct SelectionResult {
  Index selected_d = 0;
  double alpha = 0.05;
  double loglik_full = 0;
  /// One row per d = 1..p; the row for d = p has lambda = 0 and df = 0.
  std::vector<DimensionTest> table;
  Index aic_d = 0;
  Index bic_d = 0;
};

/// Sequential testing: the smallest d whose test is not rejected at level
/// alpha (d = p when every d < p is rejected, always the case at alpha = 1). Fits at d + 1 are additionally
/// seeded from the d fit extended by one completion direction, which keeps
/// lambda nonincreasing in d.
SelectionResult select_d(const Dataset& data, const BasisMatrix& F, double alpha,
                         const LrtOptions& opts = {});
SelectionResult select_d(const MomentSet& m, double alpha, const LrtOptions& opts = {});

}  // namespace sdr
