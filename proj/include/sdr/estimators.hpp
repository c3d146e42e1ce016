#pragma once

// Model-based estimators of the reductive subspace.
//
//   fit_pc                       isotropic inverse model, per-observation means
//   fit_pfc_iso                  isotropic inverse model, means beta f_y
//   fit_extended_pc / _pfc       independent error components inside and
//                                outside the subspace (different scales)
//   fit_general_pfc[_known_delta] unstructured conditional covariance Delta
//   fit_sir, fit_ols             limiting cases of the general model
//
// Log-likelihoods drop additive constants but keep every data-dependent term
// within a model family, so differences inside one family are likelihood
// ratios. Values from different families are not comparable.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdr/basis.hpp"
#include "sdr/grassmann.hpp"
#include "sdr/linalg.hpp"
#include "sdr/moments.hpp"

namespace sdr {

enum class Method {
  PC,
  PFC,
  ExtendedPC,
  ExtendedPFC,
  GeneralPFCKnownDelta,
  GeneralPFC,
  SIR,
  OLS,
  BernoulliPC,
};

std::string to_string(Method m);

enum class CandidateSource { PC, PFC, RC, GrassmannLocal };
std::string to_string(CandidateSource s);

enum class ExtendedStrategy { PfcPc, PfcAll, Sequential, Grassmann };
std::string to_string(ExtendedStrategy s);
/// Accepts `pfc-pc`, `pfc-all`, `sequential`, `grassmann`.
ExtendedStrategy parse_strategy(const std::string& text);

struct ExtendedFitDetail {
  Matrix omega2_hat;    ///< G^T Sigma_res G, d x d
  Matrix omega0_2_hat;  ///< G0^T Sigma G0, (p-d) x (p-d); empty when d = p
  CandidateSource candidate_source = CandidateSource::PC;
  /// Candidate set that seeded the local search (grassmann strategy only).
  std::optional<CandidateSource> seed_source;
  ExtendedStrategy strategy = ExtendedStrategy::PfcPc;
  int optimizer_iterations = 0;
  bool optimizer_converged = true;
};

struct OlsDetail {
  Vector alpha;        ///< slope vector of y on X (with intercept)
  double intercept = 0;
  Vector c_hat;        ///< sample Cov(X, y), divisor n
  double sigma2_y = 0; ///< sample Var(y), divisor n
};

struct FittedReduction {
  Method method = Method::PC;
  /// Estimated reductive subspace: S_Gamma for the PC/PFC/extended models,
  /// span(Delta^{-1} Gamma) for the general models, SIR and OLS.
  Subspace subspace;
  /// p x d coordinate map; the reduction of x is W^T x.
  Matrix W;
  std::optional<double> sigma2_hat;
  std::optional<Matrix> delta_hat;
  double loglik = 0;
  Index d = 0;
  Index r = 0;
  Index n = 0;
  Index p = 0;
  std::optional<BasisKind> basis;
  Vector xbar;
  /// d x r coefficient matrix G^T Xc^T F (F^T F)^{-1} (isotropic PFC).
  std::optional<Matrix> beta_hat;
  /// Method-specific spectrum, descending (Sigma_hat for PC, Sigma_fit for PFC,
  /// the standardized kernel for the general models and SIR).
  Vector eigenvalues;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;
  std::optional<ExtendedFitDetail> extended;
  std::optional<OlsDetail> ols;
};

struct PcOptions {
  /// Compute components from the between-class covariance of groups of
  /// identical responses instead of the marginal covariance.
  bool replicated = false;
};

FittedReduction fit_pc(const Dataset& data, Index d, const PcOptions& opts = {});

FittedReduction fit_pfc_iso(const Dataset& data, const BasisMatrix& F, Index d);

/// min of the top-d eigenvalues minus max of the remaining eigenvalues of a
/// covariance matrix: positive when the leading components dominate.
double signal_dominance(const Matrix& sigma, Index d);

FittedReduction fit_extended_pc(const Dataset& data, Index d);

/// Partially maximized log-likelihood of the extended PFC model,
///   L(G) = -(n/2) log|G0^T S G0| - (n/2) log|G^T S_res G|,
/// evaluated through |G0^T S G0| = |S| |G^T S^{-1} G| so no completion is
/// formed. For a general full-rank p x d argument B the value is extended as
///   -(n/2) [log|S| + log|B^T S^{-1} B| + log|B^T S_res B| - 2 log|B^T B|],
/// which depends on span(B) only and agrees with L on orthonormal bases.
class ExtendedPfcObjective {
 public:
  ExtendedPfcObjective(const Matrix& sigma_hat, const Matrix& sigma_res, double n);
  explicit ExtendedPfcObjective(const MomentSet& m);

  double value(const Matrix& B) const;
  Matrix gradient(const Matrix& B) const;
  /// Same objective through an explicit orthonormal completion.
  double value_explicit(const Subspace& s) const;

  GrassmannProblem<double> problem(Index d) const;
  Index p() const { return sigma_.rows(); }

 private:
  Matrix sigma_;
  Matrix sigma_inv_;
  Matrix sigma_res_;
  double logdet_sigma_ = 0;
  double n_ = 1;
};

double eval_extended_pfc_objective(const Subspace& s, const MomentSet& m);

struct ExtendedOptions {
  OptimOptions optim;
  /// Additional starting bases for the grassmann strategy (p x d each). The
  /// best of them by objective value is optimized alongside the candidate-set
  /// winner.
  std::vector<Matrix> extra_seeds;
};

/// Extended PFC fit on precomputed moments (sample or population).
FittedReduction fit_extended_pfc(const MomentSet& m, Index d, ExtendedStrategy strategy,
                                 const ExtendedOptions& opts = {});
FittedReduction fit_extended_pfc(const Dataset& data, const BasisMatrix& F, Index d,
                                 ExtendedStrategy strategy, const ExtendedOptions& opts = {});

/// K(D)/n = -1/2 log|D| - 1/2 { tr(D^{-1} S_res) + sum_{i>d} lambda_i(D^{-1} S_fit) },
/// returned multiplied by n.
double general_pfc_loglik(const Matrix& D, const MomentSet& m, Index d);

FittedReduction fit_general_pfc_known_delta(const Dataset& data, const BasisMatrix& F, Index d,
                                            const Matrix& delta);
FittedReduction fit_general_pfc(const Dataset& data, const BasisMatrix& F, Index d);
FittedReduction fit_sir(const Dataset& data, int h, Index d);
FittedReduction fit_ols(const Dataset& data);

/// Rows are (W^T x)^T for every row x of Xnew.
Matrix reduce(const FittedReduction& fit, const Matrix& Xnew);

/// Forward least-squares fit of y on the reduced training predictors.
struct ForwardFit {
  double intercept = 0;
  Vector slope;
  /// W * slope: prediction is intercept + coefficients^T x.
  Vector coefficients;
};

ForwardFit forward_fit(const FittedReduction& fit, const Dataset& train);
Vector predict(const FittedReduction& fit, const Dataset& train, const Matrix& Xnew);

}  // namespace sdr
