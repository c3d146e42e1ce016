#pragma once

// Data generators for the inverse simulation models, their population
// moments, and a replication harness that summarizes estimator accuracy by
// the largest principal angle to the true reductive subspace.
//
//   m7            X_y = Gamma y + sigma eps
//   m12           X_y = Gamma y + sigma0 Gamma0 eps0 + sigma Gamma eps
//   m19           X_y = Gamma y + Delta^{1/2} eps, Delta = A^T A, A standard normal
//   m19-exactfit  m19 with Delta = (c I - Gamma Gamma^T) sigma_Y^2, c > 1
//
// Y ~ N(0, sigma_Y^2) in every model.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdr/estimators.hpp"
#include "sdr/linalg.hpp"
#include "sdr/moments.hpp"

namespace sdr {

enum class SimModel { M7, M12, M19, M19ExactFit };
std::string to_string(SimModel m);
/// Accepts `m7`, `m12`, `m19`, `m19-exactfit`.
SimModel parse_model(const std::string& text);

/// Estimators compared by the harness, all at d = 1.
///   ols            forward least squares
///   pc, pfc        isotropic models, pfc with f_y = y - ybar
///   pfc-pc, pfc-all, pfc-grassmann
///                  extended PFC on the slice basis with the named strategy
///   sir            sliced inverse regression
///   pfc-poly       general PFC with a cubic basis and Delta estimated
///   pfc-delta      general PFC on the slice basis with the true Delta
enum class StudyEstimator { OLS, PC, PFC, PfcPc, PfcAll, PfcGrassmann, SIR, PfcPoly, PfcDelta };
std::string to_string(StudyEstimator e);
StudyEstimator parse_estimator(const std::string& text);

struct SimConfig {
  SimModel model = SimModel::M7;
  Index n = 40;
  Index p = 10;
  double sigma_y = 1;
  double sigma = 1;
  double sigma0 = 1;
  /// Unit p-vector; empty selects the model default (e_1 for m7/m12,
  /// (1, ..., 1)/sqrt(p) for m19 and m19-exactfit).
  Vector gamma;
  /// Seed of the once-generated random Delta of m19.
  std::uint64_t delta_seed = 19;
  /// m19-exactfit uses c = 1 + 0.1 / 10^k unless c is given.
  double k = 0;
  std::optional<double> c;
  int slices = 8;
  int poly_degree = 3;
  int reps = 100;
  std::vector<StudyEstimator> estimators;
  std::uint64_t seed = 1;
  /// Worker threads for replications; 0 uses the hardware concurrency.
  int threads = 0;
  bool compute_mse = false;

  /// Throws InputError on non-positive scales, a non-unit Gamma, reps < 1,
  /// or c <= 1 for m19-exactfit.
  void validate() const;
  Vector resolved_gamma() const;
  double resolved_c() const;
};

/// Conditional covariance Var(X | Y) of the model.
Matrix conditional_covariance(const SimConfig& cfg);

/// Draws replication `rep` of the model. The response and the errors come
/// from separate Philox streams keyed by (seed, rep), so a replication shares
/// its underlying draws across the settings of a sweep.
Dataset generate(const SimConfig& cfg, std::uint32_t rep);

struct PopulationMoments {
  Matrix sigma;
  Matrix sigma_fit;
  Matrix sigma_res;
  /// span(Gamma) for m7/m12, span(Delta^{-1} Gamma) for the m19 family.
  Subspace true_subspace;

  /// As a MomentSet with r = 1 and the given nominal sample size.
  MomentSet as_moments(Index n = 1) const;
};

/// Closed-form moments for the linear basis f_y = y - ybar, where
/// Var(f_Y) = sigma_Y^2: Sigma_fit = Gamma Gamma^T sigma_Y^2 and
/// Sigma_res = Var(X | Y).
PopulationMoments population_moments(const SimConfig& cfg);

struct OlsOracles {
  Vector alpha;      ///< R Gamma, R = sigma_Y^2 / (sigma_Y^2 + sigma^2)
  Matrix var_alpha;  ///< asymptotic Var(sqrt(n) alpha_hat) = R Q_Gamma + R (1 - R) P_Gamma
  Matrix rho;        ///< marginal correlations of the predictors
  double r = 0;
};

/// m7 only; throws InputError for other models.
OlsOracles ols_oracles(const SimConfig& cfg);

/// Delta - Delta_sir = Gamma Gamma^T E(Var(Y | Y in H_k)) for h equal-probability
/// slices of N(0, sigma_Y^2), using truncated-normal moments per slice.
Matrix delta_sir_gap(const SimConfig& cfg, int h);

/// E(Y_f - a - b^T X_f)^2 / sigma^2_{Y|X} for a future draw of the model,
/// given the forward prediction rule a + b^T x.
double scaled_prediction_mse(const SimConfig& cfg, double a, const Vector& b);

struct StudyRow {
  std::string sweep_param;
  double sweep_value = 0;
  StudyEstimator estimator = StudyEstimator::OLS;
  double mean_angle_deg = 0;
  double sd_angle_deg = 0;
  double log_mean_angle = 0;
  double mean_mse = 0;  ///< NaN when MSE is not computed
  int n_ok = 0;
  int n_fail = 0;
  /// Winning candidate set counts for the extended PFC estimators, indexed
  /// by CandidateSource.
  std::vector<int> source_counts;
  /// Per-replication angle in degrees, NaN for failed fits.
  std::vector<double> angles;
  std::vector<double> mses;
};

struct StudyTable {
  std::vector<StudyRow> rows;

  const StudyRow& row(double sweep_value, StudyEstimator e) const;
  /// Columns: sweep_param, sweep_value, estimator, mean_angle_deg,
  /// sd_angle_deg, mean_mse, n_fail, n_ok, log_mean_angle, src_pc, src_pfc,
  /// src_rc, src_local.
  std::string to_csv() const;
  /// Gnuplot script drawing one curve per estimator from `csv_path`.
  std::string gnuplot_script(const std::string& csv_path, bool log_angles) const;
};

struct Sweep {
  /// One of n, sigma_y, sigma, sigma0, k, c.
  std::string param;
  std::vector<double> values;
};

/// Sets the swept parameter of `cfg` to `value`.
void apply_sweep(SimConfig& cfg, const std::string& param, double value);

/// Runs cfg.reps replications at every sweep value. Replications run on
/// cfg.threads workers and are aggregated in replication order, so the table
/// does not depend on the thread count. Fit failures are counted and
/// excluded from the summaries.
StudyTable run_study(const SimConfig& cfg, const Sweep& sweep);

/// Figure presets: 1a 1b 1c 1d 2a 2b 2c 2d 3a 3b.
struct FigurePreset {
  std::string name;
  SimConfig config;
  Sweep sweep;
  bool log_angles = false;
};

FigurePreset figure_preset(const std::string& name);
std::vector<std::string> figure_names();

}  // namespace sdr
