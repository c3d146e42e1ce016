#include "sdr/selection.hpp"

#include <cmath>
#include <limits>

namespace sdr {

namespace {

constexpr double kGammaEps = 1e-16;
constexpr int kGammaMaxIter = 10000;

/// Series for the regularized lower incomplete gamma P(a, x), x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int k = 1; k < kGammaMaxIter; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Modified Lentz continued fraction for Q(a, x), x >= a + 1.
double gamma_q_fraction(double a, double x) {
  const double tiny = std::numeric_limits<double>::min() / kGammaEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kGammaMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (!(a > 0)) throw InputError("gamma_q needs a > 0");
  if (!(x >= 0)) throw InputError("gamma_q needs x >= 0");
  if (x == 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chisq_sf(double x, double df) {
  if (!(df > 0)) throw InputError("chi-squared degrees of freedom must be positive");
  if (x < 0 || std::isnan(x)) throw InputError("chi-squared statistic must be nonnegative");
  return gamma_q(0.5 * df, 0.5 * x);
}

double loglik_full(const MomentSet& m) {
  const auto eig = sym_eig(m.sigma_res);
  try {
    require_positive_definite(eig.eigenvalues, "Sigma_res");
  } catch (const RankDeficientError& e) {
    throw RankDeficientError("residual covariance of the full model is singular", e.eigenvalue());
  }
  return -0.5 * double(m.n) * eig.eigenvalues.array().log().sum();
}

double loglik_full(const Dataset& data, const BasisMatrix& F) {
  if (data.n() <= data.p() + F.r()) {
    throw InputError("the full model needs n > p + r");
  }
  return loglik_full(compute_moments(data, F));
}

Index model_parameter_count(Index d, Index r, Index p) {
  return p + d * r + p * (p + 1) / 2;
}

namespace {

DimensionTest make_test(const MomentSet& m, Index d, double loglik, double full) {
  DimensionTest t;
  t.d = d;
  t.loglik = loglik;
  t.lambda = 2.0 * (full - loglik);
  t.df = m.r * (m.p - d);
  t.p_value = t.df > 0 ? chisq_sf(std::max(t.lambda, 0.0), double(t.df)) : 1.0;
  const double k = double(model_parameter_count(d, m.r, m.p));
  t.aic = -2.0 * loglik + 2.0 * k;
  t.bic = -2.0 * loglik + std::log(double(m.n)) * k;
  return t;
}

ExtendedOptions extended_options(const LrtOptions& opts) {
  ExtendedOptions eo;
  eo.optim = opts.optim;
  return eo;
}

/// Bases [G, G0 v_k] for every eigenvector v_k of G0^T Sigma G0.
std::vector<Matrix> nested_seeds(const FittedReduction& fit, const MomentSet& m) {
  std::vector<Matrix> seeds;
  const Matrix& G = fit.W;
  const Matrix G0 = orthonormal_completion(fit.subspace).basis();
  const auto eig = sym_eig(symmetrize(G0.transpose() * m.sigma_hat * G0));
  for (Index k = 0; k < G0.cols(); ++k) {
    Matrix B(m.p, G.cols() + 1);
    B << G, G0 * eig.eigenvectors.col(k);
    seeds.push_back(std::move(B));
  }
  return seeds;
}

}  // namespace

DimensionTest lrt_dimension(const MomentSet& m, Index d, const LrtOptions& opts) {
  const double full = loglik_full(m);
  const auto fit = fit_extended_pfc(m, d, opts.strategy, extended_options(opts));
  DimensionTest t = make_test(m, d, fit.loglik, full);
  if (d == m.p) t.lambda = 0.0;
  t.source = fit.extended->candidate_source;
  return t;
}

DimensionTest lrt_dimension(const Dataset& data, const BasisMatrix& F, Index d,
                            const LrtOptions& opts) {
  if (data.n() <= data.p() + F.r()) throw InputError("the full model needs n > p + r");
  return lrt_dimension(compute_moments(data, F), d, opts);
}

SelectionResult select_d(const MomentSet& m, double alpha, const LrtOptions& opts) {
  if (!(alpha > 0 && alpha <= 1)) throw InputError("alpha must lie in (0, 1]");
  SelectionResult out;
  out.alpha = alpha;
  out.loglik_full = loglik_full(m);
  out.selected_d = m.p;

  std::vector<Matrix> seeds;
  for (Index d = 1; d < m.p; ++d) {
    ExtendedOptions eo = extended_options(opts);
    ExtendedStrategy strategy = opts.strategy;
    if (!seeds.empty()) {
      eo.extra_seeds = seeds;
      strategy = ExtendedStrategy::Grassmann;
    }
    const auto fit = fit_extended_pfc(m, d, strategy, eo);
    DimensionTest t = make_test(m, d, fit.loglik, out.loglik_full);
    t.source = fit.extended->candidate_source;
    out.table.push_back(t);
    if (out.selected_d == m.p && t.p_value > alpha) out.selected_d = d;
    seeds = nested_seeds(fit, m);
  }
  DimensionTest full = make_test(m, m.p, out.loglik_full, out.loglik_full);
  full.lambda = 0.0;
  out.table.push_back(full);

  out.aic_d = out.table.front().d;
  out.bic_d = out.table.front().d;
  double best_aic = out.table.front().aic;
  double best_bic = out.table.front().bic;
  for (const auto& t : out.table) {
    if (t.aic < best_aic) best_aic = t.aic, out.aic_d = t.d;
    if (t.bic < best_bic) best_bic = t.bic, out.bic_d = t.d;
  }
  return out;
}

SelectionResult select_d(const Dataset& data, const BasisMatrix& F, double alpha,
                         const LrtOptions& opts) {
  if (data.n() <= data.p() + F.r()) throw InputError("the full model needs n > p + r");
  return select_d(compute_moments(data, F), alpha, opts);
}

}  // namespace sdr
