#include "sdr/expfam.hpp"

#include <algorithm>
#include <cmath>

namespace sdr {

namespace {

double log1p_exp(double eta) {
  return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

void require_support(const ExpFamily& fam, const Matrix& X) {
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) {
      if (!fam.in_support(X(i, j))) {
        throw InputError("entry (" + std::to_string(i + 1) + ", " + std::to_string(j + 1) +
                         ") is outside the " + fam.name + " support");
      }
    }
  }
}

double family_loglik(const ExpFamily& fam, const Matrix& X, const Matrix& eta) {
  double ll = 0;
  for (Index j = 0; j < X.cols(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) ll += X(i, j) * eta(i, j) - fam.log_partition(eta(i, j));
  }
  return ll;
}

/// One generalized linear model block: maximize sum_k x_k eta_k - A(eta_k)
/// over theta with eta = offset + Z theta, keeping |eta| <= cap.
struct GlmBlock {
  const ExpFamily& fam;
  const Vector& offset;
  const Matrix& Z;
  const Vector& x;
  double ridge;
  double cap;

  double loglik(const Vector& eta) const {
    double ll = 0;
    for (Index k = 0; k < eta.size(); ++k) ll += x(k) * eta(k) - fam.log_partition(eta(k));
    return ll;
  }

  /// Newton with step halving; only non-decreasing steps are taken. Returns
  /// true when the cap truncated a step.
  bool maximize(Vector& theta, int max_newton) const {
    bool capped = false;
    Vector eta = offset + Z * theta;
    double ll = loglik(eta);
    for (int it = 0; it < max_newton; ++it) {
      Vector w(eta.size());
      Vector resid(eta.size());
      for (Index k = 0; k < eta.size(); ++k) {
        w(k) = fam.variance(eta(k));
        resid(k) = x(k) - fam.mean(eta(k));
      }
      const Vector g = Z.transpose() * resid;
      Matrix H = Z.transpose() * w.asDiagonal() * Z;
      H.diagonal().array() += ridge;
      const Vector step = H.ldlt().solve(g);
      if (!step.allFinite()) break;
      const Vector dEta = Z * step;
      double t = 1.0;
      const double reach = (eta + dEta).cwiseAbs().maxCoeff();
      if (reach > cap) {
        // largest t in (0, 1] keeping every |eta_k + t dEta_k| <= cap
        for (Index k = 0; k < eta.size(); ++k) {
          if (dEta(k) > 0) t = std::min(t, (cap - eta(k)) / dEta(k));
          if (dEta(k) < 0) t = std::min(t, (-cap - eta(k)) / dEta(k));
        }
        t = std::max(t, 0.0);
        capped = true;
      }
      bool moved = false;
      for (int h = 0; h < 40 && t > 0; ++h, t *= 0.5) {
        const Vector eta_new = eta + t * dEta;
        const double ll_new = loglik(eta_new);
        if (ll_new >= ll) {
          moved = ll_new > ll;
          theta += t * step;
          eta = eta_new;
          ll = ll_new;
          break;
        }
      }
      if (!moved || (t * step).norm() < 1e-12 * (1.0 + theta.norm())) break;
    }
    return capped;
  }
};

void center_coordinates(BernoulliPCModel& m) {
  const Vector shift = m.nu.colwise().mean().transpose();
  m.nu.rowwise() -= shift.transpose();
  m.mu += m.Gamma * shift;
}

}  // namespace

const ExpFamily& bernoulli_family() {
  static const ExpFamily fam{
      "bernoulli",
      log1p_exp,
      logistic,
      [](double eta) {
        const double pr = logistic(eta);
        return pr * (1.0 - pr);
      },
      [](double x) { return x == 0.0 || x == 1.0; },
  };
  return fam;
}

Matrix BernoulliPCModel::eta() const {
  Matrix e = nu * Gamma.transpose();
  e.rowwise() += mu.transpose();
  return e;
}

double bernoulli_loglik(const Matrix& X, const Matrix& eta) {
  if (X.rows() != eta.rows() || X.cols() != eta.cols()) {
    throw DimensionError("X and eta differ in shape");
  }
  require_support(bernoulli_family(), X);
  return family_loglik(bernoulli_family(), X, eta);
}

double bernoulli_loglik(const Matrix& X, const BernoulliPCModel& model) {
  if (model.mu.size() != X.cols() || model.Gamma.rows() != X.cols() ||
      model.nu.rows() != X.rows() || model.nu.cols() != model.Gamma.cols()) {
    throw DimensionError("model does not match the shape of X");
  }
  return bernoulli_loglik(X, model.eta());
}

double bernoulli_null_loglik(const Matrix& X) {
  require_support(bernoulli_family(), X);
  double ll = 0;
  const double n = double(X.rows());
  for (Index j = 0; j < X.cols(); ++j) {
    const double k = X.col(j).sum();
    if (k > 0) ll += k * std::log(k / n);
    if (k < n) ll += (n - k) * std::log((n - k) / n);
  }
  return ll;
}

BernoulliFit fit_bernoulli_pc(const Matrix& X, Index d, const BernoulliOptions& opts) {
  const ExpFamily& fam = bernoulli_family();
  const Index n = X.rows();
  const Index p = X.cols();
  if (n < 2) throw InputError("Bernoulli PC needs at least two observations");
  if (d < 1 || d >= p) {
    throw DimensionError("Bernoulli PC needs 1 <= d < p (d=" + std::to_string(d) +
                         ", p=" + std::to_string(p) + ")");
  }
  require_support(fam, X);
  const Vector colmean = X.colwise().mean().transpose();
  for (Index j = 0; j < p; ++j) {
    if (colmean(j) == 0.0 || colmean(j) == 1.0) {
      throw InputError("predictor " + std::to_string(j + 1) +
                       " is constant across all rows; remove it before fitting");
    }
  }
  const bool constrained = opts.basis.has_value();
  if (constrained && opts.basis->n() != n) throw DimensionError("basis has the wrong number of rows");

  BernoulliFit out;
  BernoulliPCModel& m = out.model;
  m.mu = colmean.unaryExpr([](double q) { return std::log(q / (1.0 - q)); });
  const Matrix Xc = X.rowwise() - colmean.transpose();
  const Eigen::JacobiSVD<Matrix> svd(Xc, Eigen::ComputeThinV);
  m.Gamma = svd.matrixV().leftCols(d);
  if (opts.initial_gamma) {
    if (opts.initial_gamma->rows() != p || opts.initial_gamma->cols() != d) {
      throw DimensionError("initial Gamma must be p x d");
    }
    m.Gamma = Subspace::from_span(*opts.initial_gamma).basis();
  }
  m.nu = 4.0 * Xc * m.Gamma;
  Matrix beta;
  const Matrix* F = constrained ? &opts.basis->F : nullptr;
  if (constrained) {
    beta = F->colPivHouseholderQr().solve(m.nu).transpose();
    m.nu = *F * beta.transpose();
  }
  const double init_reach = m.eta().cwiseAbs().maxCoeff();
  if (init_reach > 0.5 * opts.eta_cap) {
    const double s = 0.5 * opts.eta_cap / init_reach;
    m.mu *= s;
    m.nu *= s;
    if (constrained) beta *= s;
  }

  double ll = bernoulli_loglik(X, m);
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    // (a) coordinates given (mu, Gamma)
    if (!constrained) {
      for (Index i = 0; i < n; ++i) {
        const Vector xi = X.row(i).transpose();
        Vector theta = m.nu.row(i).transpose();
        const GlmBlock block{fam, m.mu, m.Gamma, xi, opts.ridge, opts.eta_cap};
        out.capped |= block.maximize(theta, opts.max_newton);
        m.nu.row(i) = theta.transpose();
      }
      center_coordinates(m);
    } else {
      const Index r = F->cols();
      Matrix Z(n * p, d * r);
      Vector offset(n * p);
      Vector xv(n * p);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
          const Index row = i * p + j;
          for (Index b = 0; b < r; ++b) {
            for (Index a = 0; a < d; ++a) Z(row, a + b * d) = (*F)(i, b) * m.Gamma(j, a);
          }
          offset(row) = m.mu(j);
          xv(row) = X(i, j);
        }
      }
      Vector theta = Eigen::Map<const Vector>(beta.data(), d * r);
      const GlmBlock block{fam, offset, Z, xv, opts.ridge, opts.eta_cap};
      out.capped |= block.maximize(theta, opts.max_newton);
      beta = Eigen::Map<const Matrix>(theta.data(), d, r);
      m.nu = *F * beta.transpose();
    }

    // (b) offsets and loadings given the coordinates
    Matrix design(n, d + 1);
    design << Vector::Ones(n), m.nu;
    const Vector zero = Vector::Zero(n);
    Matrix loadings(p, d);
    for (Index j = 0; j < p; ++j) {
      const Vector xj = X.col(j);
      Vector theta(d + 1);
      theta << m.mu(j), m.Gamma.row(j).transpose();
      const GlmBlock block{fam, zero, design, xj, opts.ridge, opts.eta_cap};
      out.capped |= block.maximize(theta, opts.max_newton);
      m.mu(j) = theta(0);
      loadings.row(j) = theta.tail(d).transpose();
    }
    const Eigen::HouseholderQR<Matrix> qr(loadings);
    const Matrix Q = qr.householderQ() * Matrix::Identity(p, d);
    const Matrix R = Q.transpose() * loadings;
    m.Gamma = Q;
    m.nu = m.nu * R.transpose();
    if (constrained) beta = R * beta;

    const double ll_new = bernoulli_loglik(X, m);
    out.loglik_history.push_back(ll_new);
    const double gain = ll_new - ll;
    ll = ll_new;
    if (std::abs(gain) < opts.tol) {
      out.converged = true;
      break;
    }
  }

  FittedReduction& fit = out.fit;
  fit.method = Method::BernoulliPC;
  fit.subspace = Subspace::from_span(m.Gamma);
  fit.W = fit.subspace.basis();
  fit.loglik = ll;
  fit.d = d;
  fit.n = n;
  fit.p = p;
  fit.r = constrained ? opts.basis->r() : 0;
  if (constrained) fit.basis = opts.basis->kind;
  fit.xbar = colmean;
  fit.eigenvalues = Eigen::JacobiSVD<Matrix>(m.nu).singularValues() / std::sqrt(double(n));
  fit.diagnostics["null_loglik"] = bernoulli_null_loglik(X);
  fit.diagnostics["outer_iterations"] = double(out.loglik_history.size());
  if (out.capped) {
    fit.warnings.push_back("separation: natural parameters were capped at |eta| <= " +
                           detail::format_value(opts.eta_cap));
  }
  if (!out.converged) {
    fit.warnings.push_back("alternating maximization stopped after " +
                           std::to_string(opts.max_outer) + " outer iterations without converging");
  }
  if (constrained) out.beta = beta;
  return out;
}

}  // namespace sdr
