#include "sdr/estimators.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <utility>

namespace sdr {

std::string to_string(Method m) {
  switch (m) {
    case Method::PC:
      return "pc";
    case Method::PFC:
      return "pfc";
    case Method::ExtendedPC:
      return "extended-pc";
    case Method::ExtendedPFC:
      return "extended-pfc";
    case Method::GeneralPFCKnownDelta:
      return "general-pfc-known-delta";
    case Method::GeneralPFC:
      return "general-pfc";
    case Method::SIR:
      return "sir";
    case Method::OLS:
      return "ols";
    case Method::BernoulliPC:
      return "bernoulli-pc";
  }
  return "unknown";
}

std::string to_string(CandidateSource s) {
  switch (s) {
    case CandidateSource::PC:
      return "PC";
    case CandidateSource::PFC:
      return "PFC";
    case CandidateSource::RC:
      return "RC";
    case CandidateSource::GrassmannLocal:
      return "grassmann-local";
  }
  return "unknown";
}

std::string to_string(ExtendedStrategy s) {
  switch (s) {
    case ExtendedStrategy::PfcPc:
      return "pfc-pc";
    case ExtendedStrategy::PfcAll:
      return "pfc-all";
    case ExtendedStrategy::Sequential:
      return "sequential";
    case ExtendedStrategy::Grassmann:
      return "grassmann";
  }
  return "unknown";
}

ExtendedStrategy parse_strategy(const std::string& text) {
  if (text == "pfc-pc") return ExtendedStrategy::PfcPc;
  if (text == "pfc-all") return ExtendedStrategy::PfcAll;
  if (text == "sequential") return ExtendedStrategy::Sequential;
  if (text == "grassmann") return ExtendedStrategy::Grassmann;
  throw InputError("unknown strategy '" + text +
                   "' (expected pfc-pc, pfc-all, sequential, grassmann)");
}

namespace {

constexpr double kRankTol = 1e-10;

struct Marginal {
  Vector xbar;
  Matrix centered;
  Matrix sigma;
};

Marginal marginal(const Dataset& data) {
  Marginal m;
  m.xbar = data.X.colwise().mean().transpose();
  m.centered = data.X.rowwise() - m.xbar.transpose();
  m.sigma = symmetrize(m.centered.transpose() * m.centered / double(data.n()));
  return m;
}

void require_d(Index d, Index lo_exclusive_hi, bool allow_equal, const char* what) {
  const bool ok = d >= 1 && (allow_equal ? d <= lo_exclusive_hi : d < lo_exclusive_hi);
  if (!ok) {
    throw DimensionError(std::string(what) + ": d=" + std::to_string(d) + " must satisfy 1 <= d " +
                         (allow_equal ? "<= " : "< ") + std::to_string(lo_exclusive_hi));
  }
}

/// Numerical rank of Sigma_fit, measured against the scale of Sigma_hat.
Index fit_rank(const Vector& fit_eigenvalues, const Matrix& sigma) {
  const double scale = std::max(sigma.trace() / double(sigma.rows()), 0.0);
  Index k = 0;
  for (Index i = 0; i < fit_eigenvalues.size(); ++i) {
    if (fit_eigenvalues(i) > kRankTol * scale) ++k;
  }
  return k;
}

/// Log-determinant of a small symmetric matrix through Cholesky. Returns
/// -infinity when the factorization hits a zero or negative pivot.
double chol_logdet(const Matrix& A) {
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Vector diag = llt.matrixLLT().diagonal();
  double s = 0;
  for (Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0)) return -std::numeric_limits<double>::infinity();
    s += std::log(diag(i));
  }
  return 2.0 * s;
}

FittedReduction base_result(Method method, const Dataset& data, Index d) {
  FittedReduction out;
  out.method = method;
  out.d = d;
  out.n = data.n();
  out.p = data.p();
  return out;
}

/// Calls fn(indices) for every size-k subset of {0..m-1} in lexicographic order.
void for_each_combination(Index m, Index k, const std::function<void(const std::vector<Index>&)>& fn) {
  if (k > m || k < 0) return;
  std::vector<Index> idx(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) idx[std::size_t(i)] = i;
  while (true) {
    fn(idx);
    Index i = k - 1;
    while (i >= 0 && idx[std::size_t(i)] == m - k + i) --i;
    if (i < 0) return;
    ++idx[std::size_t(i)];
    for (Index j = i + 1; j < k; ++j) idx[std::size_t(j)] = idx[std::size_t(j - 1)] + 1;
  }
}

Matrix select_columns(const Matrix& M, const std::vector<Index>& cols) {
  Matrix out(M.rows(), Index(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(Index(j)) = M.col(cols[j]);
  return out;
}

/// Between-class covariance of groups of identical responses.
Matrix between_class_covariance(const Dataset& data, const Vector& xbar, Index& groups) {
  const Index n = data.n();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[std::size_t(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return data.y(a) < data.y(b); });
  Matrix B = Matrix::Zero(data.p(), data.p());
  groups = 0;
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start + 1;
    while (end < order.size() && data.y(order[end]) == data.y(order[start])) ++end;
    Vector mean = Vector::Zero(data.p());
    for (std::size_t i = start; i < end; ++i) mean += data.X.row(order[i]).transpose();
    mean /= double(end - start);
    const Vector dev = mean - xbar;
    B += (double(end - start) / double(n)) * dev * dev.transpose();
    ++groups;
    start = end;
  }
  return symmetrize(B);
}

}  // namespace

FittedReduction fit_pc(const Dataset& data, Index d, const PcOptions& opts) {
  data.validate();
  require_d(d, data.p(), false, "fit_pc");
  const Index p = data.p();
  const Marginal mg = marginal(data);
  if (!(mg.sigma.trace() > 0)) throw InputError("predictors have zero variance");

  FittedReduction out = base_result(Method::PC, data, d);
  out.xbar = mg.xbar;
  const auto eig = sym_eig(mg.sigma);
  double sigma2 = 0;
  Matrix G;
  if (opts.replicated) {
    Index groups = 0;
    const Matrix between = between_class_covariance(data, mg.xbar, groups);
    const auto beig = sym_eig(between);
    if (fit_rank(beig.eigenvalues, mg.sigma) < d) {
      throw FitError("between-class covariance has rank below d=" + std::to_string(d) + " (" +
                     std::to_string(groups) + " distinct responses)");
    }
    G = beig.eigenvectors.leftCols(d);
    sigma2 = (mg.sigma.trace() - beig.eigenvalues.head(d).sum()) / double(p);
    out.eigenvalues = beig.eigenvalues;
    out.diagnostics["distinct_responses"] = double(groups);
  } else {
    G = eig.eigenvectors.leftCols(d);
    sigma2 = eig.eigenvalues.tail(p - d).sum() / double(p);
    out.eigenvalues = eig.eigenvalues;
  }
  if (!(sigma2 > 0)) {
    throw FitError("estimated error variance is zero: the predictors lie in a " +
                   std::to_string(d) + "-dimensional subspace");
  }
  out.subspace = Subspace(G);
  out.W = G;
  out.sigma2_hat = sigma2;
  out.loglik = -0.5 * double(data.n() * p) * (std::log(sigma2) + 1.0);
  out.diagnostics["signal_dominance"] = signal_dominance(mg.sigma, d);
  return out;
}

FittedReduction fit_pfc_iso(const Dataset& data, const BasisMatrix& F, Index d) {
  const MomentSet m = compute_moments(data, F);
  require_d(d, data.p(), true, "fit_pfc_iso");
  const Index p = data.p();
  const auto eig = sym_eig(m.sigma_fit);
  const Index rank = fit_rank(eig.eigenvalues, m.sigma_hat);
  if (d > rank) {
    throw FitError("d=" + std::to_string(d) + " exceeds rank(Sigma_fit)=" + std::to_string(rank));
  }
  const Matrix G = eig.eigenvectors.leftCols(d);
  const double sigma2 = (m.sigma_hat.trace() - eig.eigenvalues.head(d).sum()) / double(p);
  if (!(sigma2 > 0)) throw FitError("estimated error variance is zero");

  FittedReduction out = base_result(Method::PFC, data, d);
  out.r = m.r;
  out.basis = F.kind;
  out.xbar = m.xbar;
  out.subspace = Subspace(G);
  out.W = G;
  out.sigma2_hat = sigma2;
  out.loglik = -0.5 * double(data.n() * p) * (std::log(sigma2) + 1.0);
  out.eigenvalues = eig.eigenvalues;

  const Matrix centered = data.X.rowwise() - m.xbar.transpose();
  const Matrix coef = F.F.colPivHouseholderQr().solve(centered * G);  // r x d
  out.beta_hat = coef.transpose();
  out.warnings = F.warnings;
  return out;
}

double signal_dominance(const Matrix& sigma, Index d) {
  const Index p = sigma.rows();
  require_d(d, p, false, "signal_dominance");
  const auto eig = sym_eig(sigma);
  return eig.eigenvalues(d - 1) - eig.eigenvalues(d);
}

FittedReduction fit_extended_pc(const Dataset& data, Index d) {
  FittedReduction out = fit_pc(data, d);
  out.method = Method::ExtendedPC;
  out.sigma2_hat.reset();
  const Marginal mg = marginal(data);
  const Subspace completion = orthonormal_completion(out.subspace);
  const Matrix G0 = completion.basis();
  const Matrix omega0 = symmetrize(G0.transpose() * mg.sigma * G0);
  // The within-subspace covariance is unidentified without replication, so
  // only the G-dependent term -(n/2) log|G0^T S G0| is reported.
  out.loglik = -0.5 * double(data.n()) * chol_logdet(omega0);
  ExtendedFitDetail detail;
  detail.omega2_hat = symmetrize(out.W.transpose() * mg.sigma * out.W);
  detail.omega0_2_hat = omega0;
  detail.candidate_source = CandidateSource::PC;
  out.extended = detail;
  if (out.diagnostics["signal_dominance"] <= 0) {
    out.warnings.push_back("leading eigenvalues do not dominate the remaining ones; the principal "
                           "component span is unreliable for this model");
  }
  return out;
}

ExtendedPfcObjective::ExtendedPfcObjective(const Matrix& sigma_hat, const Matrix& sigma_res,
                                           double n)
    : sigma_(symmetrize(sigma_hat)), sigma_res_(symmetrize(sigma_res)), n_(n) {
  if (sigma_.rows() != sigma_res_.rows() || sigma_.cols() != sigma_res_.cols()) {
    throw DimensionError("Sigma_hat and Sigma_res differ in size");
  }
  check_symmetric(sigma_hat, "Sigma_hat");
  check_symmetric(sigma_res, "Sigma_res");
  const auto eig = sym_eig(sigma_);
  require_positive_definite(eig.eigenvalues, "Sigma_hat");
  const Vector inv = eig.eigenvalues.cwiseInverse();
  sigma_inv_ = symmetrize(eig.eigenvectors * inv.asDiagonal() * eig.eigenvectors.transpose());
  logdet_sigma_ = eig.eigenvalues.array().log().sum();
}

ExtendedPfcObjective::ExtendedPfcObjective(const MomentSet& m)
    : ExtendedPfcObjective(m.sigma_hat, m.sigma_res, double(m.n)) {}

double ExtendedPfcObjective::value(const Matrix& B) const {
  const double ld_gram = chol_logdet(B.transpose() * B);
  const double ld_inv = chol_logdet(B.transpose() * sigma_inv_ * B);
  if (!std::isfinite(ld_gram) || !std::isfinite(ld_inv)) {
    return -std::numeric_limits<double>::infinity();
  }
  const double ld_res = chol_logdet(B.transpose() * sigma_res_ * B);
  return -0.5 * n_ * (logdet_sigma_ + ld_inv + ld_res - 2.0 * ld_gram);
}

Matrix ExtendedPfcObjective::gradient(const Matrix& B) const {
  const Matrix SiB = sigma_inv_ * B;
  const Matrix SrB = sigma_res_ * B;
  const Matrix a = (B.transpose() * SiB).ldlt().solve(Matrix::Identity(B.cols(), B.cols()));
  const Matrix b = (B.transpose() * SrB).ldlt().solve(Matrix::Identity(B.cols(), B.cols()));
  const Matrix c = (B.transpose() * B).ldlt().solve(Matrix::Identity(B.cols(), B.cols()));
  return -n_ * (SiB * a + SrB * b - 2.0 * B * c);
}

double ExtendedPfcObjective::value_explicit(const Subspace& s) const {
  const Matrix& G = s.basis();
  if (s.d() == s.p()) return -0.5 * n_ * logdet(sigma_res_);
  const Matrix G0 = orthonormal_completion(s).basis();
  return -0.5 * n_ *
         (logdet(symmetrize(G0.transpose() * sigma_ * G0)) +
          logdet(symmetrize(G.transpose() * sigma_res_ * G)));
}

GrassmannProblem<double> ExtendedPfcObjective::problem(Index d) const {
  GrassmannProblem<double> prob;
  prob.p = p();
  prob.d = d;
  prob.objective = [this](const Matrix& B) { return value(B); };
  prob.gradient = [this](const Matrix& B) { return gradient(B); };
  return prob;
}

double eval_extended_pfc_objective(const Subspace& s, const MomentSet& m) {
  if (s.p() != m.p) throw DimensionError("subspace and moments differ in p");
  if (s.d() >= s.p()) throw DimensionError("eval_extended_pfc_objective needs d < p");
  return ExtendedPfcObjective(m).value(s.basis());
}

namespace {

struct Candidate {
  Matrix basis;
  double value = -std::numeric_limits<double>::infinity();
  CandidateSource source = CandidateSource::PC;
  bool found = false;
};

void offer(Candidate& best, const ExtendedPfcObjective& obj, const Matrix& B,
           CandidateSource source) {
  const double v = obj.value(B);
  if (std::isnan(v)) return;
  if (!best.found || v > best.value) {
    best.basis = B;
    best.value = v;
    best.source = source;
    best.found = true;
  }
}

void search_set(Candidate& best, const ExtendedPfcObjective& obj, const Matrix& directions,
                Index d, CandidateSource source) {
  for_each_combination(directions.cols(), d, [&](const std::vector<Index>& idx) {
    offer(best, obj, select_columns(directions, idx), source);
  });
}

/// PFC directions padded to d columns with subsets of another candidate set
/// when rank(Sigma_fit) < d.
void search_padded_pfc(Candidate& best, const ExtendedPfcObjective& obj, const Matrix& pfc,
                       const Matrix& pad, Index d) {
  const Index k = pfc.cols();
  for_each_combination(pad.cols(), d - k, [&](const std::vector<Index>& idx) {
    Matrix M(pfc.rows(), d);
    M << pfc, select_columns(pad, idx);
    try {
      offer(best, obj, Subspace::from_span(M).basis(), CandidateSource::PFC);
    } catch (const RankDeficientError&) {
      // padding direction inside span(pfc); not a valid candidate
    }
  });
}

Candidate best_pfc_all(const ExtendedPfcObjective& obj, const MomentSet& m, Index d) {
  const auto pc = sym_eig(m.sigma_hat);
  const auto fit = sym_eig(m.sigma_fit);
  const auto rc = sym_eig(m.sigma_res);
  const Index k_fit = fit_rank(fit.eigenvalues, m.sigma_hat);

  Candidate best;
  search_set(best, obj, pc.eigenvectors, d, CandidateSource::PC);
  if (k_fit >= d) {
    search_set(best, obj, fit.eigenvectors.leftCols(k_fit), d, CandidateSource::PFC);
  } else if (k_fit > 0) {
    const Matrix pfc = fit.eigenvectors.leftCols(k_fit);
    search_padded_pfc(best, obj, pfc, pc.eigenvectors, d);
    search_padded_pfc(best, obj, pfc, rc.eigenvectors, d);
  }
  search_set(best, obj, rc.eigenvectors, d, CandidateSource::RC);
  return best;
}

Candidate best_sequential(const ExtendedPfcObjective& obj, const Matrix& pcs, Index d) {
  std::vector<Index> chosen;
  std::vector<bool> used(static_cast<std::size_t>(pcs.cols()), false);
  Candidate best;
  for (Index step = 0; step < d; ++step) {
    Candidate round;
    Index arg = -1;
    for (Index j = 0; j < pcs.cols(); ++j) {
      if (used[std::size_t(j)]) continue;
      auto idx = chosen;
      idx.push_back(j);
      const Matrix B = select_columns(pcs, idx);
      const double before = round.value;
      const bool had = round.found;
      offer(round, obj, B, CandidateSource::PC);
      if (round.found && (!had || round.value > before)) arg = j;
    }
    if (arg < 0) throw FitError("sequential search found no finite candidate");
    chosen.push_back(arg);
    used[std::size_t(arg)] = true;
    best = round;
  }
  return best;
}

FittedReduction full_dimension_fit(const MomentSet& m, ExtendedStrategy strategy) {
  FittedReduction out;
  out.method = Method::ExtendedPFC;
  out.d = m.p;
  out.p = m.p;
  out.n = m.n;
  out.r = m.r;
  out.xbar = m.xbar;
  out.subspace = Subspace(Matrix::Identity(m.p, m.p));
  out.W = out.subspace.basis();
  out.loglik = -0.5 * double(m.n) * logdet(m.sigma_res);
  ExtendedFitDetail detail;
  detail.omega2_hat = m.sigma_res;
  detail.omega0_2_hat = Matrix(0, 0);
  detail.strategy = strategy;
  out.extended = detail;
  return out;
}

}  // namespace

FittedReduction fit_extended_pfc(const MomentSet& m, Index d, ExtendedStrategy strategy,
                                 const ExtendedOptions& opts) {
  require_d(d, m.p, true, "fit_extended_pfc");
  if (d == m.p) return full_dimension_fit(m, strategy);
  const ExtendedPfcObjective obj(m);
  const auto pc = sym_eig(m.sigma_hat);

  Candidate best;
  ExtendedFitDetail detail;
  detail.strategy = strategy;
  switch (strategy) {
    case ExtendedStrategy::PfcPc:
      search_set(best, obj, pc.eigenvectors, d, CandidateSource::PC);
      break;
    case ExtendedStrategy::Sequential:
      best = best_sequential(obj, pc.eigenvectors, d);
      break;
    case ExtendedStrategy::PfcAll:
      best = best_pfc_all(obj, m, d);
      break;
    case ExtendedStrategy::Grassmann: {
      const Candidate seed = best_pfc_all(obj, m, d);
      std::vector<std::pair<Candidate, std::optional<CandidateSource>>> starts;
      starts.emplace_back(seed, seed.source);
      Candidate extra;
      for (const Matrix& s : opts.extra_seeds) {
        if (s.rows() != m.p || s.cols() != d) {
          throw DimensionError("extra seed must be p x d");
        }
        offer(extra, obj, Subspace::from_span(s).basis(), CandidateSource::GrassmannLocal);
      }
      if (extra.found) starts.emplace_back(extra, std::nullopt);

      bool have = false;
      const auto prob = obj.problem(d);
      for (const auto& [start, source] : starts) {
        if (!start.found) continue;
        Candidate local = start;
        int iters = 0;
        bool converged = true;
        if (std::isfinite(start.value)) {
          const auto res = optimize(prob, Subspace(start.basis), opts.optim);
          local.basis = res.subspace.basis();
          local.value = res.value;
          iters = res.iterations;
          converged = res.converged;
        }
        if (!have || local.value > best.value) {
          best = local;
          best.found = true;
          detail.seed_source = source;
          detail.optimizer_iterations = iters;
          detail.optimizer_converged = converged;
          have = true;
        }
      }
      best.source = CandidateSource::GrassmannLocal;
      break;
    }
  }
  if (!best.found) throw FitError("no candidate subspace gave a finite likelihood");

  FittedReduction out;
  out.method = Method::ExtendedPFC;
  out.d = d;
  out.p = m.p;
  out.n = m.n;
  out.r = m.r;
  out.xbar = m.xbar;
  out.subspace = Subspace::from_span(best.basis);
  out.W = out.subspace.basis();
  out.loglik = best.value;
  out.eigenvalues = pc.eigenvalues;

  const Matrix& G = out.W;
  const Matrix G0 = orthonormal_completion(out.subspace).basis();
  detail.omega2_hat = symmetrize(G.transpose() * m.sigma_res * G);
  detail.omega0_2_hat = symmetrize(G0.transpose() * m.sigma_hat * G0);
  detail.candidate_source = best.source;
  out.extended = detail;
  if (!detail.optimizer_converged) {
    out.warnings.push_back("Grassmann ascent stopped before the gradient tolerance was reached");
  }
  if (std::isinf(best.value)) {
    out.warnings.push_back("residual covariance is singular on the estimated subspace; the "
                           "likelihood is unbounded");
  }
  return out;
}

FittedReduction fit_extended_pfc(const Dataset& data, const BasisMatrix& F, Index d,
                                 ExtendedStrategy strategy, const ExtendedOptions& opts) {
  const MomentSet m = compute_moments(data, F);
  FittedReduction out = fit_extended_pfc(m, d, strategy, opts);
  out.basis = F.kind;
  for (const auto& w : F.warnings) out.warnings.push_back(w);
  return out;
}

double general_pfc_loglik(const Matrix& D, const MomentSet& m, Index d) {
  if (D.rows() != m.p || D.cols() != m.p) throw DimensionError("D must be p x p");
  const Matrix Dinv = spd_power(D, -1.0);
  const Matrix Dih = spd_power(D, -0.5);
  const auto kernel = sym_eig(symmetrize(Dih * m.sigma_fit * Dih));
  const double tail = kernel.eigenvalues.tail(m.p - d).sum();
  return double(m.n) * (-0.5 * logdet(D) - 0.5 * ((Dinv * m.sigma_res).trace() + tail));
}

namespace {

/// W = D^{-1/2} (top-d eigenvectors of D^{-1/2} S_fit D^{-1/2}).
FittedReduction standardized_fit(Method method, const Dataset& data, const MomentSet& m, Index d,
                                 const Matrix& D, const char* what, bool enforce_rank = true) {
  require_d(d, data.p(), true, what);
  const Matrix Dih = spd_power(D, -0.5);
  const auto kernel = sym_eig(symmetrize(Dih * m.sigma_fit * Dih));
  const Index rank = fit_rank(sym_eig(m.sigma_fit).eigenvalues, m.sigma_hat);
  if (enforce_rank && d > rank) {
    throw FitError("d=" + std::to_string(d) + " exceeds rank(Sigma_fit)=" + std::to_string(rank));
  }
  FittedReduction out = base_result(method, data, d);
  out.r = m.r;
  out.xbar = m.xbar;
  out.W = Dih * kernel.eigenvectors.leftCols(d);
  out.subspace = Subspace::from_span(out.W);
  out.eigenvalues = kernel.eigenvalues;
  return out;
}

}  // namespace

FittedReduction fit_general_pfc_known_delta(const Dataset& data, const BasisMatrix& F, Index d,
                                            const Matrix& delta) {
  if (delta.rows() != data.p() || delta.cols() != data.p()) {
    throw DimensionError("Delta must be " + std::to_string(data.p()) + " x " +
                         std::to_string(data.p()));
  }
  check_symmetric(delta, "Delta");
  require_positive_definite(sym_eig(delta).eigenvalues, "Delta");
  const MomentSet m = compute_moments(data, F);
  FittedReduction out =
      standardized_fit(Method::GeneralPFCKnownDelta, data, m, d, delta, "fit_general_pfc_known_delta");
  out.basis = F.kind;
  out.delta_hat = symmetrize(delta);
  out.loglik = general_pfc_loglik(*out.delta_hat, m, d);
  out.diagnostics["overfit_term"] = out.eigenvalues.tail(data.p() - d).sum();
  out.warnings = F.warnings;
  return out;
}

FittedReduction fit_general_pfc(const Dataset& data, const BasisMatrix& F, Index d) {
  data.validate();
  if (data.n() <= data.p()) {
    throw InputError("general PFC needs n > p (n=" + std::to_string(data.n()) +
                     ", p=" + std::to_string(data.p()) + ")");
  }
  const MomentSet m = compute_moments(data, F);
  try {
    require_positive_definite(sym_eig(m.sigma_res).eigenvalues, "Sigma_res");
  } catch (const RankDeficientError& e) {
    throw RankDeficientError("residual covariance Sigma_res is singular; Delta cannot be estimated",
                             e.eigenvalue());
  }
  FittedReduction out =
      standardized_fit(Method::GeneralPFC, data, m, d, m.sigma_res, "fit_general_pfc");
  out.basis = F.kind;
  out.delta_hat = m.sigma_res;
  out.loglik = general_pfc_loglik(m.sigma_res, m, d);
  out.diagnostics["overfit_term"] = out.eigenvalues.tail(data.p() - d).sum();
  out.warnings = F.warnings;
  if (m.r > 2 * d) {
    out.warnings.push_back("r=" + std::to_string(m.r) + " is much larger than d=" +
                           std::to_string(d) + "; the overfit term " +
                           detail::format_value(out.diagnostics["overfit_term"]) +
                           " may dominate the likelihood");
  }
  return out;
}

FittedReduction fit_sir(const Dataset& data, int h, Index d) {
  data.validate();
  if (data.n() <= data.p()) {
    throw InputError("SIR needs n > p (n=" + std::to_string(data.n()) +
                     ", p=" + std::to_string(data.p()) + ")");
  }
  if (Index(h) < d + 1) throw InputError("SIR needs h >= d + 1 slices");
  const BasisMatrix F = build_basis(data.y, BasisKind::slices(h));
  const MomentSet m = compute_moments(data, F);
  const auto sig = sym_eig(m.sigma_hat);
  try {
    require_positive_definite(sig.eigenvalues, "Sigma_hat");
  } catch (const RankDeficientError& e) {
    throw RankDeficientError("sample covariance Sigma_hat is singular", e.eigenvalue());
  }
  FittedReduction out = standardized_fit(Method::SIR, data, m, d, m.sigma_hat, "fit_sir", false);
  out.basis = F.kind;
  out.diagnostics["sir_lambda_1"] = out.eigenvalues(0);
  const double threshold = 2.0 * double(m.r) / double(data.n());
  if (out.eigenvalues(0) < threshold) {
    out.warnings.push_back("weak signal: largest SIR eigenvalue " +
                           detail::format_value(out.eigenvalues(0)) + " is below 2r/n = " +
                           detail::format_value(threshold));
  }
  try {
    out.loglik = general_pfc_loglik(m.sigma_res, m, d);
  } catch (const RankDeficientError&) {
    out.loglik = std::numeric_limits<double>::quiet_NaN();
    out.warnings.push_back("Sigma_res is singular; log-likelihood undefined");
  }
  return out;
}

FittedReduction fit_ols(const Dataset& data) {
  data.validate();
  const Index n = data.n();
  const Index p = data.p();
  if (n <= p + 1) {
    throw InputError("OLS needs n > p + 1 (n=" + std::to_string(n) + ", p=" + std::to_string(p) +
                     ")");
  }
  Matrix design(n, p + 1);
  design << Vector::Ones(n), data.X;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < p + 1) throw FitError("singular design matrix in OLS");
  const Vector coef = qr.solve(data.y);

  const Marginal mg = marginal(data);
  require_positive_definite(sym_eig(mg.sigma).eigenvalues, "Sigma_hat");
  const double ybar = data.y.mean();
  const Vector yc = data.y.array() - ybar;

  OlsDetail detail;
  detail.alpha = coef.tail(p);
  detail.intercept = coef(0);
  detail.c_hat = mg.centered.transpose() * yc / double(n);
  detail.sigma2_y = yc.squaredNorm() / double(n);
  if (!(detail.alpha.norm() > 0)) throw FitError("OLS slope vector is zero");

  FittedReduction out = base_result(Method::OLS, data, 1);
  out.r = 1;
  out.basis = BasisKind::linear();
  out.xbar = mg.xbar;
  out.W = detail.alpha;
  out.subspace = Subspace::from_span(detail.alpha);
  const Vector direct = mg.sigma.ldlt().solve(detail.c_hat);
  out.diagnostics["ols_proportionality_error"] =
      (detail.alpha - direct).norm() / detail.alpha.norm();
  const double explained = detail.c_hat.dot(direct);
  out.eigenvalues = Vector::Constant(1, explained / detail.sigma2_y);

  const MomentSet m = compute_moments(data, build_basis(data.y, BasisKind::linear()));
  try {
    out.loglik = general_pfc_loglik(m.sigma_res, m, 1);
    out.delta_hat = m.sigma_res;
  } catch (const RankDeficientError&) {
    out.loglik = std::numeric_limits<double>::quiet_NaN();
    out.warnings.push_back("Sigma_res is singular (exact linear fit); log-likelihood undefined");
  }
  out.ols = detail;
  return out;
}

Matrix reduce(const FittedReduction& fit, const Matrix& Xnew) {
  if (Xnew.cols() != fit.W.rows()) {
    throw DimensionError("new predictors have " + std::to_string(Xnew.cols()) +
                         " columns, the fit expects " + std::to_string(fit.W.rows()));
  }
  return Xnew * fit.W;
}

ForwardFit forward_fit(const FittedReduction& fit, const Dataset& train) {
  train.validate();
  ForwardFit out;
  if (fit.method == Method::OLS && fit.ols) {
    out.slope = Vector::Ones(1);
    out.intercept = fit.ols->intercept;
    out.coefficients = fit.ols->alpha;
    return out;
  }
  const Matrix Z = reduce(fit, train.X);
  Matrix design(Z.rows(), Z.cols() + 1);
  design << Vector::Ones(Z.rows()), Z;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < design.cols()) throw FitError("degenerate reduced regressor in forward fit");
  const Vector coef = qr.solve(train.y);
  out.intercept = coef(0);
  out.slope = coef.tail(Z.cols());
  out.coefficients = fit.W * out.slope;
  return out;
}

Vector predict(const FittedReduction& fit, const Dataset& train, const Matrix& Xnew) {
  const ForwardFit ff = forward_fit(fit, train);
  if (Xnew.cols() != fit.W.rows()) throw DimensionError("new predictors have the wrong width");
  return (Xnew * ff.coefficients).array() + ff.intercept;
}

}  // namespace sdr
