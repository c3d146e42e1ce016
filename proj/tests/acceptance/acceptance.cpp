// Acceptance run: one PASS/FAIL/SKIP line per criterion, exit status 1 when
// any criterion fails.
//
//   acceptance [--only PREFIX] [--data DIR] [--threads N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../test_util.hpp"
#include "sdr/basis.hpp"
#include "sdr/estimators.hpp"
#include "sdr/expfam.hpp"
#include "sdr/io.hpp"
#include "sdr/moments.hpp"
#include "sdr/selection.hpp"
#include "sdr/simulate.hpp"

using namespace sdr;
using sdr::testing::gaussian_matrix;
using sdr::testing::linear_signal_data;
using sdr::testing::random_orthonormal;

namespace {

enum class Status { Pass, Fail, Skip };

struct Verdict {
  Status status;
  std::string detail;
};

Verdict pass_if(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

struct Options {
  std::string only;
  std::filesystem::path data_dir = "data";
  int threads = 0;
};

int g_failures = 0;

void report(const std::string& name, const Verdict& v, double seconds) {
  const char* tag = v.status == Status::Pass ? "PASS" : v.status == Status::Fail ? "FAIL" : "SKIP";
  if (v.status == Status::Fail) ++g_failures;
  std::cout << tag << "  " << name << "  " << v.detail << "  [" << fmt(seconds, 3) << " s]"
            << std::endl;
}

void info(const std::string& name, const std::string& detail) {
  std::cout << "INFO  " << name << "  " << detail << std::endl;
}

void run(const Options& opts, const std::string& name, const std::function<Verdict()>& check) {
  if (!opts.only.empty() && name.rfind(opts.only, 0) != 0) return;
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {Status::Fail, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(name, v, s);
}

// ---------------------------------------------------------------------------
// statistics helpers

struct Interval {
  double lo;
  double hi;
};

/// Percentile interval (2.5%, 97.5%) for the mean of a - b over paired
/// replications, resampling replication indices.
Interval paired_bootstrap(const std::vector<double>& a, const std::vector<double>& b,
                          std::uint64_t seed, int draws = 2000) {
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isfinite(a[i]) && std::isfinite(b[i])) diff.push_back(a[i] - b[i]);
  }
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> pick(0, diff.size() - 1);
  std::vector<double> means(draws);
  for (int k = 0; k < draws; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < diff.size(); ++i) s += diff[pick(gen)];
    means[k] = s / double(diff.size());
  }
  std::sort(means.begin(), means.end());
  return {means[std::size_t(0.025 * draws)], means[std::size_t(0.975 * draws) - 1]};
}

const StudyRow& row_at(const StudyTable& t, double value, StudyEstimator e) {
  for (const auto& r : t.rows) {
    if (std::abs(r.sweep_value - value) < 1e-12 && r.estimator == e) return r;
  }
  throw InputError("no row for " + to_string(e) + " at " + fmt(value));
}

std::vector<double> sweep_values(const StudyTable& t) {
  std::vector<double> v;
  for (const auto& r : t.rows) {
    if (v.empty() || v.back() != r.sweep_value) v.push_back(r.sweep_value);
  }
  return v;
}

StudyTable run_preset(const std::string& name, const Options& opts) {
  FigurePreset fp = figure_preset(name);
  fp.config.threads = opts.threads;
  return run_study(fp.config, fp.sweep);
}

// ---------------------------------------------------------------------------
// exact identities

Verdict sigma_decomposition() {
  std::mt19937_64 gen(101);
  double worst_sum = 0, worst_fit = 0, worst_res = 0;
  const std::vector<BasisKind> kinds = {BasisKind::linear(), BasisKind::polynomial(3),
                                        BasisKind::slices(5), BasisKind::fourier(2)};
  for (int rep = 0; rep < 20; ++rep) {
    Dataset data;
    data.X = gaussian_matrix(60, 5, gen) * sdr::testing::random_spd(5, gen);
    data.y = gaussian_matrix(60, 1, gen).col(0);
    const Matrix Xc = data.X.rowwise() - data.X.colwise().mean();
    for (const auto& kind : kinds) {
      const BasisMatrix F = build_basis(data.y, kind);
      const MomentSet m = compute_moments(data, F);
      // independent oracle: least-squares fitted values and residuals of Xc on F
      const Matrix coef = F.F.householderQr().solve(Xc);
      const Matrix fitted = F.F * coef;
      const Matrix resid = Xc - fitted;
      const double n = double(data.n());
      const double scale = 1.0 + m.sigma_hat.norm();
      worst_sum = std::max(worst_sum, (m.sigma_hat - m.sigma_fit - m.sigma_res).norm() / scale);
      worst_fit = std::max(worst_fit, (m.sigma_fit - fitted.transpose() * fitted / n).norm() / scale);
      worst_res = std::max(worst_res, (m.sigma_res - resid.transpose() * resid / n).norm() / scale);
    }
  }
  const double worst = std::max({worst_sum, worst_fit, worst_res});
  return pass_if(worst < 1e-8, "4 basis kinds x 20 data sets; sum err " + fmt(worst_sum) +
                                   ", vs regression oracle fit " + fmt(worst_fit) + " res " +
                                   fmt(worst_res));
}

Verdict slice_mean_form_identity() {
  std::mt19937_64 gen(102);
  double worst = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const int h = 2 + rep % 7;
    Dataset data;
    data.X = gaussian_matrix(40 + rep, 3 + rep % 3, gen);
    data.y = gaussian_matrix(40 + rep, 1, gen).col(0);
    const BasisMatrix F = build_basis(data.y, BasisKind::slices(h));
    const MomentSet proj = compute_moments(data, F);
    // slice-mean form computed here from the slice assignments
    const auto& slice = *F.slice_assignments;
    const Vector xbar = data.X.colwise().mean().transpose();
    Matrix fit = Matrix::Zero(data.p(), data.p());
    for (int k = 0; k < h; ++k) {
      Vector sum = Vector::Zero(data.p());
      int nk = 0;
      for (Index i = 0; i < data.n(); ++i) {
        if (slice[i] == k) sum += data.X.row(i).transpose(), ++nk;
      }
      const Vector dev = sum / double(nk) - xbar;
      fit += double(nk) / double(data.n()) * dev * dev.transpose();
    }
    const SliceMoments lib = slice_mean_form(data, h);
    const double scale = 1.0 + proj.sigma_hat.norm();
    worst = std::max(worst, (proj.sigma_fit - fit).norm() / scale);
    worst = std::max(worst, (lib.moments.sigma_fit - proj.sigma_fit).norm() / scale);
  }
  return pass_if(worst < 1e-8, "20 data sets, h = 2..8; max rel err " + fmt(worst));
}

Dataset nonlinear_data(Index n, Index p, std::mt19937_64& gen) {
  Dataset data;
  data.X = gaussian_matrix(n, p, gen);
  const Vector a = gaussian_matrix(p, 1, gen).col(0);
  const Vector b = gaussian_matrix(p, 1, gen).col(0);
  const Vector u = data.X * a;
  const Vector v = data.X * b;
  data.y = u.array() + 0.5 * v.array().square() + 0.3 * gaussian_matrix(n, 1, gen).col(0).array();
  return data;
}

Verdict sir_equals_gpfc_subspace() {
  std::mt19937_64 gen(103);
  double worst = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset data = nonlinear_data(120, 4 + rep % 3, gen);
    const int h = 4 + rep % 5;
    for (Index d : {1, 2}) {
      const auto gp = fit_general_pfc(data, build_basis(data.y, BasisKind::slices(h)), d);
      const auto sir = fit_sir(data, h, d);
      worst = std::max(worst, subspace_angle_rad(gp.subspace, sir.subspace));
    }
  }
  return pass_if(worst < 1e-8, "20 data sets x d in {1,2}; max angle " + fmt(worst) + " rad");
}

Verdict sir_eigenvalue_map() {
  std::mt19937_64 gen(104);
  double worst = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset data = nonlinear_data(150, 5, gen);
    const int h = 6;
    const auto gp = fit_general_pfc(data, build_basis(data.y, BasisKind::slices(h)), 2);
    const auto sir = fit_sir(data, h, 2);
    for (Index k = 0; k < sir.eigenvalues.size(); ++k) {
      const double lam = sir.eigenvalues(k);
      worst = std::max(worst, std::abs(gp.eigenvalues(k) - lam / (1.0 - lam)) /
                                  (1.0 + std::abs(gp.eigenvalues(k))));
      const double back = gp.eigenvalues(k) / (1.0 + gp.eigenvalues(k));
      worst = std::max(worst, std::abs(back - lam));
    }
  }
  return pass_if(worst < 1e-8, "lambda_gpfc = lambda_sir / (1 - lambda_sir) both ways; max err " +
                                   fmt(worst));
}

Verdict gpfc_linear_equals_ols() {
  std::mt19937_64 gen(105);
  double worst = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset data = nonlinear_data(80, 3 + rep % 5, gen);
    const auto gp = fit_general_pfc(data, build_basis(data.y, BasisKind::linear()), 1);
    const auto ols = fit_ols(data);
    // independent span: Sigma^{-1} C from centered cross products
    const Matrix Xc = data.X.rowwise() - data.X.colwise().mean();
    const Vector yc = data.y.array() - data.y.mean();
    const Vector dir = (Xc.transpose() * Xc).ldlt().solve(Xc.transpose() * yc);
    worst = std::max(worst, subspace_angle_rad(gp.subspace, ols.subspace));
    worst = std::max(worst, subspace_angle_rad(gp.subspace, Subspace::from_span(dir)));
  }
  return pass_if(worst < 1e-8, "20 data sets; max angle to span(Sigma^-1 C) " + fmt(worst) + " rad");
}

double log_det(const Matrix& A) { return logdet(symmetrize(A)); }

Verdict inequality_15() {
  std::mt19937_64 gen(106);
  double min_gap = 1e300;
  int violations = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const Index p = 2 + rep % 7;
    const Index d = 1 + rep % (p - 1);
    const Matrix Z = gaussian_matrix(p + 3 + rep % 10, p, gen);
    const Matrix S = Z.transpose() * Z / double(Z.rows());
    const Subspace G = Subspace(random_orthonormal(p, d, gen));
    const Matrix G0 = orthonormal_completion(G).basis();
    const double lhs = log_det(G0.transpose() * S * G0) + log_det(G.basis().transpose() * S * G.basis());
    const double gap = lhs - log_det(S);
    min_gap = std::min(min_gap, gap);
    if (gap < -1e-10) ++violations;
  }
  return pass_if(violations == 0, "1000 random (Sigma, G); violations " +
                                      std::to_string(violations) + ", min log gap " + fmt(min_gap));
}

Verdict inequality_15_equality() {
  std::mt19937_64 gen(107);
  double worst = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const Index p = 2 + rep % 7;
    const Index d = 1 + rep % (p - 1);
    const Matrix Z = gaussian_matrix(p + 5, p, gen);
    const Matrix S = Z.transpose() * Z / double(Z.rows());
    const auto eig = sym_eig(S);
    std::vector<Index> idx(p);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), gen);
    Matrix G(p, d), G0(p, p - d);
    for (Index k = 0; k < p; ++k) {
      if (k < d) G.col(k) = eig.eigenvectors.col(idx[k]);
      else G0.col(k - d) = eig.eigenvectors.col(idx[k]);
    }
    const double lhs = log_det(G0.transpose() * S * G0) + log_det(G.transpose() * S * G);
    worst = std::max(worst, std::abs(std::expm1(lhs - log_det(S))));
  }
  return pass_if(worst < 1e-9, "200 random eigenvector subsets; max relative gap " + fmt(worst));
}

Verdict lambda_properties() {
  std::mt19937_64 gen(108);
  int bad = 0;
  double worst_p = 0;
  for (int rep = 0; rep < 10; ++rep) {
    const Index p = 3 + rep % 4;
    const Dataset data = linear_signal_data(80, gaussian_matrix(p, 1, gen).col(0), gen);
    const auto sel = select_d(data, build_basis(data.y, BasisKind::polynomial(2)), 0.05);
    worst_p = std::max(worst_p, std::abs(sel.table.back().lambda));
    for (std::size_t k = 1; k < sel.table.size(); ++k) {
      if (sel.table[k].lambda > sel.table[k - 1].lambda + 1e-8) ++bad;
    }
  }
  return pass_if(worst_p == 0.0 && bad == 0, "10 data sets; |Lambda_p| max " + fmt(worst_p) +
                                                 ", monotonicity violations " + std::to_string(bad));
}

// ---------------------------------------------------------------------------
// Fisher consistency

Matrix random_spd_matrix(Index k, std::mt19937_64& gen) {
  const Matrix A = gaussian_matrix(k, k, gen);
  return A * A.transpose() / double(k) + 0.2 * Matrix::Identity(k, k);
}

Verdict fisher_consistency() {
  std::mt19937_64 gen(109);
  std::uniform_real_distribution<double> scale(0.3, 3.0);
  double worst = 0;
  int dominated = 0;
  for (int t = 0; t < 20; ++t) {
    const Index p = 4 + t % 5;
    const Index d = 1 + t % 3;
    const Index r = d + t % 3;
    const Matrix Gamma = random_orthonormal(p, d, gen);
    const Matrix Gamma0 = orthonormal_completion(Subspace(Gamma)).basis();
    Matrix omega2, omega0_2;
    const double s = scale(gen);
    if (t % 3 == 0) {  // isotropic errors
      omega2 = s * s * Matrix::Identity(d, d);
      omega0_2 = s * s * Matrix::Identity(p - d, p - d);
    } else if (t % 3 == 1) {  // separate scales inside and outside the subspace
      const double s0 = scale(gen);
      omega2 = s * s * Matrix::Identity(d, d);
      omega0_2 = s0 * s0 * Matrix::Identity(p - d, p - d);
    } else {
      omega2 = random_spd_matrix(d, gen);
      omega0_2 = random_spd_matrix(p - d, gen);
    }
    const Matrix beta = gaussian_matrix(d, r, gen);
    const Matrix var_f = random_spd_matrix(r, gen);
    const Matrix C = beta * var_f * beta.transpose();
    MomentSet m;
    m.sigma_res = symmetrize(Gamma0 * omega0_2 * Gamma0.transpose() + Gamma * omega2 * Gamma.transpose());
    m.sigma_fit = symmetrize(Gamma * C * Gamma.transpose());
    m.sigma_hat = m.sigma_res + m.sigma_fit;
    m.xbar = Vector::Zero(p);
    m.n = 1;
    m.p = p;
    m.r = r;
    const auto fit = fit_extended_pfc(m, d, ExtendedStrategy::Grassmann);
    worst = std::max(worst, subspace_angle_rad(fit.subspace, Subspace(Gamma)));
    // the population objective at Gamma dominates random subspaces
    const ExtendedPfcObjective obj(m);
    const double at_truth = obj.value(Gamma);
    for (int k = 0; k < 200; ++k) {
      if (obj.value(random_orthonormal(p, d, gen)) >= at_truth) ++dominated;
    }
  }
  return pass_if(worst < 1e-6 && dominated == 0,
                 "20 parameterizations (p 4-8, d 1-3); max angle " + fmt(worst) +
                     " rad; random subspaces at or above the truth: " + std::to_string(dominated));
}

// ---------------------------------------------------------------------------
// Figure 1

struct Fig1Tables {
  StudyTable a, b, c, d;
  bool ready = false;
};

Fig1Tables& fig1(const Options& opts) {
  static Fig1Tables t;
  if (!t.ready) {
    t.a = run_preset("1a", opts);
    t.b = run_preset("1b", opts);
    t.c = run_preset("1c", opts);
    t.d = run_preset("1d", opts);
    t.ready = true;
  }
  return t;
}

Verdict fig1_pfc_best_at_reference(const Options& opts) {
  const auto& t = fig1(opts);
  bool ok = true;
  std::ostringstream s;
  const std::vector<std::pair<const StudyTable*, double>> points = {{&t.a, 40}, {&t.b, 1}, {&t.c, 1}};
  const char* names[] = {"1a", "1b", "1c"};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pfc = row_at(*points[i].first, points[i].second, StudyEstimator::PFC);
    const auto& pc = row_at(*points[i].first, points[i].second, StudyEstimator::PC);
    const auto& ols = row_at(*points[i].first, points[i].second, StudyEstimator::OLS);
    const Interval vs_pc = paired_bootstrap(pfc.angles, pc.angles, 11 + i);
    const Interval vs_ols = paired_bootstrap(pfc.angles, ols.angles, 21 + i);
    ok = ok && vs_pc.hi < 0 && vs_ols.hi < 0;
    s << names[i] << ": PFC " << fmt(pfc.mean_angle_deg) << " PC " << fmt(pc.mean_angle_deg)
      << " OLS " << fmt(ols.mean_angle_deg) << " (CI hi " << fmt(vs_pc.hi, 3) << ", "
      << fmt(vs_ols.hi, 3) << "); ";
  }
  return pass_if(ok, s.str());
}

Verdict fig1_pc_beats_ols_small_n(const Options& opts) {
  const auto& t = fig1(opts);
  const double n = sweep_values(t.a).front();
  const auto& pc = row_at(t.a, n, StudyEstimator::PC);
  const auto& ols = row_at(t.a, n, StudyEstimator::OLS);
  const Interval ci = paired_bootstrap(pc.angles, ols.angles, 31);
  std::ostringstream s;
  s << "n=" << n << ": PC " << fmt(pc.mean_angle_deg) << " OLS " << fmt(ols.mean_angle_deg)
    << ", 95% CI of PC-OLS [" << fmt(ci.lo, 3) << ", " << fmt(ci.hi, 3) << "]";
  // where the curves cross, for orientation
  for (double v : sweep_values(t.a)) {
    if (row_at(t.a, v, StudyEstimator::PC).mean_angle_deg >
        row_at(t.a, v, StudyEstimator::OLS).mean_angle_deg) {
      s << "; OLS first better at n=" << v;
      break;
    }
  }
  return pass_if(ci.hi < 0, s.str());
}

Verdict fig1_ols_bottoms_out(const Options& opts) {
  const auto& t = fig1(opts);
  bool ok = true;
  std::ostringstream s;
  s << "OLS mean angle for sigma_Y >= 3:";
  double prev = -1;
  for (double v : sweep_values(t.b)) {
    if (v < 3) continue;
    const double m = row_at(t.b, v, StudyEstimator::OLS).mean_angle_deg;
    s << " " << v << ":" << fmt(m);
    if (prev >= 0 && m < prev) ok = false;
    prev = m;
  }
  const auto& first = row_at(t.b, 3, StudyEstimator::OLS);
  const auto& last = row_at(t.b, sweep_values(t.b).back(), StudyEstimator::OLS);
  const Interval ci = paired_bootstrap(last.angles, first.angles, 41);
  s << "; 95% CI of last-minus-first [" << fmt(ci.lo, 3) << ", " << fmt(ci.hi, 3) << "]";
  return pass_if(ok, s.str());
}

Verdict fig1d_ols_flat(const Options& opts) {
  const auto& t = fig1(opts);
  std::vector<double> m;
  for (double v : sweep_values(t.d)) m.push_back(row_at(t.d, v, StudyEstimator::OLS).mean_mse);
  const double avg = std::accumulate(m.begin(), m.end(), 0.0) / double(m.size());
  double worst = 0;
  for (double x : m) worst = std::max(worst, std::abs(x / avg - 1.0));
  return pass_if(worst <= 0.05, "OLS scaled MSE mean " + fmt(avg) + ", max relative deviation " +
                                    fmt(worst) + " over " + std::to_string(m.size()) + " sigma_Y values");
}

Verdict fig1d_pfc_below_ols(const Options& opts) {
  const auto& t = fig1(opts);
  bool ok = true;
  std::ostringstream s;
  for (double v : sweep_values(t.d)) {
    if (v < 2) continue;
    const double pfc = row_at(t.d, v, StudyEstimator::PFC).mean_mse;
    const double ols = row_at(t.d, v, StudyEstimator::OLS).mean_mse;
    ok = ok && pfc < ols;
    s << v << ": " << fmt(pfc) << " vs " << fmt(ols) << "; ";
  }
  return pass_if(ok, "PFC vs OLS mean MSE at sigma_Y >= 2: " + s.str());
}

Verdict fig1d_lower_bound(const Options& opts) {
  const auto& t = fig1(opts);
  double lo = 1e300;
  for (const auto& r : t.d.rows) {
    for (double x : r.mses) {
      if (std::isfinite(x)) lo = std::min(lo, x);
    }
  }
  return pass_if(lo >= 0.98, "minimum scaled MSE over all replications " + fmt(lo, 6));
}

// ---------------------------------------------------------------------------
// Figure 2 and the local-likelihood gain

struct Fig2Tables {
  StudyTable c, d;
  bool ready = false;
};

Fig2Tables& fig2(const Options& opts) {
  static Fig2Tables t;
  if (!t.ready) {
    t.c = run_preset("2c", opts);
    t.d = run_preset("2d", opts);
    t.ready = true;
  }
  return t;
}

Verdict fig2c_spike(const Options& opts) {
  const auto& t = fig2(opts).c;
  const double s = std::numbers::sqrt2;
  const double pfc = row_at(t, s, StudyEstimator::PfcPc).mean_angle_deg;
  const double sir = row_at(t, s, StudyEstimator::SIR).mean_angle_deg;
  const double ols = row_at(t, s, StudyEstimator::OLS).mean_angle_deg;
  return pass_if(pfc > sir && pfc > ols, "sigma0=sqrt2: PFC_PC " + fmt(pfc) + " SIR " + fmt(sir) +
                                             " OLS " + fmt(ols));
}

Verdict fig2c_small_sigma0(const Options& opts) {
  const auto& t = fig2(opts).c;
  bool ok = true;
  std::ostringstream s;
  for (double v : sweep_values(t)) {
    if (v > 0.75) continue;
    const double pfc = row_at(t, v, StudyEstimator::PfcPc).mean_angle_deg;
    const double sir = row_at(t, v, StudyEstimator::SIR).mean_angle_deg;
    const double ols = row_at(t, v, StudyEstimator::OLS).mean_angle_deg;
    ok = ok && pfc < sir && pfc < ols;
    s << v << ": " << fmt(pfc) << "/" << fmt(sir) << "/" << fmt(ols) << "; ";
  }
  return pass_if(ok, "PFC_PC/SIR/OLS at sigma0 <= 0.75: " + s.str());
}

Verdict fig2d_all_le_pc(const Options& opts) {
  const auto& t = fig2(opts).d;
  bool ok = true;
  std::ostringstream s;
  s << "mean(PFC_all) - mean(PFC_PC) by sigma0:";
  for (double v : sweep_values(t)) {
    const double all = row_at(t, v, StudyEstimator::PfcAll).mean_angle_deg;
    const double pc = row_at(t, v, StudyEstimator::PfcPc).mean_angle_deg;
    ok = ok && all <= pc;
    s << " " << fmt(v, 3) << ":" << fmt(all - pc, 3);
  }
  return pass_if(ok, s.str());
}

Verdict fig2d_sources(const Options& opts) {
  const auto& t = fig2(opts).d;
  const char* names[] = {"PC", "PFC", "RC", "local"};
  std::vector<int> modal;
  std::ostringstream s;
  for (double v : sweep_values(t)) {
    const auto& r = row_at(t, v, StudyEstimator::PfcAll);
    const int k = int(std::max_element(r.source_counts.begin(), r.source_counts.begin() + 3) -
                      r.source_counts.begin());
    modal.push_back(k);
    s << fmt(v, 3) << ":" << names[k] << "(" << r.source_counts[0] << "/" << r.source_counts[1]
      << "/" << r.source_counts[2] << ") ";
  }
  const bool monotone = std::is_sorted(modal.begin(), modal.end());
  const bool all_three = modal.front() == 0 && modal.back() == 2 &&
                         std::find(modal.begin(), modal.end(), 1) != modal.end();
  return pass_if(monotone && all_three, "modal PFC_all source (PC/PFC/RC counts): " + s.str());
}

Verdict local_gain(const Options& opts) {
  const auto& t = fig2(opts).d;
  const double g = row_at(t, 1.5, StudyEstimator::PfcGrassmann).mean_angle_deg;
  const double all = row_at(t, 1.5, StudyEstimator::PfcAll).mean_angle_deg;
  return pass_if(g <= all - 2.0, "sigma0=1.5: grassmann " + fmt(g) + " vs PFC_all " + fmt(all) +
                                     " (gain " + fmt(all - g) + " deg)");
}

// ---------------------------------------------------------------------------
// Figure 3(b)

StudyTable& fig3b(const Options& opts) {
  static StudyTable t;
  static bool ready = false;
  if (!ready) {
    t = run_preset("3b", opts);
    ready = true;
  }
  return t;
}

Verdict fig3b_ratios(const Options& opts) {
  const auto& t = fig3b(opts);
  const double sir = row_at(t, 4, StudyEstimator::SIR).mean_angle_deg;
  const double ols = row_at(t, 4, StudyEstimator::OLS).mean_angle_deg;
  const double pd = row_at(t, 4, StudyEstimator::PfcDelta).mean_angle_deg;
  const double poly = row_at(t, 4, StudyEstimator::PfcPoly).mean_angle_deg;
  return pass_if(sir / ols >= 50 && ols / pd >= 50,
                 "k=4: SIR " + fmt(sir) + " OLS " + fmt(ols) + " PFC-Delta " + fmt(pd) +
                     " PFC-poly " + fmt(poly) + "; SIR/OLS " + fmt(sir / ols) + ", OLS/PFC-Delta " +
                     fmt(ols / pd));
}

Verdict fig3b_sir_flat(const Options& opts) {
  const auto& t = fig3b(opts);
  std::vector<double> m;
  for (double v : sweep_values(t)) m.push_back(row_at(t, v, StudyEstimator::SIR).mean_angle_deg);
  const double avg = std::accumulate(m.begin(), m.end(), 0.0) / double(m.size());
  const double range = *std::max_element(m.begin(), m.end()) - *std::min_element(m.begin(), m.end());
  return pass_if(range < 0.2 * avg, "SIR mean angle over k=0..4: range " + fmt(range) +
                                        " vs 20% of mean " + fmt(0.2 * avg));
}

// ---------------------------------------------------------------------------
// worked data sets

std::optional<Dataset> load_if_present(const std::filesystem::path& file, const std::string& response) {
  if (!std::filesystem::exists(file)) return std::nullopt;
  return dataset_from_csv(read_csv(file), response);
}

Verdict mussel(const Options& opts) {
  const auto file = opts.data_dir / "mussels.csv";
  auto raw = load_if_present(file, "M");
  if (!raw) return {Status::Skip, file.string() + " not present"};
  Dataset data;
  data.y = raw->y.array().log();
  data.X.resize(raw->n(), 4);
  const char* cols[] = {"H", "L", "S", "W"};
  for (int j = 0; j < 4; ++j) {
    const auto it = std::find(raw->names.begin(), raw->names.end(), cols[j]);
    if (it == raw->names.end()) throw InputError(file.string() + ": missing column " + cols[j]);
    data.X.col(j) = raw->X.col(it - raw->names.begin()).array().log();
  }
  const BasisMatrix F = build_basis(data.y, BasisKind::linear());
  const DimensionTest t = lrt_dimension(data, F, 1);
  const auto fit = fit_extended_pfc(data, F, 1, ExtendedStrategy::Grassmann);
  const Vector red = reduce(fit, data.X).col(0);
  const Matrix Xc = data.X.rowwise() - data.X.colwise().mean();
  const Vector pc1 = Xc * sym_eig(Xc.transpose() * Xc).eigenvectors.col(0);
  const Vector rc = red.array() - red.mean();
  const double corr = std::abs(rc.dot(pc1)) / (rc.norm() * pc1.norm());
  return pass_if(std::abs(t.lambda - 3.3) <= 0.3 && t.df == 3 && corr > 0.99,
                 "Lambda_1 " + fmt(t.lambda) + " (df " + std::to_string(t.df) +
                     "), |corr(reduction, PC1)| " + fmt(corr, 6));
}

Verdict wheat(const Options& opts) {
  const auto file = opts.data_dir / "wheat.csv";
  const auto data = load_if_present(file, "protein");
  if (!data) return {Status::Skip, file.string() + " not present"};
  const BasisMatrix F = build_basis(data->y, BasisKind::linear());
  const auto sel = select_d(*data, F, 0.05);
  const auto& t1 = sel.table[0];
  const auto& t2 = sel.table[1];
  return pass_if(std::abs(t1.lambda - 29.1) <= 1.5 && t1.df == 5 && std::abs(t2.lambda - 2.6) <= 0.5 &&
                     t2.df == 4 && sel.selected_d == 2,
                 "Lambda_1 " + fmt(t1.lambda) + " (df " + std::to_string(t1.df) + "), Lambda_2 " +
                     fmt(t2.lambda) + " (df " + std::to_string(t2.df) + "), selected d " +
                     std::to_string(sel.selected_d));
}

// ---------------------------------------------------------------------------
// null calibration, gradient, Bernoulli

Verdict null_calibration() {
  std::mt19937_64 gen(110);
  int rejected = 0;
  constexpr int reps = 1000;
  for (int rep = 0; rep < reps; ++rep) {
    Dataset data;
    data.X = gaussian_matrix(200, 4, gen);
    data.y = gaussian_matrix(200, 1, gen).col(0);
    const auto t = lrt_dimension(data, build_basis(data.y, BasisKind::linear()), 1);
    if (t.p_value < 0.05) ++rejected;
  }
  const double rate = double(rejected) / reps;
  // same test when the d = 1 model holds with a nonzero, identifiable direction
  int rejected_signal = 0;
  Vector scale(4);
  scale << 1, 2, 3, 4;
  for (int rep = 0; rep < reps; ++rep) {
    Dataset data;
    data.y = gaussian_matrix(200, 1, gen).col(0);
    data.X = gaussian_matrix(200, 4, gen) * scale.asDiagonal();
    data.X.col(0) += 0.3 * data.y;
    const auto t = lrt_dimension(data, build_basis(data.y, BasisKind::linear()), 1);
    if (t.p_value < 0.05) ++rejected_signal;
  }
  info("null_calibration.identifiable_d1",
       "Gamma = e1, Delta = diag(1,4,9,16): rejection rate " + fmt(double(rejected_signal) / reps));
  return pass_if(rate >= 0.02 && rate <= 0.09, "Lambda_1 rejection rate at 5%: " + fmt(rate) + " (" +
                                                   std::to_string(rejected) + "/1000)");
}

Verdict gradient_suite() {
  std::mt19937_64 gen(111);
  double worst = 0;
  for (int k = 0; k < 50; ++k) {
    const Index p = 3 + k % 5;
    const Index d = 1 + k % (p - 1);
    const Dataset data = linear_signal_data(30 + 5 * k, gaussian_matrix(p, 1, gen).col(0), gen);
    const auto m = compute_moments(data, build_basis(data.y, BasisKind::polynomial(1 + k % 3)));
    const ExtendedPfcObjective obj(m);
    // general full-rank points, not only orthonormal ones
    const Matrix B = gaussian_matrix(p, d, gen);
    const Matrix g = obj.gradient(B);
    Matrix num(p, d);
    for (Index i = 0; i < p; ++i) {
      for (Index j = 0; j < d; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(B(i, j)));
        Matrix Bp = B, Bm = B;
        Bp(i, j) += h;
        Bm(i, j) -= h;
        num(i, j) = (obj.value(Bp) - obj.value(Bm)) / (2 * h);
      }
    }
    worst = std::max(worst, (g - num).norm() / std::max(g.norm(), 1e-12));
  }
  return pass_if(worst < 1e-5, "50 random points; max relative error " + fmt(worst));
}

struct Planted {
  Matrix X;
  Vector y;
  Matrix Gamma;
};

/// eta_yj = mu_j + 3 gamma_j y with y ~ N(0, 1), mu_j ~ N(0, 0.25).
Planted planted_binary(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Planted out;
  out.Gamma = random_orthonormal(p, 1, gen);
  out.y = gaussian_matrix(n, 1, gen).col(0);
  const Vector mu = 0.5 * gaussian_matrix(p, 1, gen).col(0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  out.X.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      const double eta = mu(j) + 3.0 * out.Gamma(j, 0) * out.y(i);
      out.X(i, j) = u(gen) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    }
  }
  return out;
}

Verdict bernoulli_monotone() {
  int bad = 0;
  std::size_t steps = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const Index p = 4 + inst % 4;
    const auto pl = planted_binary(100 + 20 * inst, p, 500 + inst);
    const auto fit = fit_bernoulli_pc(pl.X, 1 + inst % 2);
    for (std::size_t k = 1; k < fit.loglik_history.size(); ++k) {
      if (fit.loglik_history[k] < fit.loglik_history[k - 1] - 1e-9) ++bad;
    }
    steps += fit.loglik_history.size();
  }
  return pass_if(bad == 0, "20 instances, " + std::to_string(steps) +
                               " outer iterations; decreases " + std::to_string(bad));
}

Verdict bernoulli_recovery() {
  int hits = 0;
  int con_hits = 0;
  std::vector<double> angles;
  for (int seed = 0; seed < 50; ++seed) {
    const auto pl = planted_binary(500, 6, 1000 + seed);
    const auto fit = fit_bernoulli_pc(pl.X, 1);
    const double a = subspace_angle(fit.fit.subspace, Subspace(pl.Gamma));
    angles.push_back(a);
    if (a < 10.0) ++hits;
    BernoulliOptions opts;
    opts.basis = build_basis(pl.y, BasisKind::linear());
    const auto con = fit_bernoulli_pc(pl.X, 1, opts);
    if (subspace_angle(con.fit.subspace, Subspace(pl.Gamma)) < 10.0) ++con_hits;
  }
  std::sort(angles.begin(), angles.end());
  info("bernoulli.recovery.basis_constrained",
       "nu_y = beta f_y with linear f_y: " + std::to_string(con_hits) + "/50 within 10 deg");
  return pass_if(hits >= 45, "per-observation fit within 10 deg in " + std::to_string(hits) +
                                 "/50 seeds (need 45); median angle " + fmt(angles[25]) + " deg");
}

}  // namespace

int main(int argc, char** argv) {
  Options opts;
  CLI::App app{"acceptance criteria"};
  app.add_option("--only", opts.only, "run criteria whose name starts with this prefix");
  app.add_option("--data", opts.data_dir, "directory holding mussels.csv and wheat.csv");
  app.add_option("--threads", opts.threads, "simulation worker threads (0: all cores)");
  CLI11_PARSE(app, argc, argv);

  run(opts, "identity.sigma_decomposition", sigma_decomposition);
  run(opts, "identity.slice_mean_form", slice_mean_form_identity);
  run(opts, "identity.sir_equals_gpfc_slices", sir_equals_gpfc_subspace);
  run(opts, "identity.sir_gpfc_eigenvalue_map", sir_eigenvalue_map);
  run(opts, "identity.gpfc_linear_equals_ols", gpfc_linear_equals_ols);
  run(opts, "identity.det_inequality", inequality_15);
  run(opts, "identity.det_inequality_equality", inequality_15_equality);
  run(opts, "identity.lambda_p_zero_and_monotone", lambda_properties);
  run(opts, "fisher_consistency", fisher_consistency);
  run(opts, "fig1.pfc_beats_pc_and_ols", [&] { return fig1_pfc_best_at_reference(opts); });
  run(opts, "fig1.pc_beats_ols_small_n", [&] { return fig1_pc_beats_ols_small_n(opts); });
  run(opts, "fig1.ols_bottoms_out", [&] { return fig1_ols_bottoms_out(opts); });
  run(opts, "fig1d.ols_mse_flat", [&] { return fig1d_ols_flat(opts); });
  run(opts, "fig1d.pfc_mse_below_ols", [&] { return fig1d_pfc_below_ols(opts); });
  run(opts, "fig1d.mse_lower_bound", [&] { return fig1d_lower_bound(opts); });
  run(opts, "fig2c.pfc_pc_spike_at_sqrt2", [&] { return fig2c_spike(opts); });
  run(opts, "fig2c.pfc_pc_best_small_sigma0", [&] { return fig2c_small_sigma0(opts); });
  run(opts, "fig2d.pfc_all_le_pfc_pc", [&] { return fig2d_all_le_pc(opts); });
  run(opts, "fig2d.source_transitions", [&] { return fig2d_sources(opts); });
  run(opts, "fig2d.local_likelihood_gain", [&] { return local_gain(opts); });
  run(opts, "fig3b.ratios_at_k4", [&] { return fig3b_ratios(opts); });
  run(opts, "fig3b.sir_flat", [&] { return fig3b_sir_flat(opts); });
  run(opts, "data.horse_mussel", [&] { return mussel(opts); });
  run(opts, "data.wheat", [&] { return wheat(opts); });
  run(opts, "null_calibration", null_calibration);
  run(opts, "gradient", gradient_suite);
  run(opts, "bernoulli.monotone", bernoulli_monotone);
  run(opts, "bernoulli.recovery", bernoulli_recovery);

  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : std::to_string(g_failures) + " FAILED")
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}
