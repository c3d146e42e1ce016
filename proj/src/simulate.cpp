#include "sdr/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "sdr/io.hpp"
#include "sdr/rng.hpp"

namespace sdr {

namespace {

constexpr std::uint32_t kStreamY = 0;
constexpr std::uint32_t kStreamErrors = 1;
constexpr std::uint32_t kDeltaRep = 0xFFFFFFFFu;

const std::vector<std::pair<StudyEstimator, std::string>>& estimator_names() {
  static const std::vector<std::pair<StudyEstimator, std::string>> names = {
      {StudyEstimator::OLS, "ols"},
      {StudyEstimator::PC, "pc"},
      {StudyEstimator::PFC, "pfc"},
      {StudyEstimator::PfcPc, "pfc-pc"},
      {StudyEstimator::PfcAll, "pfc-all"},
      {StudyEstimator::PfcGrassmann, "pfc-grassmann"},
      {StudyEstimator::SIR, "sir"},
      {StudyEstimator::PfcPoly, "pfc-poly"},
      {StudyEstimator::PfcDelta, "pfc-delta"},
  };
  return names;
}

bool is_m19(SimModel m) { return m == SimModel::M19 || m == SimModel::M19ExactFit; }

Matrix random_delta(const SimConfig& cfg) {
  Philox4x32 gen(cfg.delta_seed, kDeltaRep, 0);
  std::normal_distribution<double> z;
  Matrix A(cfg.p, cfg.p);
  for (Index i = 0; i < cfg.p; ++i) {
    for (Index j = 0; j < cfg.p; ++j) A(i, j) = z(gen);
  }
  return A.transpose() * A;
}

}  // namespace

std::string to_string(SimModel m) {
  switch (m) {
    case SimModel::M7:
      return "m7";
    case SimModel::M12:
      return "m12";
    case SimModel::M19:
      return "m19";
    case SimModel::M19ExactFit:
      return "m19-exactfit";
  }
  return "?";
}

SimModel parse_model(const std::string& text) {
  if (text == "m7") return SimModel::M7;
  if (text == "m12") return SimModel::M12;
  if (text == "m19") return SimModel::M19;
  if (text == "m19-exactfit") return SimModel::M19ExactFit;
  throw InputError("unknown model '" + text + "' (expected m7, m12, m19, m19-exactfit)");
}

std::string to_string(StudyEstimator e) {
  for (const auto& [k, name] : estimator_names()) {
    if (k == e) return name;
  }
  return "?";
}

StudyEstimator parse_estimator(const std::string& text) {
  for (const auto& [k, name] : estimator_names()) {
    if (name == text) return k;
  }
  throw InputError("unknown estimator '" + text + "'");
}

Vector SimConfig::resolved_gamma() const {
  if (gamma.size() > 0) return gamma;
  if (is_m19(model)) return Vector::Constant(p, 1.0 / std::sqrt(double(p)));
  Vector g = Vector::Zero(p);
  g(0) = 1.0;
  return g;
}

double SimConfig::resolved_c() const {
  return c ? *c : 1.0 + 0.1 / std::pow(10.0, k);
}

void SimConfig::validate() const {
  if (p < 2) throw InputError("simulation needs p >= 2");
  if (n < 2) throw InputError("simulation needs n >= 2");
  if (!(sigma_y > 0) || !(sigma > 0) || !(sigma0 > 0)) {
    throw InputError("sigma_Y, sigma and sigma_0 must be positive");
  }
  if (gamma.size() > 0) {
    if (gamma.size() != p) throw InputError("Gamma must have p entries");
    if (std::abs(gamma.norm() - 1.0) > 1e-10) throw InputError("Gamma must have unit length");
  }
  if (reps < 1) throw InputError("reps must be >= 1");
  if (model == SimModel::M19ExactFit && !(resolved_c() > 1.0)) {
    throw InputError("m19-exactfit needs c > 1; Delta = (c I - Gamma Gamma^T) sigma_Y^2 is not "
                     "positive definite otherwise");
  }
  if (slices < 2) throw InputError("slices must be >= 2");
  if (poly_degree < 1) throw InputError("poly degree must be >= 1");
}

Matrix conditional_covariance(const SimConfig& cfg) {
  cfg.validate();
  const Vector g = cfg.resolved_gamma();
  const Matrix P = g * g.transpose();
  const Matrix Q = Matrix::Identity(cfg.p, cfg.p) - P;
  switch (cfg.model) {
    case SimModel::M7:
      return cfg.sigma * cfg.sigma * Matrix::Identity(cfg.p, cfg.p);
    case SimModel::M12:
      return cfg.sigma0 * cfg.sigma0 * Q + cfg.sigma * cfg.sigma * P;
    case SimModel::M19:
      return random_delta(cfg);
    case SimModel::M19ExactFit: {
      const double c = cfg.resolved_c();
      return cfg.sigma_y * cfg.sigma_y * (c * Q + (c - 1.0) * P);
    }
  }
  throw InputError("unknown model");
}

Dataset generate(const SimConfig& cfg, std::uint32_t rep) {
  cfg.validate();
  const Vector g = cfg.resolved_gamma();
  const Matrix root = spd_power(conditional_covariance(cfg), 0.5);
  Philox4x32 gen_y(cfg.seed, rep, kStreamY);
  Philox4x32 gen_e(cfg.seed, rep, kStreamErrors);
  std::normal_distribution<double> zy;
  std::normal_distribution<double> ze;
  Dataset data;
  data.y.resize(cfg.n);
  for (Index i = 0; i < cfg.n; ++i) data.y(i) = cfg.sigma_y * zy(gen_y);
  Matrix E(cfg.n, cfg.p);
  for (Index i = 0; i < cfg.n; ++i) {
    for (Index j = 0; j < cfg.p; ++j) E(i, j) = ze(gen_e);
  }
  data.X = data.y * g.transpose() + E * root;
  for (Index j = 0; j < cfg.p; ++j) data.names.push_back("X" + std::to_string(j + 1));
  return data;
}

MomentSet PopulationMoments::as_moments(Index n) const {
  MomentSet m;
  m.sigma_hat = sigma;
  m.sigma_fit = sigma_fit;
  m.sigma_res = sigma_res;
  m.xbar = Vector::Zero(sigma.rows());
  m.n = n;
  m.p = sigma.rows();
  m.r = 1;
  return m;
}

PopulationMoments population_moments(const SimConfig& cfg) {
  const Vector g = cfg.resolved_gamma();
  const Matrix delta = conditional_covariance(cfg);
  PopulationMoments pm;
  pm.sigma_fit = cfg.sigma_y * cfg.sigma_y * g * g.transpose();
  pm.sigma_res = delta;
  pm.sigma = pm.sigma_fit + pm.sigma_res;
  if (is_m19(cfg.model)) {
    pm.true_subspace = Subspace::from_span(delta.llt().solve(g));
  } else {
    pm.true_subspace = Subspace::from_span(g);
  }
  return pm;
}

OlsOracles ols_oracles(const SimConfig& cfg) {
  if (cfg.model != SimModel::M7) throw InputError("OLS oracles are available for m7 only");
  cfg.validate();
  const Vector g = cfg.resolved_gamma();
  const double sy2 = cfg.sigma_y * cfg.sigma_y;
  const double s2 = cfg.sigma * cfg.sigma;
  OlsOracles o;
  o.r = sy2 / (sy2 + s2);
  o.alpha = o.r * g;
  const Matrix P = g * g.transpose();
  const Matrix Q = Matrix::Identity(cfg.p, cfg.p) - P;
  o.var_alpha = o.r * Q + o.r * (1.0 - o.r) * P;
  o.rho = Matrix::Identity(cfg.p, cfg.p);
  for (Index j = 0; j < cfg.p; ++j) {
    for (Index k = 0; k < cfg.p; ++k) {
      if (j == k) continue;
      o.rho(j, k) = g(k) * g(j) * sy2 /
                    std::sqrt((s2 + g(j) * g(j) * sy2) * (s2 + g(k) * g(k) * sy2));
    }
  }
  return o;
}

Matrix delta_sir_gap(const SimConfig& cfg, int h) {
  if (h < 1) throw InputError("delta_sir_gap needs h >= 1");
  const Vector g = cfg.resolved_gamma();
  const boost::math::normal_distribution<double> std_normal;
  const auto phi = [&](double x) { return std::isinf(x) ? 0.0 : boost::math::pdf(std_normal, x); };
  // E(Var(Z | Z in H_k)) = 1 - sum_k P(H_k) E(Z | H_k)^2 for standard normal Z.
  double between = 0;
  double lo = -INFINITY;
  for (int k = 1; k <= h; ++k) {
    const double hi = k == h ? INFINITY : boost::math::quantile(std_normal, double(k) / h);
    const double prob = 1.0 / h;
    const double mean = (phi(lo) - phi(hi)) / prob;
    between += prob * mean * mean;
    lo = hi;
  }
  const double within = std::max(0.0, 1.0 - between);
  return g * g.transpose() * (cfg.sigma_y * cfg.sigma_y * within);
}

double scaled_prediction_mse(const SimConfig& cfg, double a, const Vector& b) {
  const PopulationMoments pm = population_moments(cfg);
  const Vector c = cfg.sigma_y * cfg.sigma_y * cfg.resolved_gamma();
  const double sy2 = cfg.sigma_y * cfg.sigma_y;
  const double cond = sy2 - c.dot(pm.sigma.llt().solve(c));
  const double err = a * a + sy2 - 2.0 * b.dot(c) + b.dot(pm.sigma * b);
  return err / cond;
}

const StudyRow& StudyTable::row(double sweep_value, StudyEstimator e) const {
  for (const auto& r : rows) {
    if (r.sweep_value == sweep_value && r.estimator == e) return r;
  }
  throw InputError("no study row for " + to_string(e) + " at " + format_double(sweep_value));
}

std::string StudyTable::to_csv() const {
  std::ostringstream os;
  os << "sweep_param,sweep_value,estimator,mean_angle_deg,sd_angle_deg,mean_mse,n_fail,n_ok,"
        "log_mean_angle,src_pc,src_pfc,src_rc,src_local\n";
  for (const auto& r : rows) {
    os << r.sweep_param << ',' << format_double(r.sweep_value) << ',' << to_string(r.estimator)
       << ',' << format_double(r.mean_angle_deg) << ',' << format_double(r.sd_angle_deg) << ','
       << format_double(r.mean_mse) << ',' << r.n_fail << ',' << r.n_ok << ','
       << format_double(r.log_mean_angle);
    for (int s : r.source_counts) os << ',' << s;
    os << '\n';
  }
  return os.str();
}

std::string StudyTable::gnuplot_script(const std::string& csv_path, bool log_angles) const {
  std::vector<StudyEstimator> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.estimator) == order.end()) order.push_back(r.estimator);
  }
  const std::string xlabel = rows.empty() ? "x" : rows.front().sweep_param;
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set xlabel '" << xlabel << "'\n"
     << "set ylabel '" << (log_angles ? "log(mean angle, degrees)" : "mean angle (degrees)") << "'\n"
     << "plot";
  const int col = log_angles ? 9 : 4;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::string name = to_string(order[i]);
    os << (i ? ", \\\n    " : " ") << "'" << csv_path << "' using 2:(strcol(3) eq '" << name
       << "' ? $" << col << " : 1/0) with linespoints title '" << name << "'";
  }
  os << '\n';
  return os.str();
}

void apply_sweep(SimConfig& cfg, const std::string& param, double value) {
  if (param == "n") {
    if (value < 2 || value != std::floor(value)) throw InputError("n sweep values must be integers >= 2");
    cfg.n = Index(value);
  } else if (param == "sigma_y") {
    cfg.sigma_y = value;
  } else if (param == "sigma") {
    cfg.sigma = value;
  } else if (param == "sigma0") {
    cfg.sigma0 = value;
  } else if (param == "k") {
    cfg.k = value;
    cfg.c.reset();
  } else if (param == "c") {
    cfg.c = value;
  } else {
    throw InputError("unknown sweep parameter '" + param + "' (expected n, sigma_y, sigma, sigma0, k, c)");
  }
}

namespace {

struct RepResult {
  double angle = std::nan("");
  double mse = std::nan("");
  std::optional<CandidateSource> source;
};

FittedReduction fit_study_estimator(StudyEstimator e, const SimConfig& cfg, const Dataset& data,
                                    const Matrix& delta) {
  switch (e) {
    case StudyEstimator::OLS:
      return fit_ols(data);
    case StudyEstimator::PC:
      return fit_pc(data, 1);
    case StudyEstimator::PFC:
      return fit_pfc_iso(data, build_basis(data.y, BasisKind::linear()), 1);
    case StudyEstimator::PfcPc:
      return fit_extended_pfc(data, build_basis(data.y, BasisKind::slices(cfg.slices)), 1,
                              ExtendedStrategy::PfcPc);
    case StudyEstimator::PfcAll:
      return fit_extended_pfc(data, build_basis(data.y, BasisKind::slices(cfg.slices)), 1,
                              ExtendedStrategy::PfcAll);
    case StudyEstimator::PfcGrassmann:
      return fit_extended_pfc(data, build_basis(data.y, BasisKind::slices(cfg.slices)), 1,
                              ExtendedStrategy::Grassmann);
    case StudyEstimator::SIR:
      return fit_sir(data, cfg.slices, 1);
    case StudyEstimator::PfcPoly:
      return fit_general_pfc(data, build_basis(data.y, BasisKind::polynomial(cfg.poly_degree)), 1);
    case StudyEstimator::PfcDelta:
      return fit_general_pfc_known_delta(data, build_basis(data.y, BasisKind::slices(cfg.slices)), 1,
                                         delta);
  }
  throw InputError("unknown estimator");
}

std::vector<RepResult> run_replication(const SimConfig& cfg, std::uint32_t rep,
                                       const Subspace& truth, const Matrix& delta) {
  const Dataset data = generate(cfg, rep);
  std::vector<RepResult> out(cfg.estimators.size());
  for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
    try {
      const FittedReduction fit = fit_study_estimator(cfg.estimators[k], cfg, data, delta);
      out[k].angle = subspace_angle(fit.subspace, truth);
      if (fit.extended) out[k].source = fit.extended->candidate_source;
      if (cfg.compute_mse) {
        const ForwardFit ff = forward_fit(fit, data);
        out[k].mse = scaled_prediction_mse(cfg, ff.intercept, ff.coefficients);
      }
    } catch (const Error&) {
      out[k] = RepResult{};
    }
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / double(v.size());
}

}  // namespace

StudyTable run_study(const SimConfig& base, const Sweep& sweep) {
  base.validate();
  if (base.estimators.empty()) throw InputError("no estimators to run");
  if (sweep.values.empty()) throw InputError("sweep has no values");
  int threads = base.threads > 0 ? base.threads : int(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, base.reps);

  StudyTable table;
  for (double value : sweep.values) {
    SimConfig cfg = base;
    apply_sweep(cfg, sweep.param, value);
    cfg.validate();
    const Subspace truth = population_moments(cfg).true_subspace;
    const Matrix delta = conditional_covariance(cfg);

    std::vector<std::vector<RepResult>> results(std::size_t(cfg.reps));
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int rep = next++; rep < cfg.reps; rep = next++) {
        results[std::size_t(rep)] = run_replication(cfg, std::uint32_t(rep), truth, delta);
      }
    };
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }

    for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
      StudyRow row;
      row.sweep_param = sweep.param;
      row.sweep_value = value;
      row.estimator = cfg.estimators[k];
      row.source_counts.assign(4, 0);
      std::vector<double> ok_angles;
      std::vector<double> ok_mses;
      for (const auto& rep : results) {
        const RepResult& r = rep[k];
        row.angles.push_back(r.angle);
        row.mses.push_back(r.mse);
        if (std::isnan(r.angle)) {
          ++row.n_fail;
          continue;
        }
        ++row.n_ok;
        ok_angles.push_back(r.angle);
        if (!std::isnan(r.mse)) ok_mses.push_back(r.mse);
        if (r.source) ++row.source_counts[std::size_t(*r.source)];
      }
      row.mean_angle_deg = mean_of(ok_angles);
      double ss = 0;
      for (double a : ok_angles) ss += (a - row.mean_angle_deg) * (a - row.mean_angle_deg);
      row.sd_angle_deg = ok_angles.size() > 1 ? std::sqrt(ss / double(ok_angles.size() - 1)) : 0.0;
      row.log_mean_angle = std::log(row.mean_angle_deg);
      row.mean_mse = cfg.compute_mse ? mean_of(ok_mses) : std::nan("");
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

std::vector<std::string> figure_names() {
  return {"1a", "1b", "1c", "1d", "2a", "2b", "2c", "2d", "3a", "3b"};
}

FigurePreset figure_preset(const std::string& name) {
  FigurePreset fp;
  fp.name = name;
  SimConfig& c = fp.config;
  c.reps = 200;
  const char family = name.empty() ? '?' : name[0];
  if (family == '1') {
    c.model = SimModel::M7;
    c.n = 40;
    c.estimators = {StudyEstimator::OLS, StudyEstimator::PC, StudyEstimator::PFC};
  } else if (family == '2') {
    c.model = SimModel::M12;
    c.n = 250;
    c.slices = 8;
    c.estimators = {StudyEstimator::OLS, StudyEstimator::SIR, StudyEstimator::PfcPc};
  } else if (family == '3') {
    c.model = name == "3a" ? SimModel::M19 : SimModel::M19ExactFit;
    c.n = 50;
    c.sigma_y = 15;
    c.slices = 8;
    c.estimators = {StudyEstimator::OLS, StudyEstimator::PfcPoly, StudyEstimator::SIR,
                    StudyEstimator::PfcDelta};
    fp.log_angles = true;
  }
  if (name == "1a") {
    fp.sweep = {"n", {12, 15, 20, 30, 40, 60, 80, 100, 150, 200}};
  } else if (name == "1b" || name == "1d") {
    fp.sweep = {"sigma_y", {0.25, 0.5, 0.75, 1, 1.5, 2, 3, 4, 5, 6, 8, 10}};
    c.compute_mse = name == "1d";
  } else if (name == "1c") {
    fp.sweep = {"sigma", {0.1, 0.25, 0.5, 0.75, 1, 1.5, 2, 3, 4}};
  } else if (name == "2a") {
    fp.sweep = {"sigma", {0.25, 0.5, 0.75, 1, 1.25, 1.5, 2, 2.5, 3}};
  } else if (name == "2b") {
    fp.sweep = {"sigma_y", {0.25, 0.5, 0.75, 1, 1.5, 2, 2.5, 3}};
  } else if (name == "2c" || name == "2d") {
    fp.sweep = {"sigma0", {0.25, 0.5, 0.75, 1, 1.25, std::numbers::sqrt2, 1.5, 2, 2.5, 3}};
    if (name == "2d") {
      c.estimators = {StudyEstimator::OLS, StudyEstimator::SIR, StudyEstimator::PfcPc,
                      StudyEstimator::PfcAll, StudyEstimator::PfcGrassmann};
    }
  } else if (name == "3a") {
    fp.sweep = {"n", {50, 100, 150, 200, 250}};
  } else if (name == "3b") {
    fp.sweep = {"k", {0, 1, 2, 3, 4}};
  } else {
    std::string known;
    for (const auto& f : figure_names()) known += " " + f;
    throw InputError("unknown figure '" + name + "' (expected one of" + known + ")");
  }
  return fp;
}

}  // namespace sdr
