#include "sdr/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sdr/basis.hpp"
#include "sdr/estimators.hpp"
#include "sdr/expfam.hpp"
#include "sdr/io.hpp"
#include "sdr/selection.hpp"

#ifndef SDR_VERSION
#define SDR_VERSION "0.0.0"
#endif

namespace sdr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

/// Collects output files and writes the manifest last.
class RunRecord {
 public:
  RunRecord(std::string command, std::vector<std::string> args, fs::path out_dir)
      : command_(std::move(command)), args_(std::move(args)), out_dir_(std::move(out_dir)) {}

  void write(const std::string& name, const std::string& content) {
    write_text(out_dir_ / name, content);
    outputs_.push_back({{"file", name}, {"fnv1a64", fnv1a_hex(content)}});
  }

  void finish(const json& config, std::optional<std::uint64_t> seed) const {
    json m;
    m["command"] = command_;
    m["args"] = args_;
    m["config"] = config;
    m["seed"] = seed ? json(*seed) : json(nullptr);
    m["version"] = version_string();
    m["timestamp"] = utc_timestamp();
    m["out_dir"] = out_dir_.string();
    m["outputs"] = outputs_;
    write_text(out_dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  fs::path out_dir_;
  json outputs_ = json::array();
};

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Arguments as given, minus any --out pair, so a replay can redirect output.
std::vector<std::string> replayable_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out") {
      ++i;
      continue;
    }
    if (args[i].rfind("--out=", 0) == 0) continue;
    out.push_back(args[i]);
  }
  return out;
}

std::string join_angles(const std::vector<double>& v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  return s.str();
}

/// Angle in degrees between each of the leading sample PC axes and the
/// fitted subspace.
std::vector<double> angles_to_pc_axes(const FittedReduction& fit, const Dataset& data) {
  const Matrix Xc = data.X.rowwise() - data.X.colwise().mean();
  const Matrix S = Xc.transpose() * Xc / double(data.n());
  const auto eig = sym_eig(S);
  const Matrix P = fit.subspace.projector();
  std::vector<double> out;
  for (Index j = 0; j < std::min<Index>(3, data.p()); ++j) {
    const Vector v = eig.eigenvectors.col(j);
    const double c = std::min(1.0, (P * v).norm());
    const double s = (v - P * v).norm();
    out.push_back(std::atan2(s, c) * 180.0 / M_PI);
  }
  return out;
}

struct FitArgs {
  std::string data;
  std::string response;
  std::string predictors;
  std::string method;
  int d = 0;
  std::string basis = "linear";
  std::string strategy = "grassmann";
  int slices = 8;
  std::string delta_file;
  bool binary = false;
  std::string out = "sdr_out";
};

Dataset load_dataset(const FitArgs& a) {
  const CsvData csv = read_csv(a.data);
  return dataset_from_csv(csv, a.response, split_names(a.predictors));
}

json fit_config(const FitArgs& a, const std::string& data_digest) {
  return {{"data", a.data},         {"data_fnv1a64", data_digest},
          {"response", a.response}, {"predictors", split_names(a.predictors)},
          {"method", a.method},     {"d", a.d},
          {"basis", a.basis},       {"strategy", a.strategy},
          {"slices", a.slices},     {"delta_file", a.delta_file},
          {"binary", a.binary}};
}

int cmd_fit(const FitArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const Dataset data = load_dataset(a);
  const bool needs_d = a.method != "ols";
  if (needs_d && a.d < 1) throw InputError("--d is required for --method " + a.method);
  if (!needs_d && a.d > 1) throw InputError("--method ols estimates a single direction (--d 1)");
  const Index d = needs_d ? a.d : 1;
  if (!a.delta_file.empty() && a.method != "gpfc") {
    throw InputError("--delta-file applies to --method gpfc only");
  }

  FittedReduction fit;
  std::optional<BernoulliFit> bern;
  if (a.binary) {
    require_binary(data);
    BernoulliOptions opts;
    if (a.method == "pfc") {
      opts.basis = build_basis(data.y, BasisKind::parse(a.basis));
    } else if (a.method != "pc") {
      throw InputError("--binary supports --method pc or pfc (got " + a.method + ")");
    }
    bern = fit_bernoulli_pc(data.X, d, opts);
    fit = bern->fit;
  } else if (a.method == "pc") {
    fit = fit_pc(data, d);
  } else if (a.method == "pfc") {
    fit = fit_pfc_iso(data, build_basis(data.y, BasisKind::parse(a.basis)), d);
  } else if (a.method == "xpc") {
    fit = fit_extended_pc(data, d);
  } else if (a.method == "xpfc") {
    fit = fit_extended_pfc(data, build_basis(data.y, BasisKind::parse(a.basis)), d,
                           parse_strategy(a.strategy));
  } else if (a.method == "gpfc") {
    const BasisMatrix F = build_basis(data.y, BasisKind::parse(a.basis));
    if (!a.delta_file.empty()) {
      fit = fit_general_pfc_known_delta(data, F, d, read_csv(a.delta_file).values);
    } else {
      fit = fit_general_pfc(data, F, d);
    }
  } else if (a.method == "sir") {
    fit = fit_sir(data, a.slices, d);
  } else if (a.method == "ols") {
    fit = fit_ols(data);
  } else {
    throw InputError("unknown --method '" + a.method + "'");
  }

  RunRecord rec("fit", replayable_args(args), a.out);
  json doc = fit_to_json(fit);
  doc["response"] = a.response;
  doc["predictors"] = data.names;
  if (bern) {
    doc["mu"] = matrix_to_json(bern->model.mu);
    doc["converged"] = bern->converged;
  }
  rec.write("fit.json", doc.dump(2) + "\n");

  std::vector<std::string> header{a.response};
  for (Index k = 0; k < fit.W.cols(); ++k) header.push_back("dir" + std::to_string(k + 1));
  const Matrix R = reduce(fit, data.X);
  Matrix table(data.n(), R.cols() + 1);
  table << data.y, R;
  rec.write("reduced.csv", to_csv(header, table));
  rec.finish(fit_config(a, fnv1a_hex(read_text(a.data))), std::nullopt);

  out << "method=" << to_string(fit.method) << " d=" << fit.d
      << " loglik=" << format_double(fit.loglik)
      << " angles_to_pc_axes_deg=" << join_angles(angles_to_pc_axes(fit, data)) << "\n";
  for (const auto& w : fit.warnings) out << "warning: " << w << "\n";
  return kExitOk;
}

struct SelectArgs {
  FitArgs fit;
  double alpha = 0.05;
};

int cmd_select_dim(const SelectArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (!(a.alpha > 0.0 && a.alpha <= 1.0)) throw InputError("--alpha must lie in (0, 1]");
  const Dataset data = load_dataset(a.fit);
  const BasisMatrix F = build_basis(data.y, BasisKind::parse(a.fit.basis));
  LrtOptions opts;
  opts.strategy = parse_strategy(a.fit.strategy);
  const SelectionResult sel = select_d(data, F, a.alpha, opts);

  RunRecord rec("select-dim", replayable_args(args), a.fit.out);
  std::ostringstream csv;
  csv << "d,lambda,df,p_value,loglik,aic,bic,source\n";
  for (const auto& t : sel.table) {
    csv << t.d << "," << format_double(t.lambda) << "," << t.df << "," << format_double(t.p_value)
        << "," << format_double(t.loglik) << "," << format_double(t.aic) << ","
        << format_double(t.bic) << "," << to_string(t.source) << "\n";
  }
  rec.write("dimension_tests.csv", csv.str());
  json summary{{"selected_d", sel.selected_d},
               {"alpha", sel.alpha},
               {"aic_d", sel.aic_d},
               {"bic_d", sel.bic_d},
               {"loglik_full", sel.loglik_full},
               {"basis", F.kind.to_string()},
               {"r", F.r()}};
  rec.write("selection.json", summary.dump(2) + "\n");
  json cfg = fit_config(a.fit, fnv1a_hex(read_text(a.fit.data)));
  cfg["alpha"] = a.alpha;
  cfg.erase("method");
  cfg.erase("d");
  rec.finish(cfg, std::nullopt);

  out << "d  lambda  df  p_value\n";
  for (const auto& t : sel.table) {
    out << t.d << "  " << format_double(t.lambda) << "  " << t.df << "  "
        << format_double(t.p_value) << "\n";
  }
  out << "selected d = " << sel.selected_d << " (alpha=" << format_double(a.alpha)
      << ", AIC d=" << sel.aic_d << ", BIC d=" << sel.bic_d << ")\n";
  return kExitOk;
}

json sweep_to_json(const Sweep& s) { return {{"param", s.param}, {"values", s.values}}; }

Sweep sweep_from_json(const json& j) {
  Sweep s;
  s.param = j.at("param").get<std::string>();
  s.values = j.at("values").get<std::vector<double>>();
  if (s.values.empty()) throw InputError("sweep needs at least one value");
  return s;
}

int write_study(const std::string& command, const std::string& stem, const SimConfig& cfg,
                const Sweep& sweep, bool log_angles, const fs::path& out_dir,
                const std::vector<std::string>& args, std::ostream& out) {
  const StudyTable table = run_study(cfg, sweep);
  RunRecord rec(command, replayable_args(args), out_dir);
  const std::string csv_name = stem + ".csv";
  rec.write(csv_name, table.to_csv());
  rec.write(stem + ".gp", table.gnuplot_script(csv_name, log_angles));
  json cfg_json = config_to_json(cfg);
  cfg_json["sweep"] = sweep_to_json(sweep);
  cfg_json["log_angles"] = log_angles;
  rec.finish(cfg_json, cfg.seed);

  out << "sweep " << sweep.param << ": " << table.rows.size() << " rows, " << cfg.reps
      << " replications each -> " << (out_dir / csv_name).string() << "\n";
  int failures = 0;
  for (const auto& r : table.rows) failures += r.n_fail;
  if (failures > 0) out << "warning: " << failures << " fits failed and were excluded\n";
  return kExitOk;
}

struct StudyArgs {
  std::string target;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = "sdr_out";
};

void apply_overrides(SimConfig& cfg, const StudyArgs& a) {
  if (a.reps) cfg.reps = *a.reps;
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  cfg.validate();
}

int cmd_simulate(const StudyArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  json j;
  try {
    j = json::parse(read_text(a.target));
  } catch (const json::parse_error& e) {
    throw InputError(a.target + ": " + e.what());
  }
  json body = j;
  if (!body.contains("sweep")) throw InputError(a.target + ": missing \"sweep\"");
  const Sweep sweep = sweep_from_json(body["sweep"]);
  const bool log_angles = body.value("log_angles", false);
  body.erase("sweep");
  body.erase("log_angles");
  SimConfig cfg = config_from_json(body);
  apply_overrides(cfg, a);
  return write_study("simulate", "study", cfg, sweep, log_angles, a.out, args, out);
}

int cmd_reproduce(const StudyArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  FigurePreset preset = figure_preset(a.target);
  apply_overrides(preset.config, a);
  return write_study("reproduce-figure", "figure_" + preset.name, preset.config, preset.sweep,
                     preset.log_angles, a.out, args, out);
}

int cmd_replay(const std::string& manifest_path, const std::string& out_dir, std::ostream& out,
               std::ostream& err) {
  json m;
  try {
    m = json::parse(read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw InputError(manifest_path + ": " + e.what());
  }
  std::vector<std::string> args = m.at("args").get<std::vector<std::string>>();
  args.push_back("--out");
  args.push_back(out_dir);
  std::ostringstream inner;
  const int code = run_cli(args, inner, err);
  if (code != kExitOk) return code;
  int differing = 0;
  for (const auto& o : m.at("outputs")) {
    const std::string name = o.at("file").get<std::string>();
    const std::string digest = fnv1a_hex(read_text(fs::path(out_dir) / name));
    const bool same = digest == o.at("fnv1a64").get<std::string>();
    if (!same) ++differing;
    out << (same ? "identical " : "DIFFERS   ") << name << "\n";
  }
  if (differing > 0) {
    err << "replay: " << differing << " output(s) differ from the manifest\n";
    return kExitFit;
  }
  return kExitOk;
}

}  // namespace

std::string version_string() { return SDR_VERSION; }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

json config_to_json(const SimConfig& cfg) {
  std::vector<std::string> est;
  for (auto e : cfg.estimators) est.push_back(to_string(e));
  const Vector g = cfg.resolved_gamma();
  json j{{"model", to_string(cfg.model)},
         {"n", cfg.n},
         {"p", cfg.p},
         {"sigma_y", cfg.sigma_y},
         {"sigma", cfg.sigma},
         {"sigma0", cfg.sigma0},
         {"gamma", std::vector<double>(g.data(), g.data() + g.size())},
         {"delta_seed", cfg.delta_seed},
         {"k", cfg.k},
         {"slices", cfg.slices},
         {"poly_degree", cfg.poly_degree},
         {"reps", cfg.reps},
         {"estimators", est},
         {"seed", cfg.seed},
         {"threads", cfg.threads},
         {"compute_mse", cfg.compute_mse}};
  j["c"] = cfg.c ? json(*cfg.c) : json(nullptr);
  return j;
}

SimConfig config_from_json(const json& j) {
  if (!j.is_object()) throw InputError("simulation config must be a JSON object");
  SimConfig cfg;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "model") cfg.model = parse_model(v.get<std::string>());
      else if (key == "n") cfg.n = v.get<Index>();
      else if (key == "p") cfg.p = v.get<Index>();
      else if (key == "sigma_y") cfg.sigma_y = v.get<double>();
      else if (key == "sigma") cfg.sigma = v.get<double>();
      else if (key == "sigma0") cfg.sigma0 = v.get<double>();
      else if (key == "gamma") {
        const auto g = v.get<std::vector<double>>();
        cfg.gamma = Eigen::Map<const Vector>(g.data(), Index(g.size()));
      } else if (key == "delta_seed") cfg.delta_seed = v.get<std::uint64_t>();
      else if (key == "k") cfg.k = v.get<double>();
      else if (key == "c") {
        if (!v.is_null()) cfg.c = v.get<double>();
      } else if (key == "slices") cfg.slices = v.get<int>();
      else if (key == "poly_degree") cfg.poly_degree = v.get<int>();
      else if (key == "reps") cfg.reps = v.get<int>();
      else if (key == "estimators") {
        cfg.estimators.clear();
        for (const auto& e : v) cfg.estimators.push_back(parse_estimator(e.get<std::string>()));
      } else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "threads") cfg.threads = v.get<int>();
      else if (key == "compute_mse") cfg.compute_mse = v.get<bool>();
      else throw InputError("unknown simulation config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("simulation config: ") + e.what());
  }
  if (cfg.estimators.empty()) throw InputError("simulation config needs \"estimators\"");
  cfg.validate();
  return cfg;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Model-based sufficient dimension reduction", "sdr"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  FitArgs fa;
  auto add_data_options = [](CLI::App* sub, FitArgs& a) {
    sub->add_option("data", a.data, "CSV file with a header row")->required();
    sub->add_option("--response", a.response, "response column")->required();
    sub->add_option("--predictors", a.predictors, "comma-separated predictor columns (default: all others)");
    sub->add_option("--basis", a.basis, "linear | poly:K | slices:H | fourier:K")
        ->capture_default_str();
    sub->add_option("--strategy", a.strategy, "pfc-pc | pfc-all | sequential | grassmann")
        ->capture_default_str();
    sub->add_option("--out", a.out, "output directory")->capture_default_str();
  };
  CLI::App* fit = app.add_subcommand("fit", "fit one reduction and write fit.json and reduced.csv");
  add_data_options(fit, fa);
  fit->add_option("--method", fa.method, "pc | pfc | xpc | xpfc | gpfc | sir | ols")
      ->required()
      ->check(CLI::IsMember({"pc", "pfc", "xpc", "xpfc", "gpfc", "sir", "ols"}));
  fit->add_option("--d", fa.d, "dimension of the reduction");
  fit->add_option("--slices", fa.slices, "number of slices for sir")->capture_default_str();
  fit->add_option("--delta-file", fa.delta_file, "CSV with a known conditional covariance (gpfc)");
  fit->add_flag("--binary", fa.binary, "0/1 predictors: Bernoulli PC (pc) or its basis-constrained form (pfc)");

  SelectArgs sa;
  CLI::App* sel = app.add_subcommand("select-dim", "likelihood ratio tests of the dimension");
  add_data_options(sel, sa.fit);
  sel->add_option("--alpha", sa.alpha, "test level")->capture_default_str();

  StudyArgs st;
  auto add_study_options = [](CLI::App* sub, StudyArgs& a) {
    sub->add_option("--reps", a.reps, "replications per sweep value");
    sub->add_option("--seed", a.seed, "random seed");
    sub->add_option("--threads", a.threads, "worker threads (0: all cores)");
    sub->add_option("--out", a.out, "output directory")->capture_default_str();
  };
  CLI::App* sim = app.add_subcommand("simulate", "run a simulation study from a JSON config");
  sim->add_option("config", st.target, "JSON config file")->required();
  add_study_options(sim, st);
  CLI::App* rep = app.add_subcommand("reproduce-figure", "run a figure preset");
  std::vector<std::string> names = figure_names();
  rep->add_option("figure", st.target, "preset name")->required()->check(CLI::IsMember(names));
  add_study_options(rep, st);

  std::string manifest;
  std::string replay_out;
  CLI::App* rpl = app.add_subcommand("replay", "re-run a manifest and compare outputs");
  rpl->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  rpl->add_option("--out", replay_out, "directory for the re-run outputs")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*fit) return cmd_fit(fa, args, out);
    if (*sel) return cmd_select_dim(sa, args, out);
    if (*sim) return cmd_simulate(st, args, out);
    if (*rep) return cmd_reproduce(st, args, out);
    if (*rpl) return cmd_replay(manifest, replay_out, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    err << "fit failed: " << e.what() << "\n";
    return kExitFit;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace sdr
