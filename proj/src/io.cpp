#include "sdr/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sdr {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text) {
  if (text == "nan" || text == "NaN") return std::nan("");
  if (text == "inf" || text == "Inf") return INFINITY;
  if (text == "-inf" || text == "-Inf") return -INFINITY;
  std::string_view body = text;
  if (!body.empty() && body.front() == '+') body.remove_prefix(1);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
  if (body.empty() || ec != std::errc() || ptr != body.data() + body.size()) {
    throw InputError("'" + std::string(text) + "' is not a number");
  }
  return v;
}

Index CsvData::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return Index(j);
  }
  throw InputError("no column named '" + name + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

}  // namespace

CsvData parse_csv(std::string_view text) {
  CsvData out;
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  int line_no = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (!have_header) {
      for (const auto& f : fields) {
        if (f.empty()) throw InputError("line " + std::to_string(line_no) + ": empty column name");
        out.header.push_back(unquote(f));
      }
      have_header = true;
      continue;
    }
    if (fields.size() != out.header.size()) {
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(out.header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      try {
        row[j] = parse_double(fields[j]);
      } catch (const InputError& e) {
        throw InputError("line " + std::to_string(line_no) + ", column '" + out.header[j] +
                         "': " + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw InputError("CSV input is empty; a header row is required");
  out.values.resize(Index(rows.size()), Index(out.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) out.values(Index(i), Index(j)) = rows[i][j];
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("write to '" + path.string() + "' failed");
}

CsvData read_csv(const std::filesystem::path& path) {
  try {
    return parse_csv(read_text(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string to_csv(const std::vector<std::string>& header, const Matrix& values) {
  if (Index(header.size()) != values.cols()) throw DimensionError("header and matrix widths differ");
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += header[j];
  }
  out += '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j) out += ',';
      out += format_double(values(i, j));
    }
    out += '\n';
  }
  return out;
}

Dataset dataset_from_csv(const CsvData& csv, const std::string& response,
                         const std::vector<std::string>& predictors) {
  const Index yc = csv.column(response);
  std::vector<Index> cols;
  Dataset data;
  if (predictors.empty()) {
    for (Index j = 0; j < Index(csv.header.size()); ++j) {
      if (j != yc) {
        cols.push_back(j);
        data.names.push_back(csv.header[std::size_t(j)]);
      }
    }
  } else {
    for (const auto& name : predictors) {
      if (name == response) throw InputError("column '" + name + "' is both response and predictor");
      cols.push_back(csv.column(name));
      data.names.push_back(name);
    }
  }
  if (cols.empty()) throw InputError("no predictor columns");
  data.y = csv.values.col(yc);
  data.X.resize(csv.values.rows(), Index(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) data.X.col(Index(j)) = csv.values.col(cols[j]);
  for (Index i = 0; i < data.X.rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (!std::isfinite(data.X(i, Index(j)))) {
        throw InputError("row " + std::to_string(i + 1) + ", column '" + data.names[j] +
                         "': non-finite value");
      }
    }
    if (!std::isfinite(data.y(i))) {
      throw InputError("row " + std::to_string(i + 1) + ", column '" + response +
                       "': non-finite value");
    }
  }
  return data;
}

void require_binary(const Dataset& data) {
  for (Index i = 0; i < data.X.rows(); ++i) {
    for (Index j = 0; j < data.X.cols(); ++j) {
      const double v = data.X(i, j);
      if (v != 0.0 && v != 1.0) {
        const std::string name =
            std::size_t(j) < data.names.size() ? data.names[std::size_t(j)] : std::to_string(j + 1);
        throw InputError("row " + std::to_string(i + 1) + ", column '" + name +
                         "': binary predictors must be 0 or 1, found " + format_double(v));
      }
    }
  }
}

nlohmann::json matrix_to_json(const Matrix& A) {
  auto rows = nlohmann::json::array();
  for (Index i = 0; i < A.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InputError("matrix must be a JSON array of rows");
  const Index rows = Index(j.size());
  const Index cols = rows ? Index(j[0].size()) : 0;
  Matrix A(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[std::size_t(i)];
    if (!row.is_array() || Index(row.size()) != cols) throw InputError("matrix rows differ in length");
    for (Index c = 0; c < cols; ++c) {
      if (!row[std::size_t(c)].is_number()) throw InputError("matrix entries must be numbers");
      A(i, c) = row[std::size_t(c)].get<double>();
    }
  }
  return A;
}

namespace {

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json fit_to_json(const FittedReduction& fit) {
  nlohmann::json j;
  j["method"] = to_string(fit.method);
  j["d"] = fit.d;
  j["n"] = fit.n;
  j["p"] = fit.p;
  j["r"] = fit.r;
  if (fit.basis) j["basis"] = fit.basis->to_string();
  j["loglik"] = finite_or_null(fit.loglik);
  j["subspace_basis"] = matrix_to_json(fit.subspace.basis());
  j["W"] = matrix_to_json(fit.W);
  j["xbar"] = std::vector<double>(fit.xbar.data(), fit.xbar.data() + fit.xbar.size());
  j["eigenvalues"] =
      std::vector<double>(fit.eigenvalues.data(), fit.eigenvalues.data() + fit.eigenvalues.size());
  if (fit.sigma2_hat) j["sigma2_hat"] = *fit.sigma2_hat;
  if (fit.delta_hat) j["delta_hat"] = matrix_to_json(*fit.delta_hat);
  if (fit.beta_hat) j["beta_hat"] = matrix_to_json(*fit.beta_hat);
  auto diag = nlohmann::json::object();
  for (const auto& [k, v] : fit.diagnostics) diag[k] = finite_or_null(v);
  j["diagnostics"] = diag;
  j["warnings"] = fit.warnings;
  if (fit.extended) {
    const auto& e = *fit.extended;
    nlohmann::json x;
    x["strategy"] = to_string(e.strategy);
    x["candidate_source"] = to_string(e.candidate_source);
    if (e.seed_source) x["seed_source"] = to_string(*e.seed_source);
    x["omega2_hat"] = matrix_to_json(e.omega2_hat);
    x["omega0_2_hat"] = matrix_to_json(e.omega0_2_hat);
    x["optimizer_iterations"] = e.optimizer_iterations;
    x["optimizer_converged"] = e.optimizer_converged;
    j["extended"] = x;
  }
  if (fit.ols) {
    nlohmann::json o;
    o["alpha"] = std::vector<double>(fit.ols->alpha.data(), fit.ols->alpha.data() + fit.ols->alpha.size());
    o["intercept"] = fit.ols->intercept;
    j["ols"] = o;
  }
  return j;
}

}  // namespace sdr
