#pragma once

// CSV and JSON plumbing. Numbers are written as the shortest decimal string
// that parses back to the same double, with a dot decimal separator in every
// locale.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sdr/estimators.hpp"
#include "sdr/moments.hpp"

namespace sdr {

std::string format_double(double v);
/// Throws InputError unless the whole of `text` is a number (nan and inf accepted).
double parse_double(std::string_view text);

struct CsvData {
  std::vector<std::string> header;
  Matrix values;  ///< one row per data line

  /// Column index of `name`; throws InputError naming the missing column.
  Index column(const std::string& name) const;
};

/// Parses a comma-separated table with a mandatory header row. Blank lines
/// are skipped; errors name the line and column.
CsvData parse_csv(std::string_view text);
CsvData read_csv(const std::filesystem::path& path);
std::string to_csv(const std::vector<std::string>& header, const Matrix& values);

std::string read_text(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Splits a table into a Dataset. With no predictor names, every column
/// except the response is a predictor.
Dataset dataset_from_csv(const CsvData& csv, const std::string& response,
                         const std::vector<std::string>& predictors = {});
/// Requires every predictor entry to be 0 or 1; throws InputError naming the
/// first offending cell.
void require_binary(const Dataset& data);

nlohmann::json matrix_to_json(const Matrix& A);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json fit_to_json(const FittedReduction& fit);

}  // namespace sdr
