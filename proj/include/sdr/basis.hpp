#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sdr/linalg.hpp"

namespace sdr {

/// Family of basis functions f_y of the response.
struct BasisKind {
  enum class Type { Linear, Polynomial, Slices, Fourier };

  Type type = Type::Linear;
  /// Polynomial degree, number of slices, or number of Fourier harmonic pairs.
  int param = 1;

  static BasisKind linear() { return {Type::Linear, 1}; }
  static BasisKind polynomial(int degree) { return {Type::Polynomial, degree}; }
  static BasisKind slices(int h) { return {Type::Slices, h}; }
  static BasisKind fourier(int k) { return {Type::Fourier, k}; }

  /// Parses `linear`, `poly:3`, `slices:8`, `fourier:2`.
  static BasisKind parse(const std::string& spec);
  std::string to_string() const;

  /// Number of basis columns r.
  int r() const;

  friend bool operator==(const BasisKind&, const BasisKind&) = default;
};

/// Centered n x r basis matrix F with rows f_y^T.
struct BasisMatrix {
  Matrix F;
  BasisKind kind;
  /// Slice index (0-based) of every observation, Slices only.
  std::optional<std::vector<int>> slice_assignments;
  std::vector<std::string> warnings;

  Index n() const { return F.rows(); }
  Index r() const { return F.cols(); }
};

/// Slice index per observation. Responses are sorted; slices take
/// floor(n/h) or ceil(n/h) points left to right (larger slices first), a run
/// of tied responses always stays in the slice where it starts, and the
/// remaining points are rebalanced over the remaining slices. Slices can come
/// out empty when ties are heavy; callers decide whether that is an error.
std::vector<int> assign_slices(const Vector& y, int h);

BasisMatrix build_basis(const Vector& y, const BasisKind& kind);

}  // namespace sdr
