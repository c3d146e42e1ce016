#include "sdr/basis.hpp"

#include <charconv>
#include <cmath>
#include <numeric>

namespace sdr {

namespace {

int parse_count(const std::string& spec, const std::string& text) {
  int value = 0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw InputError("basis spec '" + spec + "': '" + text + "' is not an integer");
  }
  return value;
}

void center_columns(Matrix& F) {
  F.rowwise() -= F.colwise().mean();
}

}  // namespace

BasisKind BasisKind::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  if (name == "linear") {
    if (colon != std::string::npos) throw InputError("basis 'linear' takes no parameter");
    return linear();
  }
  if (colon == std::string::npos) {
    throw InputError("basis spec '" + spec + "' needs a parameter, e.g. poly:3, slices:8, fourier:2");
  }
  const int value = parse_count(spec, spec.substr(colon + 1));
  if (name == "poly") {
    if (value < 1) throw InputError("polynomial degree must be >= 1");
    return polynomial(value);
  }
  if (name == "slices") {
    if (value < 2) throw InputError("number of slices must be >= 2");
    return slices(value);
  }
  if (name == "fourier") {
    if (value < 1) throw InputError("number of Fourier harmonics must be >= 1");
    return fourier(value);
  }
  throw InputError("unknown basis kind '" + name + "' (expected linear, poly, slices, fourier)");
}

std::string BasisKind::to_string() const {
  switch (type) {
    case Type::Linear:
      return "linear";
    case Type::Polynomial:
      return "poly:" + std::to_string(param);
    case Type::Slices:
      return "slices:" + std::to_string(param);
    case Type::Fourier:
      return "fourier:" + std::to_string(param);
  }
  return "linear";
}

int BasisKind::r() const {
  switch (type) {
    case Type::Linear:
      return 1;
    case Type::Polynomial:
      return param;
    case Type::Slices:
      return param - 1;
    case Type::Fourier:
      return 2 * param;
  }
  return 1;
}

std::vector<int> assign_slices(const Vector& y, int h) {
  if (h < 1) throw InputError("number of slices must be positive");
  const auto n = static_cast<std::size_t>(y.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return y(Index(a)) < y(Index(b)); });

  std::vector<int> slice(n, 0);
  std::size_t pos = 0;
  for (int k = 0; k < h && pos < n; ++k) {
    const std::size_t remaining = n - pos;
    const auto slices_left = static_cast<std::size_t>(h - k);
    const std::size_t target = remaining / slices_left + (remaining % slices_left > 0 ? 1 : 0);
    std::size_t end = pos + target;
    while (end < n && y(Index(order[end])) == y(Index(order[end - 1]))) ++end;
    for (std::size_t i = pos; i < end; ++i) slice[order[i]] = k;
    pos = end;
  }
  return slice;
}

BasisMatrix build_basis(const Vector& y, const BasisKind& kind) {
  const Index n = y.size();
  const int r = kind.r();
  if (r < 1) throw InputError("basis " + kind.to_string() + " has no columns");
  if (n < r + 2) {
    throw InputError("basis " + kind.to_string() + " needs n >= r + 2 (n=" + std::to_string(n) +
                     ", r=" + std::to_string(r) + ")");
  }
  if (!y.allFinite()) throw InputError("response contains non-finite values");
  const double ymin = y.minCoeff();
  const double ymax = y.maxCoeff();
  if (!(ymax > ymin)) throw DegenerateBasisError("response is constant; basis is degenerate");

  BasisMatrix out;
  out.kind = kind;
  Matrix F(n, r);
  switch (kind.type) {
    case BasisKind::Type::Linear:
      F.col(0) = y;
      break;
    case BasisKind::Type::Polynomial: {
      Vector power = Vector::Ones(n);
      for (int j = 0; j < r; ++j) {
        power = power.cwiseProduct(y);
        F.col(j) = power;
      }
      break;
    }
    case BasisKind::Type::Slices: {
      const int h = kind.param;
      if (n < 2 * h) {
        throw InputError("slices:" + std::to_string(h) + " needs n >= 2h (n=" + std::to_string(n) +
                         ")");
      }
      auto slices = assign_slices(y, h);
      std::vector<Index> counts(static_cast<std::size_t>(h), 0);
      for (int s : slices) ++counts[static_cast<std::size_t>(s)];
      for (int k = 0; k < h; ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0) {
          throw DegenerateBasisError("slice " + std::to_string(k + 1) + " of " + std::to_string(h) +
                                     " is empty (too many tied responses)");
        }
      }
      F.setZero();
      for (Index i = 0; i < n; ++i) {
        const int s = slices[static_cast<std::size_t>(i)];
        if (s < r) F(i, s) = 1.0;
      }
      out.slice_assignments = std::move(slices);
      break;
    }
    case BasisKind::Type::Fourier: {
      // Rescale to [0, 1) so the extremes do not alias onto the same phase.
      const double shrink = double(n) / double(n + 1);
      const Vector u = ((y.array() - ymin) / (ymax - ymin) * shrink).matrix();
      for (int k = 1; k <= kind.param; ++k) {
        F.col(2 * (k - 1)) = (2.0 * M_PI * k * u.array()).cos().matrix();
        F.col(2 * (k - 1) + 1) = (2.0 * M_PI * k * u.array()).sin().matrix();
      }
      break;
    }
  }
  center_columns(F);

  for (Index j = 0; j < r; ++j) {
    if (!(F.col(j).squaredNorm() > 0.0)) {
      throw DegenerateBasisError("basis column " + std::to_string(j + 1) + " of " +
                                 kind.to_string() + " has zero variance");
    }
  }
  if (kind.type == BasisKind::Type::Polynomial && r > 1) {
    const auto eig = sym_eig((F.transpose() * F).eval());
    if (!(eig.eigenvalues(r - 1) > 1e-12 * eig.eigenvalues(0))) {
      out.warnings.push_back("polynomial basis is ill-conditioned (F^T F condition number above 1e12); "
                             "consider rescaling the response");
    }
  }
  out.F = std::move(F);
  return out;
}

}  // namespace sdr
