#include "sdr/moments.hpp"

namespace sdr {

void Dataset::validate() const {
  if (X.rows() != y.size()) {
    throw DimensionError("predictor matrix has " + std::to_string(X.rows()) +
                         " rows but the response has " + std::to_string(y.size()) + " entries");
  }
  if (X.rows() < 2) throw InputError("dataset needs at least two observations");
  if (X.cols() < 1) throw InputError("dataset has no predictors");
  if (!names.empty() && static_cast<Index>(names.size()) != X.cols()) {
    throw DimensionError("number of predictor names does not match the predictor count");
  }
  for (Index j = 0; j < X.cols(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) {
      if (!std::isfinite(X(i, j))) {
        const std::string col = names.empty() ? std::to_string(j + 1) : names[std::size_t(j)];
        throw InputError("non-finite predictor value in column " + col + ", row " +
                         std::to_string(i + 1));
      }
    }
  }
  for (Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y(i))) {
      throw InputError("non-finite response value in row " + std::to_string(i + 1));
    }
  }
}

namespace {

MomentSet marginal_part(const Dataset& data, Matrix& centered) {
  MomentSet m;
  m.n = data.n();
  m.p = data.p();
  m.xbar = data.X.colwise().mean().transpose();
  centered = data.X.rowwise() - m.xbar.transpose();
  m.sigma_hat = symmetrize(centered.transpose() * centered / double(m.n));
  return m;
}

}  // namespace

MomentSet compute_moments(const Dataset& data, const BasisMatrix& F) {
  data.validate();
  if (F.n() != data.n()) {
    throw DimensionError("basis has " + std::to_string(F.n()) + " rows but the dataset has " +
                         std::to_string(data.n()) + " observations");
  }
  Matrix centered;
  MomentSet m = marginal_part(data, centered);
  m.r = F.r();

  Eigen::ColPivHouseholderQR<Matrix> qr(F.F);
  qr.setThreshold(1e-10);
  if (qr.rank() < F.r()) {
    throw DegenerateBasisError("basis matrix F has rank " + std::to_string(qr.rank()) +
                               " < r = " + std::to_string(F.r()) + "; F^T F is singular");
  }
  const Matrix Q = qr.householderQ() * Matrix::Identity(F.n(), F.r());
  const Matrix projected = Q.transpose() * centered;
  m.sigma_fit = symmetrize(projected.transpose() * projected / double(m.n));
  m.sigma_res = symmetrize(m.sigma_hat - m.sigma_fit);
  return m;
}

SliceMoments slice_mean_form(const Dataset& data, int h) {
  data.validate();
  if (h < 2) throw InputError("slice_mean_form needs at least two slices");
  const auto slices = assign_slices(data.y, h);

  Matrix centered;
  SliceMoments out;
  out.moments = marginal_part(data, centered);
  out.moments.r = h - 1;

  const Index p = data.p();
  out.slice_means = Matrix::Zero(h, p);
  Vector counts = Vector::Zero(h);
  for (Index i = 0; i < data.n(); ++i) {
    const int s = slices[std::size_t(i)];
    out.slice_means.row(s) += data.X.row(i);
    counts(s) += 1.0;
  }
  for (int k = 0; k < h; ++k) {
    if (counts(k) == 0.0) {
      throw DegenerateBasisError("slice " + std::to_string(k + 1) + " of " + std::to_string(h) +
                                 " is empty");
    }
    out.slice_means.row(k) /= counts(k);
  }
  out.weights = counts / double(data.n());

  Matrix fit = Matrix::Zero(p, p);
  for (int k = 0; k < h; ++k) {
    const Vector dev = out.slice_means.row(k).transpose() - out.moments.xbar;
    fit += out.weights(k) * dev * dev.transpose();
  }
  out.moments.sigma_fit = symmetrize(fit);
  out.moments.sigma_res = symmetrize(out.moments.sigma_hat - out.moments.sigma_fit);
  return out;
}

}  // namespace sdr
