#pragma once

#include <string>
#include <vector>

#include "sdr/basis.hpp"
#include "sdr/linalg.hpp"

namespace sdr {

/// n x p predictors (rows are observations) paired with an n-vector response.
struct Dataset {
  Matrix X;
  Vector y;
  std::vector<std::string> names;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }

  /// Shape and finiteness checks; throws InputError.
  void validate() const;
};

/// Sample moment matrices. Every covariance uses divisor n, not n-1, to match
/// the likelihood algebra the estimators are built on.
struct MomentSet {
  Matrix sigma_hat;  ///< marginal covariance of X
  Matrix sigma_fit;  ///< covariance of fitted values from regressing X on F
  Matrix sigma_res;  ///< sigma_hat - sigma_fit
  Vector xbar;
  Index n = 0;
  Index p = 0;
  Index r = 0;
};

/// Sigma_fit = Xc^T P_F Xc / n, with P_F taken from a rank-revealing QR of F.
MomentSet compute_moments(const Dataset& data, const BasisMatrix& F);

/// Slice-mean construction of the same moments:
/// Sigma_fit = sum_k (n_k/n)(xbar_k - xbar)(xbar_k - xbar)^T.
struct SliceMoments {
  MomentSet moments;
  Matrix slice_means;  ///< h x p
  Vector weights;      ///< n_k / n
};

SliceMoments slice_mean_form(const Dataset& data, int h);

}  // namespace sdr
