#ifndef MRD_PROJECTION_HPP
#define MRD_PROJECTION_HPP

#include <Eigen/Dense>

#include <vector>

#include "mrd/covariance.hpp"

namespace mrd {

struct ProjectionResult {
  Eigen::VectorXd mu;         // minimizer, mu >= 0
  Eigen::VectorXd dual;       // s = Sigma_A^{-1} (x - mu); s <= 0, mu_i s_i = 0
  double objective = 0.0;     // (x - mu)' Sigma_A^{-1} (x - mu)
  double max_dual = 0.0;      // max_i s_i (KKT residual, <= 0 up to rounding)
  double max_complementarity = 0.0;  // max_i |mu_i s_i|
  int iterations = 0;
};

/// Minimizes (x - mu)' Sigma_A^{-1} (x - mu) over mu >= 0, where Sigma_A is
/// the principal submatrix of `model` on `indices` and x has one entry per
/// index. Lawson-Hanson style active set on the bound set B = {mu_i = 0}:
/// for a given B the stationary point has s_B = Sigma_BB^{-1} x_B and
/// mu_F = x_F - Sigma_FB s_B, so each step costs one solve on B.
ProjectionResult project_nonneg_orthant(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const CovarianceModel& model,
                                        const std::vector<Index>& indices);

/// Convenience overload: the whole model.
ProjectionResult project_nonneg_orthant(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const CovarianceModel& model);

/// Number of positive entries of the projection for the unit intraclass
/// model. KKT forces the zero set to be the b smallest entries with
/// max_B x <= tau_b < min_F x, tau_b = rho S_B / (1 - rho + b rho), so a
/// sort and one scan suffice.
Index intraclass_orthant_positive_count(const Eigen::Ref<const Eigen::VectorXd>& x, double rho);

/// Same, for entries already sorted ascending.
Index intraclass_orthant_positive_count_sorted(const double* sorted, Index k, double rho);

}  // namespace mrd

#endif  // MRD_PROJECTION_HPP
