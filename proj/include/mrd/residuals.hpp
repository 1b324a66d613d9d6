#ifndef MRD_RESIDUALS_HPP
#define MRD_RESIDUALS_HPP

#include <Eigen/Dense>

#include <vector>

#include "mrd/covariance.hpp"

namespace mrd {

// Standardized conditional residuals for one stage: values(k) belongs to
// active.remaining()[k].
struct ResidualVector {
  Index stage = 1;
  Eigen::VectorXd values;
  ActiveSet active;

  double at(Index j) const;
};

/// Dense route: with P = Sigma_A^{-1}, U_j = (P x_A)_j / sqrt(P_jj). Always
/// goes through a Cholesky of the dense submatrix, whatever the structure.
ResidualVector residual_vector_generic(const CovarianceModel& model, const ActiveSet& active,
                                       const Eigen::Ref<const Eigen::VectorXd>& x);

/// O(p) form for the intraclass model using the running sum of the remaining
/// coordinates. `scale` multiplies the unit intraclass matrix.
ResidualVector residual_vector_intraclass_fast(double rho, const ActiveSet& active,
                                               const Eigen::Ref<const Eigen::VectorXd>& x,
                                               double scale = 1.0);

/// O(p) form for the change-point model through segment means of the
/// underlying population means (reconstructed from x by cumulative sums).
/// Values carry the orientation of the generic definition.
ResidualVector residual_vector_changepoint_fast(const ActiveSet& active,
                                                const Eigen::Ref<const Eigen::VectorXd>& x,
                                                double scale = 1.0);

/// Dispatches to the cheapest exact route for the model: intraclass and
/// change-point closed forms, O(p) banded kernels for successive correlation,
/// dense Cholesky otherwise.
ResidualVector residual_vector(const CovarianceModel& model, const ActiveSet& active,
                               const Eigen::Ref<const Eigen::VectorXd>& x);

/// Closed form for the change-point model in terms of the M+1 sample means.
/// For the remaining difference index i (0-based), bounded by the nearest
/// rejected indices (sentinels -1 and M in 0-based difference space):
///   sqrt(J / (nL nR)) * (sum_{left} z - nL * sum_{segment} z / J)
/// with nL, nR the population counts left and right of the break and
/// J = nL + nR. This is the negative of the generic residual.
double residual_changepoint_closed_form(const Eigen::Ref<const Eigen::VectorXd>& zbar,
                                        const std::vector<Index>& rejected, Index i);

enum class Studentization {
  pooled_sd,  // U_j / s
  root_t,     // U_j / sqrt(T), T = nu s^2 + x' Sigma^{-1} x
};

/// Divides every residual by the studentization denominator. For root_t the
/// caller passes the quadratic form x' Sigma^{-1} x through `quad_form`.
ResidualVector studentize(const ResidualVector& u, double s2, double nu,
                          Studentization mode = Studentization::pooled_sd,
                          double quad_form = 0.0);

enum class Sidedness { two_sided, one_sided };

/// Conditional p-value of a standardized residual: 2(1 - Phi(|u|)) or
/// 1 - Phi(u).
double conditional_pvalue(double u, Sidedness sided);

}  // namespace mrd

#endif  // MRD_RESIDUALS_HPP
