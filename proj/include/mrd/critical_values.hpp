#ifndef MRD_CRITICAL_VALUES_HPP
#define MRD_CRITICAL_VALUES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "mrd/covariance.hpp"
#include "mrd/residuals.hpp"

namespace mrd {

/// Standard normal CDF.
double normal_cdf(double x);

/// Phi^{-1}(p) for p in (0, 1).
double normal_quantile(double p);

/// x with 1 - Phi(x) = q, without forming 1 - q.
double normal_upper_quantile(double q);

// Strictly decreasing positive constants C_1 > ... > C_M > 0.
class CriticalSchedule {
 public:
  /// Validates and wraps; throws ValidationError naming the first bad stage.
  CriticalSchedule(Eigen::VectorXd values, std::string provenance = "explicit");

  Index size() const { return values_.size(); }
  double operator[](Index stage) const { return values_(stage); }
  const Eigen::VectorXd& values() const { return values_; }
  const std::string& provenance() const { return provenance_; }

  /// Elementwise square, e.g. to compare quadratic-form statistics against
  /// constants given on the max-coordinate scale.
  CriticalSchedule squared() const;

  /// "stage,value" lines with a header, full round-trip precision.
  std::string to_csv() const;

 private:
  Eigen::VectorXd values_;
  std::string provenance_;
};

/// C_1 = Phi^{-1}(1 - alpha/2M), C_i = factor * Phi^{-1}(1 - alpha/2(M-i+1)).
CriticalSchedule schedule_mrd_two_sided(Index m, double alpha, double factor);

enum class OneSidedFamily {
  mrd,   // C_1(SD), factor * C_i(SD) (factor 0.7 in the published recipe)
  lrsd,  // 1.25 C_1(SD), 1.2 C_i(SD)
  sd,    // C_i(SD) = Phi^{-1}(1 - alpha/(M-i+1))
};

CriticalSchedule schedule_one_sided(Index m, double alpha, OneSidedFamily family,
                                    double factor = 0.7);

struct McQuantile {
  double threshold = 0.0;
  double standard_error = 0.0;
  std::int64_t draws = 0;
};

/// Empirical (1 - alpha) quantile of the max of k equicorrelated standard
/// normals (of |X| for two-sided). Draw d uses stream (seed, d); rho >= 0
/// uses X_i = sqrt(rho) W_0 + sqrt(1-rho) W_i, rho < 0 a Cholesky factor.
/// The standard error comes from the spread of the order statistics at
/// N p -/+ sqrt(N p (1-p)).
McQuantile mc_max_quantile(Index k, double rho, double alpha, std::int64_t draws,
                           std::uint64_t seed, Sidedness sided = Sidedness::one_sided,
                           int workers = 1);

/// Quantiles for every k = 1..k_max from one set of draws (common random
/// numbers, so the result is nondecreasing in k). Entry k-1 equals
/// mc_max_quantile(k, ...) exactly.
std::vector<McQuantile> mc_max_quantiles(Index k_max, double rho, double alpha,
                                         std::int64_t draws, std::uint64_t seed,
                                         Sidedness sided = Sidedness::one_sided, int workers = 1);

// Null distribution of the one-sided likelihood ratio statistic on k
// equicorrelated coordinates is the mixture sum_j w_j chi^2_j, with w_j the
// probability that the projection onto the nonnegative orthant has exactly j
// positive entries. Weights are estimated from `draws` projections; draw d
// uses stream (seed, d).
Eigen::VectorXd chi_bar_weights(Index k, double rho, std::int64_t draws, std::uint64_t seed,
                                int workers = 1);

/// Weights for every k = 1..k_max from one set of draws (coordinate i of draw
/// d is shared by all k > i). Entry k-1 has length k + 1 and equals
/// chi_bar_weights(k, ...) only for k = k_max.
std::vector<Eigen::VectorXd> chi_bar_weight_table(Index k_max, double rho, std::int64_t draws,
                                                  std::uint64_t seed, int workers = 1);

/// P(sum_j w_j chi^2_j >= t); w_0 is a point mass at zero.
double chi_bar_upper_tail(const Eigen::Ref<const Eigen::VectorXd>& weights, double t);

/// t with chi_bar_upper_tail(weights, t) = q, for q below the mass off zero.
double chi_bar_upper_quantile(const Eigen::Ref<const Eigen::VectorXd>& weights, double q);

/// Carries constants given on the max-coordinate scale over to the scale of
/// the stage-wise likelihood ratio statistic on an equicorrelated model: stage
/// m gets the LRT value whose null tail probability on k = M - m + 1
/// coordinates equals 1 - Phi(C_m) (one-sided, chi-bar-square) or
/// 2 (1 - Phi(C_m)) (two-sided, chi-square with k df).
CriticalSchedule lrt_tail_matched(const CriticalSchedule& base, double rho, Sidedness sided,
                                  std::int64_t draws = 20000, std::uint64_t seed = 4099,
                                  int workers = 1);

}  // namespace mrd

#endif  // MRD_CRITICAL_VALUES_HPP
