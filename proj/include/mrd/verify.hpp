#ifndef MRD_VERIFY_HPP
#define MRD_VERIFY_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "mrd/covariance.hpp"
#include "mrd/critical_values.hpp"
#include "mrd/residuals.hpp"

namespace mrd {

// The M = 4 intraclass point at which two-sided LRSD rejects H_1 but
// accepts it after moving along the first column of Sigma.
struct LrsdWitness {
  double rho = 0.5;
  double a = 2.0, b = 4.0, delta = 1.0, epsilon = 0.1;
  double gamma = 0.2;
  CovarianceModel model = CovarianceModel::intraclass(4, 0.5);
  Eigen::VectorXd x;          // (a, -a - delta, b, -b - epsilon)
  Eigen::VectorXd g;          // first column of Sigma
  CriticalSchedule schedule;  // C_2 equal to the stage-2 quadratic form at x

  LrsdWitness();
};

/// Stage-2 quadratic form at the witness (x_4 removed), closed form in
/// (a, b, delta, rho).
double witness_stage2_form(double a, double b, double delta, double rho);

/// Stage-2 form at x minus the stage-2 form at x + (epsilon / rho) g with x_3
/// removed; positive means H_1 flips from rejected to accepted.
double witness_discriminant(double a, double b, double delta, double epsilon, double rho);

/// H_1 decision of MRD at x + r g for each r in `grid`.
std::vector<bool> sweep_first_hypothesis(const Eigen::Ref<const Eigen::VectorXd>& x,
                                         const CovarianceModel& model,
                                         const CriticalSchedule& schedule, Sidedness sided,
                                         const std::vector<double>& grid);

/// Accept points form one contiguous run (rejections only on the two ends).
bool acceptance_is_interval(const std::vector<bool>& rejected);

/// Once rejected, rejected for every later grid point.
bool rejection_is_upward_closed(const std::vector<bool>& rejected);

std::vector<double> linear_grid(double lo, double hi, int points);

struct CheckResult {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 7;
  int trials = 100;
  // Mutation hook: negates the change-point closed form before comparing.
  bool flip_changepoint_sign = false;
};

/// Closed-form versus dense-oracle checks for covariance kernels and
/// residuals, the shift and sweep properties, the projection KKT
/// certificate and the LRSD witness.
std::vector<CheckResult> run_verification(const VerifyOptions& options = {});

}  // namespace mrd

#endif  // MRD_VERIFY_HPP
