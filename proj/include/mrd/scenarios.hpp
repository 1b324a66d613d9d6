#ifndef MRD_SCENARIOS_HPP
#define MRD_SCENARIOS_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrd/covariance.hpp"

namespace mrd {

// True mean vector with the induced truth masks.
struct MeanPattern {
  Eigen::VectorXd mu;
  std::vector<bool> is_null;

  Index size() const { return mu.size(); }
  Index nulls() const;
  Index alternatives() const { return size() - nulls(); }

  /// Nulls are mu_i == 0, or mu_i <= 0 when `nonpositive_is_null` (the
  /// composite one-sided problem).
  static MeanPattern from_means(Eigen::VectorXd mu, bool nonpositive_is_null = false);
};

enum class MeanLayout {
  block,                   // values in the order given, each as one block
  equally_spaced_triples,  // runs of three equal values separated by zeros
};

/// counts: (value, count) pairs in header order. For the triples layout the
/// pairs are {(0, nulls), (v, triples)} and the M = nulls + 3 * triples
/// zeros/values are laid out as gap, triple, gap, ..., triple, gap with equal
/// gaps of nulls / (triples + 1) and the remainder added to the last gap.
MeanPattern mean_pattern_table(const std::vector<std::pair<double, Index>>& counts,
                               MeanLayout layout, bool nonpositive_is_null = false);

enum class ScenarioKind { treatments_control, change_point, successive, intraclass };

enum class MeanUnits {
  raw,           // mu in the units of x
  standardized,  // mu_i / (marginal sd of x_i)
};

enum class GenerationMode {
  one_factor,  // sample means drawn directly
  raw,         // individual observations Z_ij, then means and pooled s^2
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::treatments_control;
  Index m = 1;            // number of hypotheses
  double rho = 0.5;       // intraclass / successive correlation
  Index n = 2;            // replications per population
  double sigma = 1.0;
  bool variance_known = true;
  MeanPattern means;
  MeanUnits units = MeanUnits::raw;
  GenerationMode mode = GenerationMode::one_factor;
  std::uint64_t seed = 1;
  std::string label;

  /// Covariance of x. With unknown variance the scale omits sigma^2 (the
  /// pooled estimate supplies it).
  CovarianceModel covariance() const;

  /// Mean vector of x in raw units.
  Eigen::VectorXd raw_means() const;

  void validate() const;

  /// Stable textual fingerprint (for diagnostics).
  std::string fingerprint() const;
};

// One simulated data set.
struct Dataset {
  Eigen::VectorXd x;
  std::optional<double> s2;
  double nu = 0.0;
  Eigen::VectorXd zbar;  // population means (treatments/control, change point)
};

/// X_i = Zbar_i - Zbar_{M+1}; covariance (2 sigma^2 / n) times the
/// intraclass matrix with rho 1/2. Pooled s^2 on (M+1)(n-1) df when the
/// variance is unknown.
Dataset gen_treatments_control(const Scenario& scenario, std::uint64_t iteration);

/// X_i = Zbar_{i+1} - Zbar_i; covariance (sigma^2 / n) times the
/// change-point matrix. zbar carries the M+1 population means.
Dataset gen_changepoint(const Scenario& scenario, std::uint64_t iteration);

/// x = mu + L z, z from stream (seed, iteration).
Eigen::VectorXd gen_mvn(const CovarianceModel& model, const Eigen::Ref<const Eigen::VectorXd>& mu,
                        std::uint64_t seed, std::uint64_t iteration = 0);

/// Dispatches on scenario.kind.
Dataset generate(const Scenario& scenario, std::uint64_t iteration);

}  // namespace mrd

#endif  // MRD_SCENARIOS_HPP
