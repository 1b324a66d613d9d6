#ifndef MRD_PROCEDURES_HPP
#define MRD_PROCEDURES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "mrd/covariance.hpp"
#include "mrd/critical_values.hpp"
#include "mrd/residuals.hpp"

namespace mrd {

struct StageStat {
  Index stage = 0;        // 1-based
  Index index = 0;        // hypothesis examined (0-based)
  double statistic = 0.0;
  double threshold = 0.0;
  bool rejected = false;
};

// Outcome of a multiple testing procedure. statistic/threshold hold, per
// hypothesis, the value that decided it: the stage maximum and constant for
// rejected hypotheses, the final-stage value and constant for the rest.
struct DecisionVector {
  std::vector<bool> reject;
  std::vector<Index> order;  // rejection order
  std::vector<StageStat> stage_stats;
  Eigen::VectorXd statistic;
  Eigen::VectorXd threshold;

  explicit DecisionVector(Index m = 0)
      : reject(static_cast<std::size_t>(m), false),
        statistic(Eigen::VectorXd::Zero(m)),
        threshold(Eigen::VectorXd::Zero(m)) {}

  Index size() const { return static_cast<Index>(reject.size()); }
  Index rejections() const { return static_cast<Index>(order.size()); }
};

// Pooled variance estimate for the unknown-sigma^2 case.
struct VarianceEstimate {
  double s2 = 1.0;
  double nu = 1.0;
};

/// Maximum residual down. At stage m, computes the conditional residuals on
/// the remaining coordinates, picks j_m = argmax |U_j| (two-sided) or U_j
/// (one-sided), smallest index on ties, and rejects H_{j_m} iff the maximum
/// is >= C_m; otherwise stops.
DecisionVector mrd(const Eigen::Ref<const Eigen::VectorXd>& x, const CovarianceModel& model,
                   const CriticalSchedule& schedule, Sidedness sided,
                   std::optional<VarianceEstimate> variance = std::nullopt,
                   Studentization mode = Studentization::pooled_sd);

/// Likelihood-ratio step-down. Stage statistic on the remaining coordinates:
/// x_A' Sigma_A^{-1} x_A (two-sided) or
/// x_A' Sigma_A^{-1} x_A - min_{mu >= 0} (x_A - mu)' Sigma_A^{-1} (x_A - mu)
/// (one-sided). When it is >= C_m the hypothesis of the largest |x_j|
/// (two-sided) or x_j (one-sided) is rejected. Constants are compared as
/// given; lrt_tail_matched carries max-coordinate-scale recipes over.
DecisionVector lrsd(const Eigen::Ref<const Eigen::VectorXd>& x, const CovarianceModel& model,
                    const CriticalSchedule& schedule, Sidedness sided);

/// Global LRSD statistic on an index set (exposed for the inadmissibility
/// analysis and tests).
double lrsd_statistic(const Eigen::Ref<const Eigen::VectorXd>& x, const CovarianceModel& model,
                      const std::vector<Index>& indices, Sidedness sided);

/// Benjamini-Hochberg: reject p <= p_(k*), k* = max{k : p_(k) <= q k / M}.
DecisionVector bh_step_up(const Eigen::Ref<const Eigen::VectorXd>& pvalues, double q);

/// Holm: at step i reject the i-th smallest p iff p_(i) <= alpha / (M - i + 1).
DecisionVector holm_step_down_marginal(const Eigen::Ref<const Eigen::VectorXd>& pvalues,
                                       double alpha);

/// p-value of x_j from its marginal distribution, sd sqrt(scale * sigma_jj);
/// Student t with nu df when a variance estimate is supplied (nu <= 200),
/// normal beyond.
double marginal_pvalue(double x_j, Index j, const CovarianceModel& model, Sidedness sided,
                       std::optional<VarianceEstimate> variance = std::nullopt);

Eigen::VectorXd marginal_pvalues(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const CovarianceModel& model, Sidedness sided,
                                 std::optional<VarianceEstimate> variance = std::nullopt);

// Monte Carlo critical values c(k) for the max of k equicorrelated normals,
// cached per (k, rho, alpha, seed, draws, sidedness). Lookups take a shared
// lock; a miss computes every k up to the request under an exclusive lock.
class DunnettCalibrator {
 public:
  DunnettCalibrator(double rho, double alpha, std::uint64_t seed, std::int64_t draws = 1000000,
                    Sidedness sided = Sidedness::one_sided, int workers = 1);

  double rho() const { return rho_; }
  double alpha() const { return alpha_; }
  Sidedness sided() const { return sided_; }

  McQuantile quantile(Index k) const;
  double threshold(Index k) const { return quantile(k).threshold; }

  /// Computes c(1..k_max) up front.
  void prepare(Index k_max) const;

  /// Sidecar persistence (JSON). load() ignores entries for other keys.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  using Key = std::tuple<Index, double, double, std::uint64_t, std::int64_t, int>;
  Key key(Index k) const;

  double rho_;
  double alpha_;
  std::uint64_t seed_;
  std::int64_t draws_;
  Sidedness sided_;
  int workers_;
  mutable std::shared_mutex mutex_;
  mutable std::map<Key, McQuantile> cache_;
};

/// Step-down on standardized coordinates x_j / sqrt(scale * sigma_jj): with k
/// hypotheses remaining, reject the largest (largest |.| two-sided) iff it
/// is >= c(k). The model must be intraclass with the calibrator's rho.
DecisionVector dunnett_step_down(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const CovarianceModel& model, const DunnettCalibrator& calib);

}  // namespace mrd

#endif  // MRD_PROCEDURES_HPP
