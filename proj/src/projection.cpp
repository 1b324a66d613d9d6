#include "mrd/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mrd {

namespace {

struct Split {
  std::vector<Index> free_pos;   // positions within `indices`
  std::vector<Index> bound_pos;
};

Split split(const std::vector<bool>& is_free) {
  Split s;
  for (std::size_t k = 0; k < is_free.size(); ++k) {
    (is_free[k] ? s.free_pos : s.bound_pos).push_back(static_cast<Index>(k));
  }
  return s;
}

std::vector<Index> pick(const std::vector<Index>& indices, const std::vector<Index>& pos) {
  std::vector<Index> out(pos.size());
  for (std::size_t k = 0; k < pos.size(); ++k) out[k] = indices[static_cast<std::size_t>(pos[k])];
  return out;
}

// Stationary point of the objective with mu_B = 0 and mu_F free.
// Returns z over all of `indices`.
Eigen::VectorXd stationary_point(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const CovarianceModel& model, const std::vector<Index>& indices,
                                 const std::vector<bool>& is_free) {
  const Split s = split(is_free);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(x.size());
  if (s.bound_pos.empty()) return x;
  Eigen::VectorXd x_b(static_cast<Index>(s.bound_pos.size()));
  for (std::size_t k = 0; k < s.bound_pos.size(); ++k) x_b(static_cast<Index>(k)) = x(s.bound_pos[k]);
  const auto bound_idx = pick(indices, s.bound_pos);
  const Eigen::VectorXd dual_b = principal_submatrix_solve(model, bound_idx, x_b);
  if (!s.free_pos.empty()) {
    const Eigen::VectorXd shift = cross_multiply(model, pick(indices, s.free_pos), bound_idx, dual_b);
    for (std::size_t k = 0; k < s.free_pos.size(); ++k) {
      z(s.free_pos[k]) = x(s.free_pos[k]) - shift(static_cast<Index>(k));
    }
  }
  return z;
}

}  // namespace

ProjectionResult project_nonneg_orthant(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const CovarianceModel& model,
                                        const std::vector<Index>& indices) {
  const Index p = x.size();
  if (p != static_cast<Index>(indices.size())) {
    throw DomainError("project_nonneg_orthant: vector length does not match index set");
  }
  ProjectionResult result;
  result.mu = Eigen::VectorXd::Zero(p);
  if (p == 0) {
    result.dual = Eigen::VectorXd();
    return result;
  }

  const long long guard = 1LL << std::min<Index>(p, 30);
  constexpr double kDualTol = 1e-11;
  constexpr double kZeroTol = 1e-14;

  std::vector<bool> is_free(static_cast<std::size_t>(p), false);
  // Coordinates whose entry stalled on rounding; retried after any progress.
  std::vector<bool> stalled(static_cast<std::size_t>(p), false);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd dual = principal_submatrix_solve(model, indices, x);

  int iterations = 0;
  for (;;) {
    // Most violated bound constraint.
    Index enter = -1;
    double best = kDualTol;
    for (Index k = 0; k < p; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (!is_free[uk] && !stalled[uk] && dual(k) > best) {
        best = dual(k);
        enter = k;
      }
    }
    if (enter < 0) break;
    if (++iterations > guard) {
      throw NumericalFailure("project_nonneg_orthant: active-set cycle guard exceeded after " +
                             std::to_string(iterations - 1) + " iterations");
    }
    is_free[static_cast<std::size_t>(enter)] = true;

    bool stuck = false;
    for (bool first_pass = true;; first_pass = false) {
      const Eigen::VectorXd z = stationary_point(x, model, indices, is_free);
      double alpha = 1.0;
      Index blocking = -1;
      for (Index k = 0; k < p; ++k) {
        if (is_free[static_cast<std::size_t>(k)] && z(k) <= kZeroTol) {
          const double step = mu(k) / (mu(k) - z(k));
          if (step < alpha) {
            alpha = step;
            blocking = k;
          }
        }
      }
      if (blocking < 0) {
        mu = z;
        break;
      }
      if (first_pass && blocking == enter && alpha <= 0.0) {
        is_free[static_cast<std::size_t>(enter)] = false;
        stalled[static_cast<std::size_t>(enter)] = true;
        stuck = true;
        break;
      }
      mu += alpha * (z - mu);
      for (Index k = 0; k < p; ++k) {
        if (is_free[static_cast<std::size_t>(k)] && mu(k) <= kZeroTol) {
          is_free[static_cast<std::size_t>(k)] = false;
          mu(k) = 0.0;
        }
      }
    }
    if (stuck) continue;
    std::fill(stalled.begin(), stalled.end(), false);
    dual = principal_submatrix_solve(model, indices, x - mu);
    for (Index k = 0; k < p; ++k) {
      if (is_free[static_cast<std::size_t>(k)]) dual(k) = 0.0;
    }
  }

  const Eigen::VectorXd residual = x - mu;
  const Eigen::VectorXd full_dual = principal_submatrix_solve(model, indices, residual);
  result.mu = mu;
  result.dual = full_dual;
  result.objective = residual.dot(full_dual);
  result.max_dual = full_dual.maxCoeff();
  result.max_complementarity = (mu.array() * full_dual.array()).abs().maxCoeff();
  result.iterations = iterations;
  return result;
}

ProjectionResult project_nonneg_orthant(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const CovarianceModel& model) {
  std::vector<Index> all(static_cast<std::size_t>(model.size()));
  std::iota(all.begin(), all.end(), Index{0});
  return project_nonneg_orthant(x, model, all);
}

Index intraclass_orthant_positive_count_sorted(const double* y, Index k, double rho) {
  if (k < 1) throw DomainError("intraclass_orthant_positive_count: empty vector");
  double prefix = 0.0;
  for (Index b = 0; b <= k; ++b) {
    const double tau = rho * prefix / (1.0 - rho + static_cast<double>(b) * rho);
    const bool low_ok = b == 0 || y[b - 1] <= tau;
    const bool high_ok = b == k || y[b] > tau;
    if (low_ok && high_ok) return k - b;
    if (b < k) prefix += y[b];
  }
  throw NumericalFailure("intraclass_orthant_positive_count: no consistent zero set");
}

Index intraclass_orthant_positive_count(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        double rho) {
  std::vector<double> y(x.data(), x.data() + x.size());
  std::sort(y.begin(), y.end());
  return intraclass_orthant_positive_count_sorted(y.data(), x.size(), rho);
}

}  // namespace mrd
