#include "mrd/residuals.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mrd {

namespace {

constexpr double kMinConditionalVariance = 1e-14;

void require_length(const Eigen::Ref<const Eigen::VectorXd>& x, const ActiveSet& active,
                    const char* who) {
  if (x.size() != active.total()) {
    throw DomainError(std::string(who) + ": observation length " + std::to_string(x.size()) +
                      " does not match model size " + std::to_string(active.total()));
  }
}

Eigen::VectorXd gather(const Eigen::Ref<const Eigen::VectorXd>& x, const std::vector<Index>& idx) {
  Eigen::VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Index>(k)) = x(idx[k]);
  return out;
}

// U = (P x)_j / sqrt(P_jj) given P x and diag(P).
ResidualVector from_precision(const ActiveSet& active, const Eigen::VectorXd& px,
                              const Eigen::VectorXd& pdiag) {
  ResidualVector out{active.stage(), Eigen::VectorXd(px.size()), active};
  for (Index k = 0; k < px.size(); ++k) {
    // Conditional variance is 1 / P_jj.
    if (!(pdiag(k) > 0.0) || !(1.0 / pdiag(k) > kMinConditionalVariance)) {
      throw FactorizationError("degenerate conditional variance at hypothesis index " +
                               std::to_string(active.remaining()[static_cast<std::size_t>(k)] + 1));
    }
    out.values(k) = px(k) / std::sqrt(pdiag(k));
  }
  return out;
}

}  // namespace

double ResidualVector::at(Index j) const {
  const Index k = active.position(j);
  if (k < 0) throw DomainError("residual requested for a rejected index");
  return values(k);
}

ResidualVector residual_vector_generic(const CovarianceModel& model, const ActiveSet& active,
                                       const Eigen::Ref<const Eigen::VectorXd>& x) {
  require_length(x, active, "residual_vector_generic");
  if (active.total() != model.size()) throw DomainError("active set does not match model size");
  const auto& idx = active.remaining();
  const Eigen::MatrixXd sub = principal_submatrix(model, active);
  const auto llt = checked_cholesky(sub, &idx);
  const Index p = active.size();
  const Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd px = precision * gather(x, idx);
  return from_precision(active, px, precision.diagonal());
}

ResidualVector residual_vector_intraclass_fast(double rho, const ActiveSet& active,
                                               const Eigen::Ref<const Eigen::VectorXd>& x,
                                               double scale) {
  require_length(x, active, "residual_vector_intraclass_fast");
  const Index p = active.size();
  const double pd = static_cast<double>(p);
  if (!(rho < 1.0) || !(1.0 + (pd - 1.0) * rho > 0.0)) {
    throw DomainError("intraclass residuals: correlation outside the positive-definite range");
  }
  const auto& idx = active.remaining();
  double sum = 0.0;
  for (Index j : idx) sum += x(j);

  // Regression of x_j on the other p-1 coordinates.
  const double base = 1.0 + (pd - 2.0) * rho;
  const double coef = p > 1 ? rho / base : 0.0;
  const double cond_var = p > 1 ? (1.0 - rho) * (1.0 + (pd - 1.0) * rho) / base : 1.0;
  if (!(cond_var * scale > kMinConditionalVariance)) {
    throw FactorizationError("intraclass residuals: degenerate conditional variance");
  }
  const double denom = std::sqrt(cond_var * scale);

  ResidualVector out{active.stage(), Eigen::VectorXd(p), active};
  for (Index k = 0; k < p; ++k) {
    const double xj = x(idx[static_cast<std::size_t>(k)]);
    out.values(k) = (xj - coef * (sum - xj)) / denom;
  }
  return out;
}

ResidualVector residual_vector_changepoint_fast(const ActiveSet& active,
                                                const Eigen::Ref<const Eigen::VectorXd>& x,
                                                double scale) {
  require_length(x, active, "residual_vector_changepoint_fast");
  const Index m = x.size();
  // Population means up to a common constant: z_0 = 0, z_{k+1} = z_k + x_k.
  // Prefix sums of z give segment sums in O(1).
  Eigen::VectorXd prefix(m + 2);
  prefix(0) = 0.0;
  double z = 0.0;
  for (Index k = 0; k <= m; ++k) {
    if (k > 0) z += x(k - 1);
    prefix(k + 1) = prefix(k) + z;
  }
  std::vector<Index> bounds = active.rejected();
  std::sort(bounds.begin(), bounds.end());

  const auto& idx = active.remaining();
  ResidualVector out{active.stage(), Eigen::VectorXd(active.size()), active};
  const double root_scale = std::sqrt(scale);
  std::size_t b = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Index i = idx[k];
    while (b < bounds.size() && bounds[b] < i) ++b;
    // Difference i separates populations i and i+1 (0-based). The segment
    // runs over populations lo..hi inclusive.
    const Index lo = b == 0 ? 0 : bounds[b - 1] + 1;
    const Index hi = b == bounds.size() ? m : bounds[b];
    const double n_left = static_cast<double>(i - lo + 1);
    const double n_right = static_cast<double>(hi - i);
    const double left = prefix(i + 1) - prefix(lo);
    const double right = prefix(hi + 1) - prefix(i + 1);
    const double diff = right / n_right - left / n_left;
    out.values(static_cast<Index>(k)) =
        std::sqrt(n_left * n_right / (n_left + n_right)) * diff / root_scale;
  }
  return out;
}

ResidualVector residual_vector(const CovarianceModel& model, const ActiveSet& active,
                               const Eigen::Ref<const Eigen::VectorXd>& x) {
  require_length(x, active, "residual_vector");
  switch (model.kind()) {
    case ModelKind::intraclass:
      return residual_vector_intraclass_fast(model.rho(), active, x, model.scale());
    case ModelKind::change_point:
      return residual_vector_changepoint_fast(active, x, model.scale());
    case ModelKind::successive: {
      const auto& idx = active.remaining();
      const Eigen::VectorXd px = principal_submatrix_solve(model, idx, gather(x, idx));
      return from_precision(active, px, principal_inverse_diagonal(model, idx));
    }
    case ModelKind::dense:
      break;
  }
  return residual_vector_generic(model, active, x);
}

double residual_changepoint_closed_form(const Eigen::Ref<const Eigen::VectorXd>& zbar,
                                        const std::vector<Index>& rejected, Index i) {
  const Index m = zbar.size() - 1;  // number of differences
  if (m < 1) throw DomainError("change-point closed form: need at least two sample means");
  if (i < 0 || i >= m) throw DomainError("change-point closed form: index out of range");
  std::vector<Index> sorted = rejected;
  std::sort(sorted.begin(), sorted.end());
  if (std::binary_search(sorted.begin(), sorted.end(), i)) {
    throw DomainError("change-point closed form: index " + std::to_string(i + 1) +
                      " has already been rejected");
  }
  // Bounds in population space: the nearest rejected differences, with
  // sentinels before the first and after the last population.
  auto upper = std::upper_bound(sorted.begin(), sorted.end(), i);
  const Index j_lo = upper == sorted.begin() ? -1 : *(upper - 1);
  const Index j_hi = upper == sorted.end() ? m : *upper;

  const Index first = j_lo + 1;  // first population in the segment
  const Index last = j_hi;       // last population in the segment
  const double n_seg = static_cast<double>(last - first + 1);
  const double n_left = static_cast<double>(i - first + 1);
  const double n_right = n_seg - n_left;

  const double left_sum = zbar.segment(first, i - first + 1).sum();
  const double seg_sum = zbar.segment(first, last - first + 1).sum();
  return std::sqrt(n_seg / (n_right * n_left)) * (left_sum - n_left * seg_sum / n_seg);
}

ResidualVector studentize(const ResidualVector& u, double s2, double nu, Studentization mode,
                          double quad_form) {
  if (!(s2 > 0.0)) throw DomainError("studentize: variance estimate must be positive");
  if (!(nu >= 1.0)) throw DomainError("studentize: degrees of freedom must be at least 1");
  ResidualVector out = u;
  const double denom =
      mode == Studentization::pooled_sd ? std::sqrt(s2) : std::sqrt(nu * s2 + quad_form);
  out.values /= denom;
  return out;
}

double conditional_pvalue(double u, Sidedness sided) {
  if (std::isnan(u)) throw DomainError("conditional_pvalue: statistic is NaN");
  const double root2 = std::sqrt(2.0);
  if (sided == Sidedness::two_sided) return std::erfc(std::abs(u) / root2);
  return 0.5 * std::erfc(u / root2);
}

}  // namespace mrd
