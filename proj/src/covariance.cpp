#include "mrd/covariance.hpp"

#include <algorithm>
#include <sstream>
#include <string>

namespace mrd {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kPivotTolerance = 1e-12;

void require_scale(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw DomainError("covariance scale must be positive and finite");
  }
}

// Forward pivots of a Toeplitz tridiagonal matrix (diag a, off-diagonal b);
// the matrix is SPD iff every pivot is positive.
bool toeplitz_tridiagonal_is_spd(Index n, double a, double b) {
  double d = a;
  for (Index k = 0; k < n; ++k) {
    if (k > 0) d = a - b * b / d;
    if (!(d > kPivotTolerance * a)) return false;
  }
  return true;
}

struct Tridiagonal {
  double diag;
  double off;
};

bool tridiagonal_of(const CovarianceModel& model, Tridiagonal& out) {
  switch (model.kind()) {
    case ModelKind::change_point:
      out = {2.0, -1.0};
      return true;
    case ModelKind::successive:
      out = {1.0, model.rho()};
      return true;
    default:
      return false;
  }
}

// Splits ascending indices into maximal runs of consecutive integers.
// Returns [begin, end) offsets into `indices`.
std::vector<std::pair<std::size_t, std::size_t>> consecutive_runs(
    const std::vector<Index>& indices) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::size_t begin = 0;
  for (std::size_t k = 1; k <= indices.size(); ++k) {
    if (k == indices.size() || indices[k] != indices[k - 1] + 1) {
      runs.emplace_back(begin, k);
      begin = k;
    }
  }
  return runs;
}

std::string index_label(Index k, const std::vector<Index>* labels) {
  std::ostringstream os;
  if (labels != nullptr && k < static_cast<Index>(labels->size())) {
    os << "hypothesis index " << (*labels)[static_cast<std::size_t>(k)] + 1;
  } else {
    os << "row " << k + 1;
  }
  return os.str();
}

// Thomas algorithm for a Toeplitz tridiagonal block, in place on `rhs`.
void thomas_solve(const Tridiagonal& t, Eigen::Ref<Eigen::VectorXd> rhs,
                  const std::vector<Index>& indices, std::size_t offset) {
  const Index n = rhs.size();
  Eigen::VectorXd c(n);
  double pivot = t.diag;
  if (!(pivot > kPivotTolerance * t.diag)) {
    throw FactorizationError("tridiagonal solve: non-positive pivot at hypothesis index " +
                             std::to_string(indices[offset] + 1));
  }
  c(0) = t.off / pivot;
  rhs(0) /= pivot;
  for (Index k = 1; k < n; ++k) {
    pivot = t.diag - t.off * c(k - 1);
    if (!(pivot > kPivotTolerance * t.diag)) {
      throw FactorizationError(
          "tridiagonal solve: non-positive pivot at hypothesis index " +
          std::to_string(indices[offset + static_cast<std::size_t>(k)] + 1));
    }
    c(k) = t.off / pivot;
    rhs(k) = (rhs(k) - t.off * rhs(k - 1)) / pivot;
  }
  for (Index k = n - 2; k >= 0; --k) rhs(k) -= c(k) * rhs(k + 1);
}

// diag of the inverse of a Toeplitz tridiagonal block of size n:
// (T^-1)_kk = 1 / (a - b^2 f_{k-1} - b^2 g_{k+1}) with forward/backward
// Schur complements f, g.
void tridiagonal_inverse_diagonal(const Tridiagonal& t, Eigen::Ref<Eigen::VectorXd> out) {
  const Index n = out.size();
  const double b2 = t.off * t.off;
  Eigen::VectorXd fwd(n), bwd(n);  // 1 / pivot from each side
  for (Index k = 0; k < n; ++k) {
    const double pivot = k == 0 ? t.diag : t.diag - b2 * fwd(k - 1);
    fwd(k) = 1.0 / pivot;
  }
  for (Index k = n - 1; k >= 0; --k) {
    const double pivot = k == n - 1 ? t.diag : t.diag - b2 * bwd(k + 1);
    bwd(k) = 1.0 / pivot;
  }
  for (Index k = 0; k < n; ++k) {
    double schur = t.diag;
    if (k > 0) schur -= b2 * fwd(k - 1);
    if (k < n - 1) schur -= b2 * bwd(k + 1);
    out(k) = 1.0 / schur;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// CovarianceModel

CovarianceModel::CovarianceModel(Structure s, Index size, double scale)
    : structure_(std::move(s)), size_(size), scale_(scale) {}

CovarianceModel CovarianceModel::intraclass(Index size, double rho, double scale) {
  if (size < 1) throw DomainError("intraclass model: size must be positive");
  require_scale(scale);
  if (!(rho < 1.0) || !(1.0 + static_cast<double>(size - 1) * rho > 0.0)) {
    throw DomainError("intraclass model: correlation " + std::to_string(rho) +
                      " outside the positive-definite range for size " + std::to_string(size));
  }
  return CovarianceModel(Intraclass{size, rho}, size, scale);
}

CovarianceModel CovarianceModel::change_point(Index size, double scale) {
  if (size < 1) throw DomainError("change-point model: size must be positive");
  require_scale(scale);
  return CovarianceModel(ChangePointTridiagonal{size}, size, scale);
}

CovarianceModel CovarianceModel::successive(Index size, double rho, double scale) {
  if (size < 1) throw DomainError("successive-correlation model: size must be positive");
  require_scale(scale);
  if (!toeplitz_tridiagonal_is_spd(size, 1.0, rho)) {
    throw DomainError("successive-correlation model: correlation " + std::to_string(rho) +
                      " is not positive definite for size " + std::to_string(size));
  }
  return CovarianceModel(SuccessiveCorrelation{size, rho}, size, scale);
}

CovarianceModel CovarianceModel::dense(Eigen::MatrixXd matrix, double scale) {
  if (matrix.rows() < 1 || matrix.rows() != matrix.cols()) {
    throw DomainError("dense model: matrix must be square and non-empty");
  }
  require_scale(scale);
  const double tol = 1e-12 * std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if (!(matrix - matrix.transpose()).isZero(tol)) {
    throw DomainError("dense model: matrix is not symmetric");
  }
  checked_cholesky(matrix);
  const Index n = matrix.rows();
  return CovarianceModel(DenseSPD{std::move(matrix)}, n, scale);
}

ModelKind CovarianceModel::kind() const {
  return std::visit(overloaded{[](const Intraclass&) { return ModelKind::intraclass; },
                               [](const ChangePointTridiagonal&) { return ModelKind::change_point; },
                               [](const SuccessiveCorrelation&) { return ModelKind::successive; },
                               [](const DenseSPD&) { return ModelKind::dense; }},
                    structure_);
}

double CovarianceModel::rho() const {
  return std::visit(overloaded{[](const Intraclass& m) { return m.rho; },
                               [](const SuccessiveCorrelation& m) { return m.rho; },
                               [](const auto&) { return 0.0; }},
                    structure_);
}

double CovarianceModel::unit_entry(Index i, Index j) const {
  return std::visit(
      overloaded{[&](const Intraclass& m) { return i == j ? 1.0 : m.rho; },
                 [&](const ChangePointTridiagonal&) {
                   const Index d = i > j ? i - j : j - i;
                   return d == 0 ? 2.0 : (d == 1 ? -1.0 : 0.0);
                 },
                 [&](const SuccessiveCorrelation& m) {
                   const Index d = i > j ? i - j : j - i;
                   return d == 0 ? 1.0 : (d == 1 ? m.rho : 0.0);
                 },
                 [&](const DenseSPD& m) { return m.matrix(i, j); }},
      structure_);
}

Eigen::MatrixXd CovarianceModel::unit_dense() const {
  if (const auto* d = std::get_if<DenseSPD>(&structure_)) return d->matrix;
  Eigen::MatrixXd out(size_, size_);
  for (Index j = 0; j < size_; ++j)
    for (Index i = 0; i < size_; ++i) out(i, j) = unit_entry(i, j);
  return out;
}

CovarianceModel CovarianceModel::with_scale(double scale) const {
  require_scale(scale);
  CovarianceModel copy = *this;
  copy.scale_ = scale;
  return copy;
}

// ---------------------------------------------------------------------------
// ActiveSet

ActiveSet ActiveSet::full(Index size) {
  ActiveSet a;
  a.remaining_.resize(static_cast<std::size_t>(size));
  for (Index i = 0; i < size; ++i) a.remaining_[static_cast<std::size_t>(i)] = i;
  return a;
}

ActiveSet ActiveSet::after(Index size, const std::vector<Index>& rejected) {
  ActiveSet a = full(size);
  for (Index j : rejected) a.reject(j);
  return a;
}

bool ActiveSet::contains(Index j) const { return position(j) >= 0; }

Index ActiveSet::position(Index j) const {
  auto it = std::lower_bound(remaining_.begin(), remaining_.end(), j);
  if (it == remaining_.end() || *it != j) return -1;
  return static_cast<Index>(it - remaining_.begin());
}

void ActiveSet::reject(Index j) {
  auto it = std::lower_bound(remaining_.begin(), remaining_.end(), j);
  if (it == remaining_.end() || *it != j) {
    throw DomainError("active set: index " + std::to_string(j + 1) + " is not remaining");
  }
  remaining_.erase(it);
  rejected_.push_back(j);
}

// ---------------------------------------------------------------------------
// Kernels

Eigen::LLT<Eigen::MatrixXd> checked_cholesky(const Eigen::MatrixXd& matrix,
                                             const std::vector<Index>* labels) {
  const Index n = matrix.rows();
  const double diag_scale = n > 0 ? matrix.diagonal().cwiseAbs().maxCoeff() : 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(matrix);
  Index failed = -1;
  if (llt.info() == Eigen::Success) {
    const Eigen::VectorXd pivots = llt.matrixLLT().diagonal().array().square();
    for (Index k = 0; k < n; ++k) {
      if (!(pivots(k) > kPivotTolerance * diag_scale)) {
        failed = k;
        break;
      }
    }
  } else {
    // Locate the breakdown with a plain column sweep.
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Index j = 0; j < n && failed < 0; ++j) {
      double pivot = matrix(j, j) - l.row(j).head(j).squaredNorm();
      if (!(pivot > kPivotTolerance * diag_scale)) {
        failed = j;
        break;
      }
      l(j, j) = std::sqrt(pivot);
      for (Index i = j + 1; i < n; ++i) {
        l(i, j) = (matrix(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
      }
    }
    if (failed < 0) failed = n - 1;
  }
  if (failed >= 0) {
    throw FactorizationError("Cholesky factorization failed: pivot at " +
                             index_label(failed, labels) + " is not positive");
  }
  return llt;
}

Eigen::MatrixXd principal_submatrix(const CovarianceModel& model, const ActiveSet& active) {
  const auto& idx = active.remaining();
  const Index p = active.size();
  Eigen::MatrixXd out(p, p);
  for (Index c = 0; c < p; ++c)
    for (Index r = 0; r < p; ++r)
      out(r, c) = model.entry(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
  return out;
}

Eigen::VectorXd principal_submatrix_solve(const CovarianceModel& model, const ActiveSet& active,
                                          const Eigen::Ref<const Eigen::VectorXd>& v) {
  return principal_submatrix_solve(model, active.remaining(), v);
}

Eigen::VectorXd principal_submatrix_solve(const CovarianceModel& model,
                                          const std::vector<Index>& indices,
                                          const Eigen::Ref<const Eigen::VectorXd>& v) {
  const Index p = static_cast<Index>(indices.size());
  if (v.size() != p) throw DomainError("principal_submatrix_solve: vector length mismatch");
  if (p == 0) return Eigen::VectorXd();

  if (model.kind() == ModelKind::intraclass) {
    // Any principal submatrix of an intraclass matrix is intraclass.
    const double rho = model.rho();
    const double denom = 1.0 + static_cast<double>(p - 1) * rho;
    if (!(denom > kPivotTolerance) || !(1.0 - rho > kPivotTolerance)) {
      throw FactorizationError("intraclass solve: submatrix is not positive definite");
    }
    const double g = rho / denom;
    const double sum = v.sum();
    return (v.array() - g * sum) / ((1.0 - rho) * model.scale());
  }

  Tridiagonal t{};
  if (tridiagonal_of(model, t)) {
    // Deleting indices splits the band into independent blocks.
    Eigen::VectorXd out = v;
    for (const auto& [b, e] : consecutive_runs(indices)) {
      thomas_solve(t, out.segment(static_cast<Index>(b), static_cast<Index>(e - b)), indices, b);
    }
    return out / model.scale();
  }

  Eigen::MatrixXd sub(p, p);
  for (Index c = 0; c < p; ++c)
    for (Index r = 0; r < p; ++r)
      sub(r, c) = model.unit_entry(indices[static_cast<std::size_t>(r)],
                                   indices[static_cast<std::size_t>(c)]);
  const auto llt = checked_cholesky(sub, &indices);
  return llt.solve(v) / model.scale();
}

Eigen::VectorXd principal_inverse_diagonal(const CovarianceModel& model,
                                           const std::vector<Index>& indices) {
  const Index p = static_cast<Index>(indices.size());
  if (p == 0) return Eigen::VectorXd();

  if (model.kind() == ModelKind::intraclass) {
    const double rho = model.rho();
    const double d = (1.0 + static_cast<double>(p - 2) * rho) /
                     ((1.0 - rho) * (1.0 + static_cast<double>(p - 1) * rho));
    return Eigen::VectorXd::Constant(p, d / model.scale());
  }

  Tridiagonal t{};
  if (tridiagonal_of(model, t)) {
    Eigen::VectorXd out(p);
    for (const auto& [b, e] : consecutive_runs(indices)) {
      tridiagonal_inverse_diagonal(t, out.segment(static_cast<Index>(b), static_cast<Index>(e - b)));
    }
    return out / model.scale();
  }

  Eigen::MatrixXd sub(p, p);
  for (Index c = 0; c < p; ++c)
    for (Index r = 0; r < p; ++r)
      sub(r, c) = model.unit_entry(indices[static_cast<std::size_t>(r)],
                                   indices[static_cast<std::size_t>(c)]);
  const auto llt = checked_cholesky(sub, &indices);
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
  return inv.diagonal() / model.scale();
}

Eigen::VectorXd cross_multiply(const CovarianceModel& model, const std::vector<Index>& rows,
                               const std::vector<Index>& cols,
                               const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != static_cast<Index>(cols.size())) {
    throw DomainError("cross_multiply: vector length mismatch");
  }
  Eigen::VectorXd out(static_cast<Index>(rows.size()));
  if (model.kind() == ModelKind::intraclass) {
    // Off-diagonal entries are all rho; correct for any shared index.
    const double rho = model.rho();
    const double sum = v.sum();
    std::size_t c = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      while (c < cols.size() && cols[c] < rows[r]) ++c;
      double value = rho * sum;
      if (c < cols.size() && cols[c] == rows[r]) value += (1.0 - rho) * v(static_cast<Index>(c));
      out(static_cast<Index>(r)) = value * model.scale();
    }
    return out;
  }
  if (model.kind() != ModelKind::dense) {
    // Banded: only |i - j| <= 1 contributes.
    std::size_t c = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      while (c < cols.size() && cols[c] + 1 < rows[r]) ++c;
      double value = 0.0;
      for (std::size_t k = c; k < cols.size() && cols[k] <= rows[r] + 1; ++k) {
        value += model.unit_entry(rows[r], cols[k]) * v(static_cast<Index>(k));
      }
      out(static_cast<Index>(r)) = value * model.scale();
    }
    return out;
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double value = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      value += model.unit_entry(rows[r], cols[k]) * v(static_cast<Index>(k));
    }
    out(static_cast<Index>(r)) = value * model.scale();
  }
  return out;
}

Eigen::MatrixXd cholesky_factor(const CovarianceModel& model) {
  const auto llt = checked_cholesky(model.unit_dense());
  return std::sqrt(model.scale()) * Eigen::MatrixXd(llt.matrixL());
}

}  // namespace mrd
