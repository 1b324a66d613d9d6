#ifndef MRD_COVARIANCE_HPP
#define MRD_COVARIANCE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <utility>
#include <variant>
#include <vector>

#include "mrd/errors.hpp"

namespace mrd {

using Index = Eigen::Index;

// Exchangeable structure: unit diagonal, constant off-diagonal rho.
struct Intraclass {
  Index size;
  double rho;
};

// Differences of consecutive means: 2 on the diagonal, -1 next to it.
struct ChangePointTridiagonal {
  Index size;
};

// Unit diagonal, rho between neighbours, zero elsewhere.
struct SuccessiveCorrelation {
  Index size;
  double rho;
};

struct DenseSPD {
  Eigen::MatrixXd matrix;
};

enum class ModelKind { intraclass, change_point, successive, dense };

// A covariance matrix `scale * Sigma` where Sigma has one of the structured
// forms above. The unit-scale matrix is kept separate so closed forms stay
// exact; the scale enters once at the boundary of each kernel.
class CovarianceModel {
 public:
  using Structure =
      std::variant<Intraclass, ChangePointTridiagonal, SuccessiveCorrelation, DenseSPD>;

  static CovarianceModel intraclass(Index size, double rho, double scale = 1.0);
  static CovarianceModel change_point(Index size, double scale = 1.0);
  static CovarianceModel successive(Index size, double rho, double scale = 1.0);
  static CovarianceModel dense(Eigen::MatrixXd matrix, double scale = 1.0);
  static CovarianceModel identity(Index size, double scale = 1.0) {
    return intraclass(size, 0.0, scale);
  }

  Index size() const { return size_; }
  double scale() const { return scale_; }
  ModelKind kind() const;
  const Structure& structure() const { return structure_; }

  // Correlation parameter for intraclass / successive models, 0 otherwise.
  double rho() const;

  // Entry of the unit-scale matrix Sigma.
  double unit_entry(Index i, Index j) const;
  double entry(Index i, Index j) const { return scale_ * unit_entry(i, j); }

  Eigen::MatrixXd unit_dense() const;
  Eigen::MatrixXd dense() const { return scale_ * unit_dense(); }

  // Same structure, different scale.
  CovarianceModel with_scale(double scale) const;

 private:
  CovarianceModel(Structure s, Index size, double scale);

  Structure structure_;
  Index size_ = 0;
  double scale_ = 1.0;
};

// Procedure state: indices (0-based) still under test and the rejection
// history in rejection order.
class ActiveSet {
 public:
  ActiveSet() = default;
  static ActiveSet full(Index size);
  // Builds the state reached after rejecting `rejected` in that order.
  static ActiveSet after(Index size, const std::vector<Index>& rejected);

  const std::vector<Index>& remaining() const { return remaining_; }
  const std::vector<Index>& rejected() const { return rejected_; }
  Index size() const { return static_cast<Index>(remaining_.size()); }
  Index total() const { return static_cast<Index>(remaining_.size() + rejected_.size()); }
  Index stage() const { return static_cast<Index>(rejected_.size()) + 1; }
  bool contains(Index j) const;
  // Position of j inside remaining(), or -1.
  Index position(Index j) const;

  void reject(Index j);

 private:
  std::vector<Index> remaining_;
  std::vector<Index> rejected_;
};

// ---------------------------------------------------------------------------
// Closed forms on the unit-scale matrices.

/// Inverse of the p x p unit-diagonal intraclass matrix,
/// (1/(1-rho)) (I - G 11') with G = rho / (1 + (p-1) rho).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> intraclass_inverse(Scalar rho, Index p) {
  if (p < 1) throw DomainError("intraclass_inverse: size must be positive");
  const Scalar one(1);
  if (!(rho < one) || !(one + Scalar(p - 1) * rho > Scalar(0))) {
    throw DomainError("intraclass_inverse: correlation outside the positive-definite range");
  }
  const Scalar g = rho / (one + Scalar(p - 1) * rho);
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix out = Matrix::Constant(p, p, -g);
  out.diagonal().array() += one;
  return out / (one - rho);
}

/// First and last rows of the inverse of the p x p change-point matrix
/// (2 on the diagonal, -1 off it): (p, ..., 1)/(p+1) and (1, ..., p)/(p+1).
template <typename Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>
tridiag_inverse_boundary_rows(Index p) {
  if (p < 1) throw DomainError("tridiag_inverse_boundary_rows: size must be positive");
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector first(p), last(p);
  const Scalar denom = Scalar(p + 1);
  for (Index i = 0; i < p; ++i) {
    first(i) = Scalar(p - i) / denom;
    last(i) = Scalar(i + 1) / denom;
  }
  return {first, last};
}

/// Determinant of the r x r successive-correlation matrix via
/// |S(r)| = |S(r-1)| - rho^2 |S(r-2)|, |S(0)| = |S(1)| = 1.
template <typename Scalar>
Scalar succ_det(Index r, Scalar rho) {
  if (r < 0) throw DomainError("succ_det: negative size");
  Scalar prev(1), cur(1);  // |S(0)|, |S(1)|
  if (r == 0) return prev;
  const Scalar rho2 = rho * rho;
  for (Index k = 2; k <= r; ++k) {
    const Scalar next = cur - rho2 * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// All determinants |S(0)|, ..., |S(r)| in one pass.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> succ_det_table(Index r, Scalar rho) {
  if (r < 0) throw DomainError("succ_det_table: negative size");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> d(r + 1);
  d(0) = Scalar(1);
  if (r >= 1) d(1) = Scalar(1);
  for (Index k = 2; k <= r; ++k) d(k) = d(k - 1) - rho * rho * d(k - 2);
  return d;
}

/// First row of the inverse of the successive-correlation matrix:
/// d_i = (-rho)^(i-1) |S(r-i)| / |S(r)|, i = 1..r.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> succ_inverse_first_row(Index r, Scalar rho) {
  if (r < 1) throw DomainError("succ_inverse_first_row: size must be positive");
  const auto det = succ_det_table<Scalar>(r, rho);
  // Positive definiteness needs every leading minor positive.
  for (Index k = 1; k <= r; ++k) {
    if (!(det(k) > Scalar(0))) {
      throw DomainError("succ_inverse_first_row: matrix is not positive definite");
    }
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row(r);
  Scalar power(1);
  for (Index i = 1; i <= r; ++i) {
    row(i - 1) = power * det(r - i) / det(r);
    power *= -rho;
  }
  return row;
}

// ---------------------------------------------------------------------------
// Kernels on principal submatrices (scale included).

/// Dense principal submatrix of scale*Sigma on the remaining indices.
Eigen::MatrixXd principal_submatrix(const CovarianceModel& model, const ActiveSet& active);

/// Solves Sigma_A x = v on the remaining indices. Intraclass and tridiagonal
/// models use O(|A|) closed forms; dense models use a checked Cholesky.
Eigen::VectorXd principal_submatrix_solve(const CovarianceModel& model, const ActiveSet& active,
                                          const Eigen::Ref<const Eigen::VectorXd>& v);

/// Same as above for an explicit index list (ascending, 0-based).
Eigen::VectorXd principal_submatrix_solve(const CovarianceModel& model,
                                          const std::vector<Index>& indices,
                                          const Eigen::Ref<const Eigen::VectorXd>& v);

/// diag(Sigma_A^{-1}) on the remaining indices.
Eigen::VectorXd principal_inverse_diagonal(const CovarianceModel& model,
                                           const std::vector<Index>& indices);

/// Sigma[rows, cols] * v without forming the block.
Eigen::VectorXd cross_multiply(const CovarianceModel& model, const std::vector<Index>& rows,
                               const std::vector<Index>& cols,
                               const Eigen::Ref<const Eigen::VectorXd>& v);

/// Lower-triangular L with L L' = scale * Sigma.
Eigen::MatrixXd cholesky_factor(const CovarianceModel& model);

/// Cholesky with the pivot test used throughout: a pivot at or below
/// 1e-12 times the largest diagonal entry is reported as a failure at that
/// row (indices in `labels`, when given, are used in the message).
Eigen::LLT<Eigen::MatrixXd> checked_cholesky(const Eigen::MatrixXd& matrix,
                                             const std::vector<Index>* labels = nullptr);

}  // namespace mrd

#endif  // MRD_COVARIANCE_HPP
