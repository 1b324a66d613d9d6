#include "doctest.h"

#include <random>

#include "mrd/covariance.hpp"
#include "oracles.hpp"

using namespace mrd;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

Eigen::MatrixXd random_spd(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = z(rng);
  return a * a.transpose() + static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_SUITE("covariance") {

TEST_CASE("intraclass inverse: worked values") {
  CHECK(max_abs(intraclass_inverse<double>(0.0, 3) - Eigen::MatrixXd::Identity(3, 3)) == 0.0);

  Eigen::MatrixXd two(2, 2);
  two << 4.0 / 3, -2.0 / 3, -2.0 / 3, 4.0 / 3;
  CHECK(max_abs(intraclass_inverse<double>(0.5, 2) - two) < 1e-15);

  const Eigen::MatrixXd three = intraclass_inverse<double>(0.5, 3);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 3; ++j) CHECK(three(i, j) == doctest::Approx(i == j ? 1.5 : -0.5));
  }
}

TEST_CASE("intraclass inverse: entries match the explicit diagonal/off-diagonal forms") {
  for (Index p = 2; p <= 12; ++p) {
    for (double rho : {-0.05, 0.1, 0.5, 0.8}) {
      if (!(1.0 + (p - 1) * rho > 0.0)) continue;
      const Eigen::MatrixXd inv = intraclass_inverse<double>(rho, p);
      const double den = (1 - rho) * (1 + (p - 1) * rho);
      CHECK(inv(0, 0) == doctest::Approx((1 + (p - 2) * rho) / den).epsilon(1e-12));
      CHECK(inv(0, p - 1) == doctest::Approx(-rho / den).epsilon(1e-12));
    }
  }
}

TEST_CASE("intraclass inverse agrees with a dense LU inverse on a grid of the PD region") {
  double err = 0.0;
  for (Index p = 1; p <= 12; ++p) {
    const double lo = p > 1 ? -1.0 / static_cast<double>(p - 1) : -0.9;
    for (int k = 1; k < 20; ++k) {
      const double rho = lo + (0.99 - lo) * k / 20.0;
      const Eigen::MatrixXd s = CovarianceModel::intraclass(p, rho).unit_dense();
      err = std::max(err, max_abs(intraclass_inverse<double>(rho, p) * s -
                                  Eigen::MatrixXd::Identity(p, p)));
    }
  }
  CHECK(err <= 1e-10);
}

TEST_CASE("intraclass inverse rejects non-PD correlations") {
  CHECK_THROWS_AS(intraclass_inverse<double>(1.0, 3), DomainError);
  CHECK_THROWS_AS(intraclass_inverse<double>(-0.5, 3), DomainError);
  CHECK_THROWS_AS(CovarianceModel::intraclass(4, -0.4), DomainError);
}

TEST_CASE("tridiagonal boundary rows") {
  auto [f1, l1] = tridiag_inverse_boundary_rows<double>(1);
  CHECK(f1(0) == doctest::Approx(0.5));
  CHECK(l1(0) == doctest::Approx(0.5));

  auto [f2, l2] = tridiag_inverse_boundary_rows<double>(2);
  CHECK(f2(0) == doctest::Approx(2.0 / 3));
  CHECK(f2(1) == doctest::Approx(1.0 / 3));
  CHECK(l2(0) == doctest::Approx(1.0 / 3));
  CHECK(l2(1) == doctest::Approx(2.0 / 3));

  auto [f5, l5] = tridiag_inverse_boundary_rows<double>(5);
  for (Index i = 0; i < 5; ++i) CHECK(f5(i) == doctest::Approx((5.0 - i) / 6.0));

  for (Index p = 1; p <= 12; ++p) {
    const Eigen::MatrixXd inv = oracle::inverse(CovarianceModel::change_point(p).unit_dense());
    auto [f, l] = tridiag_inverse_boundary_rows<double>(p);
    CHECK(max_abs(f.transpose() - inv.row(0)) <= 1e-10);
    CHECK(max_abs(l.transpose() - inv.row(p - 1)) <= 1e-10);
  }
  CHECK_THROWS_AS(tridiag_inverse_boundary_rows<double>(0), DomainError);
}

TEST_CASE("successive-correlation determinant recursion") {
  CHECK(succ_det<double>(0, 0.3) == 1.0);
  CHECK(succ_det<double>(1, 0.7) == 1.0);
  CHECK(succ_det<double>(3, 0.5) == doctest::Approx(0.5));
  for (Index r = 1; r <= 20; ++r) {
    for (double rho : {-0.49, -0.2, 0.0, 0.3, 0.49}) {
      const double det = CovarianceModel::successive(r, rho).unit_dense().fullPivLu().determinant();
      CHECK(std::abs(succ_det<double>(r, rho) - det) <= 1e-10 * std::abs(det));
    }
  }
}

TEST_CASE("successive-correlation inverse first row") {
  CHECK(succ_inverse_first_row<double>(1, 0.4)(0) == doctest::Approx(1.0));
  const Eigen::VectorXd r2 = succ_inverse_first_row<double>(2, 0.5);
  CHECK(r2(0) == doctest::Approx(4.0 / 3));
  CHECK(r2(1) == doctest::Approx(-2.0 / 3));
  const Eigen::VectorXd r3 = succ_inverse_first_row<double>(3, 0.5);
  CHECK(r3(0) == doctest::Approx(1.5));
  CHECK(r3(1) == doctest::Approx(-1.0));
  CHECK(r3(2) == doctest::Approx(0.5));
  for (Index r = 1; r <= 20; ++r) {
    for (double rho : {-0.49, 0.25, 0.49}) {
      const Eigen::MatrixXd inv = oracle::inverse(CovarianceModel::successive(r, rho).unit_dense());
      CHECK(max_abs(succ_inverse_first_row<double>(r, rho).transpose() - inv.row(0)) <= 1e-10);
    }
  }
  // |S(3)| = 1 - 2 rho^2 < 0 here.
  CHECK_THROWS_AS(succ_inverse_first_row<double>(3, 0.75), DomainError);
}

TEST_CASE("principal submatrix solve: worked values") {
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(4, 1, 4);
  CHECK(max_abs(principal_submatrix_solve(CovarianceModel::identity(4), ActiveSet::full(4), v) -
                v) == 0.0);

  const Eigen::VectorXd a = principal_submatrix_solve(CovarianceModel::intraclass(2, 0.5),
                                                      ActiveSet::full(2), Eigen::Vector2d(1, 0));
  CHECK(a(0) == doctest::Approx(4.0 / 3));
  CHECK(a(1) == doctest::Approx(-2.0 / 3));

  const Eigen::VectorXd b = principal_submatrix_solve(CovarianceModel::change_point(2),
                                                      ActiveSet::full(2), Eigen::Vector2d(1, 1));
  CHECK(b(0) == doctest::Approx(1.0));
  CHECK(b(1) == doctest::Approx(1.0));
}

TEST_CASE("principal submatrix solve matches dense solves for every structure") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> coin(0, 1);
  for (int t = 0; t < 60; ++t) {
    const Index m = 1 + t % 50;
    std::vector<CovarianceModel> models = {
        CovarianceModel::intraclass(m, 0.3, 1.7), CovarianceModel::change_point(m, 0.5),
        CovarianceModel::successive(m, 0.4, 2.0), CovarianceModel::dense(random_spd(m, rng), 1.3)};
    std::vector<Index> rejected;
    for (Index j = 0; j < m; ++j)
      if (coin(rng) && static_cast<Index>(rejected.size()) < m - 1) rejected.push_back(j);
    std::shuffle(rejected.begin(), rejected.end(), rng);
    const ActiveSet active = ActiveSet::after(m, rejected);
    Eigen::VectorXd v(active.size());
    for (Index i = 0; i < v.size(); ++i) v(i) = z(rng);
    for (const auto& model : models) {
      const Eigen::MatrixXd full = model.dense();
      const auto& idx = active.remaining();
      Eigen::MatrixXd sub(v.size(), v.size());
      for (Index i = 0; i < v.size(); ++i)
        for (Index j = 0; j < v.size(); ++j)
          sub(i, j) = full(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      const Eigen::VectorXd expect = sub.fullPivLu().solve(v);
      CHECK(max_abs(principal_submatrix_solve(model, active, v) - expect) <= 1e-10);
      const Eigen::VectorXd diag = oracle::inverse(sub).diagonal();
      CHECK(max_abs(principal_inverse_diagonal(model, idx) - diag) <= 1e-10);
    }
  }
}

TEST_CASE("cholesky factor") {
  CHECK(max_abs(cholesky_factor(CovarianceModel::identity(3)) - Eigen::MatrixXd::Identity(3, 3)) ==
        0.0);
  Eigen::MatrixXd l = cholesky_factor(CovarianceModel::intraclass(2, 0.5));
  CHECK(l(0, 0) == doctest::Approx(1.0));
  CHECK(l(1, 0) == doctest::Approx(0.5));
  CHECK(l(1, 1) == doctest::Approx(std::sqrt(0.75)));
  CHECK(l(0, 1) == 0.0);
  l = cholesky_factor(CovarianceModel::change_point(2));
  CHECK(l(0, 0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(l(1, 0) == doctest::Approx(-1 / std::sqrt(2.0)));
  CHECK(l(1, 1) == doctest::Approx(std::sqrt(1.5)));

  const CovarianceModel s = CovarianceModel::successive(30, 0.45, 3.0);
  const Eigen::MatrixXd f = cholesky_factor(s);
  CHECK(max_abs(f * f.transpose() - s.dense()) <= 1e-12 * max_abs(s.dense()));
}

TEST_CASE("non-SPD dense matrices are reported, not repaired") {
  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  CHECK_THROWS(CovarianceModel::dense(bad));
  Eigen::Matrix2d asym;
  asym << 2, 1, 0, 2;
  CHECK_THROWS(CovarianceModel::dense(asym));
}

TEST_CASE("successive model outside the PD range is rejected") {
  CHECK_THROWS(CovarianceModel::successive(10, 0.6));
  CHECK_NOTHROW(CovarianceModel::successive(10, 0.45));
}

TEST_CASE("active set bookkeeping") {
  ActiveSet a = ActiveSet::full(5);
  a.reject(3);
  a.reject(0);
  CHECK(a.stage() == 3);
  CHECK(a.remaining() == std::vector<Index>{1, 2, 4});
  CHECK(a.rejected() == std::vector<Index>{3, 0});
  CHECK(a.position(4) == 2);
  CHECK(a.position(3) == -1);
  CHECK(a.total() == 5);
}

}  // TEST_SUITE
