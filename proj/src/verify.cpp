#include "mrd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mrd/procedures.hpp"
#include "mrd/projection.hpp"
#include "mrd/random.hpp"

namespace mrd {

namespace {

Eigen::VectorXd witness_point(double a, double b, double delta, double epsilon) {
  Eigen::VectorXd x(4);
  x << a, -a - delta, b, -b - epsilon;
  return x;
}

CriticalSchedule witness_schedule(const Eigen::VectorXd& x, const CovarianceModel& model) {
  const double c2 = lrsd_statistic(x, model, {0, 1, 2}, Sidedness::two_sided);
  Eigen::VectorXd c(4);
  c << 80.0, c2, 20.0, 3.0;
  return CriticalSchedule(std::move(c), "witness");
}

// Random draws for the checks below; one stream per trial.
struct Draws {
  CounterStream stream;
  Draws(std::uint64_t seed, std::uint64_t trial) : stream(seed, trial) {}

  Index size(Index lo, Index hi) {
    return lo + static_cast<Index>(stream.uniform() * static_cast<double>(hi - lo + 1));
  }
  Eigen::VectorXd normals(Index n, double sd = 1.0) {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = sd * stream.normal();
    return v;
  }
  // Random subset of {0..m-1} of size k, in random order.
  std::vector<Index> subset(Index m, Index k) {
    std::vector<Index> all(static_cast<std::size_t>(m));
    std::iota(all.begin(), all.end(), Index{0});
    for (Index i = 0; i < k; ++i) {
      const Index j = i + static_cast<Index>(stream.uniform() * static_cast<double>(m - i));
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
    }
    all.resize(static_cast<std::size_t>(k));
    return all;
  }
  CriticalSchedule schedule(Index m, double lo, double hi) {
    std::vector<double> v(static_cast<std::size_t>(m));
    for (auto& c : v) c = lo + (hi - lo) * stream.uniform();
    std::sort(v.begin(), v.end(), std::greater<>());
    for (std::size_t i = 1; i < v.size(); ++i) v[i] = std::min(v[i], v[i - 1] * (1.0 - 1e-9));
    return CriticalSchedule(Eigen::Map<Eigen::VectorXd>(v.data(), m), "random");
  }
};

CheckResult finish(std::string name, double err, double tol, std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.max_error = err;
  r.tolerance = tol;
  r.passed = std::isfinite(err) && err <= tol;
  r.detail = std::move(detail);
  return r;
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

LrsdWitness::LrsdWitness()
    : x(witness_point(2.0, 4.0, 1.0, 0.1)),
      g(model.unit_dense().col(0)),
      schedule(witness_schedule(x, model)) {}

double witness_stage2_form(double a, double b, double delta, double rho) {
  return ((1.0 + rho) * b * b + 2.0 * a * a * (1.0 + 2.0 * rho) +
          2.0 * delta * (a + 2.0 * a * rho + rho * b + (1.0 + rho) * delta / 2.0)) /
         (1.0 + rho - 2.0 * rho * rho);
}

double witness_discriminant(double a, double b, double delta, double epsilon, double rho) {
  const double quad = rho - 1.0 + 1.0 / rho + 1.0 / (rho * rho);
  const double lin = 2.0 * a / rho + 2.0 * a - 4.0 * a * rho - 2.0 * rho * delta +
                     2.0 * (1.0 + rho) * b;
  return (4.0 * delta * b * rho - epsilon * epsilon * quad - epsilon * lin) /
         (1.0 + rho - 2.0 * rho * rho);
}

std::vector<bool> sweep_first_hypothesis(const Eigen::Ref<const Eigen::VectorXd>& x,
                                         const CovarianceModel& model,
                                         const CriticalSchedule& schedule, Sidedness sided,
                                         const std::vector<double>& grid) {
  const Eigen::VectorXd g = model.unit_dense().col(0);
  std::vector<bool> out;
  out.reserve(grid.size());
  for (double r : grid) {
    const Eigen::VectorXd point = x + r * g;
    out.push_back(mrd(point, model, schedule, sided).reject[0]);
  }
  return out;
}

bool acceptance_is_interval(const std::vector<bool>& rejected) {
  // Forbidden: accept, then reject, then accept again.
  int phase = 0;  // 0 leading rejects, 1 accepts, 2 trailing rejects
  for (bool r : rejected) {
    if (phase == 0 && !r) phase = 1;
    else if (phase == 1 && r) phase = 2;
    else if (phase == 2 && !r) return false;
  }
  return true;
}

bool rejection_is_upward_closed(const std::vector<bool>& rejected) {
  bool seen = false;
  for (bool r : rejected) {
    if (seen && !r) return false;
    seen = seen || r;
  }
  return true;
}

std::vector<double> linear_grid(double lo, double hi, int points) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / static_cast<double>(points - 1);
  }
  return grid;
}

std::vector<CheckResult> run_verification(const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  const std::uint64_t seed = opt.seed;

  {
    double err = 0.0;
    for (Index p = 1; p <= 12; ++p) {
      for (double rho : {-0.08, 0.0, 0.25, 0.5, 0.9}) {
        if (!(1.0 + static_cast<double>(p - 1) * rho > 0.0)) continue;
        const Eigen::MatrixXd s = CovarianceModel::intraclass(p, rho).unit_dense();
        err = std::max(err, max_abs(intraclass_inverse<double>(rho, p) * s -
                                    Eigen::MatrixXd::Identity(p, p)));
      }
    }
    out.push_back(finish("intraclass inverse times matrix is identity", err, 1e-10));
  }

  {
    double err = 0.0;
    for (Index p = 1; p <= 12; ++p) {
      const Eigen::MatrixXd inv =
          CovarianceModel::change_point(p).unit_dense().fullPivLu().inverse();
      const auto [first, last] = tridiag_inverse_boundary_rows<double>(p);
      err = std::max({err, max_abs(first.transpose() - inv.row(0)),
                      max_abs(last.transpose() - inv.row(p - 1))});
    }
    out.push_back(finish("tridiagonal inverse boundary rows", err, 1e-10));
  }

  {
    double err = 0.0;
    for (Index r = 1; r <= 20; ++r) {
      for (double rho : {-0.49, -0.3, 0.1, 0.3, 0.49}) {
        const Eigen::MatrixXd s = CovarianceModel::successive(r, rho).unit_dense();
        const auto lu = s.fullPivLu();
        const double det = lu.determinant();
        err = std::max(err, std::abs(succ_det<double>(r, rho) - det) / std::abs(det));
        err = std::max(err, max_abs(succ_inverse_first_row<double>(r, rho).transpose() -
                                    lu.inverse().row(0)));
      }
    }
    out.push_back(finish("successive-correlation determinant and inverse row", err, 1e-10));
  }

  {
    double err = 0.0;
    for (int t = 0; t < opt.trials; ++t) {
      Draws d(seed, static_cast<std::uint64_t>(t));
      const Index m = d.size(1, 100);
      const double rho = -0.9 / static_cast<double>(std::max<Index>(m - 1, 1)) +
                         (0.95 + 0.9 / static_cast<double>(std::max<Index>(m - 1, 1))) *
                             d.stream.uniform();
      const double scale = 0.5 + 2.0 * d.stream.uniform();
      const CovarianceModel model = CovarianceModel::intraclass(m, rho, scale);
      const ActiveSet active = ActiveSet::after(m, d.subset(m, d.size(0, m - 1)));
      const Eigen::VectorXd x = d.normals(m, 2.0);
      const auto fast = residual_vector_intraclass_fast(rho, active, x, scale);
      const auto slow = residual_vector_generic(model, active, x);
      err = std::max(err, max_abs(fast.values - slow.values));
    }
    out.push_back(finish("intraclass fast residuals match generic", err, 1e-10));
  }

  {
    double err = 0.0;
    for (int t = 0; t < opt.trials; ++t) {
      Draws d(seed + 1, static_cast<std::uint64_t>(t));
      const Index m = d.size(1, 100);
      const CovarianceModel model = CovarianceModel::change_point(m);
      const std::vector<Index> rejected = d.subset(m, d.size(0, m - 1));
      const ActiveSet active = ActiveSet::after(m, rejected);
      const Eigen::VectorXd zbar = d.normals(m + 1, 1.5);
      const Eigen::VectorXd x = zbar.tail(m) - zbar.head(m);
      const auto generic = residual_vector_generic(model, active, x);
      for (std::size_t k = 0; k < active.remaining().size(); ++k) {
        double closed = residual_changepoint_closed_form(zbar, rejected, active.remaining()[k]);
        if (opt.flip_changepoint_sign) closed = -closed;
        err = std::max(err, std::abs(closed + generic.values(static_cast<Index>(k))));
      }
      const auto fast = residual_vector_changepoint_fast(active, x);
      err = std::max(err, max_abs(fast.values - generic.values));
    }
    out.push_back(finish("change-point closed form matches generic (oriented)", err, 1e-9));
  }

  {
    double shift_err = 0.0, other_err = 0.0;
    for (int t = 0; t < opt.trials; ++t) {
      Draws d(seed + 2, static_cast<std::uint64_t>(t));
      const Index m = d.size(2, 12);
      const CovarianceModel model = t % 2 == 0 ? CovarianceModel::intraclass(m, 0.5)
                                               : CovarianceModel::change_point(m);
      std::vector<Index> rejected = d.subset(m - 1, d.size(0, m - 2));
      for (auto& j : rejected) ++j;  // keep index 0 active
      const ActiveSet active = ActiveSet::after(m, rejected);
      const Eigen::VectorXd x = d.normals(m, 2.0);
      const Eigen::VectorXd g = model.unit_dense().col(0);
      const double r = (t % 4 < 2 ? 2.0 : 0.5) * (t % 2 == 0 ? 1.0 : -1.0);
      const auto before = residual_vector(model, active, x);
      const auto after = residual_vector(model, active, Eigen::VectorXd(x + r * g));
      // The residual of x_0 moves by r times its conditional sd.
      const auto idx = active.remaining();
      const Eigen::MatrixXd sub = principal_submatrix(model, active);
      const double cond_sd = 1.0 / std::sqrt(sub.fullPivLu().inverse()(0, 0));
      shift_err = std::max(shift_err, std::abs(after.at(0) - before.at(0) - r * cond_sd));
      for (std::size_t k = 1; k < idx.size(); ++k) {
        other_err = std::max(other_err, std::abs(after.values(static_cast<Index>(k)) -
                                                 before.values(static_cast<Index>(k))));
      }
    }
    out.push_back(finish("shift along g moves U_1 by r times its conditional sd", shift_err, 1e-9));
    out.push_back(finish("shift along g leaves other residuals unchanged", other_err, 1e-9));
  }

  {
    int bad = 0, total = 0;
    const auto grid = linear_grid(-6.0, 6.0, 64);
    for (int t = 0; t < opt.trials; ++t) {
      Draws d(seed + 3, static_cast<std::uint64_t>(t));
      const Index m = d.size(2, 8);
      const double rhos[] = {0.25, 0.5, 0.75};
      const CovarianceModel model = t % 4 == 3 ? CovarianceModel::change_point(m)
                                               : CovarianceModel::intraclass(m, rhos[t % 4]);
      const Eigen::VectorXd x = d.normals(m, 1.5);
      const CriticalSchedule schedule = d.schedule(m, 0.5, 3.0);
      const auto one = sweep_first_hypothesis(x, model, schedule, Sidedness::one_sided, grid);
      const auto two = sweep_first_hypothesis(x, model, schedule, Sidedness::two_sided, grid);
      bad += !rejection_is_upward_closed(one);
      bad += !acceptance_is_interval(two);
      total += 2;
    }
    std::ostringstream detail;
    detail << bad << " of " << total << " sweeps broke monotonicity";
    out.push_back(finish("MRD acceptance along g is an interval", bad, 0.0, detail.str()));
  }

  {
    double err = 0.0;
    for (int t = 0; t < opt.trials; ++t) {
      Draws d(seed + 4, static_cast<std::uint64_t>(t));
      const Index p = d.size(1, 12);
      const CovarianceModel model =
          t % 2 == 0 ? CovarianceModel::intraclass(p, 0.6 * d.stream.uniform() - 0.05)
                     : CovarianceModel::change_point(p);
      const auto res = project_nonneg_orthant(d.normals(p, 2.0), model);
      err = std::max({err, res.max_dual, res.max_complementarity,
                      -std::min(0.0, res.mu.minCoeff())});
    }
    out.push_back(finish("nonnegative projection KKT certificate", err, 1e-8));
  }

  {
    const LrsdWitness w;
    const Eigen::VectorXd moved = w.x + w.gamma * w.g;
    const bool at_x = lrsd(w.x, w.model, w.schedule, Sidedness::two_sided).reject[0];
    const bool at_moved = lrsd(moved, w.model, w.schedule, Sidedness::two_sided).reject[0];
    const double disc = witness_discriminant(w.a, w.b, w.delta, w.epsilon, w.rho);
    const double direct = w.schedule[1] - lrsd_statistic(moved, w.model, {0, 1, 3},
                                                         Sidedness::two_sided);
    std::ostringstream detail;
    detail << "H1 rejected at x*: " << at_x << ", at x*+gamma g: " << at_moved
           << ", discriminant " << disc;
    CheckResult r = finish("LRSD reversal witness", std::abs(disc - direct), 1e-10, detail.str());
    r.passed = r.passed && at_x && !at_moved && disc > 0.0;
    out.push_back(r);
  }

  return out;
}

}  // namespace mrd
