#include "mrd/procedures.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "mrd/projection.hpp"

namespace mrd {

namespace {

void require_lengths(const Eigen::Ref<const Eigen::VectorXd>& x, const CovarianceModel& model,
                     const CriticalSchedule& schedule, const char* who) {
  if (x.size() != model.size()) {
    std::ostringstream os;
    os << who << ": observation length " << x.size() << " does not match model size "
       << model.size();
    throw ValidationError(os.str());
  }
  if (schedule.size() != model.size()) {
    std::ostringstream os;
    os << who << ": schedule length " << schedule.size() << " does not match model size "
       << model.size();
    throw ValidationError(os.str());
  }
}

// Position of the maximum of f over [0, n); first one wins ties.
template <class F>
Index argmax(Index n, F&& f) {
  Index best = 0;
  double best_value = f(0);
  for (Index k = 1; k < n; ++k) {
    const double v = f(k);
    if (v > best_value) {
      best_value = v;
      best = k;
    }
  }
  return best;
}

void require_level(double level, const char* name) {
  if (!(level > 0.0 && level < 1.0)) {
    throw ValidationError(std::string(name) + " must lie in (0, 1)");
  }
}

void require_pvalues(const Eigen::Ref<const Eigen::VectorXd>& p) {
  for (Index i = 0; i < p.size(); ++i) {
    if (!(p(i) >= 0.0 && p(i) <= 1.0)) {
      throw ValidationError("p-value at index " + std::to_string(i + 1) + " outside [0, 1]");
    }
  }
}

std::vector<Index> ascending_order(const Eigen::Ref<const Eigen::VectorXd>& p) {
  std::vector<Index> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return p(a) < p(b); });
  return order;
}

}  // namespace

// ---------------------------------------------------------------------------

DecisionVector mrd(const Eigen::Ref<const Eigen::VectorXd>& x, const CovarianceModel& model,
                   const CriticalSchedule& schedule, Sidedness sided,
                   std::optional<VarianceEstimate> variance, Studentization mode) {
  require_lengths(x, model, schedule, "mrd");
  const Index m = model.size();
  DecisionVector out(m);
  double quad_form = 0.0;
  if (variance && mode == Studentization::root_t) {
    const ActiveSet all = ActiveSet::full(m);
    quad_form = x.dot(principal_submatrix_solve(model, all, x));
  }

  ActiveSet active = ActiveSet::full(m);
  for (Index stage = 0; stage < m; ++stage) {
    ResidualVector u = residual_vector(model, active, x);
    if (variance) u = studentize(u, variance->s2, variance->nu, mode, quad_form);

    const Index p = active.size();
    const Index pos = sided == Sidedness::two_sided
                          ? argmax(p, [&](Index k) { return std::abs(u.values(k)); })
                          : argmax(p, [&](Index k) { return u.values(k); });
    const Index j = active.remaining()[static_cast<std::size_t>(pos)];
    const double stat =
        sided == Sidedness::two_sided ? std::abs(u.values(pos)) : u.values(pos);
    const double c = schedule[stage];
    const bool rejected = stat >= c;
    out.stage_stats.push_back({stage + 1, j, stat, c, rejected});

    if (!rejected) {
      for (Index k = 0; k < p; ++k) {
        const Index r = active.remaining()[static_cast<std::size_t>(k)];
        out.statistic(r) = u.values(k);
        out.threshold(r) = c;
      }
      break;
    }
    out.reject[static_cast<std::size_t>(j)] = true;
    out.order.push_back(j);
    out.statistic(j) = u.values(pos);
    out.threshold(j) = c;
    active.reject(j);
  }
  return out;
}

double lrsd_statistic(const Eigen::Ref<const Eigen::VectorXd>& x, const CovarianceModel& model,
                      const std::vector<Index>& indices, Sidedness sided) {
  Eigen::VectorXd xa(static_cast<Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) xa(static_cast<Index>(k)) = x(indices[k]);
  const double full = xa.dot(principal_submatrix_solve(model, indices, xa));
  if (sided == Sidedness::two_sided) return full;
  const ProjectionResult proj = project_nonneg_orthant(xa, model, indices);
  return std::max(0.0, full - proj.objective);
}

DecisionVector lrsd(const Eigen::Ref<const Eigen::VectorXd>& x, const CovarianceModel& model,
                    const CriticalSchedule& schedule, Sidedness sided) {
  require_lengths(x, model, schedule, "lrsd");
  const Index m = model.size();
  DecisionVector out(m);
  ActiveSet active = ActiveSet::full(m);
  for (Index stage = 0; stage < m; ++stage) {
    const auto& idx = active.remaining();
    const double stat = lrsd_statistic(x, model, idx, sided);
    const Index pos =
        sided == Sidedness::two_sided
            ? argmax(active.size(), [&](Index k) { return std::abs(x(idx[static_cast<std::size_t>(k)])); })
            : argmax(active.size(), [&](Index k) { return x(idx[static_cast<std::size_t>(k)]); });
    const Index j = idx[static_cast<std::size_t>(pos)];
    const double c = schedule[stage];
    const bool rejected = stat >= c;
    out.stage_stats.push_back({stage + 1, j, stat, c, rejected});
    if (!rejected) {
      for (Index r : idx) {
        out.statistic(r) = stat;
        out.threshold(r) = c;
      }
      break;
    }
    out.reject[static_cast<std::size_t>(j)] = true;
    out.order.push_back(j);
    out.statistic(j) = stat;
    out.threshold(j) = c;
    active.reject(j);
  }
  return out;
}

DecisionVector bh_step_up(const Eigen::Ref<const Eigen::VectorXd>& pvalues, double q) {
  require_level(q, "FDR level q");
  require_pvalues(pvalues);
  const Index m = pvalues.size();
  DecisionVector out(m);
  const auto order = ascending_order(pvalues);
  Index k_star = 0;  // number of rejections
  for (Index k = m; k >= 1; --k) {
    if (pvalues(order[static_cast<std::size_t>(k - 1)]) <=
        q * static_cast<double>(k) / static_cast<double>(m)) {
      k_star = k;
      break;
    }
  }
  for (Index k = 0; k < m; ++k) {
    const Index j = order[static_cast<std::size_t>(k)];
    const double t = q * static_cast<double>(k + 1) / static_cast<double>(m);
    const bool rejected = k < k_star;
    out.stage_stats.push_back({k + 1, j, pvalues(j), t, rejected});
    out.statistic(j) = pvalues(j);
    out.threshold(j) = t;
    if (rejected) {
      out.reject[static_cast<std::size_t>(j)] = true;
      out.order.push_back(j);
    }
  }
  return out;
}

DecisionVector holm_step_down_marginal(const Eigen::Ref<const Eigen::VectorXd>& pvalues,
                                       double alpha) {
  require_level(alpha, "alpha");
  require_pvalues(pvalues);
  const Index m = pvalues.size();
  DecisionVector out(m);
  const auto order = ascending_order(pvalues);
  bool stopped = false;
  for (Index k = 0; k < m; ++k) {
    const Index j = order[static_cast<std::size_t>(k)];
    const double t = alpha / static_cast<double>(m - k);
    out.statistic(j) = pvalues(j);
    out.threshold(j) = t;
    if (stopped) continue;
    const bool rejected = pvalues(j) <= t;
    out.stage_stats.push_back({k + 1, j, pvalues(j), t, rejected});
    if (!rejected) {
      stopped = true;
      continue;
    }
    out.reject[static_cast<std::size_t>(j)] = true;
    out.order.push_back(j);
  }
  return out;
}

double marginal_pvalue(double x_j, Index j, const CovarianceModel& model, Sidedness sided,
                       std::optional<VarianceEstimate> variance) {
  const double sd = std::sqrt(model.entry(j, j));
  double z = x_j / sd;
  if (variance) {
    if (!(variance->s2 > 0.0) || !(variance->nu >= 1.0)) {
      throw ValidationError("marginal_pvalue: invalid variance estimate");
    }
    z /= std::sqrt(variance->s2);
    if (variance->nu <= 200.0) {
      const boost::math::students_t_distribution<double> t(variance->nu);
      if (sided == Sidedness::two_sided) {
        return 2.0 * boost::math::cdf(boost::math::complement(t, std::abs(z)));
      }
      return boost::math::cdf(boost::math::complement(t, z));
    }
  }
  return conditional_pvalue(z, sided);
}

Eigen::VectorXd marginal_pvalues(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const CovarianceModel& model, Sidedness sided,
                                 std::optional<VarianceEstimate> variance) {
  if (x.size() != model.size()) throw ValidationError("marginal_pvalues: length mismatch");
  Eigen::VectorXd p(x.size());
  for (Index j = 0; j < x.size(); ++j) p(j) = marginal_pvalue(x(j), j, model, sided, variance);
  return p;
}

// ---------------------------------------------------------------------------

DunnettCalibrator::DunnettCalibrator(double rho, double alpha, std::uint64_t seed,
                                     std::int64_t draws, Sidedness sided, int workers)
    : rho_(rho), alpha_(alpha), seed_(seed), draws_(draws), sided_(sided), workers_(workers) {
  require_level(alpha, "alpha");
}

DunnettCalibrator::Key DunnettCalibrator::key(Index k) const {
  return {k, rho_, alpha_, seed_, draws_, sided_ == Sidedness::two_sided ? 2 : 1};
}

McQuantile DunnettCalibrator::quantile(Index k) const {
  if (k < 1) throw DomainError("Dunnett calibration requested for k < 1");
  {
    std::shared_lock lock(mutex_);
    auto it = cache_.find(key(k));
    if (it != cache_.end()) return it->second;
  }
  prepare(k);
  std::shared_lock lock(mutex_);
  auto it = cache_.find(key(k));
  if (it == cache_.end()) {
    throw DomainError("Dunnett calibration unavailable for k = " + std::to_string(k));
  }
  return it->second;
}

void DunnettCalibrator::prepare(Index k_max) const {
  auto complete = [&] {
    for (Index k = 1; k <= k_max; ++k) {
      if (cache_.count(key(k)) == 0) return false;
    }
    return true;
  };
  {
    std::shared_lock lock(mutex_);
    if (complete()) return;
  }
  std::unique_lock lock(mutex_);
  if (complete()) return;
  const auto table = mc_max_quantiles(k_max, rho_, alpha_, draws_, seed_, sided_, workers_);
  for (Index k = 1; k <= k_max; ++k) cache_[key(k)] = table[static_cast<std::size_t>(k - 1)];
}

void DunnettCalibrator::save(const std::string& path) const {
  nlohmann::json doc;
  doc["entries"] = nlohmann::json::array();
  {
    std::shared_lock lock(mutex_);
    for (const auto& [k, q] : cache_) {
      doc["entries"].push_back({{"k", std::get<0>(k)},
                                {"rho", std::get<1>(k)},
                                {"alpha", std::get<2>(k)},
                                {"seed", std::get<3>(k)},
                                {"draws", std::get<4>(k)},
                                {"sided", std::get<5>(k) == 2 ? "two" : "one"},
                                {"threshold", q.threshold},
                                {"se", q.standard_error}});
    }
  }
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write calibration sidecar " + path);
  os << doc.dump(2) << '\n';
}

void DunnettCalibrator::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) return;
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("calibration sidecar " + path + ": " + e.what());
  }
  std::unique_lock lock(mutex_);
  for (const auto& e : doc.value("entries", nlohmann::json::array())) {
    const int sided = e.at("sided").get<std::string>() == "two" ? 2 : 1;
    Key k{e.at("k").get<Index>(), e.at("rho").get<double>(), e.at("alpha").get<double>(),
          e.at("seed").get<std::uint64_t>(), e.at("draws").get<std::int64_t>(), sided};
    cache_[k] = McQuantile{e.at("threshold").get<double>(), e.at("se").get<double>(),
                           std::get<4>(k)};
  }
}

DecisionVector dunnett_step_down(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const CovarianceModel& model, const DunnettCalibrator& calib) {
  if (model.kind() != ModelKind::intraclass) {
    throw ValidationError("dunnett_step_down requires an intraclass model");
  }
  if (std::abs(model.rho() - calib.rho()) > 1e-12) {
    throw ValidationError("dunnett_step_down: calibration correlation does not match the model");
  }
  if (x.size() != model.size()) throw ValidationError("dunnett_step_down: length mismatch");
  const Index m = x.size();
  calib.prepare(m);
  const Eigen::VectorXd z = x / std::sqrt(model.scale());
  const bool two = calib.sided() == Sidedness::two_sided;

  DecisionVector out(m);
  ActiveSet active = ActiveSet::full(m);
  for (Index stage = 0; stage < m; ++stage) {
    const auto& idx = active.remaining();
    const Index k = active.size();
    const Index pos = argmax(k, [&](Index i) {
      const double v = z(idx[static_cast<std::size_t>(i)]);
      return two ? std::abs(v) : v;
    });
    const Index j = idx[static_cast<std::size_t>(pos)];
    const double stat = two ? std::abs(z(j)) : z(j);
    const double c = calib.threshold(k);
    const bool rejected = stat >= c;
    out.stage_stats.push_back({stage + 1, j, stat, c, rejected});
    if (!rejected) {
      for (Index r : idx) {
        out.statistic(r) = z(r);
        out.threshold(r) = c;
      }
      break;
    }
    out.reject[static_cast<std::size_t>(j)] = true;
    out.order.push_back(j);
    out.statistic(j) = z(j);
    out.threshold(j) = c;
    active.reject(j);
  }
  return out;
}

}  // namespace mrd
