#include "mrd/critical_values.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mrd/parallel.hpp"
#include "mrd/projection.hpp"
#include "mrd/random.hpp"

namespace mrd {

namespace {

void require_probability(double p, const char* who) {
  if (!(p > 0.0 && p < 1.0)) {
    std::ostringstream os;
    os << who << ": probability " << p << " outside (0, 1)";
    throw DomainError(os.str());
  }
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  require_probability(p, "normal_quantile");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_upper_quantile(double q) {
  require_probability(q, "normal_upper_quantile");
  return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), q));
}

// ---------------------------------------------------------------------------

CriticalSchedule::CriticalSchedule(Eigen::VectorXd values, std::string provenance)
    : values_(std::move(values)), provenance_(std::move(provenance)) {
  if (values_.size() == 0) throw ValidationError("critical schedule is empty");
  for (Index i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_(i)) || !(values_(i) > 0.0)) {
      std::ostringstream os;
      os << "critical schedule: stage " << i + 1 << " value " << values_(i)
         << " is not a positive finite number";
      throw ValidationError(os.str());
    }
    if (i > 0 && !(values_(i) < values_(i - 1))) {
      std::ostringstream os;
      os << std::setprecision(17) << "critical schedule: stage " << i + 1 << " value "
         << values_(i) << " is not strictly below stage " << i << " value " << values_(i - 1);
      throw ValidationError(os.str());
    }
  }
}

CriticalSchedule CriticalSchedule::squared() const {
  return CriticalSchedule(values_.array().square().matrix(), provenance_ + " squared");
}

std::string CriticalSchedule::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17) << "stage,value\n";
  for (Index i = 0; i < values_.size(); ++i) os << i + 1 << ',' << values_(i) << '\n';
  return os.str();
}

CriticalSchedule schedule_mrd_two_sided(Index m, double alpha, double factor) {
  if (m < 1) throw ValidationError("schedule: number of hypotheses must be positive");
  require_alpha(alpha);
  if (!(factor > 0.0 && factor <= 1.0)) throw ValidationError("schedule: factor must lie in (0, 1]");
  Eigen::VectorXd c(m);
  for (Index i = 0; i < m; ++i) {
    const double q = normal_upper_quantile(alpha / (2.0 * static_cast<double>(m - i)));
    c(i) = i == 0 ? q : factor * q;
  }
  std::ostringstream os;
  os << "mrd_two_sided(alpha=" << alpha << ", factor=" << factor << ")";
  return CriticalSchedule(std::move(c), os.str());
}

CriticalSchedule schedule_one_sided(Index m, double alpha, OneSidedFamily family, double factor) {
  if (m < 1) throw ValidationError("schedule: number of hypotheses must be positive");
  require_alpha(alpha);
  double first = 1.0, rest = 1.0;
  const char* name = "sd";
  switch (family) {
    case OneSidedFamily::mrd:
      if (!(factor > 0.0 && factor <= 1.0)) {
        throw ValidationError("schedule: factor must lie in (0, 1]");
      }
      rest = factor;
      name = "mrd";
      break;
    case OneSidedFamily::lrsd:
      first = 1.25;
      rest = 1.2;
      name = "lrsd";
      break;
    case OneSidedFamily::sd:
      break;
  }
  Eigen::VectorXd c(m);
  for (Index i = 0; i < m; ++i) {
    const double q = normal_upper_quantile(alpha / static_cast<double>(m - i));
    c(i) = (i == 0 ? first : rest) * q;
  }
  std::ostringstream os;
  os << "one_sided_" << name << "(alpha=" << alpha;
  if (family == OneSidedFamily::mrd) os << ", factor=" << factor;
  os << ")";
  return CriticalSchedule(std::move(c), os.str());
}

// ---------------------------------------------------------------------------

std::vector<McQuantile> mc_max_quantiles(Index k_max, double rho, double alpha,
                                         std::int64_t draws, std::uint64_t seed, Sidedness sided,
                                         int workers) {
  if (k_max < 1) throw DomainError("mc_max_quantile: k must be positive");
  require_alpha(alpha);
  if (draws < 10) throw DomainError("mc_max_quantile: need at least 10 draws");
  if (!(rho < 1.0) || !(1.0 + static_cast<double>(k_max - 1) * rho > 0.0)) {
    throw DomainError("mc_max_quantile: correlation outside the positive-definite range");
  }

  // Leading blocks of the Cholesky factor are the factors of leading blocks,
  // so one factor serves every k.
  Eigen::MatrixXd factor;
  if (rho < 0.0) factor = cholesky_factor(CovarianceModel::intraclass(k_max, rho));
  const double common = rho >= 0.0 ? std::sqrt(rho) : 0.0;
  const double own = rho >= 0.0 ? std::sqrt(1.0 - rho) : 0.0;

  const auto n = static_cast<std::size_t>(draws);
  std::vector<double> running(n, -std::numeric_limits<double>::infinity());
  std::vector<double> common_draw(n, 0.0);
  std::vector<double> column(n);

  const double p = 1.0 - alpha;
  const double nd = static_cast<double>(draws);
  const double spread = std::sqrt(nd * p * (1.0 - p));
  auto order_stat = [&](std::vector<double>& v, double rank) {
    const auto r = static_cast<std::size_t>(std::clamp(rank, 1.0, nd)) - 1;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(r), v.end());
    return v[r];
  };

  std::vector<McQuantile> out;
  out.reserve(static_cast<std::size_t>(k_max));
  for (Index k = 1; k <= k_max; ++k) {
    parallel_for(draws, workers, [&](std::int64_t begin, std::int64_t end) {
      for (std::int64_t d = begin; d < end; ++d) {
        const auto ud = static_cast<std::size_t>(d);
        CounterStream stream(seed, static_cast<std::uint64_t>(d));
        double value;
        if (rho >= 0.0) {
          // Normal 0 is the common factor, normal i belongs to coordinate i.
          if (k == 1) common_draw[ud] = stream.normal();
          stream.seek_normal(static_cast<std::uint64_t>(k));
          value = common * common_draw[ud] + own * stream.normal();
        } else {
          stream.seek_normal(1);
          value = 0.0;
          for (Index i = 0; i < k; ++i) value += factor(k - 1, i) * stream.normal();
        }
        if (sided == Sidedness::two_sided) value = std::abs(value);
        running[ud] = std::max(running[ud], value);
      }
    });
    column = running;
    McQuantile q;
    q.draws = draws;
    q.threshold = order_stat(column, std::ceil(nd * p));
    const double lo = order_stat(column, std::floor(nd * p - spread));
    const double hi = order_stat(column, std::ceil(nd * p + spread));
    q.standard_error = 0.5 * (hi - lo);
    out.push_back(q);
  }
  return out;
}

McQuantile mc_max_quantile(Index k, double rho, double alpha, std::int64_t draws,
                           std::uint64_t seed, Sidedness sided, int workers) {
  return mc_max_quantiles(k, rho, alpha, draws, seed, sided, workers).back();
}

// ---------------------------------------------------------------------------

std::vector<Eigen::VectorXd> chi_bar_weight_table(Index k_max, double rho, std::int64_t draws,
                                                  std::uint64_t seed, int workers) {
  if (k_max < 1) throw DomainError("chi_bar_weights: k must be positive");
  if (draws < 1) throw DomainError("chi_bar_weights: need at least one draw");
  if (!(rho < 1.0) || !(1.0 + static_cast<double>(k_max - 1) * rho > 0.0)) {
    throw DomainError("chi_bar_weights: correlation outside the positive-definite range");
  }
  Eigen::MatrixXd factor;
  if (rho < 0.0) factor = cholesky_factor(CovarianceModel::intraclass(k_max, rho));
  const double common = rho >= 0.0 ? std::sqrt(rho) : 0.0;
  const double own = rho >= 0.0 ? std::sqrt(1.0 - rho) : 0.0;

  // counts(j, k-1): draws whose k-coordinate projection has j positive entries.
  using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
  const int slices = static_cast<int>(std::clamp<std::int64_t>(workers, 1, draws));
  std::vector<Counts> partial(static_cast<std::size_t>(slices), Counts::Zero(k_max + 1, k_max));
  parallel_for(slices, slices, [&](std::int64_t s_begin, std::int64_t s_end) {
    Eigen::VectorXd z(k_max), x(k_max);
    std::vector<double> sorted;
    sorted.reserve(static_cast<std::size_t>(k_max));
    for (std::int64_t s = s_begin; s < s_end; ++s) {
      Counts& counts = partial[static_cast<std::size_t>(s)];
      for (std::int64_t d = draws * s / slices; d < draws * (s + 1) / slices; ++d) {
        CounterStream stream(seed, static_cast<std::uint64_t>(d));
        if (rho >= 0.0) {
          const double w0 = stream.normal();
          for (Index i = 0; i < k_max; ++i) x(i) = common * w0 + own * stream.normal();
        } else {
          stream.seek_normal(1);
          for (Index i = 0; i < k_max; ++i) z(i) = stream.normal();
          x.noalias() = factor.triangularView<Eigen::Lower>() * z;
        }
        sorted.clear();
        for (Index k = 1; k <= k_max; ++k) {
          sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), x(k - 1)), x(k - 1));
          ++counts(intraclass_orthant_positive_count_sorted(sorted.data(), k, rho), k - 1);
        }
      }
    }
  });
  Counts total = Counts::Zero(k_max + 1, k_max);
  for (const auto& c : partial) total += c;
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(k_max));
  for (Index k = 1; k <= k_max; ++k) {
    out.push_back(total.col(k - 1).head(k + 1).cast<double>() / static_cast<double>(draws));
  }
  return out;
}

Eigen::VectorXd chi_bar_weights(Index k, double rho, std::int64_t draws, std::uint64_t seed,
                                int workers) {
  return chi_bar_weight_table(k, rho, draws, seed, workers).back();
}

double chi_bar_upper_tail(const Eigen::Ref<const Eigen::VectorXd>& weights, double t) {
  if (t <= 0.0) return 1.0;
  double tail = 0.0;
  for (Index j = 1; j < weights.size(); ++j) {
    if (weights(j) > 0.0) {
      tail += weights(j) * boost::math::gamma_q(0.5 * static_cast<double>(j), 0.5 * t);
    }
  }
  return tail;
}

double chi_bar_upper_quantile(const Eigen::Ref<const Eigen::VectorXd>& weights, double q) {
  const double mass = weights.tail(weights.size() - 1).sum();
  if (!(q > 0.0) || !(q < mass)) {
    throw DomainError("chi_bar_upper_quantile: tail probability must lie in (0, " +
                      std::to_string(mass) + ")");
  }
  double lo = 0.0, hi = 1.0;
  while (chi_bar_upper_tail(weights, hi) > q) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (chi_bar_upper_tail(weights, mid) > q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CriticalSchedule lrt_tail_matched(const CriticalSchedule& base, double rho, Sidedness sided,
                                  std::int64_t draws, std::uint64_t seed, int workers) {
  const Index m = base.size();
  std::vector<Eigen::VectorXd> weights;
  if (sided == Sidedness::one_sided) {
    weights = chi_bar_weight_table(m, rho, draws, seed, workers);
  } else {
    for (Index k = 1; k <= m; ++k) {
      weights.push_back(Eigen::VectorXd::Unit(k + 1, k));
    }
  }
  Eigen::VectorXd c(m);
  for (Index i = 0; i < m; ++i) {
    const Index k = m - i;
    double q = 0.5 * std::erfc(base[i] / std::sqrt(2.0));
    if (sided == Sidedness::two_sided) q *= 2.0;
    try {
      c(i) = chi_bar_upper_quantile(weights[static_cast<std::size_t>(k - 1)], q);
    } catch (const DomainError& e) {
      throw ValidationError("lrt_tail_matched: stage " + std::to_string(i + 1) + ": " +
                            e.what());
    }
  }
  std::ostringstream os;
  os << "lrt_tail_matched(" << base.provenance() << ", rho=" << rho << ", "
     << (sided == Sidedness::one_sided ? "one_sided" : "two_sided") << ", draws=" << draws
     << ", seed=" << seed << ")";
  return CriticalSchedule(std::move(c), os.str());
}

}  // namespace mrd
