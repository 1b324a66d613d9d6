#include "mrd/scenarios.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "mrd/random.hpp"

namespace mrd {

namespace {

// Stream family for the chi-square draw, disjoint from the data streams.
constexpr std::uint64_t kChiSquareSalt = 0xc2b2ae3d27d4eb4fULL;

const char* kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::treatments_control: return "treatments_control";
    case ScenarioKind::change_point: return "change_point";
    case ScenarioKind::successive: return "successive";
    case ScenarioKind::intraclass: return "intraclass";
  }
  return "?";
}

// M+1 population means nu, sample means drawn with sd sigma / sqrt(n).
// Returns zbar and, when requested, the pooled variance from the raw draws.
Eigen::VectorXd population_means(const Scenario& s, const Eigen::VectorXd& nu,
                                 CounterStream& stream, double* pooled) {
  const Index pops = nu.size();
  Eigen::VectorXd zbar(pops);
  if (s.mode == GenerationMode::raw) {
    double ss = 0.0;
    for (Index i = 0; i < pops; ++i) {
      double sum = 0.0, sumsq = 0.0;
      for (Index r = 0; r < s.n; ++r) {
        const double z = nu(i) + s.sigma * stream.normal();
        sum += z;
        sumsq += z * z;
      }
      zbar(i) = sum / static_cast<double>(s.n);
      ss += sumsq - static_cast<double>(s.n) * zbar(i) * zbar(i);
    }
    if (pooled != nullptr) {
      *pooled = ss / (static_cast<double>(pops) * static_cast<double>(s.n - 1));
    }
    return zbar;
  }
  const double sd = s.sigma / std::sqrt(static_cast<double>(s.n));
  for (Index i = 0; i < pops; ++i) zbar(i) = nu(i) + sd * stream.normal();
  if (pooled != nullptr) {
    const double df = static_cast<double>(pops) * static_cast<double>(s.n - 1);
    CounterStream chi_stream(s.seed ^ kChiSquareSalt, stream.key());
    std::gamma_distribution<double> gamma(df / 2.0, 2.0);
    *pooled = s.sigma * s.sigma * gamma(chi_stream) / df;
  }
  return zbar;
}

void fill_variance(const Scenario& s, Dataset& d, double pooled) {
  if (s.variance_known) return;
  d.s2 = pooled;
  d.nu = static_cast<double>(s.m + 1) * static_cast<double>(s.n - 1);
}

}  // namespace

Index MeanPattern::nulls() const {
  Index c = 0;
  for (bool b : is_null) c += b ? 1 : 0;
  return c;
}

MeanPattern MeanPattern::from_means(Eigen::VectorXd mu, bool nonpositive_is_null) {
  MeanPattern p;
  p.is_null.resize(static_cast<std::size_t>(mu.size()));
  for (Index i = 0; i < mu.size(); ++i) {
    p.is_null[static_cast<std::size_t>(i)] = nonpositive_is_null ? mu(i) <= 0.0 : mu(i) == 0.0;
  }
  p.mu = std::move(mu);
  return p;
}

MeanPattern mean_pattern_table(const std::vector<std::pair<double, Index>>& counts,
                               MeanLayout layout, bool nonpositive_is_null) {
  Index total = 0;
  for (const auto& [value, count] : counts) {
    if (count < 0) throw ValidationError("mean pattern: negative count");
    if (!std::isfinite(value)) throw ValidationError("mean pattern: non-finite value");
    total += count;
  }

  if (layout == MeanLayout::block) {
    if (total < 1) throw ValidationError("mean pattern: counts sum to zero");
    Eigen::VectorXd mu(total);
    Index pos = 0;
    for (const auto& [value, count] : counts) {
      mu.segment(pos, count).setConstant(value);
      pos += count;
    }
    return MeanPattern::from_means(std::move(mu), nonpositive_is_null);
  }

  if (counts.size() != 2 || counts[0].first != 0.0 || counts[1].first == 0.0) {
    throw ValidationError(
        "mean pattern: triples layout needs exactly {(0, nulls), (value, triples)}");
  }
  const Index nulls = counts[0].second;
  const Index triples = counts[1].second;
  const Index m = nulls + 3 * triples;
  if (m < 1) throw ValidationError("mean pattern: empty triples layout");
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
  const Index gap = nulls / (triples + 1);
  Index pos = gap;
  for (Index t = 0; t < triples; ++t) {
    mu.segment(pos, 3).setConstant(counts[1].first);
    pos += 3 + gap;
  }
  return MeanPattern::from_means(std::move(mu), nonpositive_is_null);
}

// ---------------------------------------------------------------------------

CovarianceModel Scenario::covariance() const {
  const double s2 = variance_known ? sigma * sigma : 1.0;
  const double nd = static_cast<double>(n);
  switch (kind) {
    case ScenarioKind::treatments_control:
      return CovarianceModel::intraclass(m, 0.5, 2.0 * s2 / nd);
    case ScenarioKind::change_point:
      return CovarianceModel::change_point(m, s2 / nd);
    case ScenarioKind::successive:
      return CovarianceModel::successive(m, rho, s2);
    case ScenarioKind::intraclass:
      return CovarianceModel::intraclass(m, rho, s2);
  }
  throw ValidationError("unknown scenario kind");
}

Eigen::VectorXd Scenario::raw_means() const {
  if (units == MeanUnits::raw) return means.mu;
  // Marginal sd of x including sigma^2, whether or not it is known.
  const CovarianceModel truth = variance_known ? covariance() : [&] {
    Scenario copy = *this;
    copy.variance_known = true;
    return copy.covariance();
  }();
  Eigen::VectorXd out(means.size());
  for (Index i = 0; i < out.size(); ++i) out(i) = means.mu(i) * std::sqrt(truth.entry(i, i));
  return out;
}

void Scenario::validate() const {
  if (m < 1) throw ValidationError("scenario: M must be positive");
  if (n < 1) throw ValidationError("scenario: n must be at least 1");
  if (!(sigma > 0.0)) throw ValidationError("scenario: sigma must be positive");
  if (means.size() != m) {
    throw ValidationError("scenario: mean pattern has " + std::to_string(means.size()) +
                          " entries but M = " + std::to_string(m));
  }
  if (!variance_known) {
    if (kind != ScenarioKind::treatments_control && kind != ScenarioKind::change_point) {
      throw ValidationError("scenario: unknown variance needs replicated populations "
                            "(treatments_control or change_point)");
    }
    if (n < 2) throw ValidationError("scenario: unknown variance needs n >= 2");
  }
  covariance();  // parameter-domain checks
}

std::string Scenario::fingerprint() const {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (Index i = 0; i < means.size(); ++i) {
    std::uint64_t bits;
    const double v = means.mu(i);
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64_mix(h ^ bits);
  }
  std::ostringstream os;
  os << kind_name(kind) << "/M=" << m << "/rho=" << rho << "/n=" << n << "/sigma=" << sigma
     << "/known=" << (variance_known ? 1 : 0) << "/seed=" << seed << "/means=" << std::hex << h;
  if (!label.empty()) os << "/label=" << label;
  return os.str();
}

// ---------------------------------------------------------------------------

Dataset gen_treatments_control(const Scenario& s, std::uint64_t iteration) {
  if (s.kind != ScenarioKind::treatments_control) {
    throw ValidationError("gen_treatments_control: scenario is not treatments vs. control");
  }
  if (!s.variance_known && s.n < 2) {
    throw ValidationError("gen_treatments_control: pooled variance needs n >= 2");
  }
  CounterStream stream(s.seed, iteration);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(s.m + 1);
  nu.head(s.m) = s.raw_means();
  double pooled = 0.0;
  Dataset d;
  d.zbar = population_means(s, nu, stream, s.variance_known ? nullptr : &pooled);
  d.x = d.zbar.head(s.m).array() - d.zbar(s.m);
  fill_variance(s, d, pooled);
  return d;
}

Dataset gen_changepoint(const Scenario& s, std::uint64_t iteration) {
  if (s.kind != ScenarioKind::change_point) {
    throw ValidationError("gen_changepoint: scenario is not a change-point model");
  }
  if (!s.variance_known && s.n < 2) {
    throw ValidationError("gen_changepoint: pooled variance needs n >= 2");
  }
  CounterStream stream(s.seed, iteration);
  const Eigen::VectorXd mu = s.raw_means();
  Eigen::VectorXd nu(s.m + 1);
  nu(0) = 0.0;
  for (Index i = 0; i < s.m; ++i) nu(i + 1) = nu(i) + mu(i);
  double pooled = 0.0;
  Dataset d;
  d.zbar = population_means(s, nu, stream, s.variance_known ? nullptr : &pooled);
  d.x = d.zbar.tail(s.m) - d.zbar.head(s.m);
  fill_variance(s, d, pooled);
  return d;
}

Eigen::VectorXd gen_mvn(const CovarianceModel& model, const Eigen::Ref<const Eigen::VectorXd>& mu,
                        std::uint64_t seed, std::uint64_t iteration) {
  if (mu.size() != model.size()) throw ValidationError("gen_mvn: mean length mismatch");
  const Eigen::MatrixXd l = cholesky_factor(model);
  CounterStream stream(seed, iteration);
  Eigen::VectorXd z(model.size());
  for (Index i = 0; i < z.size(); ++i) z(i) = stream.normal();
  return mu + l.triangularView<Eigen::Lower>() * z;
}

Dataset generate(const Scenario& s, std::uint64_t iteration) {
  switch (s.kind) {
    case ScenarioKind::treatments_control:
      return gen_treatments_control(s, iteration);
    case ScenarioKind::change_point:
      return gen_changepoint(s, iteration);
    case ScenarioKind::intraclass: {
      // One-factor form, avoids an O(M^2) factor at large M.
      const CovarianceModel model = s.covariance();
      Dataset d;
      if (s.rho >= 0.0) {
        CounterStream stream(s.seed, iteration);
        const double common = stream.normal();
        const double root = std::sqrt(model.scale());
        const double a = std::sqrt(s.rho), b = std::sqrt(1.0 - s.rho);
        d.x = s.raw_means();
        for (Index i = 0; i < s.m; ++i) d.x(i) += root * (a * common + b * stream.normal());
      } else {
        d.x = gen_mvn(model, s.raw_means(), s.seed, iteration);
      }
      return d;
    }
    case ScenarioKind::successive: {
      Dataset d;
      d.x = gen_mvn(s.covariance(), s.raw_means(), s.seed, iteration);
      return d;
    }
  }
  throw ValidationError("unknown scenario kind");
}

}  // namespace mrd
