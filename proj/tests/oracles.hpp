// Reference computations that share no code with the library: each one is
// written from the textbook definition, not from the fast path it checks.
#ifndef MRD_TESTS_ORACLES_HPP
#define MRD_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Phi(x) in long double: Taylor series of the integral near the center,
// Lentz continued fraction for the tail.
inline long double normal_cdf(long double x) {
  const long double pi = 3.141592653589793238462643383279502884L;
  const long double density = std::exp(-x * x / 2.0L) / std::sqrt(2.0L * pi);
  const long double ax = std::fabs(x);
  if (ax < 3.0L) {
    // Phi(x) = 1/2 + phi(x) sum_n x^(2n+1) / (1 3 5 ... (2n+1))
    long double term = x, sum = x;
    for (int n = 1; n < 500; ++n) {
      term *= x * x / (2.0L * n + 1.0L);
      sum += term;
      if (std::fabs(term) < 1e-22L * std::fabs(sum)) break;
    }
    return 0.5L + density * sum;
  }
  // Q(a) = phi(a) / (a + 1/(a + 2/(a + 3/(a + ...))))
  const long double tiny = 1e-300L;
  long double f = ax, c = ax, d = 0.0L;
  for (int k = 1; k < 5000; ++k) {
    d = ax + k * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = ax + k / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0L / d;
    const long double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0L) < 1e-20L) break;
  }
  const long double upper = density / f;
  return x > 0 ? 1.0L - upper : upper;
}

inline MatrixXd inverse(const MatrixXd& a) { return a.fullPivLu().inverse(); }

// (x_j - E[x_j | x_R]) / sd(x_j | x_R) by explicit regression on the other
// active coordinates.
inline VectorXd conditional_residuals(const MatrixXd& sigma, const std::vector<Index>& active,
                                      const VectorXd& x) {
  const Index p = static_cast<Index>(active.size());
  VectorXd out(p);
  for (Index k = 0; k < p; ++k) {
    const Index j = active[static_cast<std::size_t>(k)];
    std::vector<Index> rest;
    for (Index i : active) {
      if (i != j) rest.push_back(i);
    }
    const Index q = static_cast<Index>(rest.size());
    if (q == 0) {
      out(k) = x(j) / std::sqrt(sigma(j, j));
      continue;
    }
    MatrixXd s_rr(q, q);
    VectorXd s_rj(q), x_r(q);
    for (Index a = 0; a < q; ++a) {
      x_r(a) = x(rest[static_cast<std::size_t>(a)]);
      s_rj(a) = sigma(rest[static_cast<std::size_t>(a)], j);
      for (Index b = 0; b < q; ++b) {
        s_rr(a, b) = sigma(rest[static_cast<std::size_t>(a)], rest[static_cast<std::size_t>(b)]);
      }
    }
    const VectorXd beta = s_rr.colPivHouseholderQr().solve(s_rj);
    out(k) = (x(j) - beta.dot(x_r)) / std::sqrt(sigma(j, j) - beta.dot(s_rj));
  }
  return out;
}

struct Projection {
  VectorXd mu;
  double objective = std::numeric_limits<double>::infinity();
};

// min over mu >= 0 of (x - mu)' Q (x - mu), Q = sigma^{-1}, by trying every
// free set F: with mu_B = 0 the face minimizer is mu_F = x_F + Q_FF^{-1} Q_FB x_B.
inline Projection projection_by_enumeration(const VectorXd& x, const MatrixXd& sigma) {
  const Index p = x.size();
  const MatrixXd q = inverse(sigma);
  Projection best;
  for (unsigned mask = 0; mask < (1u << p); ++mask) {
    std::vector<Index> f, b;
    for (Index i = 0; i < p; ++i) ((mask >> i) & 1u ? f : b).push_back(i);
    VectorXd mu = VectorXd::Zero(p);
    if (!f.empty()) {
      const Index nf = static_cast<Index>(f.size()), nb = static_cast<Index>(b.size());
      MatrixXd qff(nf, nf), qfb(nf, nb);
      VectorXd xf(nf), xb(nb);
      for (Index r = 0; r < nf; ++r) {
        xf(r) = x(f[static_cast<std::size_t>(r)]);
        for (Index c = 0; c < nf; ++c) qff(r, c) = q(f[static_cast<std::size_t>(r)], f[static_cast<std::size_t>(c)]);
        for (Index c = 0; c < nb; ++c) qfb(r, c) = q(f[static_cast<std::size_t>(r)], b[static_cast<std::size_t>(c)]);
      }
      for (Index c = 0; c < nb; ++c) xb(c) = x(b[static_cast<std::size_t>(c)]);
      const VectorXd muf = xf + qff.fullPivLu().solve(qfb * xb);
      if (muf.minCoeff() < -1e-12) continue;
      for (Index r = 0; r < nf; ++r) mu(f[static_cast<std::size_t>(r)]) = std::max(0.0, muf(r));
    }
    const VectorXd d = x - mu;
    const double obj = d.dot(q * d);
    if (obj < best.objective) {
      best.objective = obj;
      best.mu = mu;
    }
  }
  return best;
}

// Benjamini-Hochberg written from the definition.
inline std::vector<bool> bh(const std::vector<double>& p, double q) {
  const std::size_t m = p.size();
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  double cut = -1.0;
  for (std::size_t k = 1; k <= m; ++k) {
    if (sorted[k - 1] <= q * static_cast<double>(k) / static_cast<double>(m)) cut = sorted[k - 1];
  }
  std::vector<bool> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = p[i] <= cut;
  return out;
}

// Holm written from the definition.
inline std::vector<bool> holm(const std::vector<double>& p, double alpha) {
  const std::size_t m = p.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<bool> out(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    if (p[idx[i]] > alpha / static_cast<double>(m - i)) break;
    out[idx[i]] = true;
  }
  return out;
}

}  // namespace oracle

#endif  // MRD_TESTS_ORACLES_HPP
