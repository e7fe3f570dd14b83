#pragma once

// Test-only ground truth that shares no code path with the library:
// brute-force partial sums and dense Gaussian elimination on the chain.

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "aoi/core.hpp"
#include "aoi/oracle.hpp"

namespace aoi::testing {

/// sum_{j>=1} ratio^(j-1) c_{i-1+j} by direct summation, truncated once the
/// remaining terms are bounded below eps (geometric bound on the term ratio).
inline double partial_sum_tail(const CostSpec& cost, Age i, double ratio, double eps = 1e-14) {
  double sum = 0.0;
  double w = 1.0;
  for (Age j = 1; j < 10'000'000; ++j) {
    const double term = w * cost.cost(i - 1 + j);
    sum += term;
    w *= ratio;
    if (w == 0.0) break;
    // Successive term ratio is at most ratio * c_{n+1}/c_n; bound the rest.
    const double next = w * cost.cost(i + j);
    const double growth = cost.cost(i + j) > 0.0 ? cost.cost(i + j + 1) / cost.cost(i + j) : 1.0;
    const double rho = ratio * growth;
    if (rho < 1.0 && next / (1.0 - rho) < eps && j > 4) break;
  }
  return sum;
}

/// Solves A x = b in place (partial pivoting).
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    if (a[c][c] == 0.0) throw std::runtime_error("singular system");
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return x;
}

struct DenseValues {
  std::vector<double> v0, v1;  // ages 1..n at index i
};

inline std::size_t dense_index(int b, Age i, Age n) {
  return static_cast<std::size_t>(b) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i - 1);
}

/// Discounted value of a stationary policy with per-state rewards, built
/// directly from the transition kernel of the truncated model.
template <class Reward>
DenseValues dense_discounted(const oracle::TruncatedModel& m, const oracle::ActionVector& act, Reward reward) {
  const Age n = m.i_max();
  const double beta = m.beta()->beta();
  const std::size_t dim = 2 * static_cast<std::size_t>(n);
  std::vector<std::vector<double>> a(dim, std::vector<double>(dim, 0.0));
  std::vector<double> rhs(dim, 0.0);
  for (int b = 0; b <= 1; ++b) {
    for (Age i = 1; i <= n; ++i) {
      const int action = b == 1 ? act[static_cast<std::size_t>(i)] : 0;
      const std::size_t r = dense_index(b, i, n);
      a[r][r] += 1.0;
      rhs[r] = reward(State{b, i}, action);
      for (const auto& tr : m.transitions({b, i}, action)) a[r][dense_index(tr.to.b, tr.to.i, n)] -= beta * tr.prob;
    }
  }
  const auto x = gauss_solve(std::move(a), std::move(rhs));
  DenseValues out{std::vector<double>(static_cast<std::size_t>(n) + 1), std::vector<double>(static_cast<std::size_t>(n) + 1)};
  for (Age i = 1; i <= n; ++i) {
    out.v0[static_cast<std::size_t>(i)] = x[dense_index(0, i, n)];
    out.v1[static_cast<std::size_t>(i)] = x[dense_index(1, i, n)];
  }
  return out;
}

/// Stationary distribution pi P = pi, sum pi = 1, by dense elimination.
inline DenseValues dense_stationary(const oracle::TruncatedModel& m, const oracle::ActionVector& act) {
  const Age n = m.i_max();
  const std::size_t dim = 2 * static_cast<std::size_t>(n);
  std::vector<std::vector<double>> a(dim, std::vector<double>(dim, 0.0));
  std::vector<double> rhs(dim, 0.0);
  // Rows: (P^T - I) pi = 0, with the last row replaced by normalization.
  for (int b = 0; b <= 1; ++b) {
    for (Age i = 1; i <= n; ++i) {
      const int action = b == 1 ? act[static_cast<std::size_t>(i)] : 0;
      const std::size_t from = dense_index(b, i, n);
      a[from][from] -= 1.0;
      for (const auto& tr : m.transitions({b, i}, action)) a[dense_index(tr.to.b, tr.to.i, n)][from] += tr.prob;
    }
  }
  for (std::size_t c = 0; c < dim; ++c) a[dim - 1][c] = 1.0;
  rhs[dim - 1] = 1.0;
  const auto x = gauss_solve(std::move(a), std::move(rhs));
  DenseValues out{std::vector<double>(static_cast<std::size_t>(n) + 1), std::vector<double>(static_cast<std::size_t>(n) + 1)};
  for (Age i = 1; i <= n; ++i) {
    out.v0[static_cast<std::size_t>(i)] = x[dense_index(0, i, n)];
    out.v1[static_cast<std::size_t>(i)] = x[dense_index(1, i, n)];
  }
  return out;
}

/// Random nondecreasing tabular cost: L in [1, max_len], nonnegative
/// increments, tail rate uniform in [1, max_rate].
inline CostSpec random_tabular(std::mt19937_64& rng, Age max_len = 30, double max_rate = 1.2) {
  std::uniform_int_distribution<Age> len(1, max_len);
  std::uniform_real_distribution<double> inc(0.0, 2.0);
  std::uniform_real_distribution<double> rate(1.0, max_rate);
  std::bernoulli_distribution flat(0.25);
  const Age L = len(rng);
  std::vector<double> v;
  double c = inc(rng);
  for (Age j = 0; j < L; ++j) {
    if (j > 0 && !flat(rng)) c += inc(rng);
    v.push_back(c);
  }
  return CostSpec::tabular(std::move(v), rate(rng));
}

/// Random (params, tabular cost) pair whose tail series converges under the
/// average criterion (tail_rate * q < 1), by rejection.
inline std::pair<UserParams, CostSpec> random_user(std::mt19937_64& rng, Age max_len = 30, double max_rate = 1.2) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (;;) {
    const double lam = unit(rng), mu = unit(rng);
    const CostSpec cost = random_tabular(rng, max_len, max_rate);
    const double q = 1.0 - lam * mu;
    if (std::get<TabularCost>(cost.variant()).tail_rate * q < 0.98) return {validate_params(lam, mu), cost};
  }
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace aoi::testing
