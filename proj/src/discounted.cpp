#include "aoi/discounted.hpp"

#include <algorithm>
#include <cmath>

namespace aoi::discounted {

namespace {

double power(double base, Age e) { return std::pow(base, static_cast<double>(e)); }

/// (1 - beta^n) / (1 - beta) without cancellation in the numerator.
double geo(double beta, Age n) {
  if (n <= 0) return 0.0;
  return -std::expm1(static_cast<double>(n) * std::log(beta)) / (1.0 - beta);
}

/// n - (1 - beta^n) / (1 - beta), divided by (1 - beta): sum_{j<n} geo(j).
/// Summed termwise for moderate n so beta near 1 keeps its digits.
double excess_over_geo(double beta, Age n) {
  if (n <= 4096) {
    double acc = 0.0;
    for (Age j = 1; j < n; ++j) acc += geo(beta, j);
    return acc;
  }
  return (static_cast<double>(n) - geo(beta, n)) / (1.0 - beta);
}

}  // namespace

SigmaCache::SigmaCache(const UserParams& params, Discount beta)
    : beta_(beta.beta()), p_(params.p()), q_(params.q()) {}

double SigmaCache::operator()(Age i) const {
  return 1.0 - beta_ * q_ - power(beta_, i + 1) * p_;
}

double sigma(const UserParams& params, Discount beta, Age i) { return SigmaCache(params, beta)(i); }

WorkProfile::WorkProfile(const UserParams& params, Discount beta, Age k)
    : beta_(beta.beta()), k_(k), gamma_k_(beta.beta() * params.lambda() / sigma(params, beta, k)) {}

double WorkProfile::gamma(Age i) const {
  if (i >= k_) return gamma_k_;
  return power(beta_, k_ - i) * gamma_k_;
}

double work_metric(const UserParams& params, Discount beta, Age k, State s) {
  const WorkProfile w(params, beta, k);
  if (s.b == 0 || s.i <= k) return w.gamma(s.i);
  return 1.0 + params.mu() * w.gamma(0) + (1.0 - params.mu()) * w.gamma(s.i);
}

double marginal_work(const UserParams& params, Discount beta, Age k, Age i) {
  const SigmaCache sig(params, beta);
  return sig(std::max<Age>(k - i, 0)) / sig(k);
}

CostProfile::CostProfile(const UserParams& params, Discount beta, const CostSpec& cost, Age k)
    : params_(params), beta_(beta.beta()), cost_(cost), k_(k), head_(static_cast<std::size_t>(k) + 1) {
  const double b = beta_;
  const double p = params.p();
  const double q = params.q();

  double weighted_head = 0.0;  // sum_{j<k} beta^(j+1) c_j
  double bj = b;
  for (Age j = 0; j < k; ++j) {
    weighted_head += bj * cost.cost(j);
    bj *= b;
  }

  double pivot;
  if (q == 0.0) {
    pivot = (weighted_head + cost.cost(k) + b * cost.cost(k + 1)) / (1.0 - power(b, k + 1));
  } else {
    const double tail = cost.tail_series(k + 1, b * q);
    pivot = (p * weighted_head + (1.0 - b * q) * (cost.cost(k) + b * tail)) / sigma(params, beta, k);
  }

  head_[static_cast<std::size_t>(k)] = pivot;
  for (Age i = k - 1; i >= 0; --i)
    head_[static_cast<std::size_t>(i)] = cost.cost(i) + b * head_[static_cast<std::size_t>(i + 1)];
}

double CostProfile::phi(Age i) const {
  if (i <= k_) return head_[static_cast<std::size_t>(std::max<Age>(i, 0))];
  const double b = beta_;
  const double p = params_.p();
  const double q = params_.q();
  if (q == 0.0) return cost_.cost(i) + b * cost_.cost(i + 1) + b * head_[0];
  return b * p * head_[0] / (1.0 - b * q) + cost_.cost(i) + b * cost_.tail_series(i + 1, b * q);
}

double CostProfile::phi_pivot_form(Age i) const {
  if (i <= k_ || params_.q() == 0.0) return phi(i);
  const double b = beta_;
  const double p = params_.p();
  const double x = b * params_.q();
  const Age l = i - k_;
  double partial = 0.0;  // sum_{j=1}^{l-1} x^(j-1) c_{k+j}
  double xj = 1.0;
  for (Age j = 1; j < l; ++j) {
    partial += xj * cost_.cost(k_ + j);
    xj *= x;
  }
  const double phik = head_[static_cast<std::size_t>(k_)];
  const double inner = phik - b * p * (1.0 - power(x, l)) / (1.0 - x) * head_[0] - cost_.cost(k_) -
                       b * partial - b * p * power(x, l - 1) * cost_.cost(i);
  return inner / power(x, l);
}

double cost_metric(const CostProfile& profile, const UserParams& params, const CostSpec& cost, State s) {
  if (s.b == 0 || s.i <= profile.k()) return profile.phi(s.i);
  const double mu = params.mu();
  return mu * cost.cost(s.i) + mu * profile.phi(0) + (1.0 - mu) * profile.phi(s.i);
}

double cost_metric(const UserParams& params, Discount beta, const CostSpec& cost, Age k, State s) {
  return cost_metric(CostProfile(params, beta, cost, k), params, cost, s);
}

double marginal_cost(const UserParams& params, Discount beta, const CostSpec& cost, Age k, Age i) {
  const CostProfile prof(params, beta, cost, k);
  return params.mu() * (prof.phi(i) - prof.phi(0) - cost.cost(i));
}

double marginal_cost_diagonal(const UserParams& params, Discount beta, const CostSpec& cost, Age i) {
  const double b = beta.beta();
  const double q = params.q();
  double head = 0.0;  // sum_{j=0}^{i} beta^j c_j
  double bj = 1.0;
  for (Age j = 0; j <= i; ++j) {
    head += bj * cost.cost(j);
    bj *= b;
  }
  const double one_minus_bi = (1.0 - b) * geo(b, i);
  if (q == 0.0)
    return (b * one_minus_bi * cost.cost(i + 1) - (1.0 - b) * head) / (1.0 - power(b, i + 1));
  const double tail = cost.tail_series(i + 1, b * q);
  return params.mu() / sigma(params, beta, i) * (b * one_minus_bi * (1.0 - b * q) * tail - (1.0 - b) * head);
}

double whittle_index_general(const UserParams& params, Discount beta, const CostSpec& cost, Age i) {
  const double b = beta.beta();
  const double q = params.q();
  double discounted_head = 0.0;  // sum_{j=1}^{i} beta^j c_j
  double bj = b;
  for (Age j = 1; j <= i; ++j) {
    discounted_head += bj * cost.cost(j);
    bj *= b;
  }
  if (q == 0.0) return b * geo(b, i) * cost.cost(i + 1) - discounted_head;
  const double tail = cost.tail_series(i + 1, b * q);
  return params.mu() * (b * geo(b, i) * (1.0 - b * q) * tail - discounted_head);
}

double whittle_index_linear(const UserParams& params, Discount beta, double c, Age i) {
  const double b = beta.beta();
  const double p = params.p();
  const double q = params.q();
  // beta c mu / (1-beta) [i - beta (1-beta^i) p / ((1-beta)(1-beta q))], with the
  // bracket rewritten so its (1 - beta) factor cancels exactly.
  const double bracket = static_cast<double>(i) + b * p * excess_over_geo(b, i);
  return b * c * params.mu() * bracket / (1.0 - b * q);
}

double whittle_index_quadratic(const UserParams& params, Discount beta, double c, Age i) {
  const double b = beta.beta();
  const double p = params.p();
  const double q = params.q();
  const double d = static_cast<double>(i);
  const double omb = 1.0 - b;
  const double ombq = 1.0 - b * q;
  const double lin = 2.0 * (omb + p * power(b, i + 1)) / (omb * ombq);
  const double cst = b * p * geo(b, i) * (3.0 - b * (1.0 + (1.0 + b) * q)) / (omb * ombq * ombq);
  return b * c * params.mu() / omb * (d * d + lin * d - cst);
}

double whittle_index_threshold(const UserParams& params, Discount beta, double c, Age k, Age i) {
  const double b = beta.beta();
  const double scale = b * c * params.mu();
  if (i >= k) return scale * geo(b, k);
  return scale * geo(b, i) * power(b * params.q(), k - i);
}

double whittle_index(const UserParams& params, Discount beta, const CostSpec& cost, Age i) {
  struct V {
    const UserParams& params;
    Discount beta;
    const CostSpec& cost;
    Age i;
    double operator()(const LinearCost& s) const { return whittle_index_linear(params, beta, s.c, i); }
    double operator()(const QuadraticCost& s) const { return whittle_index_quadratic(params, beta, s.c, i); }
    double operator()(const ThresholdCost& s) const {
      return whittle_index_threshold(params, beta, s.c, s.k, i);
    }
    double operator()(const TabularCost&) const { return whittle_index_general(params, beta, cost, i); }
  };
  return std::visit(V{params, beta, cost, i}, cost.variant());
}

std::vector<double> whittle_index_table(const UserParams& params, Discount beta, const CostSpec& cost,
                                        Age i_max) {
  std::vector<double> out;
  if (i_max < 1) return out;
  out.reserve(static_cast<std::size_t>(i_max));
  if (!std::holds_alternative<TabularCost>(cost.variant())) {
    for (Age i = 1; i <= i_max; ++i) out.push_back(whittle_index(params, beta, cost, i));
    return out;
  }

  // Tabular: C_{i+1} for i = i_max..1 by the backward recursion C_i = c_i + beta q C_{i+1},
  // started from the exact tail at i_max + 1; discounted head sums accumulate forward.
  const double b = beta.beta();
  const double q = params.q();
  std::vector<double> tail(static_cast<std::size_t>(i_max) + 2);
  if (q == 0.0) {
    for (Age i = 2; i <= i_max + 1; ++i) tail[static_cast<std::size_t>(i)] = cost.cost(i);
  } else {
    const double x = b * q;
    tail[static_cast<std::size_t>(i_max + 1)] = cost.tail_series(i_max + 1, x);
    for (Age i = i_max; i >= 2; --i)
      tail[static_cast<std::size_t>(i)] = cost.cost(i) + x * tail[static_cast<std::size_t>(i + 1)];
  }
  double head = 0.0;
  double bj = 1.0;
  for (Age i = 1; i <= i_max; ++i) {
    bj *= b;
    head += bj * cost.cost(i);
    const double ci1 = tail[static_cast<std::size_t>(i + 1)];
    if (q == 0.0)
      out.push_back(b * geo(b, i) * ci1 - head);
    else
      out.push_back(params.mu() * (b * geo(b, i) * (1.0 - b * q) * ci1 - head));
  }
  return out;
}

}  // namespace aoi::discounted
