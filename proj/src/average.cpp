#include "aoi/average.hpp"

#include <algorithm>
#include <cmath>

namespace aoi::average {

namespace {

double tail_at_q(const UserParams& params, const CostSpec& cost, Age i) {
  // C_i(q) = c_i when q = 0; the closed-form series gives the same value there.
  if (params.q() == 0.0) return cost.cost(i);
  return cost.tail_series(i, params.q());
}

}  // namespace

double avg_work_metric(const UserParams& params, Age k) {
  return params.lambda() / (static_cast<double>(k) * params.p() + 1.0);
}

double avg_marginal_work(const UserParams& params, Age k, Age i) {
  const double gap = static_cast<double>(std::max<Age>(k - i, 0));
  return (gap * params.p() + 1.0) / (static_cast<double>(k) * params.p() + 1.0);
}

double avg_cost_metric(const UserParams& params, const CostSpec& cost, Age k) {
  const double p = params.p();
  double head = 0.0;
  for (Age j = 0; j < k; ++j) head += cost.cost(j);
  return (p * head + p * (cost.cost(k) + tail_at_q(params, cost, k + 1))) /
         (static_cast<double>(k) * p + 1.0);
}

AvgMetrics avg_metrics(const UserParams& params, const CostSpec& cost, Age k) {
  return {k, avg_work_metric(params, k), avg_cost_metric(params, cost, k)};
}

double avg_marginal_cost(const UserParams& params, const CostSpec& cost, Age i) {
  const double p = params.p();
  const double d = static_cast<double>(i);
  double head = 0.0;
  for (Age j = 0; j <= i; ++j) head += cost.cost(j);
  return params.mu() / (d * p + 1.0) * (d * p * tail_at_q(params, cost, i + 1) - head);
}

double avg_whittle_index_general(const UserParams& params, const CostSpec& cost, Age i) {
  const double p = params.p();
  const double d = static_cast<double>(i);
  double head = 0.0;
  for (Age j = 1; j <= i; ++j) head += cost.cost(j);
  if (params.q() == 0.0) return d * p * cost.cost(i + 1) - head;
  return params.mu() * (d * p * cost.tail_series(i + 1, params.q()) - head);
}

double avg_whittle_index_linear(const UserParams& params, double c, Age i) {
  const double d = static_cast<double>(i);
  // mu / p folded to 1 / lambda keeps m(1) = c / lambda exact.
  return c * d * (params.mu() * (d - 1.0) / 2.0 + 1.0 / params.lambda());
}

double avg_whittle_index_quadratic(const UserParams& params, double c, Age i) {
  const double p = params.p();
  const double q = params.q();
  const double d = static_cast<double>(i);
  const double a2 = (4.0 - (1.0 + q) * (1.0 + q)) / (2.0 * p * p);
  const double a1 = (21.0 - (3.0 + p) * (3.0 + p)) / (6.0 * p * p);
  return c * params.mu() * (2.0 / 3.0 * d * d * d + a2 * d * d + a1 * d);
}

double avg_whittle_index_threshold(const UserParams& params, double c, Age k, Age i) {
  if (i >= k) return c * params.mu() * static_cast<double>(k);
  return c * params.mu() * static_cast<double>(i) * std::pow(params.q(), static_cast<double>(k - i));
}

double avg_whittle_index(const UserParams& params, const CostSpec& cost, Age i) {
  struct V {
    const UserParams& params;
    const CostSpec& cost;
    Age i;
    double operator()(const LinearCost& s) const { return avg_whittle_index_linear(params, s.c, i); }
    double operator()(const QuadraticCost& s) const { return avg_whittle_index_quadratic(params, s.c, i); }
    double operator()(const ThresholdCost& s) const {
      return avg_whittle_index_threshold(params, s.c, s.k, i);
    }
    double operator()(const TabularCost&) const { return avg_whittle_index_general(params, cost, i); }
  };
  return std::visit(V{params, cost, i}, cost.variant());
}

std::vector<double> avg_whittle_index_table(const UserParams& params, const CostSpec& cost, Age i_max) {
  std::vector<double> out;
  if (i_max < 1) return out;
  out.reserve(static_cast<std::size_t>(i_max));
  if (!std::holds_alternative<TabularCost>(cost.variant())) {
    for (Age i = 1; i <= i_max; ++i) out.push_back(avg_whittle_index(params, cost, i));
    return out;
  }
  const double p = params.p();
  const double q = params.q();
  std::vector<double> tail(static_cast<std::size_t>(i_max) + 2);
  if (q == 0.0) {
    for (Age i = 2; i <= i_max + 1; ++i) tail[static_cast<std::size_t>(i)] = cost.cost(i);
  } else {
    tail[static_cast<std::size_t>(i_max + 1)] = cost.tail_series(i_max + 1, q);
    for (Age i = i_max; i >= 2; --i)
      tail[static_cast<std::size_t>(i)] = cost.cost(i) + q * tail[static_cast<std::size_t>(i + 1)];
  }
  double head = 0.0;
  for (Age i = 1; i <= i_max; ++i) {
    head += cost.cost(i);
    const double m = static_cast<double>(i) * p * tail[static_cast<std::size_t>(i + 1)] - head;
    out.push_back(q == 0.0 ? m : params.mu() * m);
  }
  return out;
}

}  // namespace aoi::average
