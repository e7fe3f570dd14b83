#pragma once

#include <vector>

#include "aoi/core.hpp"

namespace aoi::average {

/// Long-run average work and cost of the k-policy. Both are independent of
/// the initial state.
struct AvgMetrics {
  Age k = 0;
  double work = 0.0;
  double cost = 0.0;
};

AvgMetrics avg_metrics(const UserParams& params, const CostSpec& cost, Age k);

/// G^k = lambda / (k p + 1).
double avg_work_metric(const UserParams& params, Age k);

/// g_{(1,i)}^k = ((k - i)^+ p + 1) / (k p + 1).
double avg_marginal_work(const UserParams& params, Age k, Age i);

/// F^k = [p sum_{j<k} c_j + p (c_k + C_{k+1}(q))] / (k p + 1).
double avg_cost_metric(const UserParams& params, const CostSpec& cost, Age k);

/// f_{(1,i)}^i = mu / (i p + 1) (i p C_{i+1}(q) - sum_{j=0}^{i} c_j).
double avg_marginal_cost(const UserParams& params, const CostSpec& cost, Age i);

double avg_whittle_index_general(const UserParams& params, const CostSpec& cost, Age i);
double avg_whittle_index_linear(const UserParams& params, double c, Age i);
double avg_whittle_index_quadratic(const UserParams& params, double c, Age i);
double avg_whittle_index_threshold(const UserParams& params, double c, Age k, Age i);

/// m_{(1,i)} with special-cost dispatch.
double avg_whittle_index(const UserParams& params, const CostSpec& cost, Age i);

/// m_{(1,i)} for i = 1..i_max in O(i_max); element 0 holds i = 1.
std::vector<double> avg_whittle_index_table(const UserParams& params, const CostSpec& cost, Age i_max);

}  // namespace aoi::average
