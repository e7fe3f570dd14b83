#pragma once

// Closed-form discounted metrics of the single-user k-policy and the
// discounted Whittle (marginal productivity) index.
//
// Numerical note: for beta > 1 - 1e-6 the general index formula divides a
// difference of nearly equal terms by 1 - beta. The special-cost fast paths
// keep (1 - beta^i) / (1 - beta) as a geometric sum and stay accurate; the
// general and tabular paths lose roughly log10(1 / (1 - beta)) digits.

#include <vector>

#include "aoi/core.hpp"

namespace aoi::discounted {

/// sigma_i = 1 - beta q - beta^(i+1) p; positive and nondecreasing in i.
class SigmaCache {
 public:
  SigmaCache(const UserParams& params, Discount beta);

  double operator()(Age i) const;

 private:
  double beta_;
  double p_;
  double q_;
};

/// Gamma_i^k: the work metric of the k-policy from uncontrollable state (0, i).
class WorkProfile {
 public:
  WorkProfile(const UserParams& params, Discount beta, Age k);

  Age k() const noexcept { return k_; }
  double gamma(Age i) const;

 private:
  double beta_;
  Age k_;
  double gamma_k_;
};

/// Phi_i^k: the cost metric of the k-policy from (0, i), i >= 0.
///
/// Phi_0..Phi_k are materialized on construction. For i > k the value comes
/// from the forward identity
///   Phi_i = beta p Phi_0 / (1 - beta q) + c_i + beta C_{i+1},
/// which is what the pivot formula reduces to once its (beta q)^(k-i)
/// factor is cancelled; `phi_pivot_form` keeps the uncancelled version.
class CostProfile {
 public:
  CostProfile(const UserParams& params, Discount beta, const CostSpec& cost, Age k);

  Age k() const noexcept { return k_; }
  double phi(Age i) const;
  double phi_pivot_form(Age i) const;

 private:
  UserParams params_;
  double beta_;
  CostSpec cost_;
  Age k_;
  std::vector<double> head_;  // Phi_0 .. Phi_k
};

double sigma(const UserParams& params, Discount beta, Age i);

/// G_{(b,i)}^k.
double work_metric(const UserParams& params, Discount beta, Age k, State s);

/// g_{(1,i)}^k = sigma_{(k-i)^+} / sigma_k.
double marginal_work(const UserParams& params, Discount beta, Age k, Age i);

/// F_{(b,i)}^k.
double cost_metric(const UserParams& params, Discount beta, const CostSpec& cost, Age k, State s);
double cost_metric(const CostProfile& profile, const UserParams& params, const CostSpec& cost, State s);

/// f_{(1,i)}^k = mu (Phi_i - Phi_0 - c_i).
double marginal_cost(const UserParams& params, Discount beta, const CostSpec& cost, Age k, Age i);

/// f_{(1,i)}^i through the direct diagonal formula (no profile).
double marginal_cost_diagonal(const UserParams& params, Discount beta, const CostSpec& cost, Age i);

/// The general index formula, without special-cost dispatch.
double whittle_index_general(const UserParams& params, Discount beta, const CostSpec& cost, Age i);

/// Special-cost closed forms.
double whittle_index_linear(const UserParams& params, Discount beta, double c, Age i);
double whittle_index_quadratic(const UserParams& params, Discount beta, double c, Age i);
double whittle_index_threshold(const UserParams& params, Discount beta, double c, Age k, Age i);

/// m_{beta,(1,i)}, dispatching to the special-cost closed forms.
double whittle_index(const UserParams& params, Discount beta, const CostSpec& cost, Age i);

/// m_{beta,(1,i)} for i = 1..i_max in one O(i_max) pass; element 0 holds i = 1.
std::vector<double> whittle_index_table(const UserParams& params, Discount beta, const CostSpec& cost,
                                        Age i_max);

}  // namespace aoi::discounted
