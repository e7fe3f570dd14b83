#pragma once

// Brute-force ground truth on the AoI-truncated single-user chain.
//
// Ages are capped at i_max: any transition to i_max + 1 lands on i_max.
// Every transition of the chain goes either to age i + 1 or back to age 1,
// so the value of an arbitrary stationary policy solves exactly by one
// backward sweep over ages plus a scalar equation for the age-1 value. The
// solvers below rely on that sparsity only; they never assume the policy
// is of threshold type and never call the closed-form evaluators.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aoi/core.hpp"

namespace aoi::oracle {

struct Transition {
  State to;
  double prob;
};

class TruncatedModel {
 public:
  TruncatedModel(UserParams params, std::optional<Discount> beta, CostSpec cost, Age i_max);

  const UserParams& params() const noexcept { return params_; }
  const std::optional<Discount>& beta() const noexcept { return beta_; }
  const CostSpec& cost() const noexcept { return cost_; }
  Age i_max() const noexcept { return i_max_; }

  /// Outgoing row of state s under action (1 = attempt). Throws IllegalAction
  /// for an attempt in an uncontrollable state.
  std::vector<Transition> transitions(State s, int action) const;

  /// Throws InvalidInput when the criterion needs a discount the model lacks.
  void require(Criterion criterion) const;

 private:
  UserParams params_;
  std::optional<Discount> beta_;
  CostSpec cost_;
  Age i_max_;
};

/// Active flags per age; element i is the action in (1, i). Element 0 is unused.
using ActionVector = std::vector<std::uint8_t>;

ActionVector threshold_actions(Age i_max, Age k);

/// Metrics of one stationary policy.
/// Discounted: per-state work and cost, indexed by age 0..i_max (age 0 is the
/// fictitious post-delivery state). Average: long-run rates plus the
/// stationary distribution.
struct PolicyEvaluation {
  Criterion criterion = Criterion::Discounted;
  std::vector<double> work0, work1, cost0, cost1;
  double avg_work = 0.0;
  double avg_cost = 0.0;
  std::vector<double> stationary0, stationary1;
  double residual = 0.0;
};

PolicyEvaluation evaluate_policy(const TruncatedModel& model, const ActionVector& active, Criterion criterion);

/// Metrics of the k-policy.
PolicyEvaluation policy_eval(const TruncatedModel& model, Age k, Criterion criterion);

enum class SolveMethod { PolicyIteration, ValueIteration };

struct SolveOptions {
  SolveMethod method = SolveMethod::PolicyIteration;
  double tolerance = 1e-8;
  long max_iterations = 2'000'000;
  /// Initial policy for policy iteration.
  const ActionVector* warm_start = nullptr;
};

/// Optimal solution of the nu-charged subproblem min F + nu G.
struct DPResult {
  Criterion criterion = Criterion::Discounted;
  double nu = 0.0;
  /// Discounted values, or relative values for the average criterion.
  std::vector<double> value0, value1;
  ActionVector active;
  double gain = 0.0;
  double residual = 0.0;
  long iterations = 0;
  /// active(1,i) - passive(1,i) action-value difference per age.
  std::vector<double> advantage;

  /// True when the actions read passive...passive active...active.
  bool is_threshold() const;
  /// k such that (1, j) is active iff j > k; i_max when never active.
  std::optional<Age> threshold() const;
};

DPResult solve_charged(const TruncatedModel& model, double nu, Criterion criterion, const SolveOptions& opts = {});

/// Charge at which the optimal action in (1, i) flips, located by doubling
/// from nu = 0 and then bisecting to width tol.
double index_by_bisection(const TruncatedModel& model, Age i, Criterion criterion, double tol = 1e-7,
                          const SolveOptions& opts = {});

/// A truncation level at which the tail beyond i_focus carries weight below
/// eps relative to 1 + c(i_focus) (ratio beta*q or q, times the cost growth).
/// Throws TruncationTooSmall when the costs overflow before that level.
Age suggested_truncation(const UserParams& params, std::optional<Discount> beta, const CostSpec& cost,
                         Criterion criterion, Age i_focus, double eps = 1e-13, Age min_imax = 64);

}  // namespace aoi::oracle
