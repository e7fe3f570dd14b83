#pragma once

// Executable checks of the indexability conditions and of the structural
// properties of the index. Every check returns a VerificationReport with
// pass <=> worst_violation <= tolerance; a positive violation is the amount
// by which the property fails at the witness point.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aoi/core.hpp"
#include "aoi/oracle.hpp"

namespace aoi::indexability {

enum class ConditionId {
  Pcli1,
  Pcli2,
  LambdaMonotone,
  MuMonotoneLinear,
  QuadraticMuMinimum,
  ThresholdMuSwitch,
  SpecialVsGeneral,
  VanishingDiscount,
  RecursionResidual,
  ThresholdOptimality,
  OracleIndex,
};

const char* to_string(ConditionId id);

struct VerificationReport {
  ConditionId id = ConditionId::Pcli1;
  std::string grid;
  bool pass = false;
  double worst_violation = 0.0;
  double tolerance = 0.0;
  /// Extreme observed quantity (e.g. min marginal work), for reporting.
  double observed = 0.0;
  /// Named coordinates of the worst point.
  std::vector<std::pair<std::string, double>> witness;
  /// Grid cells skipped because the cost series diverges there.
  long skipped = 0;
};

/// Min of marginal work over i = 1..i_max, k = 0..k_max against the floor
/// 1 - beta (discounted) or 0 (average).
VerificationReport verify_pcli1(const UserParams& params, std::optional<Discount> beta, Criterion criterion,
                                Age i_max, Age k_max);

/// Min consecutive index difference over i = 1..i_max; tolerance 1e-9.
VerificationReport verify_pcli2(const UserParams& params, std::optional<Discount> beta, Criterion criterion,
                                const CostSpec& cost, Age i_max);

struct ThresholdCheckOptions {
  double guard_fraction = 0.2;
  double tie_tolerance = 1e-8;
  oracle::SolveOptions solve{};
};

/// The oracle-optimal action at charge nu in (1, j), j <= i_max - guard band,
/// must be "attempt" iff the index at j is at least nu (ties within
/// tie_tolerance accept either). Throws TruncationTooSmall when the index
/// crossing lies inside the checked range but the oracle switches in the band.
VerificationReport verify_threshold_optimality(const UserParams& params, std::optional<Discount> beta,
                                               Criterion criterion, const CostSpec& cost, double nu, Age i_max,
                                               const ThresholdCheckOptions& opts = {});

/// Index nonincreasing in lambda on lambda = step, 2 step, ..., 1.
VerificationReport verify_lambda_monotone(double mu, std::optional<Discount> beta, Criterion criterion,
                                          const CostSpec& cost, const std::vector<Age>& ages, double step = 0.01);

/// Linear cost: index increasing in mu; for the average criterion at i = 1
/// constant at c / lambda instead.
VerificationReport verify_mu_monotone_linear(double lambda, std::optional<Discount> beta, Criterion criterion,
                                             double c, const std::vector<Age>& ages, double step = 0.01);

/// Average quadratic index at age i: grid argmin over mu against
/// 1 / (lambda sqrt 7) (only meaningful at i = 5 with lambda > 1/sqrt 7).
VerificationReport verify_quadratic_mu_minimum(double lambda, double c, Age i, double step = 1e-3);

/// Average threshold-cost index at i < K switches from increasing to
/// decreasing in mu at 1 / (lambda (K - i + 1)).
VerificationReport verify_threshold_mu_switch(double lambda, double c, Age K, Age i, double step = 1e-3);

/// Special closed forms against the general formula over params x ages.
VerificationReport verify_special_vs_general(const std::vector<UserParams>& params, std::optional<Discount> beta,
                                             Criterion criterion, Age i_max, double tolerance = 1e-10);

/// |(1 - beta) G_beta - G| and |(1 - beta) F_beta - F| over the states
/// (b, i), i = 1..i_check, at the last beta of the sequence; also records
/// whether the gap shrank along the sequence.
VerificationReport verify_vanishing_discount(const UserParams& params, const CostSpec& cost,
                                             const std::vector<Age>& ks, const std::vector<double>& betas,
                                             Age i_check, double tolerance = 1e-3);

/// Residual of the work and cost recursions of the closed-form profiles on
/// i = 0..i_test, relative to the profile magnitude for cost.
VerificationReport verify_recursion_residual(const UserParams& params, Discount beta, const CostSpec& cost,
                                             const std::vector<Age>& ks, Age i_test, double tolerance = 1e-9);

/// Bisection index against the closed form at the given ages.
VerificationReport verify_oracle_index(const UserParams& params, std::optional<Discount> beta, Criterion criterion,
                                       const CostSpec& cost, const std::vector<Age>& ages, Age i_max,
                                       double tolerance = 1e-6);

/// Closed-form index at age i for either criterion.
double index_value(const UserParams& params, std::optional<Discount> beta, Criterion criterion, const CostSpec& cost,
                   Age i);

std::vector<double> index_table(const UserParams& params, std::optional<Discount> beta, Criterion criterion,
                                const CostSpec& cost, Age i_max);

}  // namespace aoi::indexability
