#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace aoi {

using Age = std::int64_t;

enum class ErrorCode {
  OutOfRange,
  InvalidInput,
  SeriesDiverges,
  NotConverged,
  BracketFailed,
  TruncationTooSmall,
  IllegalAction,
  HorizonTooShort,
  SearchBracketFailed,
};

const char* to_string(ErrorCode code);

/// Error raised by every module. `field()` names the offending input when
/// there is one (e.g. "lambda" for an out-of-range arrival probability).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string field, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

enum class Criterion { Discounted, Average };

const char* to_string(Criterion c);

/// Per-user arrival probability lambda, success probability mu and the
/// derived per-slot delivery probability p = lambda * mu with q = 1 - p.
/// q is stored once so that every consumer sees the same rounding.
class UserParams {
 public:
  double lambda() const noexcept { return lambda_; }
  double mu() const noexcept { return mu_; }
  double p() const noexcept { return p_; }
  double q() const noexcept { return q_; }

  friend UserParams validate_params(double lambda, double mu);

 private:
  UserParams(double lambda, double mu);

  double lambda_;
  double mu_;
  double p_;
  double q_;
};

/// Throws Error{OutOfRange} unless 0 < lambda <= 1 and 0 < mu <= 1.
UserParams validate_params(double lambda, double mu);

class Discount {
 public:
  double beta() const noexcept { return beta_; }

  friend Discount validate_discount(double beta);

 private:
  explicit Discount(double beta) : beta_(beta) {}
  double beta_;
};

/// Throws Error{OutOfRange, "beta"} unless 0 < beta < 1.
Discount validate_discount(double beta);

struct LinearCost {
  double c;
};
struct QuadraticCost {
  double c;
};
/// c * 1{i > k}
struct ThresholdCost {
  double c;
  Age k;
};
/// values[j] is the cost at AoI j + 1 for j < L; beyond L the cost grows
/// geometrically, c_i = c_L * tail_rate^(i - L).
struct TabularCost {
  std::vector<double> values;
  double tail_rate;
};

/// Nonnegative nondecreasing AoI cost function c_i.
///
/// The fictitious AoI 0 always costs 0. The closed-form metric evaluators
/// treat state (b, 0) as "just delivered, nothing charged yet", and only
/// c_0 = 0 keeps those formulas equal to the policy-evaluation values.
class CostSpec {
 public:
  using Variant = std::variant<LinearCost, QuadraticCost, ThresholdCost, TabularCost>;

  static CostSpec linear(double c);
  static CostSpec quadratic(double c);
  static CostSpec threshold(double c, Age k);
  static CostSpec tabular(std::vector<double> values, double tail_rate);

  const Variant& variant() const noexcept { return v_; }
  std::string name() const;

  /// c_i for i >= 0.
  double cost(Age i) const;

  /// sum_{j>=1} ratio^(j-1) c_{i-1+j}; exact closed form for every variant.
  /// Throws SeriesDiverges when ratio is outside [0, 1) or, for tabular
  /// costs, when tail_rate * ratio >= 1.
  double tail_series(Age i, double ratio) const;

  /// Throws SeriesDiverges unless sum_i c_i ratio^i converges.
  void check_growth(double ratio) const;
  bool converges(double ratio) const noexcept;

  /// Smallest AoI from which the cost is constant, if it ever is.
  std::optional<Age> constant_from() const;

  /// lim_{i->inf} c_i (infinity when unbounded).
  double limit() const;

  bool is_zero() const;

 private:
  explicit CostSpec(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

/// (b, i): b = 1 when a packet was generated at the start of the slot.
struct State {
  int b = 0;
  Age i = 1;

  bool controllable() const noexcept { return b == 1; }
  friend bool operator==(const State&, const State&) = default;
};

/// The k-policy: attempt transmission in (1, j) iff j > k.
struct ThresholdPolicy {
  Age k = 0;

  bool active(State s) const noexcept { return s.b == 1 && s.i > k; }
};

}  // namespace aoi
