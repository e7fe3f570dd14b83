#pragma once

// N-user, M-channel slot simulator, scheduling policies, Monte-Carlo cost
// estimators and the Lagrangian dual lower bound.
//
// Randomness is a pure function of (seed, replication, slot, user, purpose),
// so a run is reproducible regardless of thread count or evaluation order.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aoi/core.hpp"

namespace aoi::sim {

struct User {
  UserParams params;
  CostSpec cost;
  /// AoI at slot 0.
  Age initial_age = 1;
  /// Packet indicator at slot 0; drawn from Bernoulli(lambda) when absent.
  std::optional<int> initial_packet;
};

class SystemInstance {
 public:
  /// Requires 1 <= channels < users.size().
  SystemInstance(std::vector<User> users, int channels, std::optional<Discount> beta = std::nullopt);

  const std::vector<User>& users() const noexcept { return users_; }
  std::size_t size() const noexcept { return users_.size(); }
  int channels() const noexcept { return channels_; }
  const std::optional<Discount>& beta() const noexcept { return beta_; }

 private:
  std::vector<User> users_;
  int channels_;
  std::optional<Discount> beta_;
};

struct JointState {
  std::vector<int> packet;
  std::vector<Age> age;
};

enum class Draw : std::uint64_t { Arrival = 1, Success = 2, Choice = 3 };

/// Uniform [0, 1) draw keyed by (seed, replication, slot, user, purpose).
double uniform(std::uint64_t seed, std::uint64_t replication, std::uint64_t slot, std::uint64_t user, Draw purpose);

/// Slot coordinates for the counter-based generator.
struct SlotKey {
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
  std::uint64_t slot = 0;
};

struct StepResult {
  JointState next;
  double cost = 0.0;
  std::vector<std::uint8_t> delivered;
};

/// Advances one slot. Cost is charged on the slot-start ages. Throws
/// IllegalAction when more than M users attempt or a user without a packet
/// attempts.
StepResult step(const SystemInstance& instance, const JointState& state, const std::vector<std::uint8_t>& actions,
                const SlotKey& key);

JointState initial_state(const SystemInstance& instance, const SlotKey& key);

enum class PolicyKind { Whittle, Greedy, Random, FixedPriority };

struct Policy {
  PolicyKind kind = PolicyKind::Whittle;
  /// Which index the Whittle policy reads.
  Criterion criterion = Criterion::Average;
  /// FixedPriority: user ids from highest to lowest priority.
  std::vector<std::size_t> order;

  static Policy whittle(Criterion c) { return {PolicyKind::Whittle, c, {}}; }
  static Policy greedy() { return {PolicyKind::Greedy, Criterion::Average, {}}; }
  static Policy random() { return {PolicyKind::Random, Criterion::Average, {}}; }
  static Policy fixed(std::vector<std::size_t> order) { return {PolicyKind::FixedPriority, Criterion::Average, std::move(order)}; }

  std::string name() const;
};

/// Whittle index values of one user, precomputed up to a cap and evaluated
/// directly beyond it. Immutable after construction.
class IndexTable {
 public:
  IndexTable(const User& user, Criterion criterion, std::optional<Discount> beta, Age cap);

  double operator()(Age i) const;
  Age cap() const noexcept { return static_cast<Age>(values_.size()); }

 private:
  UserParams params_;
  CostSpec cost_;
  Criterion criterion_;
  std::optional<Discount> beta_;
  std::vector<double> values_;  // ages 1..cap
};

/// Per-instance scheduling state prepared once per policy.
class Scheduler {
 public:
  Scheduler(const SystemInstance& instance, Policy policy);

  /// Up to M attempts among users with a packet, by decreasing priority,
  /// ties to the lowest user id. The Whittle policy skips negative indices.
  std::vector<std::uint8_t> choose(const JointState& state, const SlotKey& key) const;

  const Policy& policy() const noexcept { return policy_; }

 private:
  const SystemInstance* instance_;
  Policy policy_;
  std::vector<IndexTable> tables_;
};

std::vector<std::uint8_t> choose_actions(const Policy& policy, const SystemInstance& instance,
                                         const JointState& state, const SlotKey& key);

struct RunOptions {
  /// Average criterion: fraction of slots discarded as burn-in.
  double burn_in = 0.1;
  /// Discounted criterion: HorizonTooShort when the tail bound exceeds this.
  double tail_tolerance = 1e-6;
  /// Batches for the batch-means error when replications == 1.
  int batches = 20;
  /// Optional per-slot trace of replication 0 (slot,user,b,i,action,success).
  std::ostream* trace = nullptr;
};

struct SimOutcome {
  std::string policy;
  Criterion criterion = Criterion::Average;
  double mean = 0.0;
  double std_error = 0.0;
  /// Attempts: discounted count or long-run rate, with its standard error.
  double work_mean = 0.0;
  double work_std_error = 0.0;
  long replications = 0;
  std::uint64_t seed = 0;
  long horizon = 0;
  long burn_in_slots = 0;
  /// Discounted: bound on the cost beyond the horizon (infinite if unknown).
  double tail_bound = 0.0;
};

SimOutcome run(const SystemInstance& instance, const Policy& policy, Criterion criterion, long horizon,
               long replications, std::uint64_t seed, const RunOptions& opts = {});

/// Upper bound on the discounted cost incurred from slot `horizon` on.
double discounted_tail_bound(const SystemInstance& instance, long horizon);

/// Smallest horizon whose discounted tail bound is below tolerance.
long required_horizon(const SystemInstance& instance, double tolerance);

/// Single user under the k-policy, without a channel constraint.
struct ThresholdRun {
  double work_mean = 0.0, work_std_error = 0.0;
  double cost_mean = 0.0, cost_std_error = 0.0;
  long replications = 0;
  long horizon = 0;
};

ThresholdRun simulate_threshold(const UserParams& params, const CostSpec& cost, Age k, Criterion criterion,
                                std::optional<Discount> beta, State start, long horizon, long replications,
                                std::uint64_t seed, double burn_in = 0.1);

struct DualBound {
  Criterion criterion = Criterion::Average;
  double nu_star = 0.0;
  double value = 0.0;
  /// Per-user charged optimum at nu_star and the work it uses.
  std::vector<double> user_values;
  std::vector<double> user_work;
  std::vector<Age> user_thresholds;  // -1 encodes "never attempt"
  /// M / (1 - beta) for discounted, M for average.
  double capacity = 0.0;
  /// nu* (sum of work - capacity).
  double slackness_residual = 0.0;
  int evaluations = 0;
};

/// Lagrangian value L(nu) = sum_n V_n(nu) - capacity nu.
double lagrangian(const SystemInstance& instance, Criterion criterion, double nu);

/// max over nu >= 0 of L(nu) by golden-section search; the bracket is checked
/// for concavity on a 64-point grid (SearchBracketFailed otherwise).
DualBound dual_bound(const SystemInstance& instance, Criterion criterion, double tolerance = 1e-9);

}  // namespace aoi::sim
