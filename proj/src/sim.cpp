#include "aoi/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aoi/average.hpp"
#include "aoi/discounted.hpp"
#include "aoi/parallel.hpp"

namespace aoi::sim {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::size_t at(Age i) { return static_cast<std::size_t>(i); }

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

double index_of(const UserParams& p, const CostSpec& c, Criterion criterion, const std::optional<Discount>& beta,
                Age i) {
  return criterion == Criterion::Discounted ? discounted::whittle_index(p, *beta, c, i)
                                            : average::avg_whittle_index(p, c, i);
}

std::vector<double> index_range(const UserParams& p, const CostSpec& c, Criterion criterion,
                                const std::optional<Discount>& beta, Age cap) {
  return criterion == Criterion::Discounted ? discounted::whittle_index_table(p, *beta, c, cap)
                                            : average::avg_whittle_index_table(p, c, cap);
}

void require_beta(const std::optional<Discount>& beta) {
  if (!beta) throw Error(ErrorCode::InvalidInput, "beta", "discounted criterion requires a discount factor");
}

}  // namespace

double uniform(std::uint64_t seed, std::uint64_t replication, std::uint64_t slot, std::uint64_t user, Draw purpose) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ replication);
  h = splitmix(h ^ slot);
  h = splitmix(h ^ user);
  h = splitmix(h ^ static_cast<std::uint64_t>(purpose));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

SystemInstance::SystemInstance(std::vector<User> users, int channels, std::optional<Discount> beta)
    : users_(std::move(users)), channels_(channels), beta_(beta) {
  if (users_.empty()) throw Error(ErrorCode::InvalidInput, "users", "instance needs at least one user");
  if (channels_ < 1 || static_cast<std::size_t>(channels_) >= users_.size())
    throw Error(ErrorCode::InvalidInput, "channels",
                "channel count must satisfy 1 <= M < N (M=" + std::to_string(channels_) +
                    ", N=" + std::to_string(users_.size()) + ")");
  for (std::size_t n = 0; n < users_.size(); ++n) {
    const auto& u = users_[n];
    if (u.initial_age < 1)
      throw Error(ErrorCode::InvalidInput, "users[" + std::to_string(n) + "].initial_age", "AoI must be >= 1");
    if (u.initial_packet && *u.initial_packet != 0 && *u.initial_packet != 1)
      throw Error(ErrorCode::InvalidInput, "users[" + std::to_string(n) + "].initial_packet", "must be 0 or 1");
  }
}

JointState initial_state(const SystemInstance& instance, const SlotKey& key) {
  JointState s;
  const std::size_t n = instance.size();
  s.packet.resize(n);
  s.age.resize(n);
  for (std::size_t u = 0; u < n; ++u) {
    const auto& user = instance.users()[u];
    s.age[u] = user.initial_age;
    s.packet[u] = user.initial_packet
                      ? *user.initial_packet
                      : (uniform(key.seed, key.replication, 0, u, Draw::Arrival) < user.params.lambda() ? 1 : 0);
  }
  return s;
}

StepResult step(const SystemInstance& instance, const JointState& state, const std::vector<std::uint8_t>& actions,
                const SlotKey& key) {
  const std::size_t n = instance.size();
  if (actions.size() != n || state.packet.size() != n || state.age.size() != n)
    throw Error(ErrorCode::InvalidInput, "actions", "state and action vectors must have one entry per user");
  int used = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (!actions[u]) continue;
    if (!state.packet[u])
      throw Error(ErrorCode::IllegalAction, "actions[" + std::to_string(u) + "]", "attempt without a packet");
    ++used;
  }
  if (used > instance.channels())
    throw Error(ErrorCode::IllegalAction, "actions", "more attempts than channels");

  StepResult r;
  r.next.packet.resize(n);
  r.next.age.resize(n);
  r.delivered.assign(n, 0);
  for (std::size_t u = 0; u < n; ++u) {
    const auto& user = instance.users()[u];
    r.cost += user.cost.cost(state.age[u]);
    bool ok = false;
    if (actions[u]) ok = uniform(key.seed, key.replication, key.slot, u, Draw::Success) < user.params.mu();
    r.delivered[u] = ok ? 1 : 0;
    r.next.age[u] = ok ? 1 : state.age[u] + 1;
    r.next.packet[u] =
        uniform(key.seed, key.replication, key.slot + 1, u, Draw::Arrival) < user.params.lambda() ? 1 : 0;
  }
  return r;
}

std::string Policy::name() const {
  switch (kind) {
    case PolicyKind::Whittle: return "whittle";
    case PolicyKind::Greedy: return "greedy";
    case PolicyKind::Random: return "random";
    case PolicyKind::FixedPriority: return "fixed";
  }
  return "unknown";
}

IndexTable::IndexTable(const User& user, Criterion criterion, std::optional<Discount> beta, Age cap)
    : params_(user.params), cost_(user.cost), criterion_(criterion), beta_(beta) {
  if (criterion == Criterion::Discounted) require_beta(beta);
  values_ = index_range(params_, cost_, criterion_, beta_, std::max<Age>(cap, 1));
}

double IndexTable::operator()(Age i) const {
  if (i >= 1 && i <= cap()) return values_[at(i - 1)];
  return index_of(params_, cost_, criterion_, beta_, i);
}

Scheduler::Scheduler(const SystemInstance& instance, Policy policy) : instance_(&instance), policy_(std::move(policy)) {
  if (policy_.kind == PolicyKind::Whittle) {
    for (const auto& u : instance.users()) {
      // Ten expected inter-delivery times under always-attempt.
      const Age cap = std::max<Age>(64, static_cast<Age>(std::ceil(10.0 / u.params.p())));
      tables_.emplace_back(u, policy_.criterion, instance.beta(), cap);
    }
  }
  if (policy_.kind == PolicyKind::FixedPriority) {
    std::vector<std::size_t> sorted = policy_.order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> ids(instance.size());
    std::iota(ids.begin(), ids.end(), 0);
    if (sorted != ids)
      throw Error(ErrorCode::InvalidInput, "order", "fixed priority order must be a permutation of the user ids");
  }
}

std::vector<std::uint8_t> Scheduler::choose(const JointState& state, const SlotKey& key) const {
  const std::size_t n = instance_->size();
  std::vector<std::uint8_t> act(n, 0);
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(n);
  for (std::size_t u = 0; u < n; ++u) {
    if (!state.packet[u]) continue;
    double prio = 0.0;
    switch (policy_.kind) {
      case PolicyKind::Whittle:
        prio = tables_[u](state.age[u]);
        if (prio < 0.0) continue;
        break;
      case PolicyKind::Greedy: prio = instance_->users()[u].cost.cost(state.age[u]); break;
      case PolicyKind::Random: prio = uniform(key.seed, key.replication, key.slot, u, Draw::Choice); break;
      case PolicyKind::FixedPriority: {
        const auto pos = std::find(policy_.order.begin(), policy_.order.end(), u) - policy_.order.begin();
        prio = -static_cast<double>(pos);
        break;
      }
    }
    ranked.emplace_back(prio, u);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  const std::size_t take = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(instance_->channels()));
  for (std::size_t j = 0; j < take; ++j) act[ranked[j].second] = 1;
  return act;
}

std::vector<std::uint8_t> choose_actions(const Policy& policy, const SystemInstance& instance,
                                         const JointState& state, const SlotKey& key) {
  return Scheduler(instance, policy).choose(state, key);
}

double discounted_tail_bound(const SystemInstance& instance, long horizon) {
  require_beta(instance.beta());
  const double b = instance.beta()->beta();
  double total = 0.0;
  for (const auto& u : instance.users()) {
    if (!u.cost.converges(b)) return std::numeric_limits<double>::infinity();
    total += u.cost.tail_series(u.initial_age + horizon, b);
  }
  return std::pow(b, static_cast<double>(horizon)) * total;
}

long required_horizon(const SystemInstance& instance, double tolerance) {
  long hi = 1;
  while (discounted_tail_bound(instance, hi) >= tolerance) {
    if (hi > (1L << 40)) throw Error(ErrorCode::HorizonTooShort, "horizon", "tail bound does not vanish");
    hi *= 2;
  }
  long lo = hi / 2;
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    (discounted_tail_bound(instance, mid) < tolerance ? hi : lo) = mid;
  }
  return hi;
}

SimOutcome run(const SystemInstance& instance, const Policy& policy, Criterion criterion, long horizon,
               long replications, std::uint64_t seed, const RunOptions& opts) {
  if (horizon < 1) throw Error(ErrorCode::InvalidInput, "horizon", "horizon must be positive");
  if (replications < 1) throw Error(ErrorCode::InvalidInput, "reps", "need at least one replication");
  const bool disc = criterion == Criterion::Discounted;
  SimOutcome out;
  out.policy = policy.name();
  out.criterion = criterion;
  out.replications = replications;
  out.seed = seed;
  out.horizon = horizon;
  if (disc) {
    require_beta(instance.beta());
    out.tail_bound = discounted_tail_bound(instance, horizon);
    if (std::isfinite(out.tail_bound) && out.tail_bound > opts.tail_tolerance)
      throw Error(ErrorCode::HorizonTooShort, "horizon",
                  "discounted tail bound " + std::to_string(out.tail_bound) + " exceeds tolerance; need horizon >= " +
                      std::to_string(required_horizon(instance, opts.tail_tolerance)));
  } else {
    out.burn_in_slots = static_cast<long>(std::floor(opts.burn_in * static_cast<double>(horizon)));
    if (out.burn_in_slots >= horizon) throw Error(ErrorCode::InvalidInput, "burn_in", "burn-in covers the horizon");
  }

  const Scheduler sched(instance, policy);
  const double beta = disc ? instance.beta()->beta() : 1.0;
  const long kept = horizon - out.burn_in_slots;
  const int batches = std::max(2, opts.batches);
  std::vector<double> cost(static_cast<std::size_t>(replications)), work(static_cast<std::size_t>(replications));
  std::vector<double> batch_cost, batch_work;
  if (!disc && replications == 1) {
    batch_cost.assign(static_cast<std::size_t>(batches), 0.0);
    batch_work.assign(static_cast<std::size_t>(batches), 0.0);
  }

  auto replicate = [&](std::size_t r) {
    SlotKey key{seed, r, 0};
    JointState s = initial_state(instance, key);
    double c = 0.0, w = 0.0, discount = 1.0;
    for (long t = 0; t < horizon; ++t) {
      key.slot = static_cast<std::uint64_t>(t);
      const auto act = sched.choose(s, key);
      auto res = step(instance, s, act, key);
      const double attempts = static_cast<double>(std::count(act.begin(), act.end(), std::uint8_t{1}));
      if (r == 0 && opts.trace) {
        for (std::size_t u = 0; u < instance.size(); ++u)
          *opts.trace << t << ',' << u << ',' << s.packet[u] << ',' << s.age[u] << ',' << int(act[u]) << ','
                      << int(res.delivered[u]) << '\n';
      }
      if (disc) {
        c += discount * res.cost;
        w += discount * attempts;
        discount *= beta;
      } else if (t >= out.burn_in_slots) {
        c += res.cost;
        w += attempts;
        if (!batch_cost.empty()) {
          const auto b = static_cast<std::size_t>((t - out.burn_in_slots) * batches / kept);
          batch_cost[b] += res.cost;
          batch_work[b] += attempts;
        }
      }
      s = std::move(res.next);
    }
    cost[r] = disc ? c : c / static_cast<double>(kept);
    work[r] = disc ? w : w / static_cast<double>(kept);
  };
  if (opts.trace) {
    for (std::size_t r = 0; r < cost.size(); ++r) replicate(r);
  } else {
    parallel_for(cost.size(), replicate);
  }

  const MeanSe mc = mean_se(cost), mw = mean_se(work);
  out.mean = mc.mean;
  out.std_error = mc.se;
  out.work_mean = mw.mean;
  out.work_std_error = mw.se;
  if (!batch_cost.empty()) {
    // Batch means: batch b holds slots [b kept / B, (b + 1) kept / B).
    std::vector<double> bc, bw;
    for (int b = 0; b < batches; ++b) {
      const long lo = static_cast<long>(std::ceil(static_cast<double>(b) * kept / batches));
      const long hi = static_cast<long>(std::ceil(static_cast<double>(b + 1) * kept / batches));
      if (hi <= lo) continue;
      bc.push_back(batch_cost[static_cast<std::size_t>(b)] / static_cast<double>(hi - lo));
      bw.push_back(batch_work[static_cast<std::size_t>(b)] / static_cast<double>(hi - lo));
    }
    out.std_error = mean_se(bc).se;
    out.work_std_error = mean_se(bw).se;
  }
  return out;
}

ThresholdRun simulate_threshold(const UserParams& params, const CostSpec& cost, Age k, Criterion criterion,
                                std::optional<Discount> beta, State start, long horizon, long replications,
                                std::uint64_t seed, double burn_in) {
  if (horizon < 1 || replications < 1) throw Error(ErrorCode::InvalidInput, "horizon", "horizon and reps must be positive");
  if (start.i < 1 || (start.b != 0 && start.b != 1)) throw Error(ErrorCode::InvalidInput, "start", "invalid start state");
  const bool disc = criterion == Criterion::Discounted;
  if (disc) require_beta(beta);
  const double b = disc ? beta->beta() : 1.0;
  const long skip = disc ? 0 : static_cast<long>(std::floor(burn_in * static_cast<double>(horizon)));
  const long kept = horizon - skip;
  const ThresholdPolicy pol{k};
  std::vector<double> work(static_cast<std::size_t>(replications)), cst(static_cast<std::size_t>(replications));
  parallel_for(work.size(), [&](std::size_t r) {
    State s = start;
    double w = 0.0, c = 0.0, d = 1.0;
    for (long t = 0; t < horizon; ++t) {
      const auto slot = static_cast<std::uint64_t>(t);
      const bool act = pol.active(s);
      const double ci = cost.cost(s.i);
      const bool ok = act && uniform(seed, r, slot, 0, Draw::Success) < params.mu();
      if (disc) {
        w += d * (act ? 1.0 : 0.0);
        c += d * ci;
        d *= b;
      } else if (t >= skip) {
        w += act ? 1.0 : 0.0;
        c += ci;
      }
      s.i = ok ? 1 : s.i + 1;
      s.b = uniform(seed, r, slot + 1, 0, Draw::Arrival) < params.lambda() ? 1 : 0;
    }
    work[r] = disc ? w : w / static_cast<double>(kept);
    cst[r] = disc ? c : c / static_cast<double>(kept);
  });
  ThresholdRun out;
  const MeanSe mw = mean_se(work), mc = mean_se(cst);
  out.work_mean = mw.mean;
  out.work_std_error = mw.se;
  out.cost_mean = mc.mean;
  out.cost_std_error = mc.se;
  out.replications = replications;
  out.horizon = horizon;
  return out;
}

namespace {

/// Optimal single-user policy under charge nu: the index threshold k(nu),
/// found on a lazily extended index table.
class ChargeLadder {
 public:
  ChargeLadder(const User& user, Criterion criterion, std::optional<Discount> beta)
      : user_(user), criterion_(criterion), beta_(beta) {
    extend(std::max<Age>(256, static_cast<Age>(std::ceil(20.0 / user.params.p()))));
  }

  /// Number of ages with index below nu; nullopt when every age is below.
  std::optional<Age> threshold(double nu) {
    constexpr Age kMaxCap = Age{1} << 21;
    while (table_.back() < nu) {
      if (settled() || cap() >= kMaxCap) return std::nullopt;
      extend(2 * cap());
    }
    return static_cast<Age>(std::lower_bound(table_.begin(), table_.end(), nu) - table_.begin());
  }

  struct Point {
    double value, work;
    Age k;  // -1: never attempt
  };

  Point evaluate(double nu) {
    const auto k = threshold(nu);
    const auto& p = user_.params;
    const double lam = p.lambda();
    const Age i0 = user_.initial_age;
    // Initial packet weights.
    const double w1 = user_.initial_packet ? double(*user_.initial_packet) : lam;
    if (!k) {
      double f;
      if (criterion_ == Criterion::Discounted) f = user_.cost.tail_series(i0, beta_->beta());
      else f = user_.cost.limit();
      return {f, 0.0, -1};
    }
    if (criterion_ == Criterion::Average) {
      const auto m = average::avg_metrics(p, user_.cost, *k);
      return {m.cost + nu * m.work, m.work, *k};
    }
    const discounted::CostProfile prof(p, *beta_, user_.cost, *k);
    auto mix = [&](auto&& fn) { return (1 - w1) * fn(State{0, i0}) + w1 * fn(State{1, i0}); };
    const double f = mix([&](State s) { return discounted::cost_metric(prof, p, user_.cost, s); });
    const double g = mix([&](State s) { return discounted::work_metric(p, *beta_, *k, s); });
    return {f + nu * g, g, *k};
  }

 private:
  Age cap() const { return static_cast<Age>(table_.size()); }

  void extend(Age cap) { table_ = index_range(user_.params, user_.cost, criterion_, beta_, cap); }

  /// Bounded cost whose index has stopped moving: the tail never crosses nu.
  bool settled() const {
    const auto from = user_.cost.constant_from();
    if (!from || cap() < 2 * (*from) + 64) return false;
    const double a = table_[table_.size() - 1], b = table_[table_.size() / 2];
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
  }

  const User& user_;
  Criterion criterion_;
  std::optional<Discount> beta_;
  std::vector<double> table_;
};

double capacity_of(const SystemInstance& instance, Criterion criterion) {
  const double m = instance.channels();
  return criterion == Criterion::Discounted ? m / (1.0 - instance.beta()->beta()) : m;
}

struct LagrangePoint {
  double value;
  double work;
  std::vector<ChargeLadder::Point> users;
};

LagrangePoint lagrange_at(std::vector<ChargeLadder>& ladders, double capacity, double nu) {
  LagrangePoint lp{0.0, 0.0, {}};
  for (auto& l : ladders) {
    lp.users.push_back(l.evaluate(nu));
    lp.value += lp.users.back().value;
    lp.work += lp.users.back().work;
  }
  lp.value -= capacity * nu;
  return lp;
}

std::vector<ChargeLadder> make_ladders(const SystemInstance& instance, Criterion criterion) {
  if (criterion == Criterion::Discounted) require_beta(instance.beta());
  std::vector<ChargeLadder> ladders;
  for (const auto& u : instance.users()) ladders.emplace_back(u, criterion, instance.beta());
  return ladders;
}

}  // namespace

double lagrangian(const SystemInstance& instance, Criterion criterion, double nu) {
  if (!(nu >= 0.0)) throw Error(ErrorCode::InvalidInput, "nu", "charge must be nonnegative");
  auto ladders = make_ladders(instance, criterion);
  return lagrange_at(ladders, capacity_of(instance, criterion), nu).value;
}

DualBound dual_bound(const SystemInstance& instance, Criterion criterion, double tolerance) {
  auto ladders = make_ladders(instance, criterion);
  const double cap = capacity_of(instance, criterion);
  DualBound out;
  out.criterion = criterion;
  out.capacity = cap;
  auto L = [&](double nu) {
    ++out.evaluations;
    return lagrange_at(ladders, cap, nu);
  };

  // Supergradient sum G - capacity turns negative at hi.
  double hi = 1.0;
  while (L(hi).work >= cap) {
    hi *= 2.0;
    if (hi > 0x1.0p60) throw Error(ErrorCode::SearchBracketFailed, "nu", "work never falls below capacity");
  }

  // Concavity over the bracket.
  constexpr int kGrid = 64;
  std::vector<double> grid(kGrid + 1);
  double best_nu = 0.0, best = -std::numeric_limits<double>::infinity(), vscale = 1.0;
  for (int j = 0; j <= kGrid; ++j) {
    const double nu = hi * j / kGrid;
    grid[static_cast<std::size_t>(j)] = L(nu).value;
    vscale = std::max(vscale, std::abs(grid[static_cast<std::size_t>(j)]));
    if (grid[static_cast<std::size_t>(j)] > best) best = grid[static_cast<std::size_t>(j)], best_nu = nu;
  }
  for (int j = 1; j < kGrid; ++j) {
    const double second = grid[static_cast<std::size_t>(j + 1)] - 2 * grid[static_cast<std::size_t>(j)] +
                          grid[static_cast<std::size_t>(j - 1)];
    if (second > 1e-9 * vscale)
      throw Error(ErrorCode::SearchBracketFailed, "nu",
                  "Lagrangian is not concave on the search bracket near nu=" + std::to_string(hi * j / kGrid));
  }

  // Golden-section search on [lo, up].
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, up = hi;
  double x1 = up - inv_phi * (up - lo), x2 = lo + inv_phi * (up - lo);
  double f1 = L(x1).value, f2 = L(x2).value;
  while (up - lo > tolerance * std::max(1.0, hi)) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (up - lo);
      f2 = L(x2).value;
    } else {
      up = x2;
      x2 = x1;
      f2 = f1;
      x1 = up - inv_phi * (up - lo);
      f1 = L(x1).value;
    }
  }
  const double mid = 0.5 * (lo + up);
  const auto at_mid = L(mid);
  if (at_mid.value >= best) best = at_mid.value, best_nu = mid;

  const auto fin = L(best_nu);
  out.nu_star = best_nu;
  out.value = fin.value;
  for (const auto& u : fin.users) {
    out.user_values.push_back(u.value);
    out.user_work.push_back(u.work);
    out.user_thresholds.push_back(u.k);
  }
  out.slackness_residual = best_nu * (fin.work - cap);
  return out;
}

}  // namespace aoi::sim
