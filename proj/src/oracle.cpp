#include "aoi/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aoi::oracle {

namespace {

using Vec = std::vector<double>;

std::size_t at(Age i) { return static_cast<std::size_t>(i); }

/// Renewal-form solution: W[i] = (1-lambda) V(0,i) + lambda V(1,i) for
/// ages 1..n, U = W[1], and the gain for the average criterion.
struct Sweep {
  Vec w;
  double u = 0.0;
  double gain = 0.0;
};

/// Per-age aggregates of one policy: expected reward R_i, probability of
/// not resetting S_i and probability of resetting T_i.
struct Aggregates {
  Vec r, s, t;
};

Aggregates aggregate(const UserParams& pr, const Vec& r0, const Vec& r1, const ActionVector& a, Age n) {
  const double lam = pr.lambda();
  const double mu = pr.mu();
  Aggregates g{Vec(at(n) + 1), Vec(at(n) + 1), Vec(at(n) + 1)};
  for (Age i = 1; i <= n; ++i) {
    const double act = a[at(i)] ? 1.0 : 0.0;
    g.r[at(i)] = (1.0 - lam) * r0[at(i)] + lam * r1[at(i)];
    g.s[at(i)] = (1.0 - lam) + lam * (1.0 - mu * act);
    g.t[at(i)] = lam * mu * act;
  }
  return g;
}

Sweep sweep_discounted(const UserParams& pr, double beta, const Vec& r0, const Vec& r1, const ActionVector& a,
                       Age n) {
  const Aggregates g = aggregate(pr, r0, r1, a, n);
  Vec A(at(n) + 1), B(at(n) + 1);
  const double denom = 1.0 - beta * g.s[at(n)];
  A[at(n)] = g.r[at(n)] / denom;
  B[at(n)] = beta * g.t[at(n)] / denom;
  for (Age i = n - 1; i >= 1; --i) {
    A[at(i)] = g.r[at(i)] + beta * g.s[at(i)] * A[at(i + 1)];
    B[at(i)] = beta * g.s[at(i)] * B[at(i + 1)] + beta * g.t[at(i)];
  }
  Sweep out;
  out.u = A[1] / (1.0 - B[1]);
  out.w.assign(at(n) + 1, 0.0);
  for (Age i = 1; i <= n; ++i) out.w[at(i)] = A[at(i)] + B[at(i)] * out.u;
  return out;
}

Sweep sweep_average(const UserParams& pr, const Vec& r0, const Vec& r1, const ActionVector& a, Age n) {
  const Aggregates g = aggregate(pr, r0, r1, a, n);
  Sweep out;
  out.w.assign(at(n) + 1, 0.0);
  if (a[at(n)]) {
    // Age 1 is recurrent: normalize W[1] = 0, W_i = A_i - gain D_i.
    Vec A(at(n) + 1), D(at(n) + 1);
    A[at(n)] = g.r[at(n)] / (1.0 - g.s[at(n)]);
    D[at(n)] = 1.0 / (1.0 - g.s[at(n)]);
    for (Age i = n - 1; i >= 1; --i) {
      A[at(i)] = g.r[at(i)] + g.s[at(i)] * A[at(i + 1)];
      D[at(i)] = 1.0 + g.s[at(i)] * D[at(i + 1)];
    }
    out.gain = A[1] / D[1];
    out.u = 0.0;
    for (Age i = 1; i <= n; ++i) out.w[at(i)] = A[at(i)] - out.gain * D[at(i)];
    out.w[1] = 0.0;
  } else {
    // The capped age is absorbing; normalize W[n] = 0.
    out.gain = g.r[at(n)];
    Vec A(at(n) + 1, 0.0), B(at(n) + 1, 0.0);
    for (Age i = n - 1; i >= 1; --i) {
      A[at(i)] = g.r[at(i)] - out.gain + g.s[at(i)] * A[at(i + 1)];
      B[at(i)] = g.s[at(i)] * B[at(i + 1)] + g.t[at(i)];
    }
    out.u = A[1] / (1.0 - B[1]);
    for (Age i = 1; i <= n; ++i) out.w[at(i)] = A[at(i)] + B[at(i)] * out.u;
  }
  return out;
}

/// Per-state values from a sweep (discount 1 and gain subtracted for average).
void state_values(const UserParams& pr, double beta, double gain, const Vec& r0, const Vec& r1,
                  const ActionVector& a, const Sweep& sw, Age n, Vec& v0, Vec& v1) {
  const double mu = pr.mu();
  v0.assign(at(n) + 1, 0.0);
  v1.assign(at(n) + 1, 0.0);
  for (Age i = 1; i <= n; ++i) {
    const double wn = sw.w[at(std::min(i + 1, n))];
    const double act = a[at(i)] ? 1.0 : 0.0;
    v0[at(i)] = r0[at(i)] - gain + beta * wn;
    v1[at(i)] = r1[at(i)] - gain + beta * (1.0 - mu * act) * wn + beta * mu * act * sw.u;
  }
}

/// active - passive action value in (1, i) given W and U.
double advantage_at(const UserParams& pr, double beta, double nu, const Sweep& sw, Age i, Age n) {
  return nu + beta * pr.mu() * (sw.u - sw.w[at(std::min(i + 1, n))]);
}

double sup_abs(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Bellman residual of (v0, v1) for a fixed policy, computed from the
/// generic transition rows. Relative to max(1, |v|).
double fixed_policy_residual(const TruncatedModel& model, double beta, double gain, const Vec& r0, const Vec& r1,
                             const ActionVector& a, const Vec& v0, const Vec& v1) {
  const Age n = model.i_max();
  const double scale = std::max({1.0, sup_abs(v0), sup_abs(v1)});
  double worst = 0.0;
  for (int b = 0; b <= 1; ++b) {
    for (Age i = 1; i <= n; ++i) {
      const int act = b == 1 ? a[at(i)] : 0;
      double rhs = (b == 0 ? r0[at(i)] : r1[at(i)]) - gain;
      for (const auto& tr : model.transitions({b, i}, act))
        rhs += beta * tr.prob * (tr.to.b == 0 ? v0[at(tr.to.i)] : v1[at(tr.to.i)]);
      const double lhs = b == 0 ? v0[at(i)] : v1[at(i)];
      worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
  }
  return worst;
}

}  // namespace

TruncatedModel::TruncatedModel(UserParams params, std::optional<Discount> beta, CostSpec cost, Age i_max)
    : params_(params), beta_(beta), cost_(std::move(cost)), i_max_(i_max) {
  if (i_max_ < 2) throw Error(ErrorCode::InvalidInput, "i_max", "truncated model needs i_max >= 2");
}

void TruncatedModel::require(Criterion criterion) const {
  if (criterion == Criterion::Discounted && !beta_)
    throw Error(ErrorCode::InvalidInput, "beta", "discounted criterion requires a discount factor");
}

std::vector<Transition> TruncatedModel::transitions(State s, int action) const {
  if (s.i < 1 || s.i > i_max_) throw Error(ErrorCode::InvalidInput, "i", "state outside truncated range");
  if (action == 1 && s.b != 1)
    throw Error(ErrorCode::IllegalAction, "action", "attempt in an uncontrollable state");
  const double lam = params_.lambda();
  const double mu = params_.mu();
  const Age next = std::min(s.i + 1, i_max_);
  if (action == 0) return {{{0, next}, 1.0 - lam}, {{1, next}, lam}};
  return {{{0, next}, (1.0 - lam) * (1.0 - mu)},
          {{0, 1}, (1.0 - lam) * mu},
          {{1, next}, lam * (1.0 - mu)},
          {{1, 1}, lam * mu}};
}

ActionVector threshold_actions(Age i_max, Age k) {
  ActionVector a(at(i_max) + 1, 0);
  for (Age j = 1; j <= i_max; ++j) a[at(j)] = j > k ? 1 : 0;
  return a;
}

PolicyEvaluation evaluate_policy(const TruncatedModel& model, const ActionVector& active, Criterion criterion) {
  model.require(criterion);
  const Age n = model.i_max();
  if (static_cast<Age>(active.size()) != n + 1)
    throw Error(ErrorCode::InvalidInput, "active", "action vector must have i_max + 1 entries");
  const auto& pr = model.params();
  Vec cost(at(n) + 1, 0.0), zero(at(n) + 1, 0.0), act(at(n) + 1, 0.0);
  for (Age i = 1; i <= n; ++i) {
    cost[at(i)] = model.cost().cost(i);
    act[at(i)] = active[at(i)] ? 1.0 : 0.0;
  }

  PolicyEvaluation out;
  out.criterion = criterion;
  if (criterion == Criterion::Discounted) {
    const double beta = model.beta()->beta();
    const Sweep sc = sweep_discounted(pr, beta, cost, cost, active, n);
    const Sweep sw = sweep_discounted(pr, beta, zero, act, active, n);
    state_values(pr, beta, 0.0, cost, cost, active, sc, n, out.cost0, out.cost1);
    state_values(pr, beta, 0.0, zero, act, active, sw, n, out.work0, out.work1);
    // Fictitious age 0: passive, moves to age 1.
    out.cost0[0] = out.cost1[0] = model.cost().cost(0) + beta * sc.u;
    out.work0[0] = out.work1[0] = beta * sw.u;
    out.residual = std::max(fixed_policy_residual(model, beta, 0.0, cost, cost, active, out.cost0, out.cost1),
                            fixed_policy_residual(model, beta, 0.0, zero, act, active, out.work0, out.work1));
    return out;
  }

  // Stationary distribution: the age process is a renewal chain whose mass
  // moves from age i to i + 1 with the no-reset probability S_i.
  const double lam = pr.lambda();
  const double mu = pr.mu();
  Vec mass(at(n) + 1, 0.0);
  auto no_reset = [&](Age i) { return 1.0 - lam * mu * act[at(i)]; };
  if (active[at(n)]) {
    mass[1] = 1.0;
    for (Age i = 1; i + 1 < n; ++i) mass[at(i + 1)] = mass[at(i)] * no_reset(i);
    if (n >= 2) mass[at(n)] = mass[at(n - 1)] * no_reset(n - 1) / (1.0 - no_reset(n));
  } else {
    mass[at(n)] = 1.0;
  }
  double total = 0.0;
  for (double m : mass) total += m;
  out.stationary0.assign(at(n) + 1, 0.0);
  out.stationary1.assign(at(n) + 1, 0.0);
  for (Age i = 1; i <= n; ++i) {
    const double m = mass[at(i)] / total;
    out.stationary0[at(i)] = (1.0 - lam) * m;
    out.stationary1[at(i)] = lam * m;
    out.avg_cost += m * cost[at(i)];
    out.avg_work += lam * m * act[at(i)];
  }

  // Balance residual pi P - pi from the generic rows.
  Vec in0(at(n) + 1, 0.0), in1(at(n) + 1, 0.0);
  for (int b = 0; b <= 1; ++b) {
    for (Age i = 1; i <= n; ++i) {
      const double w = b == 0 ? out.stationary0[at(i)] : out.stationary1[at(i)];
      for (const auto& tr : model.transitions({b, i}, b == 1 ? active[at(i)] : 0))
        (tr.to.b == 0 ? in0 : in1)[at(tr.to.i)] += w * tr.prob;
    }
  }
  double worst = 0.0, sum = 0.0;
  for (Age i = 1; i <= n; ++i) {
    worst = std::max({worst, std::abs(in0[at(i)] - out.stationary0[at(i)]),
                      std::abs(in1[at(i)] - out.stationary1[at(i)])});
    sum += out.stationary0[at(i)] + out.stationary1[at(i)];
  }
  out.residual = std::max(worst, std::abs(sum - 1.0));
  return out;
}

PolicyEvaluation policy_eval(const TruncatedModel& model, Age k, Criterion criterion) {
  if (k < 0 || k >= model.i_max())
    throw Error(ErrorCode::InvalidInput, "k", "threshold must satisfy 0 <= k < i_max");
  PolicyEvaluation out = evaluate_policy(model, threshold_actions(model.i_max(), k), criterion);
  const double limit = criterion == Criterion::Discounted ? 1e-10 : 1e-12;
  if (!(out.residual < limit))
    throw Error(ErrorCode::NotConverged, "residual",
                "policy evaluation residual " + std::to_string(out.residual) + " above " + std::to_string(limit));
  return out;
}

bool DPResult::is_threshold() const {
  bool seen_active = false;
  for (std::size_t j = 1; j < active.size(); ++j) {
    if (active[j]) seen_active = true;
    else if (seen_active) return false;
  }
  return true;
}

std::optional<Age> DPResult::threshold() const {
  if (!is_threshold()) return std::nullopt;
  for (std::size_t j = 1; j < active.size(); ++j)
    if (active[j]) return static_cast<Age>(j) - 1;
  return static_cast<Age>(active.size()) - 1;
}

namespace {

struct Charged {
  Vec r0, r1;  // r1 includes the charge when active
};

DPResult finish(const TruncatedModel& model, Criterion criterion, double nu, const ActionVector& a,
                const Sweep& sw, long iterations) {
  const Age n = model.i_max();
  const auto& pr = model.params();
  const double beta = criterion == Criterion::Discounted ? model.beta()->beta() : 1.0;
  Vec r0(at(n) + 1, 0.0), r1(at(n) + 1, 0.0);
  for (Age i = 1; i <= n; ++i) {
    r0[at(i)] = model.cost().cost(i);
    r1[at(i)] = r0[at(i)] + (a[at(i)] ? nu : 0.0);
  }
  DPResult out;
  out.criterion = criterion;
  out.nu = nu;
  out.active = a;
  out.gain = sw.gain;
  out.iterations = iterations;
  state_values(pr, beta, sw.gain, r0, r1, a, sw, n, out.value0, out.value1);
  out.advantage.assign(at(n) + 1, 0.0);
  for (Age i = 1; i <= n; ++i) out.advantage[at(i)] = advantage_at(pr, beta, nu, sw, i, n);

  // Optimality residual: max over states of |V - min_a (r + beta P V)|.
  const double scale = std::max({1.0, sup_abs(out.value0), sup_abs(out.value1)});
  double worst = 0.0;
  for (int b = 0; b <= 1; ++b) {
    for (Age i = 1; i <= n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int act = 0; act <= b; ++act) {
        double rhs = model.cost().cost(i) + (act ? nu : 0.0) - sw.gain;
        for (const auto& tr : model.transitions({b, i}, act))
          rhs += beta * tr.prob * (tr.to.b == 0 ? out.value0[at(tr.to.i)] : out.value1[at(tr.to.i)]);
        best = std::min(best, rhs);
      }
      const double v = b == 0 ? out.value0[at(i)] : out.value1[at(i)];
      worst = std::max(worst, std::abs(v - best) / scale);
    }
  }
  out.residual = worst;
  return out;
}

DPResult policy_iteration(const TruncatedModel& model, double nu, Criterion criterion, const SolveOptions& opts) {
  const Age n = model.i_max();
  const auto& pr = model.params();
  const double beta = criterion == Criterion::Discounted ? model.beta()->beta() : 1.0;
  ActionVector a = opts.warm_start && static_cast<Age>(opts.warm_start->size()) == n + 1
                       ? *opts.warm_start
                       : threshold_actions(n, 0);
  Vec r0(at(n) + 1, 0.0), r1(at(n) + 1, 0.0);
  for (Age i = 1; i <= n; ++i) r0[at(i)] = model.cost().cost(i);

  for (long it = 1; it <= std::min<long>(opts.max_iterations, 10'000); ++it) {
    for (Age i = 1; i <= n; ++i) r1[at(i)] = r0[at(i)] + (a[at(i)] ? nu : 0.0);
    const Sweep sw = criterion == Criterion::Discounted ? sweep_discounted(pr, beta, r0, r1, a, n)
                                                        : sweep_average(pr, r0, r1, a, n);
    // Ties are judged against the magnitudes entering each state's advantage.
    const double base = std::max({1.0, std::abs(nu), std::abs(sw.u)});
    bool changed = false;
    for (Age i = 1; i <= n; ++i) {
      const double adv = advantage_at(pr, beta, nu, sw, i, n);
      const double tie = 1e-13 * std::max(base, std::abs(sw.w[at(std::min(i + 1, n))]));
      std::uint8_t want = a[at(i)];
      if (adv < -tie) want = 1;
      else if (adv > tie) want = 0;
      if (want != a[at(i)]) {
        a[at(i)] = want;
        changed = true;
      }
    }
    if (!changed) return finish(model, criterion, nu, a, sw, it);
  }
  throw Error(ErrorCode::NotConverged, "policy_iteration", "policy iteration did not stabilize");
}

DPResult value_iteration(const TruncatedModel& model, double nu, Criterion criterion, const SolveOptions& opts) {
  const Age n = model.i_max();
  const auto& pr = model.params();
  const double lam = pr.lambda();
  const double mu = pr.mu();
  const bool disc = criterion == Criterion::Discounted;
  const double beta = disc ? model.beta()->beta() : 1.0;
  Vec c(at(n) + 1, 0.0);
  for (Age i = 1; i <= n; ++i) c[at(i)] = model.cost().cost(i);

  Vec v0(at(n) + 1, 0.0), v1(at(n) + 1, 0.0), t0(at(n) + 1), t1(at(n) + 1);
  ActionVector a(at(n) + 1, 0);
  constexpr double kAperiodicity = 0.5;
  for (long it = 1; it <= opts.max_iterations; ++it) {
    const double w1 = (1.0 - lam) * v0[1] + lam * v1[1];
    for (Age i = 1; i <= n; ++i) {
      const Age nx = std::min(i + 1, n);
      const double wn = (1.0 - lam) * v0[at(nx)] + lam * v1[at(nx)];
      const double passive = c[at(i)] + beta * wn;
      const double active = c[at(i)] + nu + beta * ((1.0 - mu) * wn + mu * w1);
      t0[at(i)] = passive;
      t1[at(i)] = std::min(passive, active);
      a[at(i)] = active < passive ? 1 : 0;
    }
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    double vmax = 1.0;
    for (Age i = 1; i <= n; ++i) {
      for (double d : {t0[at(i)] - v0[at(i)], t1[at(i)] - v1[at(i)]}) {
        hi = std::max(hi, d);
        lo = std::min(lo, d);
      }
      vmax = std::max({vmax, std::abs(t0[at(i)]), std::abs(t1[at(i)])});
    }
    if (disc) {
      const double res = std::max(std::abs(hi), std::abs(lo));
      v0.swap(t0);
      v1.swap(t1);
      if (res < (1.0 - beta) * opts.tolerance * vmax) {
        Sweep sw;
        sw.w.assign(at(n) + 1, 0.0);
        for (Age i = 1; i <= n; ++i) sw.w[at(i)] = (1.0 - lam) * v0[at(i)] + lam * v1[at(i)];
        sw.u = sw.w[1];
        DPResult out = finish(model, criterion, nu, a, sw, it);
        return out;
      }
    } else {
      if (hi - lo < opts.tolerance * vmax) {
        // Relative values are determined by the greedy policy; report its exact solution.
        Vec r1(at(n) + 1);
        for (Age i = 1; i <= n; ++i) r1[at(i)] = c[at(i)] + (a[at(i)] ? nu : 0.0);
        const Sweep sw = sweep_average(pr, c, r1, a, n);
        DPResult out = finish(model, criterion, nu, a, sw, it);
        out.gain = 0.5 * (hi + lo);
        return out;
      }
      // h <- h + tau (T h - h), renormalized at the reference state (0, 1).
      for (Age i = 1; i <= n; ++i) {
        t0[at(i)] = v0[at(i)] + kAperiodicity * (t0[at(i)] - v0[at(i)]);
        t1[at(i)] = v1[at(i)] + kAperiodicity * (t1[at(i)] - v1[at(i)]);
      }
      const double ref = t0[1];
      for (Age i = 1; i <= n; ++i) {
        v0[at(i)] = t0[at(i)] - ref;
        v1[at(i)] = t1[at(i)] - ref;
      }
    }
  }
  throw Error(ErrorCode::NotConverged, "value_iteration",
              "no convergence after " + std::to_string(opts.max_iterations) + " iterations");
}

}  // namespace

DPResult solve_charged(const TruncatedModel& model, double nu, Criterion criterion, const SolveOptions& opts) {
  model.require(criterion);
  if (!std::isfinite(nu)) throw Error(ErrorCode::InvalidInput, "nu", "charge must be finite");
  return opts.method == SolveMethod::PolicyIteration ? policy_iteration(model, nu, criterion, opts)
                                                     : value_iteration(model, nu, criterion, opts);
}

double index_by_bisection(const TruncatedModel& model, Age i, Criterion criterion, double tol,
                          const SolveOptions& opts) {
  if (i < 1 || i > model.i_max()) throw Error(ErrorCode::InvalidInput, "i", "AoI outside truncated range");
  SolveOptions local = opts;
  ActionVector warm;
  double advantage = 0.0, scale = 0.0;
  auto attempt_optimal = [&](double nu) {
    if (!warm.empty()) local.warm_start = &warm;
    DPResult r = solve_charged(model, nu, criterion, local);
    warm = r.active;
    advantage = r.advantage[at(i)];
    scale = std::abs(r.value1[at(i)]);
    return advantage <= 0.0;
  };

  double lo = 0.0;
  if (!attempt_optimal(lo)) {
    // A zero index leaves only a rounding-level advantage at zero charge.
    if (advantage <= 1e-12 * (1.0 + scale)) return 0.0;
    throw Error(ErrorCode::BracketFailed, "nu", "attempting is not optimal even at zero charge");
  }
  constexpr double kCap = 1099511627776.0;  // 2^40
  double hi = 1.0;
  while (attempt_optimal(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > kCap) throw Error(ErrorCode::BracketFailed, "nu", "no action flip below the doubling cap");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (attempt_optimal(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Age suggested_truncation(const UserParams& params, std::optional<Discount> beta, const CostSpec& cost,
                         Criterion criterion, Age i_focus, double eps, Age min_imax) {
  double ratio = params.q();
  if (criterion == Criterion::Discounted) {
    if (!beta) throw Error(ErrorCode::InvalidInput, "beta", "discounted criterion requires a discount factor");
    ratio *= beta->beta();
  }
  const Age floor_n = std::max<Age>({min_imax, 2 * i_focus, i_focus + 16});
  if (ratio == 0.0) return floor_n;
  cost.check_growth(ratio);
  double growth_ratio = ratio;
  if (const auto* t = std::get_if<TabularCost>(&cost.variant())) growth_ratio *= t->tail_rate;
  if (growth_ratio >= 1.0) throw Error(ErrorCode::SeriesDiverges, "cost", "cost tail grows too fast for the ratio");
  const double amplification = std::pow(1.0 - growth_ratio, -3.0);
  const double scale = 1.0 + cost.cost(i_focus);
  constexpr Age kMax = 200'000;
  for (Age d = 1; i_focus + d <= kMax; ++d) {
    const Age n = i_focus + d;
    const double grown = cost.cost(n + 1);
    // Leaves headroom for the value sweeps, which multiply costs by 1/(1 - ratio).
    if (!(grown < 1e150 * scale)) break;
    const double weight = std::pow(ratio, static_cast<double>(d)) * (1.0 + grown) / scale * amplification *
                          static_cast<double>(n);
    if (weight < eps) return std::max(n, floor_n);
  }
  throw Error(ErrorCode::TruncationTooSmall, "i_max",
              "no representable truncation level reaches the requested tail weight");
}

}  // namespace aoi::oracle
