#include "aoi/indexability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "aoi/average.hpp"
#include "aoi/discounted.hpp"

namespace aoi::indexability {

namespace {

std::size_t at(Age i) { return static_cast<std::size_t>(i); }

Discount need_beta(std::optional<Discount> beta, Criterion criterion) {
  if (criterion == Criterion::Discounted && !beta)
    throw Error(ErrorCode::InvalidInput, "beta", "discounted criterion requires a discount factor");
  return beta.value_or(validate_discount(0.5));
}

std::string describe(const UserParams& p, std::optional<Discount> beta, Criterion criterion) {
  std::ostringstream os;
  os.precision(17);
  os << "lambda=" << p.lambda() << " mu=" << p.mu();
  if (criterion == Criterion::Discounted) os << " beta=" << beta->beta();
  os << " criterion=" << to_string(criterion);
  return os.str();
}

double scale_of(double x) { return std::max(1.0, std::abs(x)); }

VerificationReport finalize(VerificationReport r) {
  r.pass = std::isfinite(r.worst_violation) && r.worst_violation <= r.tolerance;
  return r;
}

}  // namespace

const char* to_string(ConditionId id) {
  switch (id) {
    case ConditionId::Pcli1: return "PCLI1";
    case ConditionId::Pcli2: return "PCLI2";
    case ConditionId::LambdaMonotone: return "lambda-monotone";
    case ConditionId::MuMonotoneLinear: return "mu-monotone-linear";
    case ConditionId::QuadraticMuMinimum: return "quadratic-mu-minimum";
    case ConditionId::ThresholdMuSwitch: return "threshold-mu-switch";
    case ConditionId::SpecialVsGeneral: return "special-vs-general";
    case ConditionId::VanishingDiscount: return "vanishing-discount";
    case ConditionId::RecursionResidual: return "recursion-residual";
    case ConditionId::ThresholdOptimality: return "threshold-optimality";
    case ConditionId::OracleIndex: return "oracle-index";
  }
  return "unknown";
}

double index_value(const UserParams& params, std::optional<Discount> beta, Criterion criterion, const CostSpec& cost,
                   Age i) {
  if (criterion == Criterion::Discounted)
    return discounted::whittle_index(params, need_beta(beta, criterion), cost, i);
  return average::avg_whittle_index(params, cost, i);
}

std::vector<double> index_table(const UserParams& params, std::optional<Discount> beta, Criterion criterion,
                                const CostSpec& cost, Age i_max) {
  if (criterion == Criterion::Discounted)
    return discounted::whittle_index_table(params, need_beta(beta, criterion), cost, i_max);
  return average::avg_whittle_index_table(params, cost, i_max);
}

VerificationReport verify_pcli1(const UserParams& params, std::optional<Discount> beta, Criterion criterion,
                                Age i_max, Age k_max) {
  if (i_max < 1 || k_max < 1) throw Error(ErrorCode::InvalidInput, "i_max", "grid bounds must be at least 1");
  VerificationReport r;
  r.id = ConditionId::Pcli1;
  r.grid = describe(params, beta, criterion) + " i=1.." + std::to_string(i_max) + " k=0.." + std::to_string(k_max);
  const bool disc = criterion == Criterion::Discounted;
  const Discount b = need_beta(beta, criterion);
  const double floor = disc ? 1.0 - b.beta() : 0.0;
  double lowest = std::numeric_limits<double>::infinity();
  for (Age k = 0; k <= k_max; ++k) {
    for (Age i = 1; i <= i_max; ++i) {
      const double g = disc ? discounted::marginal_work(params, b, k, i) : average::avg_marginal_work(params, k, i);
      if (g < lowest) {
        lowest = g;
        r.witness = {{"i", double(i)}, {"k", double(k)}};
      }
    }
  }
  r.observed = lowest;
  r.worst_violation = floor - lowest;
  r.tolerance = 0.0;
  return finalize(r);
}

VerificationReport verify_pcli2(const UserParams& params, std::optional<Discount> beta, Criterion criterion,
                                const CostSpec& cost, Age i_max) {
  if (i_max < 2) throw Error(ErrorCode::InvalidInput, "i_max", "need at least two ages");
  VerificationReport r;
  r.id = ConditionId::Pcli2;
  r.grid = describe(params, beta, criterion) + " cost=" + cost.name() + " i=1.." + std::to_string(i_max);
  const auto m = index_table(params, beta, criterion, cost, i_max);
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < m.size(); ++j) {
    const double d = m[j] - m[j - 1];
    if (d < lowest) {
      lowest = d;
      r.witness = {{"i", double(j)}, {"m_i", m[j - 1]}, {"m_next", m[j]}};
    }
  }
  r.observed = lowest;
  r.worst_violation = -lowest;
  r.tolerance = 1e-9;
  return finalize(r);
}

VerificationReport verify_threshold_optimality(const UserParams& params, std::optional<Discount> beta,
                                               Criterion criterion, const CostSpec& cost, double nu, Age i_max,
                                               const ThresholdCheckOptions& opts) {
  if (!std::isfinite(nu)) throw Error(ErrorCode::InvalidInput, "nu", "charge must be finite");
  const std::optional<Discount> model_beta = criterion == Criterion::Discounted
                                                 ? std::optional<Discount>(need_beta(beta, criterion))
                                                 : std::nullopt;
  const oracle::TruncatedModel model(params, model_beta, cost, i_max);
  const auto sol = oracle::solve_charged(model, nu, criterion, opts.solve);
  const auto m = index_table(params, beta, criterion, cost, i_max);
  const Age band = static_cast<Age>(std::ceil(opts.guard_fraction * static_cast<double>(i_max)));
  const Age limit = std::max<Age>(1, i_max - band);

  VerificationReport r;
  r.id = ConditionId::ThresholdOptimality;
  std::ostringstream os;
  os.precision(17);
  os << describe(params, beta, criterion) << " cost=" << cost.name() << " nu=" << nu << " i_max=" << i_max
     << " checked=1.." << limit;
  r.grid = os.str();
  r.tolerance = 0.0;

  // Index crossing: ages below it have index < nu.
  Age crossing = 0;
  while (crossing < limit && m[at(crossing)] < nu) ++crossing;
  const auto k_oracle = sol.threshold();
  if (k_oracle && crossing < limit && *k_oracle > limit)
    throw Error(ErrorCode::TruncationTooSmall, "i_max",
                "oracle switches inside the guard band while the index crossing is at " + std::to_string(crossing));

  r.observed = k_oracle ? static_cast<double>(*k_oracle) : -1.0;
  r.witness = {{"index_crossing", double(crossing)}, {"oracle_threshold", r.observed}};
  if (!sol.is_threshold()) {
    r.worst_violation = std::numeric_limits<double>::infinity();
    return finalize(r);
  }
  double worst = 0.0;
  for (Age j = 1; j <= limit; ++j) {
    const double mj = m[at(j - 1)];
    const bool expect = mj >= nu;
    const bool got = sol.active[at(j)] != 0;
    if (expect == got || std::abs(mj - nu) <= opts.tie_tolerance) continue;
    const double miss = std::abs(mj - nu);
    if (miss > worst) {
      worst = miss;
      r.witness = {{"i", double(j)}, {"index", mj}, {"oracle_active", got ? 1.0 : 0.0},
                   {"index_crossing", double(crossing)}, {"oracle_threshold", r.observed}};
    }
  }
  r.worst_violation = worst;
  return finalize(r);
}

VerificationReport verify_lambda_monotone(double mu, std::optional<Discount> beta, Criterion criterion,
                                          const CostSpec& cost, const std::vector<Age>& ages, double step) {
  VerificationReport r;
  r.id = ConditionId::LambdaMonotone;
  std::ostringstream os;
  os.precision(17);
  os << "mu=" << mu << " cost=" << cost.name() << " criterion=" << to_string(criterion);
  if (criterion == Criterion::Discounted) os << " beta=" << need_beta(beta, criterion).beta();
  os << " lambda step=" << step << " ages=" << ages.size();
  r.grid = os.str();
  r.tolerance = 1e-9;
  r.worst_violation = -std::numeric_limits<double>::infinity();
  const int steps = static_cast<int>(std::llround(1.0 / step));
  for (Age i : ages) {
    std::optional<double> prev;
    for (int s = 1; s <= steps; ++s) {
      const double lam = std::min(1.0, s * step);
      double m;
      try {
        m = index_value(validate_params(lam, mu), beta, criterion, cost, i);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SeriesDiverges) throw;
        ++r.skipped;
        prev.reset();
        continue;
      }
      if (prev) {
        const double rise = (m - *prev) / scale_of(m);
        if (rise > r.worst_violation) {
          r.worst_violation = rise;
          r.witness = {{"i", double(i)}, {"lambda", lam}, {"index", m}, {"index_prev", *prev}};
        }
      }
      prev = m;
    }
  }
  r.observed = r.worst_violation;
  return finalize(r);
}

VerificationReport verify_mu_monotone_linear(double lambda, std::optional<Discount> beta, Criterion criterion,
                                             double c, const std::vector<Age>& ages, double step) {
  VerificationReport r;
  r.id = ConditionId::MuMonotoneLinear;
  std::ostringstream os;
  os.precision(17);
  os << "lambda=" << lambda << " linear c=" << c << " criterion=" << to_string(criterion);
  if (criterion == Criterion::Discounted) os << " beta=" << need_beta(beta, criterion).beta();
  os << " mu step=" << step;
  r.grid = os.str();
  r.tolerance = 0.0;
  r.worst_violation = -std::numeric_limits<double>::infinity();
  const auto cost = CostSpec::linear(c);
  const int steps = static_cast<int>(std::llround(1.0 / step));
  for (Age i : ages) {
    const bool constant = criterion == Criterion::Average && i == 1;
    double prev = 0.0;
    for (int s = 1; s <= steps; ++s) {
      const double mu = std::min(1.0, s * step);
      const double m = index_value(validate_params(lambda, mu), beta, criterion, cost, i);
      double v;
      if (constant) {
        // Constant c / lambda up to rounding.
        v = std::abs(m - c / lambda) / scale_of(m) - 1e-12;
      } else if (s == 1) {
        prev = m;
        continue;
      } else {
        // Strictly increasing: the drop must be negative.
        v = (prev - m) / scale_of(m);
      }
      prev = m;
      if (v > r.worst_violation) {
        r.worst_violation = v;
        r.witness = {{"i", double(i)}, {"mu", mu}, {"index", m}};
      }
    }
  }
  r.observed = r.worst_violation;
  // Strictness: a zero increment counts as a failure.
  r.pass = std::isfinite(r.worst_violation) && r.worst_violation < 0.0;
  return r;
}

VerificationReport verify_quadratic_mu_minimum(double lambda, double c, Age i, double step) {
  const double target = 1.0 / (lambda * std::sqrt(7.0));
  if (!(target < 1.0)) throw Error(ErrorCode::InvalidInput, "lambda", "minimum lies outside (0, 1] for this lambda");
  VerificationReport r;
  r.id = ConditionId::QuadraticMuMinimum;
  std::ostringstream os;
  os.precision(17);
  os << "lambda=" << lambda << " quadratic c=" << c << " i=" << i << " mu step=" << step;
  r.grid = os.str();
  const auto cost = CostSpec::quadratic(c);
  const int steps = static_cast<int>(std::llround(1.0 / step));
  double best = std::numeric_limits<double>::infinity(), arg = 0.0;
  for (int s = 1; s <= steps; ++s) {
    const double mu = std::min(1.0, s * step);
    const double m = average::avg_whittle_index(validate_params(lambda, mu), cost, i);
    if (m < best) best = m, arg = mu;
  }
  r.observed = arg;
  r.tolerance = step;
  r.worst_violation = std::abs(arg - target);
  r.witness = {{"argmin_mu", arg}, {"predicted_mu", target}, {"index_min", best}};
  return finalize(r);
}

VerificationReport verify_threshold_mu_switch(double lambda, double c, Age K, Age i, double step) {
  if (!(i >= 1 && i < K)) throw Error(ErrorCode::InvalidInput, "i", "switch check needs 1 <= i < K");
  const double target = 1.0 / (lambda * static_cast<double>(K - i + 1));
  VerificationReport r;
  r.id = ConditionId::ThresholdMuSwitch;
  std::ostringstream os;
  os.precision(17);
  os << "lambda=" << lambda << " threshold c=" << c << " K=" << K << " i=" << i << " mu step=" << step;
  r.grid = os.str();
  const auto cost = CostSpec::threshold(c, K);
  const int steps = static_cast<int>(std::llround(1.0 / step));
  double prev = average::avg_whittle_index(validate_params(lambda, step), cost, i);
  double turn = -1.0;  // last mu before the first decrease
  bool rose_after_turn = false;
  for (int s = 2; s <= steps; ++s) {
    const double mu = std::min(1.0, s * step);
    const double m = average::avg_whittle_index(validate_params(lambda, mu), cost, i);
    const double d = m - prev;
    if (turn < 0 && d < -1e-12 * scale_of(m)) turn = std::min(1.0, (s - 1) * step);
    else if (turn >= 0 && d > 1e-12 * scale_of(m)) rose_after_turn = true;
    prev = m;
  }
  r.tolerance = step;
  r.witness = {{"switch_mu", turn}, {"predicted_mu", target}};
  r.observed = turn;
  if (target >= 1.0) r.worst_violation = turn < 0 ? 0.0 : std::abs(turn - target);
  else r.worst_violation = turn < 0 ? std::numeric_limits<double>::infinity() : std::abs(turn - target);
  if (rose_after_turn) r.worst_violation = std::numeric_limits<double>::infinity();
  return finalize(r);
}

VerificationReport verify_special_vs_general(const std::vector<UserParams>& params, std::optional<Discount> beta,
                                             Criterion criterion, Age i_max, double tolerance) {
  VerificationReport r;
  r.id = ConditionId::SpecialVsGeneral;
  r.grid = std::to_string(params.size()) + " parameter points, criterion=" + to_string(criterion) + " i=1.." +
           std::to_string(i_max) + " costs=linear(1),quadratic(1),threshold(1,10)";
  r.tolerance = tolerance;
  r.worst_violation = 0.0;
  const bool disc = criterion == Criterion::Discounted;
  const Discount b = need_beta(beta, criterion);
  for (const auto& p : params) {
    for (Age i = 1; i <= i_max; ++i) {
      const double fast[3] = {
          disc ? discounted::whittle_index_linear(p, b, 1, i) : average::avg_whittle_index_linear(p, 1, i),
          disc ? discounted::whittle_index_quadratic(p, b, 1, i) : average::avg_whittle_index_quadratic(p, 1, i),
          disc ? discounted::whittle_index_threshold(p, b, 1, 10, i) : average::avg_whittle_index_threshold(p, 1, 10, i)};
      const CostSpec costs[3] = {CostSpec::linear(1), CostSpec::quadratic(1), CostSpec::threshold(1, 10)};
      for (int t = 0; t < 3; ++t) {
        const double g = disc ? discounted::whittle_index_general(p, b, costs[t], i)
                              : average::avg_whittle_index_general(p, costs[t], i);
        const double e = std::abs(fast[t] - g) / scale_of(g);
        if (e > r.worst_violation) {
          r.worst_violation = e;
          r.witness = {{"lambda", p.lambda()}, {"mu", p.mu()}, {"i", double(i)}, {"cost_kind", double(t)}};
        }
      }
    }
  }
  r.observed = r.worst_violation;
  return finalize(r);
}

VerificationReport verify_vanishing_discount(const UserParams& params, const CostSpec& cost,
                                             const std::vector<Age>& ks, const std::vector<double>& betas,
                                             Age i_check, double tolerance) {
  if (betas.empty()) throw Error(ErrorCode::InvalidInput, "betas", "need at least one discount factor");
  VerificationReport r;
  r.id = ConditionId::VanishingDiscount;
  std::ostringstream os;
  os.precision(17);
  os << "lambda=" << params.lambda() << " mu=" << params.mu() << " cost=" << cost.name() << " states (b,i) i=1.."
     << i_check << " beta=";
  for (double b : betas) os << b << (b == betas.back() ? "" : ",");
  r.grid = os.str();
  r.tolerance = tolerance;
  bool shrinking = true;
  for (Age k : ks) {
    const double g_lim = average::avg_work_metric(params, k);
    const double f_lim = average::avg_cost_metric(params, cost, k);
    double last = std::numeric_limits<double>::infinity();
    for (double bv : betas) {
      const Discount b = validate_discount(bv);
      const discounted::CostProfile prof(params, b, cost, k);
      double gap = 0.0;
      std::vector<std::pair<std::string, double>> where;
      for (int s = 0; s <= 1; ++s) {
        for (Age i = 1; i <= i_check; ++i) {
          const double gw = std::abs((1 - bv) * discounted::work_metric(params, b, k, {s, i}) - g_lim);
          const double gf = std::abs((1 - bv) * discounted::cost_metric(prof, params, cost, {s, i}) - f_lim);
          if (gw > gap) gap = gw, where = {{"k", double(k)}, {"b", double(s)}, {"i", double(i)}, {"metric_cost", 0}};
          if (gf > gap) gap = gf, where = {{"k", double(k)}, {"b", double(s)}, {"i", double(i)}, {"metric_cost", 1}};
        }
      }
      if (gap > last) shrinking = false;
      last = gap;
      if (bv == betas.back() && gap > r.worst_violation) {
        r.worst_violation = gap;
        r.witness = where;
        r.witness.emplace_back("beta", bv);
      }
    }
  }
  r.observed = shrinking ? 1.0 : 0.0;
  r.witness.emplace_back("gap_shrinks_along_betas", r.observed);
  return finalize(r);
}

VerificationReport verify_recursion_residual(const UserParams& params, Discount beta, const CostSpec& cost,
                                             const std::vector<Age>& ks, Age i_test, double tolerance) {
  VerificationReport r;
  r.id = ConditionId::RecursionResidual;
  std::ostringstream os;
  os.precision(17);
  os << "lambda=" << params.lambda() << " mu=" << params.mu() << " beta=" << beta.beta() << " cost=" << cost.name()
     << " i=0.." << i_test << " thresholds=" << ks.size();
  r.grid = os.str();
  r.tolerance = tolerance;
  const double b = beta.beta(), lam = params.lambda(), mu = params.mu();
  for (Age k : ks) {
    const discounted::CostProfile prof(params, beta, cost, k);
    auto G = [&](int s, Age i) { return discounted::work_metric(params, beta, k, {s, i}); };
    auto F = [&](int s, Age i) { return discounted::cost_metric(prof, params, cost, {s, i}); };
    auto next_g = [&](Age i) { return (1 - lam) * G(0, i) + lam * G(1, i); };
    auto next_f = [&](Age i) { return (1 - lam) * F(0, i) + lam * F(1, i); };
    double fscale = 1.0;
    for (Age i = 0; i <= i_test + 1; ++i) fscale = std::max({fscale, std::abs(F(0, i)), std::abs(F(1, i))});
    for (int s = 0; s <= 1; ++s) {
      for (Age i = s; i <= i_test; ++i) {
        const bool act = s == 1 && i > k;
        const double g_rhs = act ? 1.0 + b * (mu * next_g(1) + (1 - mu) * next_g(i + 1)) : b * next_g(i + 1);
        const double f_rhs = cost.cost(i) + (act ? b * (mu * next_f(1) + (1 - mu) * next_f(i + 1)) : b * next_f(i + 1));
        const double eg = std::abs(G(s, i) - g_rhs);
        const double ef = std::abs(F(s, i) - f_rhs) / fscale;
        if (eg > r.worst_violation)
          r.worst_violation = eg, r.witness = {{"k", double(k)}, {"b", double(s)}, {"i", double(i)}, {"metric_cost", 0}};
        if (ef > r.worst_violation)
          r.worst_violation = ef, r.witness = {{"k", double(k)}, {"b", double(s)}, {"i", double(i)}, {"metric_cost", 1}};
      }
    }
  }
  r.observed = r.worst_violation;
  return finalize(r);
}

VerificationReport verify_oracle_index(const UserParams& params, std::optional<Discount> beta, Criterion criterion,
                                       const CostSpec& cost, const std::vector<Age>& ages, Age i_max,
                                       double tolerance) {
  VerificationReport r;
  r.id = ConditionId::OracleIndex;
  r.grid = describe(params, beta, criterion) + " cost=" + cost.name() + " i_max=" + std::to_string(i_max);
  r.tolerance = tolerance;
  const std::optional<Discount> model_beta = criterion == Criterion::Discounted
                                                 ? std::optional<Discount>(need_beta(beta, criterion))
                                                 : std::nullopt;
  const oracle::TruncatedModel model(params, model_beta, cost, i_max);
  for (Age i : ages) {
    const double closed = index_value(params, beta, criterion, cost, i);
    const double found = oracle::index_by_bisection(model, i, criterion, std::min(1e-7, tolerance / 10));
    const double e = std::abs(found - closed);
    if (e > r.worst_violation || r.witness.empty()) {
      r.worst_violation = std::max(r.worst_violation, e);
      r.witness = {{"i", double(i)}, {"closed_form", closed}, {"bisection", found}};
    }
  }
  r.observed = r.worst_violation;
  return finalize(r);
}

}  // namespace aoi::indexability
