#include <cmath>
#include <random>

#include "aoi/discounted.hpp"
#include "aoi/oracle.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace aoi;
using namespace aoi::discounted;

namespace {

const UserParams kBase = validate_params(0.7, 0.8);
const Discount kBeta = validate_discount(0.8);

/// One-step expansion of the first action from (1, i), then the k-policy.
double first_action_work(const UserParams& pr, Discount b, Age k, Age i, int action) {
  const double beta = b.beta();
  const double lam = pr.lambda(), mu = pr.mu();
  auto w = [&](Age j) {
    return (1 - lam) * work_metric(pr, b, k, {0, j}) + lam * work_metric(pr, b, k, {1, j});
  };
  if (action == 0) return beta * w(i + 1);
  return 1.0 + beta * (mu * w(1) + (1 - mu) * w(i + 1));
}

double first_action_cost(const UserParams& pr, Discount b, const CostSpec& c, Age k, Age i, int action) {
  const double beta = b.beta();
  const double lam = pr.lambda(), mu = pr.mu();
  auto w = [&](Age j) {
    return (1 - lam) * cost_metric(pr, b, c, k, {0, j}) + lam * cost_metric(pr, b, c, k, {1, j});
  };
  if (action == 0) return c.cost(i) + beta * w(i + 1);
  return c.cost(i) + beta * (mu * w(1) + (1 - mu) * w(i + 1));
}

}  // namespace

TEST_CASE("sigma is positive and nondecreasing") {
  const SigmaCache s(kBase, kBeta);
  CHECK(s(0) == doctest::Approx(0.2));
  for (Age i = 0; i < 100; ++i) {
    CHECK(s(i) > 0.0);
    CHECK(s(i) <= s(i + 1));
  }
}

TEST_CASE("work metric examples") {
  const auto sure = validate_params(1.0, 1.0);
  const auto half = validate_discount(0.5);
  CHECK(work_metric(sure, half, 0, {0, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(WorkProfile(sure, half, 0).gamma(0) == doctest::Approx(1.0));

  // k = 0: Gamma constant, active state value does not depend on i.
  const double g1 = work_metric(kBase, kBeta, 0, {1, 1});
  for (Age i = 2; i < 30; ++i) CHECK(work_metric(kBase, kBeta, 0, {1, i}) == doctest::Approx(g1).epsilon(1e-14));

  const oracle::TruncatedModel m(kBase, kBeta, CostSpec::linear(1), 200);
  const auto ev = oracle::policy_eval(m, 3, Criterion::Discounted);
  CHECK(std::abs(work_metric(kBase, kBeta, 3, {0, 3}) - ev.work0[3]) < 1e-8);
}

TEST_CASE("marginal work examples") {
  const SigmaCache s(kBase, kBeta);
  for (Age k : {0, 2, 7})
    for (Age i = k; i < k + 5; ++i)
      CHECK(marginal_work(kBase, kBeta, k, i) == doctest::Approx(0.2 / s(k)).epsilon(1e-14));
  CHECK(marginal_work(kBase, kBeta, 5, 2) == doctest::Approx(s(3) / s(5)).epsilon(1e-14));
  const double def = first_action_work(kBase, kBeta, 5, 2, 1) - first_action_work(kBase, kBeta, 5, 2, 0);
  CHECK(marginal_work(kBase, kBeta, 5, 2) == doctest::Approx(def).epsilon(1e-12));
}

TEST_CASE("cost metric examples") {
  const auto sure = validate_params(1.0, 1.0);
  const auto lin = CostSpec::linear(1);
  for (Age k : {0, 1, 4}) {
    double s = 0.0;
    for (Age j = 0; j <= k + 1; ++j) s += std::pow(0.8, static_cast<double>(j)) * lin.cost(j);
    const double expect = s / (1 - std::pow(0.8, static_cast<double>(k + 1)));
    CHECK(cost_metric(sure, kBeta, lin, k, {0, 0}) == doctest::Approx(expect).epsilon(1e-13));
  }
  for (Age k : {0, 3})
    for (Age i = 0; i < 6; ++i) {
      CHECK(cost_metric(kBase, kBeta, CostSpec::linear(0), k, {0, i}) == 0.0);
      CHECK(cost_metric(kBase, kBeta, CostSpec::linear(0), k, {1, i}) == 0.0);
    }

  const oracle::TruncatedModel m(kBase, kBeta, lin, 200);
  const auto ev = oracle::policy_eval(m, 2, Criterion::Discounted);
  CHECK(std::abs(cost_metric(kBase, kBeta, lin, 2, {0, 1}) - ev.cost0[1]) < 1e-8);
}

TEST_CASE("marginal cost examples") {
  CHECK(marginal_cost(kBase, kBeta, CostSpec::linear(0), 3, 2) == 0.0);

  const auto sure = validate_params(1.0, 1.0);
  const auto lin = CostSpec::linear(1);
  for (Age i = 1; i < 8; ++i) {
    const double b = 0.8;
    double s = 0.0;
    for (Age j = 0; j <= i; ++j) s += std::pow(b, static_cast<double>(j)) * lin.cost(j);
    const double expect =
        (b * (1 - std::pow(b, static_cast<double>(i))) * lin.cost(i + 1) - (1 - b) * s) /
        (1 - std::pow(b, static_cast<double>(i + 1)));
    CHECK(marginal_cost(sure, kBeta, lin, i, i) == doctest::Approx(expect).epsilon(1e-12));
  }

  const double def = first_action_cost(kBase, kBeta, lin, 4, 4, 0) - first_action_cost(kBase, kBeta, lin, 4, 4, 1);
  CHECK(std::abs(marginal_cost(kBase, kBeta, lin, 4, 4) - def) < 1e-8);
}

TEST_CASE("whittle index examples") {
  for (double c : {1.0, 2.5}) {
    for (Age i = 10; i < 20; ++i) {
      const double expect = 0.8 * c * 0.8 * (1 - std::pow(0.8, 10.0)) / 0.2;
      CHECK(whittle_index(kBase, kBeta, CostSpec::threshold(c, 10), i) == doctest::Approx(expect).epsilon(1e-13));
    }
  }
  // lambda -> 0 limit of the linear index.
  const auto rare = validate_params(1e-9, 0.8);
  for (Age i : {1, 4, 9})
    CHECK(whittle_index(rare, kBeta, CostSpec::linear(1), i) ==
          doctest::Approx(0.8 * 0.8 * static_cast<double>(i) / 0.2).epsilon(1e-7));

  const oracle::TruncatedModel m(kBase, kBeta, CostSpec::linear(1), 200);
  for (Age i : {1, 7, 23, 50})
    CHECK(std::abs(oracle::index_by_bisection(m, i, Criterion::Discounted, 1e-9) -
                   whittle_index(kBase, kBeta, CostSpec::linear(1), i)) < 1e-6);
}

TEST_CASE("special closed forms hold on the q = 0 branch") {
  CHECK_NOTHROW(whittle_index_linear(kBase, kBeta, 1.0, 3));
  const auto sure = validate_params(1.0, 1.0);
  for (Age i = 1; i < 15; ++i) {
    CHECK(whittle_index_linear(sure, kBeta, 1.0, i) ==
          doctest::Approx(whittle_index_general(sure, kBeta, CostSpec::linear(1), i)).epsilon(1e-12));
    CHECK(whittle_index_threshold(sure, kBeta, 1.0, 4, i) ==
          doctest::Approx(whittle_index_general(sure, kBeta, CostSpec::threshold(1, 4), i)).epsilon(1e-12));
  }
}

namespace {

struct Case {
  UserParams pr;
  Discount beta;
  CostSpec cost;
};

std::vector<Case> grid(std::mt19937_64& rng) {
  std::vector<Case> out;
  const double vals[] = {0.2, 0.5, 0.7, 1.0};
  for (double l : vals)
    for (double m : vals)
      for (double b : {0.5, 0.8, 0.95}) {
        const auto pr = validate_params(l, m);
        const auto be = validate_discount(b);
        out.push_back({pr, be, CostSpec::linear(1.5)});
        out.push_back({pr, be, CostSpec::quadratic(0.5)});
        out.push_back({pr, be, CostSpec::threshold(1.0, 10)});
        out.push_back({pr, be, testing::random_tabular(rng, 12, 1.05)});
      }
  return out;
}

}  // namespace

TEST_CASE("property: PCLI1 marginal work exceeds 1 - beta") {
  std::mt19937_64 rng(21);
  for (const auto& c : grid(rng))
    for (Age k = 0; k < 40; k += 3)
      for (Age i = 1; i < 45; i += 2) CHECK(marginal_work(c.pr, c.beta, k, i) > 1.0 - c.beta.beta());
}

TEST_CASE("property: index nondecreasing, ratio identity, and diagonal marginal cost agrees") {
  std::mt19937_64 rng(22);
  for (const auto& c : grid(rng)) {
    double prev = -1e300;
    for (Age i = 1; i <= 40; ++i) {
      const double m = whittle_index(c.pr, c.beta, c.cost, i);
      CHECK(m - prev >= -1e-9 * std::max(1.0, std::abs(m)));
      prev = m;
      const double g = marginal_work(c.pr, c.beta, i, i);
      const double f = marginal_cost(c.pr, c.beta, c.cost, i, i);
      const double fd = marginal_cost_diagonal(c.pr, c.beta, c.cost, i);
      CHECK(std::abs(f - fd) <= 1e-10 * std::max(1.0, std::abs(f)));
      CHECK(std::abs(m * g - f) <= 1e-10 * std::max(1.0, std::abs(f)));
    }
  }
}

TEST_CASE("property: marginal metrics equal one-step definitional differences") {
  std::mt19937_64 rng(23);
  for (const auto& c : grid(rng)) {
    for (Age k : {0, 1, 3, 10}) {
      for (Age i : {1, 2, 5, 11, 20}) {
        const double dw = first_action_work(c.pr, c.beta, k, i, 1) - first_action_work(c.pr, c.beta, k, i, 0);
        CHECK(std::abs(marginal_work(c.pr, c.beta, k, i) - dw) < 1e-10);
        const double dc =
            first_action_cost(c.pr, c.beta, c.cost, k, i, 0) - first_action_cost(c.pr, c.beta, c.cost, k, i, 1);
        const double f = marginal_cost(c.pr, c.beta, c.cost, k, i);
        CHECK(std::abs(f - dc) <= 1e-9 * std::max(1.0, std::abs(dc)));
      }
    }
  }
}

TEST_CASE("property: work and cost recursions hold with small residual") {
  std::mt19937_64 rng(24);
  for (const auto& c : grid(rng)) {
    const double b = c.beta.beta();
    const double lam = c.pr.lambda();
    for (Age k : {0, 2, 10}) {
      const CostProfile prof(c.pr, c.beta, c.cost, k);
      double scale = 1.0;
      for (Age i = 0; i <= 30; ++i) scale = std::max(scale, prof.phi(i));
      for (Age i = 0; i <= 30; ++i) {
        const double g = work_metric(c.pr, c.beta, k, {0, i});
        const double rhs = b * (1 - lam) * work_metric(c.pr, c.beta, k, {0, i + 1}) +
                           b * lam * work_metric(c.pr, c.beta, k, {1, i + 1});
        CHECK(std::abs(g - rhs) < 1e-9);
        const double f = cost_metric(prof, c.pr, c.cost, {0, i});
        const double frhs = c.cost.cost(i) + b * (1 - lam) * cost_metric(prof, c.pr, c.cost, {0, i + 1}) +
                            b * lam * cost_metric(prof, c.pr, c.cost, {1, i + 1});
        CHECK(std::abs(f - frhs) < 1e-9 * scale);
      }
    }
  }
}

TEST_CASE("property: pivot form and stable form of Phi agree up to pivot conditioning") {
  std::mt19937_64 rng(25);
  for (const auto& c : grid(rng)) {
    if (c.pr.q() == 0.0) continue;
    for (Age k : {0, 3, 10}) {
      const CostProfile prof(c.pr, c.beta, c.cost, k);
      for (Age i = k + 1; i < k + 12; ++i)
        CHECK(std::abs(prof.phi(i) - prof.phi_pivot_form(i)) <= 1e-6 * std::max(1.0, prof.phi(i)));
    }
  }
}

TEST_CASE("property: special closed forms agree with the general formula") {
  for (double l : {0.1, 0.3, 0.7, 1.0})
    for (double m : {0.1, 0.5, 0.8, 1.0})
      for (double b : {0.3, 0.8, 0.95}) {
        const auto pr = validate_params(l, m);
        const auto be = validate_discount(b);
        for (Age i = 1; i <= 60; ++i) {
          const double gl = whittle_index_general(pr, be, CostSpec::linear(1.2), i);
          const double gq = whittle_index_general(pr, be, CostSpec::quadratic(0.4), i);
          const double gt = whittle_index_general(pr, be, CostSpec::threshold(2.0, 10), i);
          CHECK(std::abs(whittle_index_linear(pr, be, 1.2, i) - gl) <= 1e-10 * std::max(1.0, std::abs(gl)));
          CHECK(std::abs(whittle_index_quadratic(pr, be, 0.4, i) - gq) <= 1e-10 * std::max(1.0, std::abs(gq)));
          CHECK(std::abs(whittle_index_threshold(pr, be, 2.0, 10, i) - gt) <= 1e-10 * std::max(1.0, std::abs(gt)));
        }
      }
}

TEST_CASE("property: index table matches pointwise evaluation") {
  std::mt19937_64 rng(26);
  for (const auto& c : grid(rng)) {
    const auto table = whittle_index_table(c.pr, c.beta, c.cost, 60);
    REQUIRE(table.size() == 60);
    for (Age i = 1; i <= 60; ++i) {
      const double m = whittle_index(c.pr, c.beta, c.cost, i);
      CHECK(std::abs(table[static_cast<std::size_t>(i - 1)] - m) <= 1e-10 * std::max(1.0, std::abs(m)));
    }
  }
}

TEST_CASE("property: index nonincreasing in lambda, linear index increasing in mu") {
  const auto lin = CostSpec::linear(1);
  for (Age i : {1, 3, 10}) {
    double prev = 1e300;
    for (double l = 0.05; l <= 1.0 + 1e-12; l += 0.05) {
      const double m = whittle_index(validate_params(std::min(l, 1.0), 0.8), kBeta, lin, i);
      CHECK(m <= prev + 1e-9);
      prev = m;
    }
    double low = -1e300;
    for (double mu = 0.05; mu <= 1.0 + 1e-12; mu += 0.05) {
      const double m = whittle_index(validate_params(0.7, std::min(mu, 1.0)), kBeta, lin, i);
      CHECK(m > low);
      low = m;
    }
  }
}
