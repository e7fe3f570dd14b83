#include <cmath>
#include <random>

#include "aoi/average.hpp"
#include "aoi/discounted.hpp"
#include "aoi/oracle.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace aoi;
using namespace aoi::average;

namespace {
const UserParams kBase = validate_params(0.7, 0.8);
}

TEST_CASE("average work examples") {
  CHECK(avg_work_metric(kBase, 0) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(avg_work_metric(validate_params(1, 1), 4) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(avg_work_metric(kBase, 3) == doctest::Approx(0.7 / (3 * 0.56 + 1)).epsilon(1e-15));
}

TEST_CASE("average marginal work examples") {
  for (Age k : {0, 3, 8})
    for (Age i = std::max<Age>(k, 1); i < k + 4; ++i)
      CHECK(avg_marginal_work(kBase, k, i) == doctest::Approx(1.0 / (k * 0.56 + 1)).epsilon(1e-15));
  CHECK(avg_marginal_work(kBase, 5, 2) == doctest::Approx((3 * 0.56 + 1) / (5 * 0.56 + 1)).epsilon(1e-15));

  // Vanishing-discount limit of the discounted marginal work.
  for (Age k : {0, 2, 6})
    for (Age i : {1, 3, 9}) {
      const double lim = avg_marginal_work(kBase, k, i);
      const double at999 = discounted::marginal_work(kBase, validate_discount(0.999), k, i);
      CHECK(std::abs(at999 - lim) < 1e-3);
    }
}

TEST_CASE("average cost examples") {
  CHECK(avg_cost_metric(kBase, CostSpec::linear(0), 3) == 0.0);
  CHECK(avg_cost_metric(validate_params(1, 1), CostSpec::linear(1), 0) == doctest::Approx(1.0).epsilon(1e-15));

  const auto lin = CostSpec::linear(1);
  const oracle::TruncatedModel m(kBase, std::nullopt, lin, 400);
  const auto ev = oracle::policy_eval(m, 3, Criterion::Average);
  CHECK(std::abs(avg_cost_metric(kBase, lin, 3) - ev.avg_cost) < 1e-6);

  const double b = 0.999;
  const double f999 = (1 - b) * discounted::cost_metric(kBase, validate_discount(b), lin, 3, {0, 1});
  CHECK(std::abs(f999 - avg_cost_metric(kBase, lin, 3)) < 1e-2);
}

TEST_CASE("average marginal cost examples") {
  CHECK(avg_marginal_cost(kBase, CostSpec::linear(0), 4) == 0.0);
  const double ratio = avg_marginal_cost(kBase, CostSpec::linear(1), 1) / avg_marginal_work(kBase, 1, 1);
  CHECK(ratio == doctest::Approx(1.0 / 0.7).epsilon(1e-14));

  // Scaled discounted marginal cost approaches the average one.
  const auto lin = CostSpec::linear(1);
  for (Age i : {1, 4}) {
    const double d = discounted::marginal_cost(kBase, validate_discount(0.9999), lin, i, i);
    CHECK(std::abs(d - avg_marginal_cost(kBase, lin, i)) < 1e-2);
  }
}

TEST_CASE("average index examples") {
  for (double l : {0.2, 0.5, 0.7, 1.0})
    for (double mu : {0.3, 1.0})
      CHECK(avg_whittle_index(validate_params(l, mu), CostSpec::linear(1), 1) == doctest::Approx(1.0 / l).epsilon(1e-14));
  CHECK(avg_whittle_index(kBase, CostSpec::linear(1), 2) == doctest::Approx(0.8 * 2 * (0.5 + 1 / 0.56)).epsilon(1e-14));
  CHECK(avg_whittle_index_general(kBase, CostSpec::linear(1), 2) ==
        doctest::Approx(0.8 * 2 * (0.5 + 1 / 0.56)).epsilon(1e-12));
  for (Age i = 10; i < 30; ++i)
    CHECK(avg_whittle_index(kBase, CostSpec::threshold(1, 10), i) == doctest::Approx(8.0).epsilon(1e-15));

  const oracle::TruncatedModel m(kBase, std::nullopt, CostSpec::linear(1), 400);
  CHECK(std::abs(oracle::index_by_bisection(m, 2, Criterion::Average, 1e-9) -
                 avg_whittle_index(kBase, CostSpec::linear(1), 2)) < 1e-6);
}

TEST_CASE("property: special closed forms agree with the general formula") {
  for (int a = 1; a <= 10; ++a)
    for (int b = 1; b <= 10; ++b) {
      const auto pr = validate_params(0.1 * a, 0.1 * b);
      for (Age i = 1; i <= 100; ++i) {
        const double gl = avg_whittle_index_general(pr, CostSpec::linear(1.7), i);
        const double gq = avg_whittle_index_general(pr, CostSpec::quadratic(0.3), i);
        const double gt = avg_whittle_index_general(pr, CostSpec::threshold(2, 10), i);
        CHECK(std::abs(avg_whittle_index_linear(pr, 1.7, i) - gl) <= 1e-10 * std::max(1.0, std::abs(gl)));
        CHECK(std::abs(avg_whittle_index_quadratic(pr, 0.3, i) - gq) <= 1e-10 * std::max(1.0, std::abs(gq)));
        CHECK(std::abs(avg_whittle_index_threshold(pr, 2, 10, i) - gt) <= 1e-10 * std::max(1.0, std::abs(gt)));
      }
    }
}

TEST_CASE("property: index ratio identity and monotonicity in the AoI") {
  std::mt19937_64 rng(31);
  std::vector<CostSpec> costs{CostSpec::linear(1), CostSpec::quadratic(1), CostSpec::threshold(1, 7)};
  for (int n = 0; n < 10; ++n) costs.push_back(testing::random_tabular(rng, 20, 1.1));
  for (double l : {0.2, 0.7, 1.0})
    for (double mu : {0.2, 0.8, 1.0}) {
      const auto pr = validate_params(l, mu);
      for (const auto& c : costs) {
        if (!c.converges(pr.q())) continue;
        double prev = -1e300;
        const auto table = avg_whittle_index_table(pr, c, 50);
        for (Age i = 1; i <= 50; ++i) {
          const double m = avg_whittle_index(pr, c, i);
          CHECK(m - prev >= -1e-9 * std::max(1.0, std::abs(m)));
          prev = m;
          const double f = avg_marginal_cost(pr, c, i);
          CHECK(std::abs(m * avg_marginal_work(pr, i, i) - f) <= 1e-10 * std::max(1.0, std::abs(f)));
          CHECK(std::abs(table[static_cast<std::size_t>(i - 1)] - m) <= 1e-10 * std::max(1.0, std::abs(m)));
        }
      }
    }
}

TEST_CASE("property: vanishing-discount gap shrinks linearly in 1 - beta") {
  // (1 - beta) G_beta - G = O(1 - beta): each tenfold step toward 1 cuts the gap about tenfold.
  for (double l : {0.2, 0.5, 0.7, 1.0})
    for (double mu : {0.2, 0.5, 0.7, 1.0}) {
      const auto pr = validate_params(l, mu);
      const auto lin = CostSpec::linear(1);
      for (Age k : {0, 1, 3, 10}) {
        double prev_w = 1e300, prev_f = 1e300;
        for (double b : {0.99, 0.999, 0.9999}) {
          const auto be = validate_discount(b);
          const double gw = std::abs((1 - b) * discounted::work_metric(pr, be, k, {0, 1}) - avg_work_metric(pr, k));
          const double gf =
              std::abs((1 - b) * discounted::cost_metric(pr, be, lin, k, {0, 1}) - avg_cost_metric(pr, lin, k));
          CHECK(gw <= prev_w / 5 + 1e-12);
          CHECK(gf <= prev_f / 5 + 1e-9);
          prev_w = gw;
          prev_f = gf;
        }
        CHECK(prev_w < 1e-3);
      }
    }
}

TEST_CASE("property: monotonicity in lambda and mu") {
  const auto lin = CostSpec::linear(1);
  for (Age i : {1, 2, 5, 20}) {
    double prev = 1e300;
    for (int s = 1; s <= 100; ++s) {
      const double m = avg_whittle_index(validate_params(0.01 * s, 0.8), lin, i);
      CHECK(m <= prev + 1e-9);
      prev = m;
    }
    double low = -1e300;
    for (int s = 1; s <= 100; ++s) {
      const double m = avg_whittle_index(validate_params(0.7, 0.01 * s), lin, i);
      if (i == 1) CHECK(m == doctest::Approx(1 / 0.7).epsilon(1e-13));
      else CHECK(m > low);
      low = m;
    }
  }
}

TEST_CASE("quadratic index: decreasing in mu at i = 1, interior minimum at i = 5") {
  const auto quad = CostSpec::quadratic(1);
  double prev = 1e300;
  for (int s = 1; s <= 100; ++s) {
    const double m = avg_whittle_index(validate_params(0.7, 0.01 * s), quad, 1);
    CHECK(m < prev);
    prev = m;
  }
  const double step = 1e-3;
  double best = 1e300, arg = 0;
  for (int s = 1; s <= 1000; ++s) {
    const double mu = step * s;
    const double m = avg_whittle_index(validate_params(0.7, mu), quad, 5);
    if (m < best) best = m, arg = mu;
  }
  CHECK(std::abs(arg - 1.0 / (0.7 * std::sqrt(7.0))) <= step);
}

TEST_CASE("threshold index: monotonicity switches at the predicted mu") {
  const Age K = 10;
  const double lam = 0.7;
  const auto thr = CostSpec::threshold(1, K);
  for (Age i : {2, 5, 8}) {
    const double mu_star = 1.0 / (lam * static_cast<double>(K - i + 1));
    const double step = 1e-3;
    double prev = avg_whittle_index(validate_params(lam, step), thr, i);
    double switch_at = -1;
    for (int s = 2; s <= 1000; ++s) {
      const double m = avg_whittle_index(validate_params(lam, step * s), thr, i);
      if (m < prev - 1e-12 && switch_at < 0) switch_at = step * (s - 1);
      prev = m;
    }
    CHECK(std::abs(switch_at - mu_star) <= step);
  }
  // Linear in mu once i >= k.
  for (int s = 1; s <= 10; ++s)
    CHECK(avg_whittle_index(validate_params(lam, 0.1 * s), thr, 12) == doctest::Approx(0.1 * s * K).epsilon(1e-14));
}
