#include "aoi/core.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace aoi {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::SeriesDiverges: return "SeriesDiverges";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::BracketFailed: return "BracketFailed";
    case ErrorCode::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorCode::IllegalAction: return "IllegalAction";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::SearchBracketFailed: return "SearchBracketFailed";
  }
  return "Unknown";
}

const char* to_string(Criterion c) {
  return c == Criterion::Discounted ? "discounted" : "average";
}

Error::Error(ErrorCode code, std::string field, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + (field.empty() ? "" : "(" + field + ")") +
                         ": " + message),
      code_(code),
      field_(std::move(field)) {}

namespace {

bool in_open_closed_unit(double x) { return std::isfinite(x) && x > 0.0 && x <= 1.0; }

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

UserParams::UserParams(double lambda, double mu)
    : lambda_(lambda), mu_(mu), p_(lambda * mu), q_(1.0 - lambda * mu) {}

UserParams validate_params(double lambda, double mu) {
  if (!in_open_closed_unit(lambda))
    throw Error(ErrorCode::OutOfRange, "lambda", "must lie in (0, 1], got " + fmt(lambda));
  if (!in_open_closed_unit(mu))
    throw Error(ErrorCode::OutOfRange, "mu", "must lie in (0, 1], got " + fmt(mu));
  return UserParams(lambda, mu);
}

Discount validate_discount(double beta) {
  if (!std::isfinite(beta) || beta <= 0.0 || beta >= 1.0)
    throw Error(ErrorCode::OutOfRange, "beta", "must lie in (0, 1), got " + fmt(beta));
  return Discount(beta);
}

CostSpec CostSpec::linear(double c) {
  if (!std::isfinite(c) || c < 0.0)
    throw Error(ErrorCode::InvalidInput, "c", "linear cost coefficient must be >= 0");
  return CostSpec(LinearCost{c});
}

CostSpec CostSpec::quadratic(double c) {
  if (!std::isfinite(c) || c < 0.0)
    throw Error(ErrorCode::InvalidInput, "c", "quadratic cost coefficient must be >= 0");
  return CostSpec(QuadraticCost{c});
}

CostSpec CostSpec::threshold(double c, Age k) {
  if (!std::isfinite(c) || c < 0.0)
    throw Error(ErrorCode::InvalidInput, "c", "threshold cost level must be >= 0");
  if (k < 1) throw Error(ErrorCode::InvalidInput, "k", "threshold cost AoI must be >= 1");
  return CostSpec(ThresholdCost{c, k});
}

CostSpec CostSpec::tabular(std::vector<double> values, double tail_rate) {
  if (values.empty()) throw Error(ErrorCode::InvalidInput, "values", "tabular cost needs at least one value");
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!std::isfinite(values[j]) || values[j] < 0.0)
      throw Error(ErrorCode::InvalidInput, "values",
                  "entry " + std::to_string(j) + " must be finite and nonnegative");
    if (j > 0 && values[j] < values[j - 1])
      throw Error(ErrorCode::InvalidInput, "values",
                  "costs must be nondecreasing (entry " + std::to_string(j) + " decreases)");
  }
  if (!std::isfinite(tail_rate) || tail_rate < 1.0)
    throw Error(ErrorCode::InvalidInput, "tail_rate", "must be finite and >= 1");
  return CostSpec(TabularCost{std::move(values), tail_rate});
}

std::string CostSpec::name() const {
  struct V {
    std::string operator()(const LinearCost& x) const { return "linear(c=" + fmt(x.c) + ")"; }
    std::string operator()(const QuadraticCost& x) const { return "quadratic(c=" + fmt(x.c) + ")"; }
    std::string operator()(const ThresholdCost& x) const {
      return "threshold(c=" + fmt(x.c) + ",k=" + std::to_string(x.k) + ")";
    }
    std::string operator()(const TabularCost& x) const {
      return "tabular(L=" + std::to_string(x.values.size()) + ",r=" + fmt(x.tail_rate) + ")";
    }
  };
  return std::visit(V{}, v_);
}

double CostSpec::cost(Age i) const {
  if (i <= 0) return 0.0;
  struct V {
    Age i;
    double operator()(const LinearCost& x) const { return x.c * static_cast<double>(i); }
    double operator()(const QuadraticCost& x) const {
      const double d = static_cast<double>(i);
      return x.c * d * d;
    }
    double operator()(const ThresholdCost& x) const { return i > x.k ? x.c : 0.0; }
    double operator()(const TabularCost& x) const {
      const auto L = static_cast<Age>(x.values.size());
      if (i <= L) return x.values[static_cast<std::size_t>(i - 1)];
      if (x.tail_rate == 1.0) return x.values.back();
      return x.values.back() * std::pow(x.tail_rate, static_cast<double>(i - L));
    }
  };
  return std::visit(V{i}, v_);
}

bool CostSpec::converges(double ratio) const noexcept {
  if (!(ratio >= 0.0 && ratio < 1.0)) return false;
  if (const auto* t = std::get_if<TabularCost>(&v_)) return t->tail_rate * ratio < 1.0;
  return true;
}

void CostSpec::check_growth(double ratio) const {
  if (!converges(ratio))
    throw Error(ErrorCode::SeriesDiverges, "tail_rate",
                "cost series does not converge at ratio " + fmt(ratio) + " for " + name());
}

double CostSpec::tail_series(Age i, double x) const {
  check_growth(x);
  if (x == 0.0) return cost(i);
  if (i <= 0) return cost(0) + x * tail_series(1, x);
  struct V {
    Age i;
    double x;
    double operator()(const LinearCost& s) const {
      const double n = static_cast<double>(i - 1);
      const double r = 1.0 / (1.0 - x);
      return s.c * (n * r + r * r);
    }
    double operator()(const QuadraticCost& s) const {
      const double n = static_cast<double>(i - 1);
      const double r = 1.0 / (1.0 - x);
      return s.c * (n * n * r + 2.0 * n * r * r + (1.0 + x) * r * r * r);
    }
    double operator()(const ThresholdCost& s) const {
      const Age gap = s.k + 1 - i;
      const double lead = gap > 0 ? std::pow(x, static_cast<double>(gap)) : 1.0;
      return s.c * lead / (1.0 - x);
    }
    double operator()(const TabularCost& s) const {
      const auto L = static_cast<Age>(s.values.size());
      const double r = s.tail_rate;
      if (i > L) {
        const double ci = r == 1.0 ? s.values.back()
                                   : s.values.back() * std::pow(r, static_cast<double>(i - L));
        return ci / (1.0 - r * x);
      }
      // Backward Horner pass over the tabulated head, then the geometric tail.
      double acc = s.values.back() * r / (1.0 - r * x);
      for (Age j = L; j >= i; --j) acc = s.values[static_cast<std::size_t>(j - 1)] + x * acc;
      return acc;
    }
  };
  return std::visit(V{i, x}, v_);
}

std::optional<Age> CostSpec::constant_from() const {
  struct V {
    std::optional<Age> operator()(const LinearCost& s) const {
      return s.c == 0.0 ? std::optional<Age>(1) : std::nullopt;
    }
    std::optional<Age> operator()(const QuadraticCost& s) const {
      return s.c == 0.0 ? std::optional<Age>(1) : std::nullopt;
    }
    std::optional<Age> operator()(const ThresholdCost& s) const {
      return s.c == 0.0 ? 1 : s.k + 1;
    }
    std::optional<Age> operator()(const TabularCost& s) const {
      if (s.tail_rate != 1.0 && s.values.back() > 0.0) return std::nullopt;
      Age from = static_cast<Age>(s.values.size());
      while (from > 1 && s.values[static_cast<std::size_t>(from - 2)] == s.values.back()) --from;
      return from;
    }
  };
  return std::visit(V{}, v_);
}

double CostSpec::limit() const {
  if (auto from = constant_from()) return cost(*from);
  return std::numeric_limits<double>::infinity();
}

bool CostSpec::is_zero() const {
  auto from = constant_from();
  return from && cost(*from) == 0.0;
}

}  // namespace aoi
