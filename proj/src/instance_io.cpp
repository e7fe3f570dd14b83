#include "aoi/instance_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace aoi::io {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::InvalidInput, where, where + ": " + what);
}

const json& member(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) bad(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) bad(where + "." + key, "missing required field");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) bad(where, "expected a finite number");
  return x;
}

long integer(const json& j, const std::string& where) {
  if (j.is_number_integer()) return j.get<long>();
  if (j.is_number_float()) {
    const double x = j.get<double>();
    if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15) return static_cast<long>(x);
  }
  bad(where, "expected an integer");
}

/// Re-tags a validation error with the JSON path of the offending value.
template <class F>
auto at_path(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    const std::string field = e.field().empty() ? where : where + "." + e.field();
    throw Error(e.code() == ErrorCode::SeriesDiverges ? ErrorCode::SeriesDiverges : ErrorCode::InvalidInput, field,
                field + ": " + e.what());
  }
}

UserParams params_at(const json& j, const std::string& where) {
  const double lam = number(member(j, "lambda", where), where + ".lambda");
  const double mu = number(member(j, "mu", where), where + ".mu");
  return at_path(where, [&] { return validate_params(lam, mu); });
}

}  // namespace

CostSpec parse_cost(const json& j, const std::string& where) {
  const json& t = member(j, "type", where);
  if (!t.is_string()) bad(where + ".type", "expected a string");
  const std::string type = t.get<std::string>();
  if (type == "linear") {
    const double c = number(member(j, "c", where), where + ".c");
    return at_path(where, [&] { return CostSpec::linear(c); });
  }
  if (type == "quadratic") {
    const double c = number(member(j, "c", where), where + ".c");
    return at_path(where, [&] { return CostSpec::quadratic(c); });
  }
  if (type == "threshold") {
    const double c = number(member(j, "c", where), where + ".c");
    const long k = integer(member(j, "k", where), where + ".k");
    return at_path(where, [&] { return CostSpec::threshold(c, k); });
  }
  if (type == "tabular") {
    const json& v = member(j, "values", where);
    if (!v.is_array()) bad(where + ".values", "expected an array");
    std::vector<double> values;
    for (std::size_t n = 0; n < v.size(); ++n)
      values.push_back(number(v[n], where + ".values[" + std::to_string(n) + "]"));
    const double r = j.contains("tail_rate") ? number(j["tail_rate"], where + ".tail_rate") : 1.0;
    return at_path(where, [&] { return CostSpec::tabular(std::move(values), r); });
  }
  bad(where + ".type", "unknown cost type '" + type + "' (linear, quadratic, threshold, tabular)");
}

InstanceFile parse_instance(const json& j) {
  InstanceFile f;
  const json& users = member(j, "users", "instance");
  if (!users.is_array() || users.empty()) bad("users", "expected a nonempty array");
  for (std::size_t n = 0; n < users.size(); ++n) {
    const std::string where = "users[" + std::to_string(n) + "]";
    const json& u = users[n];
    sim::User user{params_at(u, where), parse_cost(member(u, "cost", where), where + ".cost"), 1, std::nullopt};
    if (u.contains("initial_age")) {
      user.initial_age = integer(u["initial_age"], where + ".initial_age");
      if (user.initial_age < 1) bad(where + ".initial_age", "AoI must be >= 1");
    }
    if (u.contains("initial_packet")) {
      const long b = integer(u["initial_packet"], where + ".initial_packet");
      if (b != 0 && b != 1) bad(where + ".initial_packet", "must be 0 or 1");
      user.initial_packet = static_cast<int>(b);
    }
    f.users.push_back(std::move(user));
  }
  if (j.contains("channels")) {
    const long m = integer(j["channels"], "channels");
    if (m < 1) bad("channels", "must be at least 1");
    f.channels = static_cast<int>(m);
  }
  if (j.contains("beta")) {
    const double b = number(j["beta"], "beta");
    f.beta = at_path("", [&] { return validate_discount(b); });
  }
  if (j.contains("priority")) {
    const json& p = j["priority"];
    if (!p.is_array()) bad("priority", "expected an array of user ids");
    std::vector<std::size_t> order;
    for (std::size_t n = 0; n < p.size(); ++n) {
      const long id = integer(p[n], "priority[" + std::to_string(n) + "]");
      if (id < 0 || static_cast<std::size_t>(id) >= f.users.size())
        bad("priority[" + std::to_string(n) + "]", "user id out of range");
      order.push_back(static_cast<std::size_t>(id));
    }
    f.priority = std::move(order);
  }
  return f;
}

sim::SystemInstance InstanceFile::to_system() const {
  if (!channels) bad("channels", "missing required field");
  return sim::SystemInstance(users, *channels, beta);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "path", "cannot open '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto ? upto - 1 : 0), '\n');
    throw Error(ErrorCode::InvalidInput, "line " + std::to_string(line),
                path + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
  }
}

InstanceFile load_instance(const std::string& path) { return parse_instance(read_json_file(path)); }

std::vector<double> SweepSpec::values() const {
  std::vector<double> out;
  const long n = static_cast<long>(std::floor((to - from) / step + 1e-9));
  for (long j = 0; j <= n; ++j) out.push_back(from + static_cast<double>(j) * step);
  return out;
}

SweepSpec parse_sweep(const json& j) {
  SweepSpec s;
  const json& v = member(j, "vary", "sweep");
  if (!v.is_string()) bad("vary", "expected a string");
  const std::string var = v.get<std::string>();
  if (var == "i") s.vary = SweepVar::Age;
  else if (var == "lambda") s.vary = SweepVar::Lambda;
  else if (var == "mu") s.vary = SweepVar::Mu;
  else if (var == "beta") s.vary = SweepVar::Beta;
  else bad("vary", "unknown sweep variable '" + var + "' (i, lambda, mu, beta)");
  s.from = number(member(j, "from", "sweep"), "from");
  s.to = number(member(j, "to", "sweep"), "to");
  s.step = number(member(j, "step", "sweep"), "step");
  if (!(s.step > 0)) bad("step", "must be positive");
  if (s.to < s.from) bad("to", "must not be below 'from'");
  if (j.contains("lambda")) s.lambda = number(j["lambda"], "lambda");
  if (j.contains("mu")) s.mu = number(j["mu"], "mu");
  if (j.contains("beta")) s.beta = number(j["beta"], "beta");
  if (j.contains("i")) {
    const json& a = j["i"];
    s.ages.clear();
    if (a.is_array()) {
      for (std::size_t n = 0; n < a.size(); ++n) s.ages.push_back(integer(a[n], "i[" + std::to_string(n) + "]"));
    } else {
      s.ages.push_back(integer(a, "i"));
    }
    if (s.ages.empty()) bad("i", "expected at least one AoI value");
    for (Age i : s.ages)
      if (i < 1) bad("i", "AoI values must be >= 1");
  }
  s.cost = parse_cost(member(j, "cost", "sweep"), "cost");

  // Every grid point must be a valid parameter.
  auto check = [&](const char* field, double lo, double hi, bool hi_open) {
    for (double x : s.values())
      if (!(x > lo && (hi_open ? x < hi : x <= hi + 1e-12)))
        bad(field, "sweep range leaves the valid domain");
  };
  switch (s.vary) {
    case SweepVar::Age:
      if (s.from < 1 || s.from != std::floor(s.from) || s.step != std::floor(s.step))
        bad("from", "AoI sweeps need integer from >= 1 and integer step");
      break;
    case SweepVar::Lambda: check("from", 0.0, 1.0, false); break;
    case SweepVar::Mu: check("from", 0.0, 1.0, false); break;
    case SweepVar::Beta: check("from", 0.0, 1.0, true); break;
  }
  at_path("", [&] { return validate_params(s.lambda, s.mu); });
  at_path("", [&] { return validate_discount(s.beta); });
  return s;
}

SweepSpec load_sweep(const std::string& path) { return parse_sweep(read_json_file(path)); }

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json to_json(const indexability::VerificationReport& r) {
  json w = json::object();
  for (const auto& [k, v] : r.witness) w[k] = number_or_null(v);
  return {{"condition", indexability::to_string(r.id)},
          {"grid", r.grid},
          {"pass", r.pass},
          {"worst_violation", number_or_null(r.worst_violation)},
          {"tolerance", r.tolerance},
          {"observed", number_or_null(r.observed)},
          {"skipped", r.skipped},
          {"witness", w}};
}

json to_json(const sim::SimOutcome& o) {
  json j = {{"policy", o.policy},
            {"criterion", to_string(o.criterion)},
            {"mean", o.mean},
            {"std_error", o.std_error},
            {"work_mean", o.work_mean},
            {"work_std_error", o.work_std_error},
            {"replications", o.replications},
            {"seed", o.seed},
            {"horizon", o.horizon}};
  if (o.criterion == Criterion::Average) j["burn_in_slots"] = o.burn_in_slots;
  else j["tail_bound"] = number_or_null(o.tail_bound);
  return j;
}

json to_json(const sim::DualBound& d) {
  return {{"criterion", to_string(d.criterion)},
          {"nu_star", d.nu_star},
          {"bound", d.value},
          {"capacity", d.capacity},
          {"user_values", d.user_values},
          {"user_work", d.user_work},
          {"user_thresholds", d.user_thresholds},
          {"slackness_residual", d.slackness_residual},
          {"evaluations", d.evaluations}};
}

json to_json(const CostSpec& c) {
  struct V {
    json operator()(const LinearCost& x) const { return {{"type", "linear"}, {"c", x.c}}; }
    json operator()(const QuadraticCost& x) const { return {{"type", "quadratic"}, {"c", x.c}}; }
    json operator()(const ThresholdCost& x) const { return {{"type", "threshold"}, {"c", x.c}, {"k", x.k}}; }
    json operator()(const TabularCost& x) const {
      return {{"type", "tabular"}, {"values", x.values}, {"tail_rate", x.tail_rate}};
    }
  };
  return std::visit(V{}, c.variant());
}

}  // namespace aoi::io
