#include "aoi/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "aoi/average.hpp"
#include "aoi/discounted.hpp"
#include "aoi/indexability.hpp"
#include "aoi/oracle.hpp"
#include "aoi/sim.hpp"

namespace aoi::cli {

namespace {

using io::format_number;
using io::json;

std::optional<Discount> resolve_beta(const io::InstanceFile& f, std::optional<double> flag) {
  if (flag) return validate_discount(*flag);
  return f.beta;
}

Discount need_beta(std::optional<Discount> b) {
  if (!b) throw Error(ErrorCode::InvalidInput, "beta", "discounted criterion needs --beta or an instance \"beta\"");
  return *b;
}

Criterion parse_criterion(const std::string& s) {
  if (s == "discounted") return Criterion::Discounted;
  if (s == "average") return Criterion::Average;
  throw Error(ErrorCode::InvalidInput, "criterion", "criterion must be 'discounted' or 'average'");
}

std::vector<Criterion> criteria_for(const VerifyOptions& o, std::optional<Discount> beta) {
  if (o.criterion) {
    if (*o.criterion == Criterion::Discounted) need_beta(beta);
    return {*o.criterion};
  }
  if (beta) return {Criterion::Discounted, Criterion::Average};
  return {Criterion::Average};
}

}  // namespace

void cmd_index(const IndexOptions& o, std::ostream& out) {
  const auto f = io::load_instance(o.instance);
  const auto beta = resolve_beta(f, o.beta);
  if (o.criterion == Criterion::Discounted) need_beta(beta);
  if (o.i_from < 1 || o.i_to < o.i_from) throw Error(ErrorCode::InvalidInput, "i-range", "need 1 <= a <= b");
  if (o.format != "csv" && o.format != "json") throw Error(ErrorCode::InvalidInput, "format", "csv or json");

  json rows = json::array();
  if (o.format == "csv") out << "user,i,index\n";
  for (std::size_t u = 0; u < f.users.size(); ++u) {
    const auto& user = f.users[u];
    const auto table = indexability::index_table(user.params, beta, o.criterion, user.cost, o.i_to);
    for (Age i = o.i_from; i <= o.i_to; ++i) {
      const double m = table[static_cast<std::size_t>(i - 1)];
      if (o.format == "csv") out << u << ',' << i << ',' << format_number(m) << '\n';
      else rows.push_back({{"user", u}, {"i", i}, {"index", m}});
    }
  }
  if (o.format == "json")
    out << json{{"criterion", to_string(o.criterion)}, {"rows", rows}}.dump(2) << '\n';
}

int cmd_verify(const VerifyOptions& o, std::ostream& out) {
  using namespace indexability;
  const auto f = io::load_instance(o.instance);
  const auto beta = resolve_beta(f, o.beta);
  const auto crits = criteria_for(o, beta);
  if (o.suite != "pcli" && o.suite != "oracle" && o.suite != "monotone" && o.suite != "all")
    throw Error(ErrorCode::InvalidInput, "suite", "suite must be pcli, oracle, monotone or all");
  if (o.i_max < 10) throw Error(ErrorCode::InvalidInput, "imax", "--imax must be at least 10");
  const bool all = o.suite == "all";

  json reports = json::array();
  bool pass = true;
  auto add = [&](std::size_t user, const VerificationReport& r) {
    json j = io::to_json(r);
    j["user"] = user;
    reports.push_back(j);
    pass = pass && r.pass;
  };

  for (std::size_t u = 0; u < f.users.size(); ++u) {
    const auto& user = f.users[u];
    const auto& pr = user.params;
    for (Criterion c : crits) {
      if (all || o.suite == "pcli") {
        add(u, verify_pcli1(pr, beta, c, o.i_max, o.i_max));
        add(u, verify_pcli2(pr, beta, c, user.cost, o.i_max));
      }
      if (all || o.suite == "oracle") {
        std::vector<Age> ages;
        for (Age i : {1, 2, 5, 10, 25})
          if (5 * i <= 4 * o.i_max) ages.push_back(i);
        add(u, verify_oracle_index(pr, beta, c, user.cost, ages, o.i_max));
        const auto m = index_table(pr, beta, c, user.cost, 6);
        for (std::size_t j = 0; j + 1 < m.size(); ++j) {
          if (!(m[j + 1] > m[j])) continue;
          add(u, verify_threshold_optimality(pr, beta, c, user.cost, 0.5 * (m[j] + m[j + 1]), o.i_max));
        }
      }
      if (all || o.suite == "monotone") {
        add(u, verify_lambda_monotone(pr.mu(), beta, c, user.cost, {1, 2, 5, 10}));
        if (const auto* lin = std::get_if<LinearCost>(&user.cost.variant()); lin && lin->c > 0)
          add(u, verify_mu_monotone_linear(pr.lambda(), beta, c, lin->c, {1, 2, 5, 10}));
        add(u, verify_special_vs_general({pr}, beta, c, 100));
      }
    }
    if (all || o.suite == "monotone") {
      add(u, verify_vanishing_discount(pr, user.cost, {0, 1, 3, 10}, {0.99, 0.999, 0.9999, 0.99999, 0.999999, 0.9999999}, 10));
      if (beta) add(u, verify_recursion_residual(pr, *beta, user.cost, {0, 1, 3, 10}, 40));
    }
  }
  out << json{{"suite", o.suite}, {"pass", pass}, {"reports", reports}}.dump(2) << '\n';
  return pass ? kExitOk : kExitVerify;
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  auto f = io::load_instance(o.instance);
  f.beta = resolve_beta(f, o.beta);
  const auto inst = f.to_system();
  const bool disc = o.criterion == Criterion::Discounted;
  if (disc) need_beta(inst.beta());
  if (o.reps < 1) throw Error(ErrorCode::InvalidInput, "reps", "--reps must be positive");

  std::vector<sim::Policy> policies;
  for (const auto& name : o.policies) {
    if (name == "whittle") policies.push_back(sim::Policy::whittle(o.criterion));
    else if (name == "greedy") policies.push_back(sim::Policy::greedy());
    else if (name == "random") policies.push_back(sim::Policy::random());
    else if (name == "fixed") {
      std::vector<std::size_t> order(inst.size());
      for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;
      policies.push_back(sim::Policy::fixed(f.priority.value_or(order)));
    } else {
      throw Error(ErrorCode::InvalidInput, "policies", "unknown policy '" + name + "'");
    }
  }
  if (policies.empty()) throw Error(ErrorCode::InvalidInput, "policies", "no policy selected");

  const long horizon = o.horizon ? *o.horizon : disc ? sim::required_horizon(inst, 1e-6) : 100000;
  std::ofstream trace;
  sim::RunOptions ro;
  if (!o.trace.empty()) {
    trace.open(o.trace);
    if (!trace) throw Error(ErrorCode::InvalidInput, "trace", "cannot write '" + o.trace + "'");
    trace << "slot,user,b,i,action,success\n";
    ro.trace = &trace;
  }

  const auto bound = sim::dual_bound(inst, o.criterion);
  json outcomes = json::array();
  bool weak_duality = true;
  double worst_gap = std::numeric_limits<double>::infinity();
  for (const auto& p : policies) {
    const auto r = sim::run(inst, p, o.criterion, horizon, o.reps, o.seed, ro);
    ro.trace = nullptr;  // trace only the first policy
    outcomes.push_back(io::to_json(r));
    const double gap = r.mean + 2 * r.std_error - bound.value;
    worst_gap = std::min(worst_gap, gap);
    if (gap < 0) weak_duality = false;
  }
  json doc = {{"criterion", to_string(o.criterion)},
              {"users", inst.size()},
              {"channels", inst.channels()},
              {"seed", o.seed},
              {"horizon", horizon},
              {"replications", o.reps},
              {"outcomes", outcomes},
              {"dual_bound", io::to_json(bound)},
              {"weak_duality", {{"holds", weak_duality}, {"min_margin", worst_gap}}}};
  if (disc) doc["beta"] = inst.beta()->beta();
  out << doc.dump(2) << '\n';
  return weak_duality ? kExitOk : kExitVerify;
}

void cmd_sweep(const io::SweepSpec& s, std::ostream& out) {
  out << "value,i,discounted,average\n";
  auto cell = [](auto&& fn) -> std::string {
    try {
      return format_number(fn());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SeriesDiverges) return "nan";
      throw;
    }
  };
  for (double v : s.values()) {
    double lam = s.lambda, mu = s.mu, beta = s.beta;
    std::vector<Age> ages = s.ages;
    switch (s.vary) {
      case io::SweepVar::Age: ages = {static_cast<Age>(std::llround(v))}; break;
      case io::SweepVar::Lambda: lam = std::min(v, 1.0); break;
      case io::SweepVar::Mu: mu = std::min(v, 1.0); break;
      case io::SweepVar::Beta: beta = v; break;
    }
    const auto pr = validate_params(lam, mu);
    const auto b = validate_discount(beta);
    for (Age i : ages) {
      out << format_number(v) << ',' << i << ',' << cell([&] { return discounted::whittle_index(pr, b, s.cost, i); })
          << ',' << cell([&] { return average::avg_whittle_index(pr, s.cost, i); }) << '\n';
    }
  }
}

namespace {

bool is_input_error(ErrorCode c) {
  return c == ErrorCode::InvalidInput || c == ErrorCode::OutOfRange || c == ErrorCode::SeriesDiverges ||
         c == ErrorCode::IllegalAction || c == ErrorCode::HorizonTooShort;
}

/// Writes to --out when given, else to the command's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (path.empty()) return;
    file_.open(path);
    if (!file_) throw Error(ErrorCode::InvalidInput, "out", "cannot write '" + path + "'");
    os_ = &file_;
  }
  std::ostream& get() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

std::pair<Age, Age> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) {
      const Age a = std::stol(s);
      return {a, a};
    }
    return {std::stol(s.substr(0, colon)), std::stol(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidInput, "i-range", "expected a:b with integers");
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Whittle index computation, verification and simulation for AoI scheduling"};
  app.require_subcommand(1);
  std::string out_path, criterion = "average", format = "csv", i_range = "1:20", suite = "all", policies = "whittle,greedy";
  std::string instance, sweep_file, trace;
  std::optional<double> beta;
  std::optional<long> horizon;
  long imax = 200, reps = 20;
  std::uint64_t seed = 1;
  bool criterion_given = false;

  auto common = [&](CLI::App* sc) {
    sc->add_option("--out", out_path, "write output to this path");
    sc->add_option("--beta", beta, "discount factor in (0, 1)");
  };
  auto* index = app.add_subcommand("index", "tabulate Whittle indices per user");
  index->add_option("instance", instance, "instance JSON")->required();
  index->add_option("--criterion", criterion)->check(CLI::IsMember({"discounted", "average"}));
  index->add_option("--i-range", i_range, "AoI range a:b");
  index->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
  common(index);

  auto* verify = app.add_subcommand("verify", "run verification suites");
  verify->add_option("instance", instance, "instance JSON")->required();
  auto* vcrit = verify->add_option("--criterion", criterion)->check(CLI::IsMember({"discounted", "average"}));
  verify->add_option("--suite", suite)->check(CLI::IsMember({"pcli", "oracle", "monotone", "all"}));
  verify->add_option("--imax", imax, "grid bound and oracle truncation level");
  common(verify);

  auto* simulate = app.add_subcommand("simulate", "simulate policies and compute the dual bound");
  simulate->add_option("instance", instance, "instance JSON")->required();
  simulate->add_option("--criterion", criterion)->check(CLI::IsMember({"discounted", "average"}));
  simulate->add_option("--policies", policies, "comma list of whittle,greedy,random,fixed");
  simulate->add_option("--horizon", horizon, "slots per replication");
  simulate->add_option("--reps", reps, "replications");
  simulate->add_option("--seed", seed, "random seed");
  simulate->add_option("--trace", trace, "per-slot CSV trace of the first replication");
  simulate->add_option("--format", format)->check(CLI::IsMember({"json"}));
  common(simulate);

  auto* sweep = app.add_subcommand("sweep", "emit index sweeps as CSV");
  sweep->add_option("spec", sweep_file, "sweep spec JSON")->required();
  sweep->add_option("--out", out_path, "write output to this path");
  sweep->add_option("--format", format)->check(CLI::IsMember({"csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }
  criterion_given = vcrit->count() > 0;

  try {
    Sink sink(out_path, out);
    if (index->parsed()) {
      IndexOptions o;
      o.instance = instance;
      o.criterion = parse_criterion(criterion);
      o.beta = beta;
      std::tie(o.i_from, o.i_to) = parse_range(i_range);
      o.format = format;
      cmd_index(o, sink.get());
      return kExitOk;
    }
    if (verify->parsed()) {
      VerifyOptions o;
      o.instance = instance;
      o.suite = suite;
      if (criterion_given) o.criterion = parse_criterion(criterion);
      o.beta = beta;
      o.i_max = imax;
      return cmd_verify(o, sink.get());
    }
    if (simulate->parsed()) {
      SimulateOptions o;
      o.instance = instance;
      o.criterion = parse_criterion(criterion);
      o.beta = beta;
      o.horizon = horizon;
      o.reps = reps;
      o.seed = seed;
      o.trace = trace;
      o.policies.clear();
      std::stringstream ss(policies);
      for (std::string p; std::getline(ss, p, ',');)
        if (!p.empty()) o.policies.push_back(p);
      return cmd_simulate(o, sink.get());
    }
    if (sweep->parsed()) {
      const auto spec = io::load_sweep(sweep_file);
      cmd_sweep(spec, sink.get());
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_input_error(e.code()) ? kExitInput : kExitVerify;
  } catch (const io::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace aoi::cli
