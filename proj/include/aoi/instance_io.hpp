#pragma once

// JSON instance and sweep files, and JSON views of result objects.
// Parse failures raise Error(InvalidInput) whose field() is a JSON path such
// as "users[2].cost.k", or "line 7" for syntax errors.

#include <optional>
#include <string>
#include <vector>

#include "aoi/core.hpp"
#include "aoi/indexability.hpp"
#include "aoi/sim.hpp"
#include "json.hpp"

namespace aoi::io {

using nlohmann::json;

/// An instance as written in the file; M < N is only enforced by to_system().
struct InstanceFile {
  std::vector<sim::User> users;
  std::optional<int> channels;
  std::optional<Discount> beta;
  /// Optional fixed-priority order (user ids, highest first).
  std::optional<std::vector<std::size_t>> priority;

  sim::SystemInstance to_system() const;
};

CostSpec parse_cost(const json& j, const std::string& where);
InstanceFile parse_instance(const json& j);
InstanceFile load_instance(const std::string& path);

enum class SweepVar { Age, Lambda, Mu, Beta };

struct SweepSpec {
  SweepVar vary = SweepVar::Age;
  double from = 1.0, to = 1.0, step = 1.0;
  double lambda = 0.7, mu = 0.8, beta = 0.8;
  std::vector<Age> ages{1};
  CostSpec cost = CostSpec::linear(1.0);

  /// Grid values from, from + step, ..., up to `to` (inclusive within 1e-9 steps).
  std::vector<double> values() const;
};

SweepSpec parse_sweep(const json& j);
SweepSpec load_sweep(const std::string& path);

/// Reads a JSON file, mapping syntax errors to a line diagnostic.
json read_json_file(const std::string& path);

/// "%.17g" formatting used by every CSV writer.
std::string format_number(double x);

json to_json(const indexability::VerificationReport& r);
json to_json(const sim::SimOutcome& o);
json to_json(const sim::DualBound& d);
json to_json(const CostSpec& c);

}  // namespace aoi::io
