#pragma once

// Command-line front end. Exit codes: 0 success, 2 input error,
// 3 verification failure (or a numerical failure while verifying).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aoi/core.hpp"
#include "aoi/instance_io.hpp"

namespace aoi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitVerify = 3;

struct IndexOptions {
  std::string instance;
  Criterion criterion = Criterion::Average;
  std::optional<double> beta;
  Age i_from = 1, i_to = 20;
  std::string format = "csv";
};

/// Rows (user, i, index).
void cmd_index(const IndexOptions& opts, std::ostream& out);

struct VerifyOptions {
  std::string instance;
  std::string suite = "all";  // pcli | oracle | monotone | all
  std::optional<Criterion> criterion;  // both when absent (average only without beta)
  std::optional<double> beta;
  Age i_max = 200;
};

/// JSON report; returns kExitOk or kExitVerify.
int cmd_verify(const VerifyOptions& opts, std::ostream& out);

struct SimulateOptions {
  std::string instance;
  std::vector<std::string> policies{"whittle", "greedy"};
  Criterion criterion = Criterion::Average;
  std::optional<double> beta;
  std::optional<long> horizon;
  long reps = 20;
  std::uint64_t seed = 1;
  std::string trace;  // optional per-slot CSV of replication 0
};

/// JSON outcomes plus the dual bound; kExitVerify when a policy's mean
/// falls below the bound by more than two standard errors.
int cmd_simulate(const SimulateOptions& opts, std::ostream& out);

/// CSV with header value,i,discounted,average.
void cmd_sweep(const io::SweepSpec& spec, std::ostream& out);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aoi::cli
