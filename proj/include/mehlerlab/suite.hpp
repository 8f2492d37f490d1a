#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mehlerlab/scenario.hpp"

namespace mehlerlab {

/// One row of the frozen report table.
struct CheckRecord {
  std::string check;
  double s = 0.0;
  double t = 0.0;
  std::string param;
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::string verdict;  // PASS / INDETERMINATE / FAIL / VACUOUS / SKIP / INFO
};

/// Deterministic suite output: given (scenario, command, seed) the
/// serialized form is byte-identical across runs.
struct Report {
  std::string command;
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::vector<CheckRecord> records;

  bool has_fail() const;
};

/// Runs one named suite: flow, harnack, evolution, control, semilinear, all.
Report run_suite(const Scenario& scenario, const std::string& suite, std::uint64_t seed,
                 std::int64_t n = 20000, double tol = 1e-6);

void write_report_json(const Report& report, std::ostream& out);
void write_report_csv(const Report& report, std::ostream& out);
std::string format_double(double v);

/// 0 when no FAIL verdict, 2 otherwise.
int report_exit_code(const Report& report);

}  // namespace mehlerlab
