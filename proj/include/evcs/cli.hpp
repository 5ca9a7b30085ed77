#ifndef EVCS_CLI_HPP
#define EVCS_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evcs/battery.hpp"
#include "evcs/predictor.hpp"
#include "evcs/simulator.hpp"

namespace evcs {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct RunConfig {
  std::filesystem::path sessions;
  std::filesystem::path prices;
  std::filesystem::path out;
  std::vector<Scenario> scenarios;
  int cycle_minutes = 10;
  int ports = 54;
  BmsParams bms;
  PredictorParams predictor;
  double w = 0.0003;
  bool b_actual_only = false;
  int m1 = 1;
  int m2 = 1;
  std::uint64_t seed = 0;
  std::optional<int> days;                         // simulate the last N days
  std::optional<std::pair<Day, Day>> date_range;   // or an inclusive date range
};

/// Per-scenario artifacts under out/<scenario>/<date>/ plus out/cumulative.csv.
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);
/// Writes the predictor model of the whole history as JSON to `config.out`
/// (stdout when empty) and prints the initial daily arrival estimates.
int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& err);
/// Side-by-side cumulative cost and deficit per day, out/comparison.csv.
int cmd_compare(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full command-line entry point; returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evcs

#endif  // EVCS_CLI_HPP
