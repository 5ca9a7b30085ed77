#ifndef EVCS_SIMULATOR_HPP
#define EVCS_SIMULATOR_HPP

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evcs/battery.hpp"
#include "evcs/economic.hpp"
#include "evcs/predictor.hpp"
#include "evcs/sessions.hpp"

namespace evcs {

/// S1 real-time DP on stated departures, S2 predictive DP, S3 offline DP with
/// perfect knowledge, S4 uncontrolled first-come-first-served.
enum class Scenario { S1, S2, S3, S4 };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view text);

struct ScenarioConfig {
  Scenario scenario = Scenario::S2;
  double w = 0.0003;
  bool b_includes_predicted = true;
  int m1 = 1;
  int m2 = 1;
  BmsParams bms;
  SlotClock clock;
  int ports = 54;
  PricingSchedule prices;
  PredictorParams predictor;

  void validate() const;
  PlannerSettings planner() const;
};

/// One charge cycle k (instant k to k+1).
struct CycleRecord {
  int k = 0;
  double price = 0.0;
  int cap_ports = 0;       // granted by the economic layer; all plugged EVs under S4
  double cap_kw = 0.0;
  double planned_kwh = 0.0;  // plan's cumulative energy at k+1
  double grid_kwh = 0.0;
  double delivered_kwh = 0.0;  // cumulative battery-side energy at k+1
  double e_min = 0.0;          // true envelope at k+1
  double e_max = 0.0;
  int connected = 0;
  int on = 0;
  bool infeasible = false;
  double n_hat = 0.0;  // S2 running estimate of today's arrivals
};

struct PortDecision {
  int k = 0;
  int port = 0;
  bool on = false;
  double priority = 0.0;
  double remaining_kwh = 0.0;
  int session = -1;
};

struct SessionOutcome {
  std::string id;
  Timestamp arrival;
  Timestamp departure;
  double requested_kwh = 0.0;
  double delivered_kwh = 0.0;
  int port = -1;  // -1 when not admitted
  bool rejected = false;
  bool truncated = false;  // stay ran past midnight
};

struct DayTrace {
  Day day{};
  Scenario scenario = Scenario::S1;
  std::vector<CycleRecord> cycles;
  Eigen::VectorXd delivered;  // cumulative energy at instants 0..n_p
  EnergyEnvelope envelope;    // true per-day envelope of the admitted sessions
  std::vector<PortDecision> decisions;
  std::vector<SessionOutcome> sessions;
  std::vector<std::string> warnings;
};

struct Metrics {
  double total_cost = 0.0;
  double delta_e_min = 0.0;
  double requested_kwh = 0.0;
  double delivered_kwh = 0.0;
  double grid_kwh = 0.0;
  int fully_served = 0;
  int served_90pct = 0;
  int total_arrivals = 0;
  int rejected = 0;
  int infeasible_cycles = 0;
};

struct DayResult {
  DayTrace trace;
  Metrics metrics;
};

/// Simulates one day. `history` holds the sessions of earlier days; it feeds
/// the predictor under S2 (ConfigError when empty) and is unused otherwise.
DayResult run_day(Day day, std::span<const ChargingSession> sessions, const ScenarioConfig& config,
                  const SessionHistory& history);

/// S3 entry point: the day is planned once over the true envelope.
DayResult run_offline_s3(Day day, std::span<const ChargingSession> sessions, const ScenarioConfig& config);

/// Sum over instants of max(E^min_k - E^a_k, 0).
double compute_delta_emin(const Eigen::VectorXd& delivered, const EnergyEnvelope& envelope);
double compute_delta_emin(const DayTrace& trace, const EnergyEnvelope& envelope);

Metrics summarize(const DayTrace& trace, double total_cost);

struct CumulativePoint {
  Day day{};
  Metrics metrics;
  double cumulative_cost = 0.0;
  double cumulative_delta_e_min = 0.0;
};

struct ScenarioSeries {
  Scenario scenario = Scenario::S1;
  std::vector<CumulativePoint> points;
};

using DayCallback = std::function<void(const DayResult&)>;

/// Runs every configuration over consecutive days. The history starts from
/// `history` and absorbs each day's sessions after all scenarios ran it.
std::vector<ScenarioSeries> run_range(std::span<const DayGroup> days, std::span<const ScenarioConfig> configs,
                                      SessionHistory history, const DayCallback& on_day = {});

std::string trace_csv(const DayTrace& trace, const SlotClock& clock);
std::string policy_csv(const DayTrace& trace, const SlotClock& clock);
std::string decisions_csv(const DayTrace& trace);
std::string sessions_out_csv(const DayTrace& trace);
std::string metrics_json(const DayTrace& trace, const Metrics& metrics);
std::string cumulative_csv(std::span<const ScenarioSeries> series);

/// Writes trace.csv, policy.csv, decisions.csv, sessions_out.csv and
/// metrics.json into `dir`, each atomically.
void write_day_outputs(const std::filesystem::path& dir, const DayResult& result, const ScenarioConfig& config);

}  // namespace evcs

#endif  // EVCS_SIMULATOR_HPP
