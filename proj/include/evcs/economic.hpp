#ifndef EVCS_ECONOMIC_HPP
#define EVCS_ECONOMIC_HPP

#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "evcs/battery.hpp"
#include "evcs/predictor.hpp"
#include "evcs/sessions.hpp"

namespace evcs {

/// Day-ahead hourly tariff, piecewise constant over the slots of each hour.
class PricingSchedule {
 public:
  PricingSchedule() { hourly_.fill(0.0); }
  explicit PricingSchedule(const std::array<double, 24>& hourly);

  /// 24 values separated by commas and/or whitespace; '#' starts a comment.
  static PricingSchedule parse(std::string_view text);
  static PricingSchedule load(const std::filesystem::path& path);

  double hourly(int hour) const { return hourly_.at(static_cast<std::size_t>(hour)); }
  const std::array<double, 24>& hourly() const { return hourly_; }
  /// Price of cycle k (slot k+1), k = 0..n_p-1.
  Eigen::VectorXd per_cycle(const SlotClock& clock) const;
  PricingSchedule shifted(double offset) const;

 private:
  std::array<double, 24> hourly_;
};

/// Cumulative energy bounds at instants 0..n_p.
struct EnergyEnvelope {
  Eigen::VectorXd e_max;
  Eigen::VectorXd e_min;

  static EnergyEnvelope zero(int n_p);
  int slots() const { return static_cast<int>(e_max.size()) - 1; }
  EnergyEnvelope& operator+=(const EnergyEnvelope& other);
};

/// Energy one ON port moves per cycle at full rating.
double step_kwh(const BmsParams& params, const SlotClock& clock);

/// Rounds a request up to whole port-cycles.
double quantize_up(double kwh, double step_kwh);

/// Bounds for one EV present from instant k_a to k_d:
///   e_max_k = min(step (k - k_a), E), e_min_k = max(E - step (k_d - k), 0),
/// zero before arrival and E after departure, where E is the request clipped
/// to what the stay can deliver.
EnergyEnvelope demand_envelope(double request_kwh, int k_a, int k_d, double step_kwh, int n_p);

EnergyEnvelope per_ev_envelope(const ChargingSession& session, const BmsParams& params, const SlotClock& clock);

EnergyEnvelope aggregate_envelope(std::span<const EnergyEnvelope> per_ev);

/// True-departure envelope of a whole day. With `quantize`, requests are
/// rounded up to whole port-cycles (the grid the DP plans on).
EnergyEnvelope offline_envelope(std::span<const ChargingSession> sessions, const BmsParams& params,
                                const SlotClock& clock, bool quantize);

struct ActionRange {
  int lower = 0;
  int upper = -1;
  bool empty() const { return upper < lower; }
};

/// Admissible numbers of ON ports for the next cycle:
///   ceil(max(E^min_{k+1} - E_k, 0) / step) <= x <= floor(min(E^max_{k+1} - E_k, P^G_max T) / step).
ActionRange decision_space(double e_a_k, double e_min_next, double e_max_next, int max_ports, double step_kwh);
ActionRange decision_space(double e_a_k, double e_min_next, double e_max_next, double p_g_max_kw,
                           const BmsParams& params, const SlotClock& clock);

/// Optimal grid cap per cycle, as a count of ON ports.
struct LoadPolicy {
  int first_step = 0;
  std::vector<int> ports_on;   // cycles first_step..n_p-1
  Eigen::VectorXd planned_kwh; // instants first_step..n_p
  double total_cost = 0.0;     // energy cost plus any state cost
  double energy_cost = 0.0;
  bool infeasible = false;

  int ports_at(int k) const;
  double cap_kw(int k, double p_ch_max_kw) const { return ports_at(k) * p_ch_max_kw; }
  double planned_at(int k) const { return planned_kwh(k - first_step); }
};

/// Finite-horizon problem over the energy grid e_a_init + s * step.
struct DpProblem {
  int k0 = 0;
  double step_kwh = 1.0;
  double e_a_init = 0.0;
  Eigen::VectorXd e_max;        // instants 0..n_p
  Eigen::VectorXd e_min;        // instants 0..n_p, ignored unless enforce_min
  bool enforce_min = true;
  Eigen::VectorXd price;        // cycles 0..n_p-1
  Eigen::VectorXi cap;          // cycles 0..n_p-1, ports
  Eigen::VectorXd state_weight; // instants 0..n_p, w * b(k); empty for none

  int slots() const { return static_cast<int>(price.size()); }
};

/// Backward induction J_k(s) = min_a { a step price_k + g_{k+1}(s + a) + J_{k+1}(s + a) }
/// with J_{n_p} = 0 and g the S2 state cost. Ties go to the smaller action.
/// An empty decision space at the start switches to the largest admissible
/// action every cycle and flags the policy infeasible.
LoadPolicy solve_dp(const DpProblem& problem);

/// Real-time plan between both envelopes with P^G_max = ports * P^ch_max.
LoadPolicy dp_policy_s1(const EnergyEnvelope& envelope, const Eigen::VectorXd& price_per_cycle, double e_a_init,
                        int k0, double step_kwh, int ports);
/// Same with a per-cycle limit on ON ports.
LoadPolicy dp_policy_s1(const EnergyEnvelope& envelope, const Eigen::VectorXd& price_per_cycle, double e_a_init,
                        int k0, double step_kwh, const Eigen::VectorXi& cap);

struct DpCostModelS2 {
  double w = 0.0003;
  bool include_predicted_departures = true;
};

/// Predictive plan: upper envelope only, plus the state cost a * b(k) * w
/// with a the distance below e_max in grid steps.
LoadPolicy dp_policy_s2(const EnergyEnvelope& envelope, const Eigen::VectorXd& price_per_cycle,
                        const Eigen::VectorXd& expected_departed, const DpCostModelS2& cost, double e_a_init, int k0,
                        double step_kwh, int ports);
LoadPolicy dp_policy_s2(const EnergyEnvelope& envelope, const Eigen::VectorXd& price_per_cycle,
                        const Eigen::VectorXd& expected_departed, const DpCostModelS2& cost, double e_a_init, int k0,
                        double step_kwh, const Eigen::VectorXi& cap);

/// One EV plugged in at replanning time.
struct ConnectedEv {
  double request_kwh = 0.0;
  double delivered_kwh = 0.0;
  int arrival_step = 0;
  int arrival_slot = 1;
  int planning_departure_step = 0;   // user-stated (S1); unused by S2
  std::span<const double> departure_cdf; // S2: departure CDF of the arrival slot
};

struct StationSnapshot {
  int k = 0;                    // current instant
  double delivered_kwh = 0.0;   // everything delivered today, departed EVs included
  std::vector<ConnectedEv> connected;
};

struct PlannerSettings {
  double step_kwh = 1.0;
  int ports = 1;
  SlotClock clock;
};

/// Envelope for the remaining day built from the measured state: each plugged
/// EV contributes its remaining demand, rounded up to whole port-cycles and
/// clipped to what it can still take before its planning departure.
EnergyEnvelope online_envelope(const StationSnapshot& snap, const PlannerSettings& settings, bool use_departures);

/// Adds the expected load of predicted arrivals (weighted by expected count).
void add_predicted_load(EnergyEnvelope& envelope, const PredictionSet& prediction, const PlannerSettings& settings);

/// b(k): expected number of departures by instant k among the plugged EVs
/// (and the predicted ones when enabled).
Eigen::VectorXd expected_departed_counts(const StationSnapshot& snap, const PredictionSet* prediction,
                                         bool include_predicted, int n_p);
double expected_departed_count(int k, std::span<const ConnectedEv> actual, const PredictionSet* prediction,
                               bool include_predicted);

struct UserDepartureInputs {};
struct PredictiveInputs {
  const PredictionSet* prediction = nullptr;
  DpCostModelS2 cost;
};
using ReplanInputs = std::variant<UserDepartureInputs, PredictiveInputs>;

/// Ports worth switching on per cycle: plugged EVs with demand left (before
/// their planning departure when `use_departures`), plus the predicted EVs
/// expected to be present, never more than the station has.
Eigen::VectorXi usable_ports(const StationSnapshot& snap, const PredictionSet* prediction,
                             const PlannerSettings& settings, bool use_departures);

/// Recomputes the policy for instants k..n_p from the measured state.
LoadPolicy replan(const StationSnapshot& snap, const ReplanInputs& inputs, const Eigen::VectorXd& price_per_cycle,
                  const PlannerSettings& settings);

/// Single plan over the whole day with true departures known in advance.
LoadPolicy plan_offline(std::span<const ChargingSession> sessions, const Eigen::VectorXd& price_per_cycle,
                        const BmsParams& params, const PlannerSettings& settings);

/// Aggregate energy trajectory of a policy executed exactly as planned
/// (every ON port moves one full step), used to compare planners.
struct PlannedTrajectory {
  Eigen::VectorXd energy_kwh;  // instants 0..n_p
  std::vector<int> ports_on;   // cycles 0..n_p-1
  double cost = 0.0;
  bool infeasible = false;
};

/// Perfect knowledge: one plan over the true envelope.
PlannedTrajectory planned_offline(std::span<const ChargingSession> sessions, const Eigen::VectorXd& price_per_cycle,
                                  const PlannerSettings& settings);
/// Real-time: replans every cycle over the EVs arrived so far, using their
/// stated departures, and executes the first action.
PlannedTrajectory planned_realtime(std::span<const ChargingSession> sessions, const Eigen::VectorXd& price_per_cycle,
                                   const PlannerSettings& settings);
/// Uncontrolled: every EV charges from arrival until served.
PlannedTrajectory planned_uncontrolled(std::span<const ChargingSession> sessions,
                                       const Eigen::VectorXd& price_per_cycle, const PlannerSettings& settings);

}  // namespace evcs

#endif  // EVCS_ECONOMIC_HPP
