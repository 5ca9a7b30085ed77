#ifndef EVCS_PREDICTOR_HPP
#define EVCS_PREDICTOR_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evcs/kde.hpp"
#include "evcs/sessions.hpp"

namespace evcs {

struct BandwidthRule {
  double time_floor_minutes = 5.0;
  double energy_floor_kwh = 0.25;
  std::optional<double> fixed_time_minutes;
  std::optional<double> fixed_energy_kwh;

  double time_bandwidth(std::span<const double> minutes) const;
  double energy_bandwidth(std::span<const double> kwh) const;
};

/// Arrival-time distribution over the day plus the expected number of
/// arrivals for one day type.
class ArrivalModel {
 public:
  ArrivalModel() = default;

  static ArrivalModel fit(std::span<const ChargingSession> sessions, const SlotClock& clock, DayType day_type,
                          double expected_daily_count, const BandwidthRule& rule);
  static ArrivalModel from_density(Kde1D density, const SlotClock& clock, DayType day_type,
                                   double expected_daily_count);
  /// From a tabulated CDF at instants 0..n_p (first 0, last 1, non-decreasing).
  static ArrivalModel from_cdf(const Eigen::VectorXd& cdf, const SlotClock& clock, DayType day_type,
                               double expected_daily_count);

  /// F at the end of slot s (s = 0 gives 0, s = n_p gives exactly 1).
  double cdf_at_slot(int s) const { return cdf_(s); }
  /// Probability mass of slot s in 1..n_p.
  double slot_mass(int s) const { return cdf_(s) - cdf_(s - 1); }

  const Eigen::VectorXd& cdf_table() const { return cdf_; }
  const std::optional<Kde1D>& density() const { return density_; }
  const SlotClock& clock() const { return clock_; }
  DayType day_type() const { return day_type_; }
  double expected_daily_count() const { return expected_count_; }

 private:
  std::optional<Kde1D> density_;
  Eigen::VectorXd cdf_;
  SlotClock clock_;
  DayType day_type_ = DayType::Weekday;
  double expected_count_ = 0.0;
};

/// Mean daily arrival count over the `window_days` most recent observed days
/// of the given type. Throws ConfigError when no such day exists.
double initial_daily_count(const SessionHistory& history, DayType day_type, int window_days = 5);

using GainFunction = std::function<double(double cdf, int k, int n_p)>;

/// sqrt((F_k + k/n_p) / 2)
double sqrt_gain(double cdf, int k, int n_p);

/// Intra-day correction of the expected daily arrival count:
///   N_{k+1} = (C_k - N_k F_k) * gain + N_k,
/// never below the arrivals already observed.
double adapt_count(double n_hat, int actual_so_far, double cdf_k, int k, int n_p, const GainFunction& gain = sqrt_gain);

double expected_arrivals_in_slot(double n_hat, const ArrivalModel& model, int s);

/// Departure and energy model of the sessions arriving in one slot.
struct SlotModel {
  int slot = 0;
  int members = 0;
  Kde1D departure;  // minute of day, reflected on [0, 1440]
  Kde1D energy;     // kWh
  double expected_energy_kwh = 0.0;
  double expected_departure_minute = 0.0;
  Eigen::VectorXd departure_cdf;  // P(departure <= instant k), k = 0..n_p
};

class SlotConditionalModel {
 public:
  SlotConditionalModel() = default;
  SlotConditionalModel(SlotClock clock, std::vector<SlotModel> populated);

  int slots_per_day() const { return clock_.slots_per_day(); }
  const SlotClock& clock() const { return clock_; }
  /// Model used for slot s in 1..n_p; empty slots resolve to the nearest
  /// populated slot, ties to the earlier one.
  const SlotModel& at(int s) const;
  int source_slot(int s) const { return at(s).slot; }
  bool is_fallback(int s) const { return at(s).slot != s; }
  std::span<const SlotModel> populated() const { return populated_; }

 private:
  SlotClock clock_;
  std::vector<SlotModel> populated_;
  std::vector<int> index_;  // slot - 1 -> position in populated_
};

SlotConditionalModel fit_slot_models(std::span<const ChargingSession> sessions, const SlotClock& clock,
                                     const BandwidthRule& rule);

struct SlotPrediction {
  int slot = 0;
  double expected_arrivals = 0.0;
  double expected_energy_kwh = 0.0;
  int expected_departure_step = 0;
  std::span<const double> departure_cdf;  // view into the slot model
};

/// Expected load still to come, for slots first_slot..n_p.
struct PredictionSet {
  int first_slot = 1;
  double expected_daily_count = 0.0;
  std::vector<SlotPrediction> slots;

  double total_expected_arrivals() const;
  double total_expected_energy_kwh() const;
};

/// The result holds views into `slot_models`, which must outlive it.
PredictionSet build_prediction_set(int first_slot, double n_hat, const ArrivalModel& model,
                                   const SlotConditionalModel& slot_models);

struct PredictorParams {
  std::size_t window_sessions = 500;
  int window_days = 5;
  BandwidthRule bandwidth;
  std::optional<double> default_daily_count;
};

struct PredictorModel {
  ArrivalModel arrivals;
  SlotConditionalModel slots;
  std::size_t training_sessions = 0;
  std::optional<Timestamp> window_first;
  std::optional<Timestamp> window_last;
};

/// Fits the arrival and slot models from the history's training window.
/// Throws ConfigError on an empty history.
PredictorModel fit_predictor(const SessionHistory& history, const SlotClock& clock, DayType day_type,
                             const PredictorParams& params);

std::string dump_model_json(const PredictorModel& model);
PredictorModel load_model_json(std::string_view text);

}  // namespace evcs

#endif  // EVCS_PREDICTOR_HPP
