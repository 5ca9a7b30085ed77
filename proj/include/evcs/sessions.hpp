#ifndef EVCS_SESSIONS_HPP
#define EVCS_SESSIONS_HPP

#include <array>
#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evcs {

/// Wall-clock time at the station. Offsets in input timestamps are dropped,
/// the local time of day is what drives the slot arithmetic.
using Timestamp = std::chrono::sys_seconds;
using Day = std::chrono::sys_days;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fixed decision interval splitting the day into slots.
///
/// Two index spaces are used throughout the library:
///  - instants k = 0..n_p, the cycle boundaries (k-th boundary at k*T minutes);
///  - slots s = 1..n_p, where slot s is the interval [(s-1)T, sT).
/// Cycle k runs from instant k to instant k+1 and is slot k+1.
class SlotClock {
 public:
  SlotClock() = default;
  explicit SlotClock(int cycle_minutes);

  int cycle_minutes() const { return cycle_minutes_; }
  int slots_per_day() const { return 1440 / cycle_minutes_; }
  double cycle_hours() const { return cycle_minutes_ / 60.0; }

  /// Energy moved by one port running at `power_kw` for a full cycle.
  double step_kwh(double power_kw) const { return power_kw * cycle_hours(); }

 private:
  int cycle_minutes_ = 10;
};

enum class DayType { Weekday, Weekend };

std::string_view to_string(DayType t);
DayType day_type_of(Day d);

Day day_of(Timestamp t);
/// Seconds elapsed since local midnight of the timestamp's own day.
std::int64_t seconds_of_day(Timestamp t);
double minute_of_day(Timestamp t);

/// Slot containing `t`, in 1..n_p.
int slot_of(Timestamp t, const SlotClock& clock);
/// Slot containing minute-of-day `minute` (clamped into the day).
int slot_of_minute(double minute, const SlotClock& clock);
/// Instant index floor(minute / T), in 0..n_p-1 for times within the day.
int step_of(Timestamp t, const SlotClock& clock);

Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);
Day parse_date(std::string_view text);
std::string format_date(Day d);

struct ChargingSession {
  std::string id;
  Timestamp arrival;
  Timestamp departure;
  double requested_kwh = 0.0;
  std::optional<Timestamp> user_stated_departure;

  Day day() const { return day_of(arrival); }

  /// k_a: instant at which the EV is admitted.
  int arrival_step(const SlotClock& clock) const;
  /// k_d: instant at which the EV leaves, truncated to n_p for sessions
  /// running past midnight.
  int departure_step(const SlotClock& clock) const;
  /// Departure the user announced; the true departure when none was given.
  int stated_departure_step(const SlotClock& clock) const;
  bool spans_midnight() const;
};

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<ChargingSession> sessions;
  std::vector<ParseIssue> issues;
};

/// CSV with header `session_id,arrival,departure,requested_kwh[,user_stated_departure]`.
/// Malformed rows are skipped and reported; output is sorted by arrival.
ParseResult parse_sessions_csv(std::istream& in);
/// JSON array of objects (or an object with an `_items` array). ACN field
/// names (sessionID, connectionTime, disconnectTime, kWhDelivered,
/// userInputs[0].requestedDeparture / kWhRequested) are accepted too.
ParseResult parse_sessions_json(std::istream& in);
/// Dispatches on the file extension (.json, everything else CSV).
ParseResult load_sessions(const std::string& path);

void write_sessions_csv(std::ostream& out, std::span<const ChargingSession> sessions);

struct DayGroup {
  Day day;
  std::vector<ChargingSession> sessions;
};

/// Groups sessions by arrival date, in date order. Days without sessions
/// between the first and last date are included as empty groups.
std::vector<DayGroup> group_by_day(std::span<const ChargingSession> sessions);

struct DayCount {
  Day day;
  int arrivals = 0;
};

/// Rolling record of past sessions plus the per-day arrival counts of every
/// day that has been observed (including days with no arrivals).
class SessionHistory {
 public:
  explicit SessionHistory(std::size_t window_size = 500) : window_size_(window_size) {}

  void observe_day(Day day, std::span<const ChargingSession> sessions);
  void add(std::span<const ChargingSession> sessions);

  std::size_t window_size() const { return window_size_; }
  std::size_t size() const { return sessions_.size(); }
  bool empty() const { return sessions_.empty(); }

  /// The min(n_s, available) most recent sessions, oldest first.
  std::span<const ChargingSession> training_window() const;
  /// Observed days in date order.
  std::vector<DayCount> daily_counts() const;

 private:
  std::size_t window_size_;
  std::vector<ChargingSession> sessions_;
  std::map<Day, int> day_counts_;
};

/// Inputs of the synthetic workplace generator.
struct SyntheticProfile {
  std::array<double, 24> hourly_rate{};  // expected weekday arrivals per hour
  double weekend_scale = 0.3;
  double energy_mean_kwh = 9.0;
  double energy_sd_kwh = 4.0;
  double energy_min_kwh = 0.5;
  double energy_max_kwh = 40.0;
  double stay_mean_hours = 7.5;
  double stay_sd_hours = 2.0;
  double stay_min_hours = 0.5;
  double stated_bias_hours = 0.0;  // stated departure = true + bias + noise
  double stated_sd_hours = 0.5;
  Day first_day = Day{std::chrono::year{2021} / std::chrono::January / 3};
  int days = 1;

  static SyntheticProfile workplace();
  /// Overrides fields from `key = value` pairs (rate_00..rate_23, energy_mean,
  /// ...). Unknown keys raise ConfigError.
  void apply(const std::map<std::string, std::string>& kv);
  void validate() const;
};

std::vector<ChargingSession> generate_synthetic(std::uint64_t seed, const SyntheticProfile& profile);

}  // namespace evcs

#endif  // EVCS_SESSIONS_HPP
