#ifndef EVCS_BATTERY_HPP
#define EVCS_BATTERY_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evcs {

/// Charge-port rating and the simplified BMS taper of one EV.
struct BmsParams {
  double p_ch_max_kw = 7.36;
  double delta1 = 0.8;
  double delta2 = 0.95;
  double eta = 0.95;

  /// 0 < delta1 < delta2 <= 1, or delta1 == delta2 == 1 (no taper at all).
  void validate() const;
  bool ideal() const { return delta1 >= 1.0; }
};

/// Power accepted by the battery at normalized delivered energy `fraction`:
/// flat P^ch_max up to delta1, linear decay to delta2, then a constant floor.
double bms_power(double fraction, const BmsParams& params);

struct EvChargeState {
  double fraction_delivered = 0.0;
  double requested_kwh = 0.0;
  int port = -1;
  int arrival_step = 0;
  int departure_step = 0;
  int session = -1;  // index of the owning session in the caller's list

  double delivered_kwh() const { return fraction_delivered * requested_kwh; }
  double remaining_kwh() const { return (1.0 - fraction_delivered) * requested_kwh; }
  bool finished() const { return fraction_delivered >= 1.0; }
};

/// Advances one EV through `dt_minutes` of charging. The normalized energy
/// follows d(fraction)/dt = eta * P(fraction) / E*, integrated in closed form
/// per taper region, and stops exactly at 1.
EvChargeState step_charge(const EvChargeState& state, bool switched_on, double dt_minutes, const BmsParams& params);

/// Energy drawn from the grid to move `before` to `after` (delivered / eta).
double grid_energy_kwh(const EvChargeState& before, const EvChargeState& after, const BmsParams& params);

/// Hours needed to move the fraction from `from` to `to` while switched on.
double charge_time_hours(double from, double to, double requested_kwh, const BmsParams& params);

struct ChargeSample {
  double minute = 0.0;
  double power_kw = 0.0;   // battery-side power at this point of the curve
  double energy_kwh = 0.0; // cumulative delivered energy
};

struct ChargeTrace {
  std::vector<ChargeSample> samples;
  std::vector<std::string> warnings;
};

/// Uninterrupted charge from empty to the requested energy, sampled every
/// `dt_minutes` plus one final sample at the completion instant.
ChargeTrace simulate_full_charge(double requested_kwh, const BmsParams& params, double dt_minutes);

/// EVs plugged into the station's ports (at most one per port).
class StationState {
 public:
  explicit StationState(int port_count);

  int port_count() const { return static_cast<int>(ports_.size()); }
  std::span<const std::optional<EvChargeState>> ports() const { return ports_; }
  const std::optional<EvChargeState>& port(int i) const { return ports_.at(static_cast<std::size_t>(i)); }

  std::optional<int> lowest_free_port() const;
  void plug(const EvChargeState& ev);
  EvChargeState unplug(int port);

  int connected_count() const;
  int unfinished_count() const;
  /// Energy held by the EVs currently plugged in.
  double aggregate_delivered_kwh() const;

  /// Charges every port flagged ON for one interval; returns grid-side kWh.
  double advance(const std::vector<bool>& on, double dt_minutes, const BmsParams& params);

 private:
  std::vector<std::optional<EvChargeState>> ports_;
};

}  // namespace evcs

#endif  // EVCS_BATTERY_HPP
