#include "evcs/battery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "evcs/sessions.hpp"

namespace evcs {

void BmsParams::validate() const {
  if (!(p_ch_max_kw > 0.0)) throw ConfigError("p_ch_max must be positive");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
  const bool no_taper = delta1 == 1.0 && delta2 == 1.0;
  if (!no_taper && !(delta1 > 0.0 && delta1 < delta2 && delta2 <= 1.0)) {
    throw ConfigError("BMS thresholds need 0 < delta1 < delta2 <= 1");
  }
}

double bms_power(double fraction, const BmsParams& p) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::domain_error("fraction delivered outside [0, 1]");
  if (fraction <= p.delta1) return p.p_ch_max_kw;
  if (fraction <= p.delta2) return (1.0 - fraction) * p.p_ch_max_kw / (1.0 - p.delta1);
  return (1.0 - p.delta2) / (1.0 - p.delta1) * p.p_ch_max_kw;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Advance {
  double fraction;
  double hours_used;
};

// Closed-form motion of the normalized energy for at most `hours`.
Advance advance_fraction(double f, double hours, double requested_kwh, const BmsParams& p) {
  const double start_hours = hours;
  const double flat_rate = p.eta * p.p_ch_max_kw / requested_kwh;  // fraction per hour
  while (hours > 0.0 && f < 1.0) {
    if (f < p.delta1) {
      const double t = (p.delta1 - f) / flat_rate;
      if (hours >= t) {
        f = p.delta1;
        hours -= t;
      } else {
        f += flat_rate * hours;
        hours = 0.0;
      }
    } else if (f < p.delta2) {
      // (1 - f) decays exponentially while the power tapers linearly.
      const double lambda = flat_rate / (1.0 - p.delta1);
      const double t = p.delta2 >= 1.0 ? kInf : std::log((1.0 - f) / (1.0 - p.delta2)) / lambda;
      if (hours >= t) {
        f = p.delta2;
        hours -= t;
      } else {
        f = 1.0 - (1.0 - f) * std::exp(-lambda * hours);
        hours = 0.0;
      }
    } else {
      const double rate = flat_rate * (1.0 - p.delta2) / (1.0 - p.delta1);
      const double t = (1.0 - f) / rate;
      if (hours >= t) {
        f = 1.0;
        hours -= t;
      } else {
        f += rate * hours;
        hours = 0.0;
      }
    }
  }
  return {std::min(f, 1.0), start_hours - hours};
}

}  // namespace

EvChargeState step_charge(const EvChargeState& state, bool switched_on, double dt_minutes, const BmsParams& params) {
  if (!(dt_minutes > 0.0)) throw std::invalid_argument("step length must be positive");
  EvChargeState next = state;
  if (state.requested_kwh <= 0.0) {
    next.fraction_delivered = 1.0;
    return next;
  }
  if (!switched_on || state.finished()) return next;
  next.fraction_delivered = advance_fraction(state.fraction_delivered, dt_minutes / 60.0, state.requested_kwh, params).fraction;
  return next;
}

double grid_energy_kwh(const EvChargeState& before, const EvChargeState& after, const BmsParams& params) {
  return (after.delivered_kwh() - before.delivered_kwh()) / params.eta;
}

double charge_time_hours(double from, double to, double requested_kwh, const BmsParams& p) {
  if (to <= from || requested_kwh <= 0.0) return 0.0;
  const double flat_rate = p.eta * p.p_ch_max_kw / requested_kwh;
  double hours = 0.0;
  double f = from;
  if (f < p.delta1) {
    const double seg = std::min(to, p.delta1);
    hours += (seg - f) / flat_rate;
    f = seg;
  }
  if (f < to && f < p.delta2) {
    const double seg = std::min(to, p.delta2);
    const double lambda = flat_rate / (1.0 - p.delta1);
    if (seg >= 1.0) return kInf;
    hours += std::log((1.0 - f) / (1.0 - seg)) / lambda;
    f = seg;
  }
  if (f < to) {
    const double rate = flat_rate * (1.0 - p.delta2) / (1.0 - p.delta1);
    hours += (to - f) / rate;
  }
  return hours;
}

ChargeTrace simulate_full_charge(double requested_kwh, const BmsParams& params, double dt_minutes) {
  if (!(requested_kwh > 0.0)) throw std::invalid_argument("requested energy must be positive");
  if (!(dt_minutes > 0.0)) throw std::invalid_argument("step length must be positive");
  params.validate();
  ChargeTrace trace;
  if (!params.ideal() && params.delta2 < 1.0) {
    const double taper_minutes = 60.0 * charge_time_hours(params.delta1, params.delta2, requested_kwh, params);
    if (dt_minutes > taper_minutes) {
      trace.warnings.push_back("step of " + std::to_string(dt_minutes) + " min exceeds the " +
                               std::to_string(taper_minutes) + " min taper region; the trace will not resolve it");
    }
  }
  double f = 0.0;
  double minute = 0.0;
  trace.samples.push_back({0.0, bms_power(0.0, params), 0.0});
  // A taper ending at delta2 == 1 never completes; cap the trace at a day.
  while (f < 1.0 && minute < 1440.0) {
    const auto step = advance_fraction(f, dt_minutes / 60.0, requested_kwh, params);
    f = step.fraction;
    minute += step.hours_used * 60.0;
    trace.samples.push_back({minute, bms_power(f, params), f * requested_kwh});
  }
  return trace;
}

StationState::StationState(int port_count) {
  if (port_count <= 0) throw ConfigError("station needs at least one port");
  ports_.resize(static_cast<std::size_t>(port_count));
}

std::optional<int> StationState::lowest_free_port() const {
  for (std::size_t i = 0; i < ports_.size(); ++i) {
    if (!ports_[i]) return static_cast<int>(i);
  }
  return std::nullopt;
}

void StationState::plug(const EvChargeState& ev) {
  auto& slot = ports_.at(static_cast<std::size_t>(ev.port));
  if (slot) throw std::logic_error("port " + std::to_string(ev.port) + " is occupied");
  slot = ev;
}

EvChargeState StationState::unplug(int port) {
  auto& slot = ports_.at(static_cast<std::size_t>(port));
  if (!slot) throw std::logic_error("port " + std::to_string(port) + " is empty");
  EvChargeState ev = *slot;
  slot.reset();
  return ev;
}

int StationState::connected_count() const {
  return static_cast<int>(std::count_if(ports_.begin(), ports_.end(), [](const auto& p) { return p.has_value(); }));
}

int StationState::unfinished_count() const {
  return static_cast<int>(
      std::count_if(ports_.begin(), ports_.end(), [](const auto& p) { return p && !p->finished(); }));
}

double StationState::aggregate_delivered_kwh() const {
  double total = 0.0;
  for (const auto& p : ports_) {
    if (p) total += p->delivered_kwh();
  }
  return total;
}

double StationState::advance(const std::vector<bool>& on, double dt_minutes, const BmsParams& params) {
  double grid = 0.0;
  for (std::size_t i = 0; i < ports_.size(); ++i) {
    auto& p = ports_[i];
    if (!p) continue;
    const EvChargeState next = step_charge(*p, i < on.size() && on[i], dt_minutes, params);
    grid += grid_energy_kwh(*p, next, params);
    p = next;
  }
  return grid;
}

}  // namespace evcs
