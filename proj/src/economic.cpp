#include "evcs/economic.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "evcs/io.hpp"

namespace evcs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Slack for grid rounding, in units of one step.
constexpr double kGridEps = 1e-9;

int floor_steps(double kwh, double step) { return static_cast<int>(std::floor(kwh / step + kGridEps)); }
int ceil_steps(double kwh, double step) { return static_cast<int>(std::ceil(kwh / step - kGridEps)); }

}  // namespace

PricingSchedule::PricingSchedule(const std::array<double, 24>& hourly) : hourly_(hourly) {
  for (double p : hourly_) {
    if (!std::isfinite(p) || p < 0.0) throw ConfigError("prices must be finite and non-negative");
  }
}

PricingSchedule PricingSchedule::parse(std::string_view text) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char c = text[pos];
    if (c == '#') {
      const auto nl = text.find('\n', pos);
      pos = nl == std::string_view::npos ? text.size() : nl;
      continue;
    }
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
      continue;
    }
    std::size_t end = pos;
    while (end < text.size() && text[end] != ',' && text[end] != '#' &&
           !std::isspace(static_cast<unsigned char>(text[end]))) {
      ++end;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + end, v);
    if (ec != std::errc{} || ptr != text.data() + end) {
      throw ParseError("invalid price '" + std::string(text.substr(pos, end - pos)) + "'");
    }
    values.push_back(v);
    pos = end;
  }
  if (values.size() != 24) {
    throw ParseError("price file must hold 24 hourly values, found " + std::to_string(values.size()));
  }
  std::array<double, 24> hourly{};
  std::copy(values.begin(), values.end(), hourly.begin());
  try {
    return PricingSchedule(hourly);
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
}

PricingSchedule PricingSchedule::load(const std::filesystem::path& path) { return parse(read_file(path)); }

Eigen::VectorXd PricingSchedule::per_cycle(const SlotClock& clock) const {
  const int np = clock.slots_per_day();
  Eigen::VectorXd out(np);
  for (int k = 0; k < np; ++k) out(k) = hourly_[static_cast<std::size_t>(k * clock.cycle_minutes() / 60)];
  return out;
}

PricingSchedule PricingSchedule::shifted(double offset) const {
  std::array<double, 24> h = hourly_;
  for (double& p : h) p += offset;
  return PricingSchedule(h);
}

EnergyEnvelope EnergyEnvelope::zero(int n_p) {
  return {Eigen::VectorXd::Zero(n_p + 1), Eigen::VectorXd::Zero(n_p + 1)};
}

EnergyEnvelope& EnergyEnvelope::operator+=(const EnergyEnvelope& other) {
  if (other.e_max.size() != e_max.size()) throw std::invalid_argument("envelopes span different horizons");
  e_max += other.e_max;
  e_min += other.e_min;
  return *this;
}

double step_kwh(const BmsParams& params, const SlotClock& clock) { return clock.step_kwh(params.p_ch_max_kw); }

double quantize_up(double kwh, double step_kwh) {
  if (kwh <= 0.0) return 0.0;
  return ceil_steps(kwh, step_kwh) * step_kwh;
}

EnergyEnvelope demand_envelope(double request_kwh, int k_a, int k_d, double step_kwh, int n_p) {
  if (k_a < 0 || k_d < k_a || k_d > n_p) {
    throw std::invalid_argument("stay window [" + std::to_string(k_a) + ", " + std::to_string(k_d) +
                                "] outside the day or departing before arrival");
  }
  const double e = std::min(std::max(request_kwh, 0.0), step_kwh * (k_d - k_a));
  const Eigen::ArrayXd k = Eigen::ArrayXd::LinSpaced(n_p + 1, 0.0, n_p);
  EnergyEnvelope env;
  env.e_max = (step_kwh * (k - k_a)).max(0.0).min(e).matrix();
  env.e_min = (e - step_kwh * (k_d - k)).max(0.0).min(e).matrix();
  return env;
}

EnergyEnvelope per_ev_envelope(const ChargingSession& session, const BmsParams& params, const SlotClock& clock) {
  return demand_envelope(session.requested_kwh, session.arrival_step(clock), session.departure_step(clock),
                         step_kwh(params, clock), clock.slots_per_day());
}

EnergyEnvelope aggregate_envelope(std::span<const EnergyEnvelope> per_ev) {
  if (per_ev.empty()) return EnergyEnvelope::zero(0);
  EnergyEnvelope total = EnergyEnvelope::zero(per_ev.front().slots());
  for (const auto& e : per_ev) total += e;
  return total;
}

EnergyEnvelope offline_envelope(std::span<const ChargingSession> sessions, const BmsParams& params,
                                const SlotClock& clock, bool quantize) {
  const double step = step_kwh(params, clock);
  const int np = clock.slots_per_day();
  EnergyEnvelope total = EnergyEnvelope::zero(np);
  for (const auto& s : sessions) {
    const double e = quantize ? quantize_up(s.requested_kwh, step) : s.requested_kwh;
    total += demand_envelope(e, s.arrival_step(clock), s.departure_step(clock), step, np);
  }
  return total;
}

ActionRange decision_space(double e_a_k, double e_min_next, double e_max_next, int max_ports, double step_kwh) {
  ActionRange r;
  r.lower = std::max(ceil_steps(e_min_next - e_a_k, step_kwh), 0);
  r.upper = std::min(floor_steps(e_max_next - e_a_k, step_kwh), max_ports);
  return r;
}

ActionRange decision_space(double e_a_k, double e_min_next, double e_max_next, double p_g_max_kw,
                           const BmsParams& params, const SlotClock& clock) {
  const double step = step_kwh(params, clock);
  const int ports = floor_steps(clock.step_kwh(p_g_max_kw), step);
  return decision_space(e_a_k, e_min_next, e_max_next, ports, step);
}

int LoadPolicy::ports_at(int k) const {
  const int i = k - first_step;
  if (i < 0 || i >= static_cast<int>(ports_on.size())) return 0;
  return ports_on[static_cast<std::size_t>(i)];
}

LoadPolicy solve_dp(const DpProblem& p) {
  const int H = p.slots();
  if (p.e_max.size() != H + 1 || p.cap.size() != H || (p.enforce_min && p.e_min.size() != H + 1) ||
      (p.state_weight.size() != 0 && p.state_weight.size() != H + 1)) {
    throw std::invalid_argument("DP inputs have inconsistent horizons");
  }
  if (p.k0 < 0 || p.k0 > H) throw std::invalid_argument("DP start outside the horizon");
  if (!(p.step_kwh > 0.0)) throw std::invalid_argument("DP step must be positive");
  const double step = p.step_kwh;
  const int k0 = p.k0;

  // Admissible state indices per instant: lo[j] <= s <= hi[j].
  std::vector<int> lo(static_cast<std::size_t>(H + 1), 0), hi(static_cast<std::size_t>(H + 1), 0);
  int reach = 0;
  for (int j = k0; j <= H; ++j) {
    if (j > k0) reach += std::max(p.cap(j - 1), 0);
    const auto ju = static_cast<std::size_t>(j);
    const int above = floor_steps(p.e_max(j) - p.e_a_init, step);
    hi[ju] = std::min(p.enforce_min ? above : std::max(above, 0), reach);
    lo[ju] = p.enforce_min ? std::max(ceil_steps(p.e_min(j) - p.e_a_init, step), 0) : 0;
    if (j == k0) lo[ju] = hi[ju] = 0;
  }
  const auto state_cost = [&](int j, int s) {
    if (p.state_weight.size() == 0) return 0.0;
    return p.state_weight(j) * std::max(p.e_max(j) - (p.e_a_init + s * step), 0.0) / step;
  };

  // J[j][s] and the argmin action, for s in 0..max(hi[j], -1).
  std::vector<std::vector<double>> J(static_cast<std::size_t>(H + 1));
  std::vector<std::vector<int>> act(static_cast<std::size_t>(H + 1));
  const auto width = [&](int j) { return static_cast<std::size_t>(std::max(hi[static_cast<std::size_t>(j)] + 1, 0)); };
  J[static_cast<std::size_t>(H)].assign(width(H), kInf);
  for (int s = lo[static_cast<std::size_t>(H)]; s <= hi[static_cast<std::size_t>(H)]; ++s) {
    J[static_cast<std::size_t>(H)][static_cast<std::size_t>(s)] = 0.0;
  }
  std::vector<double> next_value;
  std::deque<int> window;
  for (int j = H - 1; j >= k0; --j) {
    const auto ju = static_cast<std::size_t>(j);
    const int lo1 = lo[ju + 1], hi1 = hi[ju + 1];
    const double c = step * p.price(j);
    const int cap = std::max(p.cap(j), 0);
    // Value of landing on s' shifted by s' c, so that the action cost a c
    // becomes s' c - s c and the inner minimum is a sliding window.
    next_value.assign(static_cast<std::size_t>(std::max(hi1 + 1, 0)), kInf);
    for (int s1 = lo1; s1 <= hi1; ++s1) {
      const double v = J[ju + 1][static_cast<std::size_t>(s1)];
      if (v < kInf) next_value[static_cast<std::size_t>(s1)] = v + state_cost(j + 1, s1) + s1 * c;
    }
    J[ju].assign(width(j), kInf);
    act[ju].assign(width(j), 0);
    window.clear();
    int pushed = lo1;  // next s' to enter the window
    for (int s = std::max(lo[ju], 0); s <= hi[ju]; ++s) {
      const int from = std::max(s, lo1);
      const int to = std::min(s + cap, hi1);
      for (; pushed <= to; ++pushed) {
        const double v = next_value[static_cast<std::size_t>(pushed)];
        // Strict comparison keeps the earliest minimum, i.e. the smaller action.
        while (!window.empty() && next_value[static_cast<std::size_t>(window.back())] > v) window.pop_back();
        window.push_back(pushed);
      }
      while (!window.empty() && window.front() < from) window.pop_front();
      if (window.empty() || from > to) continue;
      const int best = window.front();
      const double v = next_value[static_cast<std::size_t>(best)];
      if (v < kInf) {
        J[ju][static_cast<std::size_t>(s)] = v - s * c;
        act[ju][static_cast<std::size_t>(s)] = best - s;
      }
    }
  }

  LoadPolicy pol;
  pol.first_step = k0;
  pol.ports_on.reserve(static_cast<std::size_t>(H - k0));
  pol.planned_kwh.resize(H - k0 + 1);
  pol.infeasible = J[static_cast<std::size_t>(k0)].empty() || !(J[static_cast<std::size_t>(k0)][0] < kInf);
  int s = 0;
  pol.planned_kwh(0) = p.e_a_init;
  for (int j = k0; j < H; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    int a = 0;
    if (!pol.infeasible) {
      a = act[ju][static_cast<std::size_t>(s)];
    } else {
      const int above = floor_steps(p.e_max(j + 1) - p.e_a_init, step);
      a = std::max(std::min(above - s, std::max(p.cap(j), 0)), 0);
    }
    s += a;
    pol.ports_on.push_back(a);
    pol.energy_cost += a * step * p.price(j);
    pol.total_cost += a * step * p.price(j) + state_cost(j + 1, s);
    pol.planned_kwh(j - k0 + 1) = p.e_a_init + s * step;
  }
  if (!pol.infeasible) pol.total_cost = J[static_cast<std::size_t>(k0)][0];
  return pol;
}

LoadPolicy dp_policy_s1(const EnergyEnvelope& envelope, const Eigen::VectorXd& price_per_cycle, double e_a_init,
                        int k0, double step_kwh, const Eigen::VectorXi& cap) {
  DpProblem p;
  p.k0 = k0;
  p.step_kwh = step_kwh;
  p.e_a_init = e_a_init;
  p.e_max = envelope.e_max;
  p.e_min = envelope.e_min;
  p.price = price_per_cycle;
  p.cap = cap;
  return solve_dp(p);
}

LoadPolicy dp_policy_s1(const EnergyEnvelope& envelope, const Eigen::VectorXd& price_per_cycle, double e_a_init,
                        int k0, double step_kwh, int ports) {
  return dp_policy_s1(envelope, price_per_cycle, e_a_init, k0, step_kwh,
                      Eigen::VectorXi::Constant(price_per_cycle.size(), ports));
}

LoadPolicy dp_policy_s2(const EnergyEnvelope& envelope, const Eigen::VectorXd& price_per_cycle,
                        const Eigen::VectorXd& expected_departed, const DpCostModelS2& cost, double e_a_init, int k0,
                        double step_kwh, const Eigen::VectorXi& cap) {
  if (cost.w < 0.0) throw ConfigError("state cost weight w must be non-negative");
  DpProblem p;
  p.k0 = k0;
  p.step_kwh = step_kwh;
  p.e_a_init = e_a_init;
  p.e_max = envelope.e_max;
  p.enforce_min = false;
  p.price = price_per_cycle;
  p.cap = cap;
  if (cost.w > 0.0) p.state_weight = cost.w * expected_departed;
  return solve_dp(p);
}

LoadPolicy dp_policy_s2(const EnergyEnvelope& envelope, const Eigen::VectorXd& price_per_cycle,
                        const Eigen::VectorXd& expected_departed, const DpCostModelS2& cost, double e_a_init, int k0,
                        double step_kwh, int ports) {
  return dp_policy_s2(envelope, price_per_cycle, expected_departed, cost, e_a_init, k0, step_kwh,
                      Eigen::VectorXi::Constant(price_per_cycle.size(), ports));
}

EnergyEnvelope online_envelope(const StationSnapshot& snap, const PlannerSettings& settings, bool use_departures) {
  const int np = settings.clock.slots_per_day();
  const int k = std::clamp(snap.k, 0, np);
  const double step = settings.step_kwh;
  EnergyEnvelope env;
  env.e_max = Eigen::VectorXd::Constant(np + 1, snap.delivered_kwh);
  env.e_min = env.e_max;
  if (k == np) return env;
  for (const auto& ev : snap.connected) {
    int k_d = np;
    if (use_departures) {
      // An EV past its stated departure is expected to leave within the cycle.
      k_d = std::clamp(ev.planning_departure_step, k + 1, np);
    }
    const double remaining = quantize_up(std::max(ev.request_kwh - ev.delivered_kwh, 0.0), step);
    env += demand_envelope(remaining, k, k_d, step, np);
  }
  return env;
}

void add_predicted_load(EnergyEnvelope& envelope, const PredictionSet& prediction, const PlannerSettings& settings) {
  const int np = settings.clock.slots_per_day();
  for (const auto& sp : prediction.slots) {
    if (sp.expected_arrivals <= 0.0) continue;
    const int k_a = sp.slot - 1;
    const int k_d = std::clamp(sp.expected_departure_step, k_a, np);
    const auto ev = demand_envelope(quantize_up(sp.expected_energy_kwh, settings.step_kwh), k_a, k_d,
                                    settings.step_kwh, np);
    envelope.e_max += sp.expected_arrivals * ev.e_max;
    envelope.e_min += sp.expected_arrivals * ev.e_min;
  }
}

double expected_departed_count(int k, std::span<const ConnectedEv> actual, const PredictionSet* prediction,
                               bool include_predicted) {
  double b = 0.0;
  for (const auto& ev : actual) {
    if (ev.departure_cdf.empty()) {
      b += k >= ev.planning_departure_step ? 1.0 : 0.0;
    } else {
      const auto i = static_cast<std::size_t>(std::clamp<int>(k, 0, static_cast<int>(ev.departure_cdf.size()) - 1));
      b += ev.departure_cdf[i];
    }
  }
  if (prediction && include_predicted) {
    for (const auto& sp : prediction->slots) {
      if (sp.departure_cdf.empty()) continue;
      const auto i = static_cast<std::size_t>(std::clamp<int>(k, 0, static_cast<int>(sp.departure_cdf.size()) - 1));
      b += sp.expected_arrivals * sp.departure_cdf[i];
    }
  }
  return b;
}

Eigen::VectorXd expected_departed_counts(const StationSnapshot& snap, const PredictionSet* prediction,
                                         bool include_predicted, int n_p) {
  Eigen::VectorXd b(n_p + 1);
  for (int k = 0; k <= n_p; ++k) b(k) = expected_departed_count(k, snap.connected, prediction, include_predicted);
  return b;
}

Eigen::VectorXi usable_ports(const StationSnapshot& snap, const PredictionSet* prediction,
                             const PlannerSettings& settings, bool use_departures) {
  const int np = settings.clock.slots_per_day();
  Eigen::VectorXd present = Eigen::VectorXd::Zero(np);
  const int k = std::clamp(snap.k, 0, np);
  for (const auto& ev : snap.connected) {
    if (quantize_up(ev.request_kwh - ev.delivered_kwh, settings.step_kwh) <= 0.0) continue;
    const int until = use_departures ? std::clamp(ev.planning_departure_step, k + 1, np) : np;
    present.segment(k, until - k).array() += 1.0;
  }
  if (prediction) {
    for (const auto& sp : prediction->slots) {
      const int k_a = std::max(sp.slot - 1, k);
      const int k_d = std::clamp(sp.expected_departure_step, k_a, np);
      if (sp.expected_arrivals > 0.0 && sp.expected_energy_kwh > 0.0) {
        present.segment(k_a, k_d - k_a).array() += sp.expected_arrivals;
      }
    }
  }
  Eigen::VectorXi cap(np);
  for (int j = 0; j < np; ++j) cap(j) = std::min(settings.ports, ceil_steps(present(j), 1.0));
  return cap;
}

LoadPolicy replan(const StationSnapshot& snap, const ReplanInputs& inputs, const Eigen::VectorXd& price_per_cycle,
                  const PlannerSettings& settings) {
  const int np = settings.clock.slots_per_day();
  if (const auto* pred = std::get_if<PredictiveInputs>(&inputs)) {
    EnergyEnvelope env = online_envelope(snap, settings, false);
    if (pred->prediction) add_predicted_load(env, *pred->prediction, settings);
    const Eigen::VectorXd b =
        expected_departed_counts(snap, pred->prediction, pred->cost.include_predicted_departures, np);
    return dp_policy_s2(env, price_per_cycle, b, pred->cost, snap.delivered_kwh, snap.k, settings.step_kwh,
                        usable_ports(snap, pred->prediction, settings, false));
  }
  const EnergyEnvelope env = online_envelope(snap, settings, true);
  return dp_policy_s1(env, price_per_cycle, snap.delivered_kwh, snap.k, settings.step_kwh,
                      usable_ports(snap, nullptr, settings, true));
}

namespace {

// Ports that can usefully be ON in each cycle: EVs present with demand left.
Eigen::VectorXi presence_caps(std::span<const ChargingSession> sessions, const SlotClock& clock, int ports,
                              bool stated) {
  const int np = clock.slots_per_day();
  Eigen::VectorXi count = Eigen::VectorXi::Zero(np);
  for (const auto& s : sessions) {
    if (s.requested_kwh <= 0.0) continue;
    const int k_d = stated ? s.stated_departure_step(clock) : s.departure_step(clock);
    for (int k = s.arrival_step(clock); k < k_d; ++k) ++count(k);
  }
  return count.cwiseMin(ports);
}

EnergyEnvelope quantized_envelope(std::span<const ChargingSession> sessions, const PlannerSettings& settings,
                                  bool stated) {
  const SlotClock& clock = settings.clock;
  const int np = clock.slots_per_day();
  EnergyEnvelope env = EnergyEnvelope::zero(np);
  for (const auto& s : sessions) {
    const int k_d = stated ? s.stated_departure_step(clock) : s.departure_step(clock);
    env += demand_envelope(quantize_up(s.requested_kwh, settings.step_kwh), s.arrival_step(clock), k_d,
                           settings.step_kwh, np);
  }
  return env;
}

PlannedTrajectory to_trajectory(const LoadPolicy& pol) {
  PlannedTrajectory t;
  t.energy_kwh = pol.planned_kwh;
  t.ports_on = pol.ports_on;
  t.cost = pol.energy_cost;
  t.infeasible = pol.infeasible;
  return t;
}

}  // namespace

namespace {

LoadPolicy solve_offline(std::span<const ChargingSession> sessions, const Eigen::VectorXd& price_per_cycle,
                         const PlannerSettings& settings) {
  DpProblem p;
  p.step_kwh = settings.step_kwh;
  const EnergyEnvelope env = quantized_envelope(sessions, settings, false);
  p.e_max = env.e_max;
  p.e_min = env.e_min;
  p.price = price_per_cycle;
  p.cap = presence_caps(sessions, settings.clock, settings.ports, false);
  return solve_dp(p);
}

}  // namespace

LoadPolicy plan_offline(std::span<const ChargingSession> sessions, const Eigen::VectorXd& price_per_cycle,
                        const BmsParams& params, const PlannerSettings& settings) {
  PlannerSettings s = settings;
  s.step_kwh = step_kwh(params, settings.clock);
  return solve_offline(sessions, price_per_cycle, s);
}

PlannedTrajectory planned_offline(std::span<const ChargingSession> sessions, const Eigen::VectorXd& price_per_cycle,
                                  const PlannerSettings& settings) {
  return to_trajectory(solve_offline(sessions, price_per_cycle, settings));
}

PlannedTrajectory planned_realtime(std::span<const ChargingSession> sessions, const Eigen::VectorXd& price_per_cycle,
                                   const PlannerSettings& settings) {
  const SlotClock& clock = settings.clock;
  const int np = clock.slots_per_day();
  PlannedTrajectory t;
  t.energy_kwh = Eigen::VectorXd::Zero(np + 1);
  t.ports_on.assign(static_cast<std::size_t>(np), 0);
  std::vector<ChargingSession> known;
  std::size_t next = 0;
  int s = 0;
  for (int k = 0; k < np; ++k) {
    while (next < sessions.size() && sessions[next].arrival_step(clock) <= k) known.push_back(sessions[next++]);
    DpProblem p;
    p.k0 = k;
    p.step_kwh = settings.step_kwh;
    p.e_a_init = s * settings.step_kwh;
    const EnergyEnvelope env = quantized_envelope(known, settings, true);
    p.e_max = env.e_max;
    p.e_min = env.e_min;
    p.price = price_per_cycle;
    p.cap = presence_caps(known, clock, settings.ports, true);
    const LoadPolicy pol = solve_dp(p);
    t.infeasible = t.infeasible || pol.infeasible;
    const int a = pol.ports_at(k);
    t.ports_on[static_cast<std::size_t>(k)] = a;
    t.cost += a * settings.step_kwh * price_per_cycle(k);
    s += a;
    t.energy_kwh(k + 1) = s * settings.step_kwh;
  }
  return t;
}

PlannedTrajectory planned_uncontrolled(std::span<const ChargingSession> sessions,
                                       const Eigen::VectorXd& price_per_cycle, const PlannerSettings& settings) {
  const int np = settings.clock.slots_per_day();
  const EnergyEnvelope env = quantized_envelope(sessions, settings, false);
  PlannedTrajectory t;
  t.energy_kwh = env.e_max;
  t.ports_on.resize(static_cast<std::size_t>(np));
  for (int k = 0; k < np; ++k) {
    const int a = static_cast<int>(std::lround((env.e_max(k + 1) - env.e_max(k)) / settings.step_kwh));
    t.ports_on[static_cast<std::size_t>(k)] = a;
    t.cost += a * settings.step_kwh * price_per_cycle(k);
  }
  return t;
}

}  // namespace evcs
