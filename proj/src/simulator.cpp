#include "evcs/simulator.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "evcs/io.hpp"
#include "evcs/scheduler.hpp"

namespace evcs {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::S1: return "S1";
    case Scenario::S2: return "S2";
    case Scenario::S3: return "S3";
    case Scenario::S4: return "S4";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "S1" || text == "s1") return Scenario::S1;
  if (text == "S2" || text == "s2") return Scenario::S2;
  if (text == "S3" || text == "s3") return Scenario::S3;
  if (text == "S4" || text == "s4") return Scenario::S4;
  throw ConfigError("unknown scenario '" + std::string(text) + "' (expected S1, S2, S3 or S4)");
}

void ScenarioConfig::validate() const {
  bms.validate();
  if (ports <= 0) throw ConfigError("port count must be positive");
  if (w < 0.0) throw ConfigError("state cost weight w must be non-negative");
  if (m1 < 0 || m2 < 0) throw ConfigError("priority exponents must be non-negative");
}

PlannerSettings ScenarioConfig::planner() const { return {step_kwh(bms, clock), ports, clock}; }

namespace {

// Port per session in arrival order, -1 when the station is full or the stay
// rounds down to no whole cycle. Independent of the charging policy.
std::vector<int> assign_ports(std::span<const ChargingSession> sessions, const SlotClock& clock, int ports) {
  std::vector<int> port_of(sessions.size(), -1);
  std::vector<int> busy_until(static_cast<std::size_t>(ports), -1);  // departure step, -1 when free
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const int k_a = sessions[i].arrival_step(clock);
    const int k_d = sessions[i].departure_step(clock);
    if (k_d <= k_a) continue;
    for (int p = 0; p < ports; ++p) {
      auto& until = busy_until[static_cast<std::size_t>(p)];
      if (until <= k_a) {
        until = k_d;
        port_of[i] = p;
        break;
      }
    }
  }
  return port_of;
}

bool fully_served(const SessionOutcome& s) { return s.delivered_kwh >= s.requested_kwh * (1.0 - 1e-9); }
bool served_90(const SessionOutcome& s) { return s.delivered_kwh >= 0.9 * s.requested_kwh * (1.0 - 1e-9); }

DayResult simulate(Day day, std::span<const ChargingSession> input, const ScenarioConfig& cfg,
                   const SessionHistory* history) {
  cfg.validate();
  const SlotClock& clock = cfg.clock;
  const int np = clock.slots_per_day();
  const double dt = clock.cycle_minutes();
  for (const auto& s : input) {
    if (s.day() != day) throw std::invalid_argument("session " + s.id + " does not arrive on " + format_date(day));
  }
  std::vector<ChargingSession> sessions(input.begin(), input.end());
  std::stable_sort(sessions.begin(), sessions.end(),
                   [](const auto& a, const auto& b) { return a.arrival < b.arrival; });

  DayResult result;
  DayTrace& trace = result.trace;
  trace.day = day;
  trace.scenario = cfg.scenario;
  const std::vector<int> port_of = assign_ports(sessions, clock, cfg.ports);
  std::vector<ChargingSession> admitted;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& s = sessions[i];
    SessionOutcome o{s.id, s.arrival, s.departure, s.requested_kwh, 0.0, port_of[i], false, s.spans_midnight()};
    o.rejected = port_of[i] < 0 && s.departure_step(clock) > s.arrival_step(clock);
    if (o.rejected) trace.warnings.push_back("session " + s.id + " rejected: all ports occupied");
    if (o.truncated) trace.warnings.push_back("session " + s.id + " runs past midnight; cut at end of day");
    if (port_of[i] >= 0) admitted.push_back(s);
    trace.sessions.push_back(std::move(o));
  }
  trace.envelope = offline_envelope(admitted, cfg.bms, clock, false);

  const Eigen::VectorXd prices = cfg.prices.per_cycle(clock);
  const PlannerSettings planner = cfg.planner();

  std::optional<PredictorModel> model;
  double n_hat = 0.0;
  if (cfg.scenario == Scenario::S2) {
    if (!history || history->empty()) throw ConfigError("S2 needs a session history to fit the predictor");
    model = fit_predictor(*history, clock, day_type_of(day), cfg.predictor);
    n_hat = model->arrivals.expected_daily_count();
  }
  LoadPolicy offline;
  if (cfg.scenario == Scenario::S3) offline = plan_offline(admitted, prices, cfg.bms, planner);

  StationState station(cfg.ports);
  PriorityLedger ledger(cfg.ports, cfg.m1, cfg.m2);
  trace.delivered = Eigen::VectorXd::Zero(np + 1);
  double cumulative = 0.0;
  double cost = 0.0;
  std::size_t next = 0;
  int arrivals_seen = 0;

  const auto release = [&](int port) {
    const EvChargeState ev = station.unplug(port);
    trace.sessions[static_cast<std::size_t>(ev.session)].delivered_kwh = ev.delivered_kwh();
  };

  for (int k = 0; k < np; ++k) {
    for (int p = 0; p < cfg.ports; ++p) {
      if (station.port(p) && station.port(p)->departure_step <= k) release(p);
    }
    while (next < sessions.size() && sessions[next].arrival_step(clock) <= k) {
      const auto i = next++;
      ++arrivals_seen;
      if (port_of[i] < 0) continue;
      const auto& s = sessions[i];
      EvChargeState ev;
      ev.requested_kwh = s.requested_kwh;
      ev.fraction_delivered = s.requested_kwh > 0.0 ? 0.0 : 1.0;
      ev.port = port_of[i];
      ev.arrival_step = s.arrival_step(clock);
      ev.departure_step = s.departure_step(clock);
      ev.session = static_cast<int>(i);
      station.plug(ev);
    }

    CycleRecord rec;
    rec.k = k;
    rec.price = prices(k);
    rec.connected = station.connected_count();
    int cap = 0;
    switch (cfg.scenario) {
      case Scenario::S1:
      case Scenario::S2: {
        StationSnapshot snap;
        snap.k = k;
        snap.delivered_kwh = cumulative;
        for (const auto& slot : station.ports()) {
          if (!slot) continue;
          ConnectedEv ev;
          ev.request_kwh = slot->requested_kwh;
          ev.delivered_kwh = slot->delivered_kwh();
          ev.arrival_step = slot->arrival_step;
          ev.arrival_slot = slot->arrival_step + 1;
          ev.planning_departure_step = sessions[static_cast<std::size_t>(slot->session)].stated_departure_step(clock);
          if (model) {
            const auto& cdf = model->slots.at(ev.arrival_slot).departure_cdf;
            ev.departure_cdf = std::span<const double>(cdf.data(), static_cast<std::size_t>(cdf.size()));
          }
          snap.connected.push_back(ev);
        }
        LoadPolicy pol;
        if (model) {
          n_hat = adapt_count(n_hat, arrivals_seen, model->arrivals.cdf_at_slot(k + 1), k + 1, np);
          const PredictionSet prediction = build_prediction_set(k + 2, n_hat, model->arrivals, model->slots);
          pol = replan(snap, PredictiveInputs{&prediction, {cfg.w, cfg.b_includes_predicted}}, prices, planner);
          rec.n_hat = n_hat;
        } else {
          pol = replan(snap, UserDepartureInputs{}, prices, planner);
        }
        cap = pol.ports_at(k);
        rec.planned_kwh = pol.planned_at(k + 1);
        rec.infeasible = pol.infeasible;
        break;
      }
      case Scenario::S3:
        cap = offline.ports_at(k);
        rec.planned_kwh = offline.planned_at(k + 1);
        rec.infeasible = offline.infeasible;
        break;
      case Scenario::S4:
        break;
    }

    ledger.accumulate(station, k);
    const ScheduleDecision decision =
        cfg.scenario == Scenario::S4 ? fcfs_select(station) : select(ledger, cap);
    if (cfg.scenario == Scenario::S4) {
      cap = decision.on_count();
      rec.planned_kwh = trace.envelope.e_max(k + 1);
    }
    for (int p = 0; p < cfg.ports; ++p) {
      const auto& slot = station.port(p);
      if (!slot) continue;
      trace.decisions.push_back({k, p, static_cast<bool>(decision.on[static_cast<std::size_t>(p)]),
                                 ledger.priority(p), slot->remaining_kwh(), slot->session});
    }

    const double before = station.aggregate_delivered_kwh();
    const double grid = station.advance(decision.on, dt, cfg.bms);
    cumulative += station.aggregate_delivered_kwh() - before;
    cost += grid * prices(k);

    rec.cap_ports = cap;
    rec.cap_kw = cap * cfg.bms.p_ch_max_kw;
    rec.grid_kwh = grid;
    rec.delivered_kwh = cumulative;
    rec.e_min = trace.envelope.e_min(k + 1);
    rec.e_max = trace.envelope.e_max(k + 1);
    rec.on = decision.on_count();
    trace.delivered(k + 1) = cumulative;
    trace.cycles.push_back(rec);
  }
  for (int p = 0; p < cfg.ports; ++p) {
    if (station.port(p)) release(p);
  }
  result.metrics = summarize(trace, cost);
  return result;
}

}  // namespace

DayResult run_day(Day day, std::span<const ChargingSession> sessions, const ScenarioConfig& config,
                  const SessionHistory& history) {
  return simulate(day, sessions, config, &history);
}

DayResult run_offline_s3(Day day, std::span<const ChargingSession> sessions, const ScenarioConfig& config) {
  ScenarioConfig cfg = config;
  cfg.scenario = Scenario::S3;
  return simulate(day, sessions, cfg, nullptr);
}

double compute_delta_emin(const Eigen::VectorXd& delivered, const EnergyEnvelope& envelope) {
  if (delivered.size() != envelope.e_min.size()) throw std::invalid_argument("trace and envelope horizons differ");
  return (envelope.e_min - delivered).cwiseMax(0.0).sum();
}

double compute_delta_emin(const DayTrace& trace, const EnergyEnvelope& envelope) {
  return compute_delta_emin(trace.delivered, envelope);
}

Metrics summarize(const DayTrace& trace, double total_cost) {
  Metrics m;
  m.total_cost = total_cost;
  m.delta_e_min = trace.delivered.size() == 0 ? 0.0 : compute_delta_emin(trace, trace.envelope);
  for (const auto& s : trace.sessions) {
    m.requested_kwh += s.requested_kwh;
    m.delivered_kwh += s.delivered_kwh;
    m.fully_served += fully_served(s) ? 1 : 0;
    m.served_90pct += served_90(s) ? 1 : 0;
    m.rejected += s.rejected ? 1 : 0;
  }
  m.total_arrivals = static_cast<int>(trace.sessions.size());
  for (const auto& c : trace.cycles) {
    m.grid_kwh += c.grid_kwh;
    m.infeasible_cycles += c.infeasible ? 1 : 0;
  }
  return m;
}

std::vector<ScenarioSeries> run_range(std::span<const DayGroup> days, std::span<const ScenarioConfig> configs,
                                      SessionHistory history, const DayCallback& on_day) {
  std::vector<ScenarioSeries> series;
  for (const auto& c : configs) series.push_back({c.scenario, {}});
  for (const auto& group : days) {
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const DayResult r = run_day(group.day, group.sessions, configs[i], history);
      if (on_day) on_day(r);
      auto& pts = series[i].points;
      CumulativePoint pt{group.day, r.metrics, r.metrics.total_cost, r.metrics.delta_e_min};
      if (!pts.empty()) {
        pt.cumulative_cost += pts.back().cumulative_cost;
        pt.cumulative_delta_e_min += pts.back().cumulative_delta_e_min;
      }
      pts.push_back(pt);
    }
    history.observe_day(group.day, group.sessions);
  }
  return series;
}

namespace {

std::string clock_time(int k, const SlotClock& clock) {
  const int minute = k * clock.cycle_minutes();
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minute / 60, minute % 60);
  return buf;
}

}  // namespace

std::string trace_csv(const DayTrace& trace, const SlotClock& clock) {
  std::ostringstream out;
  out << "slot,start,price,cap_ports,cap_kw,grid_kwh,grid_kw,delivered_kwh,planned_kwh,e_min_kwh,e_max_kwh,"
         "connected,on,infeasible,n_hat\n";
  for (const auto& c : trace.cycles) {
    out << c.k + 1 << ',' << clock_time(c.k, clock) << ',' << format_number(c.price) << ',' << c.cap_ports << ','
        << format_number(c.cap_kw) << ',' << format_number(c.grid_kwh) << ','
        << format_number(c.grid_kwh / clock.cycle_hours()) << ',' << format_number(c.delivered_kwh) << ','
        << format_number(c.planned_kwh) << ',' << format_number(c.e_min) << ',' << format_number(c.e_max) << ','
        << c.connected << ',' << c.on << ',' << (c.infeasible ? 1 : 0) << ',' << format_number(c.n_hat) << '\n';
  }
  return out.str();
}

std::string policy_csv(const DayTrace& trace, const SlotClock& clock) {
  std::ostringstream out;
  out << "slot,start,cap_kw,planned_kwh,price\n";
  for (const auto& c : trace.cycles) {
    out << c.k + 1 << ',' << clock_time(c.k, clock) << ',' << format_number(c.cap_kw) << ','
        << format_number(c.planned_kwh) << ',' << format_number(c.price) << '\n';
  }
  return out.str();
}

std::string decisions_csv(const DayTrace& trace) {
  std::ostringstream out;
  out << "slot,port,session_id,on,priority,remaining_kwh\n";
  for (const auto& d : trace.decisions) {
    out << d.k + 1 << ',' << d.port + 1 << ',' << trace.sessions[static_cast<std::size_t>(d.session)].id << ','
        << (d.on ? 1 : 0) << ',' << format_number(d.priority) << ',' << format_number(d.remaining_kwh) << '\n';
  }
  return out.str();
}

std::string sessions_out_csv(const DayTrace& trace) {
  std::ostringstream out;
  out << "session_id,arrival,departure,port,requested_kwh,delivered_kwh,fraction,rejected,truncated\n";
  for (const auto& s : trace.sessions) {
    const double frac = s.requested_kwh > 0.0 ? s.delivered_kwh / s.requested_kwh : 1.0;
    out << s.id << ',' << format_timestamp(s.arrival) << ',' << format_timestamp(s.departure) << ','
        << (s.port >= 0 ? std::to_string(s.port + 1) : std::string()) << ',' << format_number(s.requested_kwh) << ','
        << format_number(s.delivered_kwh) << ',' << format_number(frac) << ',' << (s.rejected ? 1 : 0) << ','
        << (s.truncated ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string metrics_json(const DayTrace& trace, const Metrics& m) {
  nlohmann::ordered_json j;
  j["day"] = format_date(trace.day);
  j["scenario"] = std::string(to_string(trace.scenario));
  j["total_cost"] = m.total_cost;
  j["delta_e_min"] = m.delta_e_min;
  j["requested_kwh"] = m.requested_kwh;
  j["delivered_kwh"] = m.delivered_kwh;
  j["grid_kwh"] = m.grid_kwh;
  j["fully_served"] = m.fully_served;
  j["served_90pct"] = m.served_90pct;
  j["total_arrivals"] = m.total_arrivals;
  j["rejected"] = m.rejected;
  j["infeasible_cycles"] = m.infeasible_cycles;
  j["warnings"] = trace.warnings;
  return j.dump(2) + "\n";
}

std::string cumulative_csv(std::span<const ScenarioSeries> series) {
  std::ostringstream out;
  out << "day,scenario,cost,delta_e_min,cumulative_cost,cumulative_delta_e_min,requested_kwh,delivered_kwh,"
         "fully_served,served_90pct,total_arrivals\n";
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      out << format_date(p.day) << ',' << to_string(s.scenario) << ',' << format_number(p.metrics.total_cost) << ','
          << format_number(p.metrics.delta_e_min) << ',' << format_number(p.cumulative_cost) << ','
          << format_number(p.cumulative_delta_e_min) << ',' << format_number(p.metrics.requested_kwh) << ','
          << format_number(p.metrics.delivered_kwh) << ',' << p.metrics.fully_served << ','
          << p.metrics.served_90pct << ',' << p.metrics.total_arrivals << '\n';
    }
  }
  return out.str();
}

void write_day_outputs(const std::filesystem::path& dir, const DayResult& result, const ScenarioConfig& config) {
  write_file_atomic(dir / "trace.csv", trace_csv(result.trace, config.clock));
  write_file_atomic(dir / "policy.csv", policy_csv(result.trace, config.clock));
  write_file_atomic(dir / "decisions.csv", decisions_csv(result.trace));
  write_file_atomic(dir / "sessions_out.csv", sessions_out_csv(result.trace));
  write_file_atomic(dir / "metrics.json", metrics_json(result.trace, result.metrics));
}

}  // namespace evcs
