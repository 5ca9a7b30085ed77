#include "evcs/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "evcs/economic.hpp"
#include "evcs/io.hpp"

namespace evcs {

namespace {

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

struct Inputs {
  std::vector<DayGroup> history;
  std::vector<DayGroup> run;
  PricingSchedule prices;
};

std::vector<ChargingSession> load_checked(const std::filesystem::path& path, std::ostream& err) {
  if (path.empty()) throw ConfigError("--sessions is required");
  if (!std::filesystem::exists(path)) throw std::runtime_error("sessions file '" + path.string() + "' not found");
  ParseResult parsed = load_sessions(path.string());
  for (const auto& issue : parsed.issues) {
    err << "warning: " << path.string() << ":" << issue.line << ": skipped (" << issue.message << ")\n";
  }
  if (parsed.sessions.empty()) throw std::runtime_error("no valid sessions in '" + path.string() + "'");
  return std::move(parsed.sessions);
}

Inputs load_inputs(const RunConfig& cfg, std::ostream& err) {
  if (cfg.prices.empty()) throw ConfigError("--prices is required");
  if (!std::filesystem::exists(cfg.prices)) throw std::runtime_error("price file '" + cfg.prices.string() + "' not found");
  Inputs in;
  in.prices = PricingSchedule::load(cfg.prices);
  const auto sessions = load_checked(cfg.sessions, err);
  auto groups = group_by_day(sessions);
  std::size_t first = 0, last = groups.size();
  if (cfg.date_range) {
    const auto [a, b] = *cfg.date_range;
    if (b < a) throw ConfigError("date range ends before it starts");
    while (first < groups.size() && groups[first].day < a) ++first;
    last = first;
    while (last < groups.size() && groups[last].day <= b) ++last;
    if (first == last) throw std::runtime_error("no session data inside the requested date range");
  } else {
    const int n = cfg.days.value_or(1);
    if (n <= 0) throw ConfigError("--days must be positive");
    first = groups.size() - std::min<std::size_t>(groups.size(), static_cast<std::size_t>(n));
  }
  in.history.assign(std::make_move_iterator(groups.begin()),
                    std::make_move_iterator(groups.begin() + static_cast<std::ptrdiff_t>(first)));
  in.run.assign(std::make_move_iterator(groups.begin() + static_cast<std::ptrdiff_t>(first)),
                std::make_move_iterator(groups.begin() + static_cast<std::ptrdiff_t>(last)));
  return in;
}

std::vector<ScenarioConfig> scenario_configs(const RunConfig& cfg, const PricingSchedule& prices) {
  std::vector<ScenarioConfig> out;
  for (Scenario s : cfg.scenarios) {
    ScenarioConfig c;
    c.scenario = s;
    c.w = cfg.w;
    c.b_includes_predicted = !cfg.b_actual_only;
    c.m1 = cfg.m1;
    c.m2 = cfg.m2;
    c.bms = cfg.bms;
    c.clock = SlotClock(cfg.cycle_minutes);
    c.ports = cfg.ports;
    c.prices = prices;
    c.predictor = cfg.predictor;
    c.validate();
    out.push_back(c);
  }
  return out;
}

SessionHistory seed_history(const RunConfig& cfg, std::span<const DayGroup> days) {
  SessionHistory h(cfg.predictor.window_sessions);
  for (const auto& g : days) h.observe_day(g.day, g.sessions);
  return h;
}

std::vector<ScenarioSeries> run_all(const RunConfig& cfg, std::ostream& err) {
  const Inputs in = load_inputs(cfg, err);
  const auto configs = scenario_configs(cfg, in.prices);
  std::size_t truncated = 0;
  for (const auto& g : in.run) {
    truncated += static_cast<std::size_t>(
        std::count_if(g.sessions.begin(), g.sessions.end(), [](const auto& s) { return s.spans_midnight(); }));
  }
  if (truncated > 0) {
    err << "warning: " << truncated << " session(s) run past midnight; their stay is cut at the end of the day\n";
  }
  std::size_t index = 0;
  const auto on_day = [&](const DayResult& r) {
    const auto& c = configs[index % configs.size()];
    ++index;
    if (!cfg.out.empty()) {
      write_day_outputs(cfg.out / std::string(to_string(c.scenario)) / format_date(r.trace.day), r, c);
    }
  };
  auto series = run_range(in.run, configs, seed_history(cfg, in.history), on_day);
  if (!cfg.out.empty()) write_file_atomic(cfg.out / "cumulative.csv", cumulative_csv(series));
  return series;
}

void print_summary(const std::vector<ScenarioSeries>& series, std::ostream& out) {
  out << std::left << std::setw(9) << "scenario" << std::right << std::setw(12) << "cost" << std::setw(14)
      << "dEmin" << std::setw(14) << "requested" << std::setw(14) << "delivered" << std::setw(8) << "full"
      << std::setw(8) << ">=90%" << std::setw(10) << "arrivals" << '\n';
  for (const auto& s : series) {
    Metrics total;
    for (const auto& p : s.points) {
      total.total_cost += p.metrics.total_cost;
      total.delta_e_min += p.metrics.delta_e_min;
      total.requested_kwh += p.metrics.requested_kwh;
      total.delivered_kwh += p.metrics.delivered_kwh;
      total.fully_served += p.metrics.fully_served;
      total.served_90pct += p.metrics.served_90pct;
      total.total_arrivals += p.metrics.total_arrivals;
    }
    out << std::left << std::setw(9) << to_string(s.scenario) << std::right << std::fixed << std::setprecision(4)
        << std::setw(12) << total.total_cost << std::setprecision(3) << std::setw(14) << total.delta_e_min
        << std::setw(14) << total.requested_kwh << std::setw(14) << total.delivered_kwh << std::setw(8)
        << total.fully_served << std::setw(8) << total.served_90pct << std::setw(10) << total.total_arrivals << '\n';
    out.unsetf(std::ios::fixed);
  }
}

std::string comparison_csv(const std::vector<ScenarioSeries>& series) {
  std::vector<std::string> labels;
  std::map<std::string, int> seen;
  for (const auto& s : series) {
    std::string label(to_string(s.scenario));
    if (const int n = ++seen[label]; n > 1) label += "_" + std::to_string(n);
    labels.push_back(label);
  }
  std::ostringstream out;
  out << "day";
  for (const auto& l : labels) out << ",cum_cost_" << l << ",cum_delta_e_min_" << l;
  for (std::size_t i = 1; i < labels.size(); ++i) {
    out << ",cost_diff_" << labels[i] << ",delta_e_min_diff_" << labels[i];
  }
  out << '\n';
  const std::size_t days = series.front().points.size();
  for (std::size_t d = 0; d < days; ++d) {
    const auto& base = series.front().points[d];
    out << format_date(base.day);
    for (const auto& s : series) {
      out << ',' << format_number(s.points[d].cumulative_cost) << ','
          << format_number(s.points[d].cumulative_delta_e_min);
    }
    for (std::size_t i = 1; i < series.size(); ++i) {
      const auto& p = series[i].points[d];
      out << ',' << format_number(p.cumulative_cost - base.cumulative_cost) << ','
          << format_number(p.cumulative_delta_e_min - base.cumulative_delta_e_min);
    }
    out << '\n';
  }
  return out.str();
}

void add_run_options(CLI::App* sub, RunConfig& cfg, std::vector<std::string>& scenario_names,
                     std::string& date_range) {
  sub->add_option("--sessions", cfg.sessions, "Session file (.csv or .json)");
  sub->add_option("--prices", cfg.prices, "24 hourly prices, comma separated");
  sub->add_option("--out", cfg.out, "Output directory");
  sub->add_option("--scenario", scenario_names, "S1, S2, S3 or S4 (repeatable)");
  auto* days = sub->add_option("--days", cfg.days, "Simulate the last N days; earlier days seed the history");
  sub->add_option("--date-range", date_range, "Simulate YYYY-MM-DD:YYYY-MM-DD (inclusive)")->excludes(days);
  sub->add_option("--ports", cfg.ports, "Number of charge ports")->capture_default_str();
  sub->add_option("--cycle-min", cfg.cycle_minutes, "Charge cycle length in minutes")->capture_default_str();
  sub->add_option("--w", cfg.w, "S2 state cost weight")->capture_default_str();
  sub->add_flag("--b-actual-only", cfg.b_actual_only, "S2 expected departures count plugged EVs only");
  sub->add_option("--m1", cfg.m1, "Priority exponent on waiting time")->capture_default_str();
  sub->add_option("--m2", cfg.m2, "Priority exponent on remaining energy")->capture_default_str();
  sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  sub->add_option("--p-max", cfg.bms.p_ch_max_kw, "Port rating in kW")->capture_default_str();
  sub->add_option("--delta1", cfg.bms.delta1, "Start of the BMS taper")->capture_default_str();
  sub->add_option("--delta2", cfg.bms.delta2, "End of the BMS taper")->capture_default_str();
  sub->add_option("--eta", cfg.bms.eta, "Charging efficiency")->capture_default_str();
  sub->add_option("--window-sessions", cfg.predictor.window_sessions, "Predictor training window (sessions)")
      ->capture_default_str();
  sub->add_option("--window-days", cfg.predictor.window_days, "Days averaged for the daily count")
      ->capture_default_str();
  sub->add_option("--default-count", cfg.predictor.default_daily_count,
                  "Daily arrival count used when the history has no day of the right type");
  sub->add_option("--bandwidth-minutes", cfg.predictor.bandwidth.fixed_time_minutes, "Fixed time KDE bandwidth");
  sub->add_option("--bandwidth-kwh", cfg.predictor.bandwidth.fixed_energy_kwh, "Fixed energy KDE bandwidth");
}

// Values from --config fill every option the command line left unset.
void apply_config_file(CLI::App* sub, const std::filesystem::path& path) {
  for (const auto& [key, value] : read_key_values(path)) {
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    if (opt->get_expected_max() > 1) {
      std::istringstream items(value);
      std::string item;
      while (std::getline(items, item, ',')) opt->add_result(item);
    } else {
      opt->add_result(value);
    }
    opt->run_callback();
  }
}

void finish_run_config(RunConfig& cfg, const std::vector<std::string>& scenario_names, const std::string& date_range) {
  cfg.scenarios.clear();
  for (const auto& s : scenario_names) cfg.scenarios.push_back(parse_scenario(s));
  if (!date_range.empty()) {
    const auto colon = date_range.find(':');
    if (colon == std::string::npos) throw ConfigError("--date-range expects FROM:TO");
    cfg.date_range = std::make_pair(parse_date(date_range.substr(0, colon)), parse_date(date_range.substr(colon + 1)));
  }
}

}  // namespace

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (config.scenarios.empty()) {
    err << "error: at least one --scenario is required\n";
    return kExitUsage;
  }
  const auto series = run_all(config, err);
  print_summary(series, out);
  return kExitOk;
}

int cmd_compare(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (config.scenarios.size() < 2) {
    err << "error: compare needs at least two --scenario values\n";
    return kExitUsage;
  }
  const auto series = run_all(config, err);
  const std::string table = comparison_csv(series);
  if (!config.out.empty()) write_file_atomic(config.out / "comparison.csv", table);
  print_summary(series, out);
  if (config.out.empty()) out << '\n' << table;
  return kExitOk;
}

int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto sessions = load_checked(config.sessions, err);
  SessionHistory history(config.predictor.window_sessions);
  for (const auto& g : group_by_day(sessions)) history.observe_day(g.day, g.sessions);
  const SlotClock clock(config.cycle_minutes);
  const Day next_day = group_by_day(sessions).back().day + std::chrono::days{1};
  const PredictorModel model = fit_predictor(history, clock, day_type_of(next_day), config.predictor);
  const std::string dump = dump_model_json(model);
  if (config.out.empty()) {
    out << dump;
  } else {
    write_file_atomic(config.out, dump);
  }
  std::ostream& note = config.out.empty() ? err : out;
  for (DayType t : {DayType::Weekday, DayType::Weekend}) {
    note << "initial daily arrivals (" << to_string(t) << "): ";
    try {
      note << format_number(initial_daily_count(history, t, config.predictor.window_days)) << '\n';
    } catch (const ConfigError&) {
      note << "n/a (no such day in the history)\n";
    }
  }
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Smart charging simulator: predictive DP power limits with priority scheduling"};
  app.require_subcommand(1);
  std::filesystem::path config_path;

  RunConfig run;
  std::vector<std::string> scenario_names;
  std::string date_range;
  auto* simulate = app.add_subcommand("simulate", "Simulate scenarios over one or more days");
  auto* compare = app.add_subcommand("compare", "Compare cumulative cost and deficit across scenarios");
  for (auto* sub : {simulate, compare}) {
    add_run_options(sub, run, scenario_names, date_range);
    sub->add_option("--config", config_path, "Flat key = value file; command-line flags win");
  }

  auto* fit = app.add_subcommand("fit", "Fit and dump the predictor models");
  fit->add_option("--sessions", run.sessions, "Session history file")->required();
  fit->add_option("--out", run.out, "Model JSON path (stdout when omitted)");
  fit->add_option("--cycle-min", run.cycle_minutes, "Charge cycle length in minutes")->capture_default_str();
  fit->add_option("--window-sessions", run.predictor.window_sessions, "Training window (sessions)")
      ->capture_default_str();
  fit->add_option("--window-days", run.predictor.window_days, "Days averaged for the daily count")
      ->capture_default_str();
  fit->add_option("--default-count", run.predictor.default_daily_count, "Fallback daily arrival count");

  SyntheticProfile profile = SyntheticProfile::workplace();
  std::uint64_t gen_seed = 1;
  std::filesystem::path gen_out, profile_path;
  std::string first_day;
  std::optional<double> stated_bias;
  auto* generate = app.add_subcommand("generate", "Write a synthetic session corpus");
  generate->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  generate->add_option("--days", profile.days, "Number of days")->capture_default_str();
  generate->add_option("--first-day", first_day, "First date (YYYY-MM-DD)");
  generate->add_option("--stated-bias", stated_bias, "Hours added to the true stay in stated departures");
  generate->add_option("--profile", profile_path, "key = value overrides of the arrival profile");
  generate->add_option("--out", gen_out, "CSV path (stdout when omitted)");

  double trace_energy = 7.0, trace_dt = 1.0;
  BmsParams trace_bms;
  std::filesystem::path trace_out;
  auto* bms = app.add_subcommand("bms-trace", "Uninterrupted charge curve of one EV");
  bms->add_option("--energy", trace_energy, "Requested energy in kWh")->capture_default_str();
  bms->add_option("--p-max", trace_bms.p_ch_max_kw, "Port rating in kW")->capture_default_str();
  bms->add_option("--delta1", trace_bms.delta1, "Start of the taper")->capture_default_str();
  bms->add_option("--delta2", trace_bms.delta2, "End of the taper")->capture_default_str();
  bms->add_option("--eta", trace_bms.eta, "Charging efficiency")->capture_default_str();
  bms->add_option("--dt", trace_dt, "Sample spacing in minutes")->capture_default_str();
  bms->add_option("--out", trace_out, "CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg, help;
    const int code = app.exit(e, help, msg);
    out << help.str();
    err << msg.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed() || compare->parsed()) {
      auto* sub = simulate->parsed() ? simulate : compare;
      if (!config_path.empty()) apply_config_file(sub, config_path);
      finish_run_config(run, scenario_names, date_range);
      return simulate->parsed() ? cmd_simulate(run, out, err) : cmd_compare(run, out, err);
    }
    if (fit->parsed()) return cmd_fit(run, out, err);
    if (generate->parsed()) {
      if (!profile_path.empty()) profile.apply(read_key_values(profile_path));
      if (!first_day.empty()) profile.first_day = parse_date(first_day);
      if (stated_bias) profile.stated_bias_hours = *stated_bias;
      const auto sessions = generate_synthetic(gen_seed, profile);
      std::ostringstream csv;
      write_sessions_csv(csv, sessions);
      if (gen_out.empty()) {
        out << csv.str();
      } else {
        write_file_atomic(gen_out, csv.str());
        out << "wrote " << sessions.size() << " sessions to " << gen_out.string() << '\n';
      }
      return kExitOk;
    }
    if (bms->parsed()) {
      trace_bms.validate();
      const ChargeTrace trace = simulate_full_charge(trace_energy, trace_bms, trace_dt);
      for (const auto& w : trace.warnings) err << "warning: " << w << '\n';
      std::ostringstream csv;
      csv << "minute,power_kw,energy_kwh\n";
      for (const auto& s : trace.samples) {
        csv << format_number(s.minute) << ',' << format_number(s.power_kw) << ',' << format_number(s.energy_kwh)
            << '\n';
      }
      if (trace_out.empty()) {
        out << csv.str();
      } else {
        write_file_atomic(trace_out, csv.str());
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace evcs
