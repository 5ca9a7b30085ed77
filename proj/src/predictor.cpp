#include "evcs/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace evcs {

double BandwidthRule::time_bandwidth(std::span<const double> minutes) const {
  if (fixed_time_minutes) return *fixed_time_minutes;
  return silverman_bandwidth(minutes, time_floor_minutes);
}

double BandwidthRule::energy_bandwidth(std::span<const double> kwh) const {
  if (fixed_energy_kwh) return *fixed_energy_kwh;
  return silverman_bandwidth(kwh, energy_floor_kwh);
}

namespace {

constexpr double kDayMinutes = 1440.0;

double departure_minute(const ChargingSession& s) {
  const auto secs = (s.departure - Timestamp{s.day()}).count();
  return std::min(static_cast<double>(secs) / 60.0, kDayMinutes);
}

Eigen::VectorXd tabulate_cdf(const Kde1D& kde, const SlotClock& clock) {
  const int np = clock.slots_per_day();
  Eigen::VectorXd cdf(np + 1);
  for (int k = 0; k <= np; ++k) cdf(k) = kde.cdf(k * static_cast<double>(clock.cycle_minutes()));
  cdf(0) = 0.0;
  cdf(np) = 1.0;
  return cdf;
}

}  // namespace

ArrivalModel ArrivalModel::fit(std::span<const ChargingSession> sessions, const SlotClock& clock, DayType day_type,
                               double expected_daily_count, const BandwidthRule& rule) {
  if (sessions.empty()) throw std::invalid_argument("arrival model needs at least one session");
  std::vector<double> minutes;
  minutes.reserve(sessions.size());
  for (const auto& s : sessions) minutes.push_back(minute_of_day(s.arrival));
  return from_density(Kde1D::fit_reflected(minutes, rule.time_bandwidth(minutes), 0.0, kDayMinutes), clock, day_type,
                      expected_daily_count);
}

ArrivalModel ArrivalModel::from_density(Kde1D density, const SlotClock& clock, DayType day_type,
                                        double expected_daily_count) {
  ArrivalModel m;
  m.cdf_ = tabulate_cdf(density, clock);
  m.density_ = std::move(density);
  m.clock_ = clock;
  m.day_type_ = day_type;
  m.expected_count_ = expected_daily_count;
  return m;
}

ArrivalModel ArrivalModel::from_cdf(const Eigen::VectorXd& cdf, const SlotClock& clock, DayType day_type,
                                    double expected_daily_count) {
  const int np = clock.slots_per_day();
  if (cdf.size() != np + 1) throw std::invalid_argument("arrival CDF needs n_p + 1 entries");
  if (cdf(0) != 0.0 || cdf(np) != 1.0) throw std::invalid_argument("arrival CDF must run from 0 to 1");
  for (int k = 1; k <= np; ++k) {
    if (cdf(k) < cdf(k - 1)) throw std::invalid_argument("arrival CDF must be non-decreasing");
  }
  ArrivalModel m;
  m.cdf_ = cdf;
  m.clock_ = clock;
  m.day_type_ = day_type;
  m.expected_count_ = expected_daily_count;
  return m;
}

double initial_daily_count(const SessionHistory& history, DayType day_type, int window_days) {
  std::vector<int> counts;
  for (const auto& dc : history.daily_counts()) {
    if (day_type_of(dc.day) == day_type) counts.push_back(dc.arrivals);
  }
  if (counts.empty()) {
    throw ConfigError("history has no " + std::string(to_string(day_type)) +
                      " days; configure a default daily arrival count");
  }
  const std::size_t n = std::min<std::size_t>(counts.size(), static_cast<std::size_t>(std::max(window_days, 1)));
  const double sum = std::accumulate(counts.end() - static_cast<std::ptrdiff_t>(n), counts.end(), 0.0);
  return sum / static_cast<double>(n);
}

double sqrt_gain(double cdf, int k, int n_p) {
  return std::sqrt((cdf + static_cast<double>(k) / static_cast<double>(n_p)) / 2.0);
}

double adapt_count(double n_hat, int actual_so_far, double cdf_k, int k, int n_p, const GainFunction& gain) {
  const double g = gain(cdf_k, k, n_p);
  const double c = static_cast<double>(actual_so_far);
  // (C - N F) g + N rearranged so that g = F = 1 yields C exactly.
  const double next = c * g + n_hat * (1.0 - cdf_k * g);
  return std::max(next, c);
}

double expected_arrivals_in_slot(double n_hat, const ArrivalModel& model, int s) { return n_hat * model.slot_mass(s); }

SlotConditionalModel::SlotConditionalModel(SlotClock clock, std::vector<SlotModel> populated)
    : clock_(clock), populated_(std::move(populated)) {
  const int np = clock_.slots_per_day();
  std::sort(populated_.begin(), populated_.end(), [](const auto& a, const auto& b) { return a.slot < b.slot; });
  index_.assign(static_cast<std::size_t>(np), -1);
  if (populated_.empty()) return;
  for (int s = 1; s <= np; ++s) {
    int best = 0;
    int best_dist = std::abs(populated_[0].slot - s);
    for (int i = 1; i < static_cast<int>(populated_.size()); ++i) {
      const int d = std::abs(populated_[static_cast<std::size_t>(i)].slot - s);
      if (d < best_dist) {  // strict: ties keep the earlier slot
        best = i;
        best_dist = d;
      }
    }
    index_[static_cast<std::size_t>(s - 1)] = best;
  }
}

const SlotModel& SlotConditionalModel::at(int s) const {
  if (populated_.empty()) throw std::logic_error("slot model has no populated slots");
  if (s < 1 || s > slots_per_day()) throw std::out_of_range("slot " + std::to_string(s) + " outside the day");
  return populated_[static_cast<std::size_t>(index_[static_cast<std::size_t>(s - 1)])];
}

namespace {

SlotModel make_slot_model(int slot, std::span<const double> departures, std::span<const double> energies,
                          double departure_h, double energy_h, const SlotClock& clock) {
  SlotModel m;
  m.slot = slot;
  m.members = static_cast<int>(departures.size());
  m.departure = Kde1D::fit_reflected(departures, departure_h, 0.0, kDayMinutes);
  m.energy = Kde1D::fit(energies, energy_h);
  m.expected_energy_kwh = m.energy.mean();
  m.expected_departure_minute = m.departure.mean();
  m.departure_cdf = tabulate_cdf(m.departure, clock);
  return m;
}

}  // namespace

SlotConditionalModel fit_slot_models(std::span<const ChargingSession> sessions, const SlotClock& clock,
                                     const BandwidthRule& rule) {
  if (sessions.empty()) throw std::invalid_argument("slot models need at least one session");
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> members;
  for (const auto& s : sessions) {
    auto& [dep, energy] = members[slot_of(s.arrival, clock)];
    dep.push_back(departure_minute(s));
    energy.push_back(s.requested_kwh);
  }
  std::vector<SlotModel> populated;
  for (const auto& [slot, m] : members) {
    populated.push_back(make_slot_model(slot, m.first, m.second, rule.time_bandwidth(m.first),
                                        rule.energy_bandwidth(m.second), clock));
  }
  return SlotConditionalModel(clock, std::move(populated));
}

double PredictionSet::total_expected_arrivals() const {
  double t = 0.0;
  for (const auto& p : slots) t += p.expected_arrivals;
  return t;
}

double PredictionSet::total_expected_energy_kwh() const {
  double t = 0.0;
  for (const auto& p : slots) t += p.expected_arrivals * p.expected_energy_kwh;
  return t;
}

PredictionSet build_prediction_set(int first_slot, double n_hat, const ArrivalModel& model,
                                   const SlotConditionalModel& slot_models) {
  const SlotClock& clock = slot_models.clock();
  const int np = clock.slots_per_day();
  PredictionSet set;
  set.first_slot = first_slot;
  set.expected_daily_count = n_hat;
  for (int s = std::max(first_slot, 1); s <= np; ++s) {
    const SlotModel& m = slot_models.at(s);
    SlotPrediction p;
    p.slot = s;
    p.expected_arrivals = expected_arrivals_in_slot(n_hat, model, s);
    p.expected_energy_kwh = m.expected_energy_kwh;
    const int dep = static_cast<int>(std::floor(m.expected_departure_minute / clock.cycle_minutes()));
    p.expected_departure_step = std::clamp(dep, s - 1, np);
    p.departure_cdf = std::span<const double>(m.departure_cdf.data(), static_cast<std::size_t>(m.departure_cdf.size()));
    set.slots.push_back(p);
  }
  return set;
}

PredictorModel fit_predictor(const SessionHistory& history, const SlotClock& clock, DayType day_type,
                             const PredictorParams& params) {
  if (history.empty()) throw ConfigError("predictor needs at least one past session");
  const auto all = history.training_window();
  const std::size_t n = std::min(all.size(), params.window_sessions);
  const auto train = all.last(n);
  double count = 0.0;
  try {
    count = initial_daily_count(history, day_type, params.window_days);
  } catch (const ConfigError&) {
    if (!params.default_daily_count) throw;
    count = *params.default_daily_count;
  }
  PredictorModel m;
  m.arrivals = ArrivalModel::fit(train, clock, day_type, count, params.bandwidth);
  m.slots = fit_slot_models(train, clock, params.bandwidth);
  m.training_sessions = train.size();
  m.window_first = train.front().arrival;
  m.window_last = train.back().arrival;
  return m;
}

std::string dump_model_json(const PredictorModel& model) {
  using nlohmann::json;
  const auto& clock = model.slots.clock();
  json doc;
  doc["cycle_minutes"] = clock.cycle_minutes();
  doc["day_type"] = std::string(to_string(model.arrivals.day_type()));
  doc["expected_daily_count"] = model.arrivals.expected_daily_count();
  doc["training_sessions"] = model.training_sessions;
  if (model.window_first) doc["window_first"] = format_timestamp(*model.window_first);
  if (model.window_last) doc["window_last"] = format_timestamp(*model.window_last);
  if (const auto& d = model.arrivals.density()) {
    doc["arrival"] = {{"bandwidth", d->bandwidth()}, {"samples", d->samples()}};
  }
  doc["arrival_cdf"] = std::vector<double>(model.arrivals.cdf_table().data(),
                                           model.arrivals.cdf_table().data() + model.arrivals.cdf_table().size());
  json slots = json::array();
  for (int s = 1; s <= clock.slots_per_day(); ++s) {
    const SlotModel& m = model.slots.at(s);
    json entry{{"slot", s}, {"source_slot", m.slot}, {"fallback", m.slot != s},
               {"expected_energy_kwh", m.expected_energy_kwh},
               {"expected_departure_minute", m.expected_departure_minute}};
    if (m.slot == s) {
      entry["members"] = m.members;
      entry["departure"] = {{"bandwidth", m.departure.bandwidth()}, {"samples", m.departure.samples()}};
      entry["energy"] = {{"bandwidth", m.energy.bandwidth()}, {"samples", m.energy.samples()}};
    }
    slots.push_back(std::move(entry));
  }
  doc["slots"] = std::move(slots);
  return doc.dump(2) + "\n";
}

PredictorModel load_model_json(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
    const SlotClock clock(doc.at("cycle_minutes").get<int>());
    const DayType type = doc.at("day_type").get<std::string>() == "weekend" ? DayType::Weekend : DayType::Weekday;
    const double count = doc.at("expected_daily_count").get<double>();
    PredictorModel m;
    if (doc.contains("arrival")) {
      const auto samples = doc["arrival"].at("samples").get<std::vector<double>>();
      const auto kde = Kde1D::fit_reflected(samples, doc["arrival"].at("bandwidth").get<double>(), 0.0, kDayMinutes);
      m.arrivals = ArrivalModel::from_density(kde, clock, type, count);
    } else {
      const auto cdf = doc.at("arrival_cdf").get<std::vector<double>>();
      m.arrivals = ArrivalModel::from_cdf(Eigen::Map<const Eigen::VectorXd>(cdf.data(), static_cast<Eigen::Index>(cdf.size())),
                                          clock, type, count);
    }
    std::vector<SlotModel> populated;
    for (const auto& entry : doc.at("slots")) {
      if (entry.at("fallback").get<bool>()) continue;
      const auto dep = entry.at("departure").at("samples").get<std::vector<double>>();
      const auto energy = entry.at("energy").at("samples").get<std::vector<double>>();
      populated.push_back(make_slot_model(entry.at("slot").get<int>(), dep, energy,
                                          entry["departure"].at("bandwidth").get<double>(),
                                          entry["energy"].at("bandwidth").get<double>(), clock));
    }
    m.slots = SlotConditionalModel(clock, std::move(populated));
    m.training_sessions = doc.value("training_sessions", std::size_t{0});
    if (doc.contains("window_first")) m.window_first = parse_timestamp(doc["window_first"].get<std::string>());
    if (doc.contains("window_last")) m.window_last = parse_timestamp(doc["window_last"].get<std::string>());
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace evcs
